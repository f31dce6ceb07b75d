//! Seeded priority-first growth of epsilon-bounded configuration mappings.
//!
//! A restart assigns a seed pose one of its valid configurations and grows
//! over graph edges. A frontier pose is accepted with the candidate closest
//! to the configuration that reached it, provided that candidate lies within
//! epsilon of every neighbor already assigned in the same restart. Rounds
//! after the first only keep poses unassigned in earlier rounds; frontier
//! keys of previously mapped poses carry the revisit penalty.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::PlannerParams;

/// A discrete pose graph with precomputed valid configurations per pose.
pub trait MappingProblem: Sync {
    type Config: Clone + Send + Sync;

    fn pose_count(&self) -> usize;
    fn neighbors(&self, pose: usize) -> &[usize];
    /// Valid (in-limit, collision-free) configurations, in a fixed order.
    fn candidates(&self, pose: usize) -> &[Self::Config];
    fn distance(&self, a: &Self::Config, b: &Self::Config) -> f64;
}

/// One connected epsilon-bounded mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace<C> {
    pub assignment: BTreeMap<usize, C>,
    pub total_path_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Runs all subspace rounds; regions come out in round order and are
/// pairwise disjoint.
pub fn plan_subspaces<P: MappingProblem>(problem: &P, params: &PlannerParams) -> Vec<Subspace<P::Config>> {
    let n = problem.pose_count();
    let mut taken = vec![false; n];
    let mut out = Vec::new();
    for round in 0..params.num_subspace_rounds {
        let seeds = draw_seeds(problem, &taken, params, round);
        if seeds.is_empty() {
            break;
        }
        let results: Vec<(usize, BTreeMap<usize, usize>, f64)> = seeds
            .par_iter()
            .enumerate()
            .map(|(k, &(pose, branch))| {
                let region = grow(problem, pose, branch, &taken, params);
                let cost = assignment_cost(problem, &region);
                (k, region, cost)
            })
            .collect();
        let best = results
            .into_iter()
            .min_by(|a, b| {
                b.1.len()
                    .cmp(&a.1.len())
                    .then(a.2.total_cmp(&b.2))
                    .then(a.0.cmp(&b.0))
            })
            .expect("at least one seed");
        let (_, region, cost) = best;
        if region.is_empty() {
            break;
        }
        for &p in region.keys() {
            taken[p] = true;
        }
        out.push(Subspace {
            assignment: region
                .into_iter()
                .map(|(p, c)| (p, problem.candidates(p)[c].clone()))
                .collect(),
            total_path_cost: cost,
        });
    }
    out
}

/// Restart seeds as `(pose, candidate index)` pairs: poses with more valid
/// configurations first, shuffled within each tier.
fn draw_seeds<P: MappingProblem>(
    problem: &P,
    taken: &[bool],
    params: &PlannerParams,
    round: usize,
) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        params
            .random_seed
            .wrapping_add((round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    let mut pairs: Vec<(usize, u64, usize, usize)> = Vec::new();
    for pose in 0..problem.pose_count() {
        if taken[pose] {
            continue;
        }
        let count = problem.candidates(pose).len();
        for branch in 0..count {
            pairs.push((count, rng.gen::<u64>(), pose, branch));
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    pairs
        .into_iter()
        .take(params.num_restarts)
        .map(|(_, _, pose, branch)| (pose, branch))
        .collect()
}

/// Grows one restart and returns the largest connected component of newly
/// covered poses as `pose -> candidate index`.
fn grow<P: MappingProblem>(
    problem: &P,
    seed: usize,
    seed_branch: usize,
    taken: &[bool],
    params: &PlannerParams,
) -> BTreeMap<usize, usize> {
    let n = problem.pose_count();
    let eps = params.epsilon;
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut rejected = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(Key, usize, usize)>> = BinaryHeap::new();

    assigned[seed] = Some(seed_branch);
    push_frontier(problem, seed, &assigned, &rejected, taken, params, &mut heap);

    while let Some(Reverse((_, pose, parent))) = heap.pop() {
        if assigned[pose].is_some() || rejected[pose] {
            continue;
        }
        let parent_cfg = &problem.candidates(parent)[assigned[parent].expect("parent assigned")];
        let cands = problem.candidates(pose);
        let mut order: Vec<(f64, usize)> = cands
            .iter()
            .enumerate()
            .map(|(c, cfg)| (problem.distance(cfg, parent_cfg), c))
            .filter(|(d, _)| *d <= eps)
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let chosen = order.into_iter().map(|(_, c)| c).find(|&c| {
            problem.neighbors(pose).iter().all(|&m| match assigned[m] {
                Some(cm) => problem.distance(&cands[c], &problem.candidates(m)[cm]) <= eps,
                None => true,
            })
        });
        match chosen {
            Some(c) => {
                assigned[pose] = Some(c);
                push_frontier(problem, pose, &assigned, &rejected, taken, params, &mut heap);
            }
            // Assigned neighbors only accumulate, so this pose stays infeasible.
            None => rejected[pose] = true,
        }
    }

    let fresh: Vec<bool> = (0..n).map(|p| assigned[p].is_some() && !taken[p]).collect();
    largest_component(&fresh, |p| problem.neighbors(p))
        .into_iter()
        .map(|p| (p, assigned[p].expect("component member assigned")))
        .collect()
}

fn push_frontier<P: MappingProblem>(
    problem: &P,
    from: usize,
    assigned: &[Option<usize>],
    rejected: &[bool],
    taken: &[bool],
    params: &PlannerParams,
    heap: &mut BinaryHeap<Reverse<(Key, usize, usize)>>,
) {
    let cfg = &problem.candidates(from)[assigned[from].expect("assigned")];
    for &m in problem.neighbors(from) {
        if assigned[m].is_some() || rejected[m] {
            continue;
        }
        let best = problem
            .candidates(m)
            .iter()
            .map(|c| problem.distance(c, cfg))
            .fold(f64::INFINITY, f64::min);
        if best <= params.epsilon {
            let penalty = if taken[m] { params.revisit_penalty } else { 0.0 };
            heap.push(Reverse((Key(best + penalty), m, from)));
        }
    }
}

fn assignment_cost<P: MappingProblem>(problem: &P, region: &BTreeMap<usize, usize>) -> f64 {
    let mut total = 0.0;
    for (&p, &cp) in region {
        for &q in problem.neighbors(p) {
            if q > p {
                if let Some(&cq) = region.get(&q) {
                    total += problem.distance(&problem.candidates(p)[cp], &problem.candidates(q)[cq]);
                }
            }
        }
    }
    total
}

/// Largest connected component of `members`; ties go to the component with
/// the lowest pose index. Returned sorted.
pub fn largest_component<'a, F>(members: &[bool], neighbors: F) -> Vec<usize>
where
    F: Fn(usize) -> &'a [usize],
{
    let n = members.len();
    let mut seen = vec![false; n];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..n {
        if !members[start] || seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < comp.len() {
            let p = comp[head];
            head += 1;
            for &q in neighbors(p) {
                if members[q] && !seen[q] {
                    seen[q] = true;
                    comp.push(q);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort_unstable();
    best
}
