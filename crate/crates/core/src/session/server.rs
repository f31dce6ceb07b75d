//! TCP transport: one thread per connection, newline-delimited JSON, one
//! shared session.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::{ClientState, ErrorCode, ServerMessage, Session};

type Clients = Arc<Mutex<Vec<(u64, Arc<Mutex<TcpStream>>)>>>;

fn send(stream: &Mutex<TcpStream>, msgs: &[ServerMessage]) -> io::Result<()> {
    if msgs.is_empty() {
        return Ok(());
    }
    let mut out = String::new();
    for m in msgs {
        out.push_str(&m.to_line());
        out.push('\n');
    }
    let mut s = stream.lock().expect("stream lock");
    s.write_all(out.as_bytes())?;
    s.flush()
}

fn broadcast(clients: &Clients, msgs: &[ServerMessage]) {
    if msgs.is_empty() {
        return;
    }
    let targets: Vec<_> = clients.lock().expect("client lock").iter().map(|(_, s)| s.clone()).collect();
    for s in targets {
        // A dead peer is dropped by its own reader thread.
        let _ = send(&s, msgs);
    }
}

fn connection(stream: TcpStream, id: u64, session: Arc<Mutex<Session>>, clients: Clients, tick: Duration) -> io::Result<()> {
    stream.set_read_timeout(Some(tick))?;
    let writer = Arc::new(Mutex::new(stream.try_clone()?));
    clients.lock().expect("client lock").push((id, writer.clone()));
    let mut reader = BufReader::new(stream);
    let mut state = ClientState::new();
    let mut buf = Vec::new();
    let result = loop {
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => break Ok(()),
            Ok(_) if buf.last() != Some(&b'\n') => break Ok(()),
            Ok(_) => {
                let response = match std::str::from_utf8(&buf) {
                    Ok(line) if line.trim().is_empty() => None,
                    Ok(line) => Some(session.lock().expect("session lock").handle_line(&mut state, line)),
                    Err(_) => Some(super::Response::error(ErrorCode::BadRequest, "line is not UTF-8")),
                };
                buf.clear();
                if let Some(r) = response {
                    if let Err(e) = send(&writer, &r.reply) {
                        break Err(e);
                    }
                    broadcast(&clients, &r.broadcast);
                }
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                let msgs = session.lock().expect("session lock").flush(&mut state);
                if let Err(e) = send(&writer, &msgs) {
                    break Err(e);
                }
            }
            Err(e) => break Err(e),
        }
    };
    clients.lock().expect("client lock").retain(|(i, _)| *i != id);
    result
}

/// Accepts connections forever. Held-back poses are flushed every `tick`
/// of wall time when a client goes quiet.
pub fn serve(listener: TcpListener, session: Session, tick: Duration) -> io::Result<()> {
    let session = Arc::new(Mutex::new(session));
    let clients: Clients = Arc::default();
    for (id, stream) in (0u64..).zip(listener.incoming()) {
        let stream = stream?;
        let session = session.clone();
        let clients = clients.clone();
        std::thread::spawn(move || {
            let _ = connection(stream, id, session, clients, tick);
        });
    }
    Ok(())
}
