//! UDP discovery. The master sends `SPDL?` + its port to every target
//! address; each worker answers the sender with `SPDL!` + its TCP port.

use std::collections::BTreeSet;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

pub const QUERY: &[u8; 5] = b"SPDL?";
pub const REPLY: &[u8; 5] = b"SPDL!";
pub const DEFAULT_BROADCAST_PORT: u16 = 47901;
pub const DEFAULT_DATA_PORT: u16 = 47902;

const RESEND: Duration = Duration::from_millis(200);
const POLL: Duration = Duration::from_millis(50);

pub fn query_packet(master_port: u16) -> [u8; 7] {
    let mut p = [0u8; 7];
    p[..5].copy_from_slice(QUERY);
    p[5..].copy_from_slice(&master_port.to_be_bytes());
    p
}

pub fn reply_packet(tcp_port: u16) -> [u8; 7] {
    let mut p = [0u8; 7];
    p[..5].copy_from_slice(REPLY);
    p[5..].copy_from_slice(&tcp_port.to_be_bytes());
    p
}

fn parse(packet: &[u8], magic: &[u8; 5]) -> Option<u16> {
    (packet.len() == 7 && &packet[..5] == magic).then(|| u16::from_be_bytes([packet[5], packet[6]]))
}

/// Collects worker TCP endpoints until `timeout` passes or `expect`
/// distinct workers have answered. Queries are re-sent periodically.
pub fn discover(
    targets: &[SocketAddr],
    master_port: u16,
    timeout: Duration,
    expect: Option<usize>,
) -> io::Result<Vec<SocketAddr>> {
    let bind: SocketAddr = if targets.iter().all(|t| t.is_ipv6()) && !targets.is_empty() {
        "[::]:0".parse().expect("literal")
    } else {
        "0.0.0.0:0".parse().expect("literal")
    };
    let socket = UdpSocket::bind(bind)?;
    socket.set_broadcast(true)?;
    socket.set_read_timeout(Some(POLL))?;
    let query = query_packet(master_port);
    let started = Instant::now();
    let mut last_send: Option<Instant> = None;
    let mut found = BTreeSet::new();
    let mut buf = [0u8; 64];
    while started.elapsed() < timeout {
        if last_send.is_none_or(|t| t.elapsed() >= RESEND) {
            for t in targets {
                // Unreachable targets are not fatal; other targets may answer.
                let _ = socket.send_to(&query, t);
            }
            last_send = Some(Instant::now());
        }
        match socket.recv_from(&mut buf) {
            Ok((n, from)) => {
                if let Some(port) = parse(&buf[..n], REPLY) {
                    found.insert(SocketAddr::new(from.ip(), port));
                    if expect.is_some_and(|e| found.len() >= e) {
                        break;
                    }
                }
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            // ICMP port-unreachable surfaces as a reset on some platforms.
            Err(e) if e.kind() == io::ErrorKind::ConnectionReset => {}
            Err(e) => return Err(e),
        }
    }
    Ok(found.into_iter().collect())
}

/// Answers discovery queries on `socket` until `stop` is set.
pub fn respond(socket: &UdpSocket, tcp_port: u16, stop: &AtomicBool) -> io::Result<()> {
    socket.set_read_timeout(Some(POLL))?;
    let reply = reply_packet(tcp_port);
    let mut buf = [0u8; 64];
    while !stop.load(Ordering::Relaxed) {
        match socket.recv_from(&mut buf) {
            Ok((n, from)) => {
                if parse(&buf[..n], QUERY).is_some() {
                    let _ = socket.send_to(&reply, from);
                }
            }
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut | io::ErrorKind::ConnectionReset
                ) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn packets() {
        assert_eq!(&query_packet(47902), b"SPDL?\xbb\x1e");
        assert_eq!(parse(&reply_packet(9), REPLY), Some(9));
        assert_eq!(parse(&reply_packet(9), QUERY), None);
        assert_eq!(parse(b"SPDL!", REPLY), None);
    }

    #[test]
    fn loopback_round_trip() {
        let socket = UdpSocket::bind("127.0.0.1:0").unwrap();
        let addr = socket.local_addr().unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let s2 = stop.clone();
        let t = std::thread::spawn(move || respond(&socket, 4242, &s2));
        let found = discover(&[addr], 1, Duration::from_secs(5), Some(1)).unwrap();
        stop.store(true, Ordering::Relaxed);
        t.join().unwrap().unwrap();
        assert_eq!(found, vec!["127.0.0.1:4242".parse().unwrap()]);
    }

    #[test]
    fn silence_means_nobody() {
        let quiet = UdpSocket::bind("127.0.0.1:0").unwrap();
        let found = discover(&[quiet.local_addr().unwrap()], 1, Duration::from_millis(300), None).unwrap();
        assert!(found.is_empty());
    }
}
