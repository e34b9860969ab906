//! Wire protocol for denoisers running in a child process.
//!
//! Request: `"SDN1"`, `2N: u32`, `sigma: f64`, then `2N` f64 values.
//! Response: `"SDN2"`, `2N: u32`, then `2N` f64 values. All little-endian.
//! `sigma` is the per-real-component noise standard deviation.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use blindsure_core::{Denoiser, Error as CoreError, Result as CoreResult};
use thiserror::Error;

pub const REQUEST_MAGIC: &[u8; 4] = b"SDN1";
pub const RESPONSE_MAGIC: &[u8; 4] = b"SDN2";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("external denoiser timed out after {0:?}")]
    Timeout(Duration),

    #[error("malformed header from external denoiser: {0}")]
    MalformedHeader(String),

    #[error("external denoiser returned {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("external denoiser closed its output")]
    Closed,

    #[error("cannot start external denoiser `{command}`: {source}")]
    Spawn { command: String, source: io::Error },

    #[error("external denoiser i/o: {0}")]
    Io(#[from] io::Error),
}

impl ProtocolError {
    /// Stable numeric code, distinct per failure kind.
    pub fn code(&self) -> i32 {
        match self {
            ProtocolError::Timeout(_) => 10,
            ProtocolError::MalformedHeader(_) => 11,
            ProtocolError::DimensionMismatch { .. } => 12,
            ProtocolError::Closed => 13,
            ProtocolError::Spawn { .. } => 14,
            ProtocolError::Io(_) => 15,
        }
    }
}

pub fn write_frame(w: &mut impl Write, magic: &[u8; 4], sigma: Option<f64>, v: &[f64]) -> io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&(v.len() as u32).to_le_bytes())?;
    if let Some(s) = sigma {
        w.write_all(&s.to_le_bytes())?;
    }
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()
}

fn read_exact_or_closed(r: &mut impl Read, buf: &mut [u8]) -> Result<(), ProtocolError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ProtocolError::Closed,
        _ => ProtocolError::Io(e),
    })
}

fn read_values(r: &mut impl Read, n: usize) -> Result<Vec<f64>, ProtocolError> {
    let mut buf = vec![0u8; 8 * n];
    read_exact_or_closed(r, &mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Read one response frame.
pub fn read_response(r: &mut impl Read) -> Result<Vec<f64>, ProtocolError> {
    let mut head = [0u8; 8];
    read_exact_or_closed(r, &mut head)?;
    if &head[..4] != RESPONSE_MAGIC {
        return Err(ProtocolError::MalformedHeader(format!("magic {:?}", &head[..4])));
    }
    let n = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize;
    read_values(r, n)
}

/// Read one request frame; `None` on a clean end of input.
pub fn read_request(r: &mut impl Read) -> Result<Option<(f64, Vec<f64>)>, ProtocolError> {
    let mut head = [0u8; 16];
    match r.read(&mut head[..1])? {
        0 => return Ok(None),
        _ => read_exact_or_closed(r, &mut head[1..])?,
    }
    if &head[..4] != REQUEST_MAGIC {
        return Err(ProtocolError::MalformedHeader(format!("magic {:?}", &head[..4])));
    }
    let n = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize;
    let sigma = f64::from_le_bytes(head[8..16].try_into().expect("8 bytes"));
    Ok(Some((sigma, read_values(r, n)?)))
}

/// Deliberate misbehaviour for exercising client error paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    WrongLength,
    BadMagic,
    Hang,
}

/// Answer requests from `input` with `den` until the input closes.
pub fn serve(den: &dyn Denoiser, input: impl Read, output: impl Write, fault: Fault) -> Result<usize, ProtocolError> {
    let mut input = BufReader::new(input);
    let mut output = BufWriter::new(output);
    let mut served = 0;
    while let Some((sigma, r)) = read_request(&mut input)? {
        let mut out = den
            .denoise(&r, sigma)
            .map_err(|e| ProtocolError::Io(io::Error::other(e.to_string())))?;
        match fault {
            Fault::None => write_frame(&mut output, RESPONSE_MAGIC, None, &out)?,
            Fault::WrongLength => {
                out.pop();
                write_frame(&mut output, RESPONSE_MAGIC, None, &out)?
            }
            Fault::BadMagic => write_frame(&mut output, b"XXXX", None, &out)?,
            Fault::Hang => loop {
                thread::sleep(Duration::from_secs(3600));
            },
        }
        served += 1;
    }
    Ok(served)
}

struct Session {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    responses: Receiver<Result<Vec<f64>, ProtocolError>>,
}

/// Denoiser backed by a child process. Requests are serialized.
pub struct ExternalDenoiser {
    command: String,
    timeout: Duration,
    session: Mutex<Session>,
}

impl std::fmt::Debug for ExternalDenoiser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalDenoiser").field("command", &self.command).finish()
    }
}

impl ExternalDenoiser {
    /// Spawn `command` (whitespace-separated program and arguments).
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, ProtocolError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| ProtocolError::Spawn { command: command.into(), source: io::Error::other("empty command") })?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| ProtocolError::Spawn { command: command.into(), source })?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let mut stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || loop {
            let frame = read_response(&mut stdout);
            let stop = frame.is_err();
            if tx.send(frame).is_err() || stop {
                break;
            }
        });
        Ok(Self { command: command.into(), timeout, session: Mutex::new(Session { child, stdin, responses: rx }) })
    }

    pub fn call(&self, r: &[f64], sigma: f64) -> Result<Vec<f64>, ProtocolError> {
        let mut s = self.session.lock().unwrap_or_else(|p| p.into_inner());
        write_frame(&mut s.stdin, REQUEST_MAGIC, Some(sigma), r).map_err(|e| match e.kind() {
            io::ErrorKind::BrokenPipe => ProtocolError::Closed,
            _ => ProtocolError::Io(e),
        })?;
        let out = match s.responses.recv_timeout(self.timeout) {
            Ok(frame) => frame?,
            Err(RecvTimeoutError::Timeout) => {
                let _ = s.child.kill();
                return Err(ProtocolError::Timeout(self.timeout));
            }
            Err(RecvTimeoutError::Disconnected) => return Err(ProtocolError::Closed),
        };
        if out.len() != r.len() {
            return Err(ProtocolError::DimensionMismatch { expected: r.len(), got: out.len() });
        }
        Ok(out)
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        let s = self.session.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = s.child.kill();
        let _ = s.child.wait();
    }
}

impl Denoiser for ExternalDenoiser {
    fn denoise(&self, r: &[f64], sigma: f64) -> CoreResult<Vec<f64>> {
        self.call(r, sigma).map_err(|e| CoreError::Denoiser(Box::new(e)))
    }

    fn divergence(&self, _r: &[f64], _sigma: f64) -> CoreResult<Option<f64>> {
        Ok(None)
    }

    fn label(&self) -> String {
        format!("external:{}", self.command)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use blindsure_core::denoise::Identity;

    #[test]
    fn request_frame_layout() {
        let mut buf = Vec::new();
        write_frame(&mut buf, REQUEST_MAGIC, Some(0.5), &[1.0, -2.0]).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 16);
        assert_eq!(&buf[..4], b"SDN1");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..16], &0.5f64.to_le_bytes());
        let (sigma, v) = read_request(&mut io::Cursor::new(buf)).unwrap().unwrap();
        assert_eq!((sigma, v), (0.5, vec![1.0, -2.0]));
    }

    #[test]
    fn serve_echo_in_memory() {
        let mut input = Vec::new();
        write_frame(&mut input, REQUEST_MAGIC, Some(1.0), &[3.0, 4.0, 5.0]).unwrap();
        write_frame(&mut input, REQUEST_MAGIC, Some(1.0), &[6.0]).unwrap();
        let mut output = Vec::new();
        let n = serve(&Identity, io::Cursor::new(input), &mut output, Fault::None).unwrap();
        assert_eq!(n, 2);
        let mut cur = io::Cursor::new(output);
        assert_eq!(read_response(&mut cur).unwrap(), vec![3.0, 4.0, 5.0]);
        assert_eq!(read_response(&mut cur).unwrap(), vec![6.0]);
        assert!(matches!(read_response(&mut cur), Err(ProtocolError::Closed)));
    }

    #[test]
    fn bad_magic_is_malformed() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"NOPE", None, &[1.0]).unwrap();
        assert!(matches!(read_response(&mut io::Cursor::new(buf)), Err(ProtocolError::MalformedHeader(_))));
    }

    #[test]
    fn error_codes_are_distinct() {
        let codes = [
            ProtocolError::Timeout(DEFAULT_TIMEOUT).code(),
            ProtocolError::MalformedHeader(String::new()).code(),
            ProtocolError::DimensionMismatch { expected: 1, got: 2 }.code(),
        ];
        assert!(codes[0] != codes[1] && codes[1] != codes[2] && codes[0] != codes[2]);
    }
}
