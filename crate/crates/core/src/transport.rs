//! Framed envelope delivery over a reliable byte stream.
//!
//! Frame: `frame_len(4, BE) || envelope`. Nothing else travels on the wire
//! apart from the 8-octet session identifier the connecting side sends in
//! clear when a TCP session opens. Every octet written or read is appended
//! to a shared [`MessageTranscript`].

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::public::PublicEnvelope;

pub const FRAME_PREFIX_LEN: usize = 4;
/// Generous upper bound; the largest legitimate envelope is under 4.3 KiB.
pub const MAX_FRAME_LEN: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("framing: {0}")]
    Framing(&'static str),
    #[error("end of stream")]
    EndOfStream,
}

pub fn encode_frame(env: &PublicEnvelope) -> Vec<u8> {
    let body = env.to_bytes();
    let mut out = Vec::with_capacity(FRAME_PREFIX_LEN + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Splits a concatenation of frames back into envelopes.
pub fn decode_frames(mut bytes: &[u8]) -> Result<Vec<PublicEnvelope>, TransportError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < FRAME_PREFIX_LEN {
            return Err(TransportError::Framing("truncated frame"));
        }
        let n = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        let rest = &bytes[FRAME_PREFIX_LEN..];
        if n > MAX_FRAME_LEN {
            return Err(TransportError::Framing("frame too long"));
        }
        if rest.len() < n {
            return Err(TransportError::Framing("truncated frame"));
        }
        out.push(
            PublicEnvelope::from_bytes(&rest[..n])
                .map_err(|_| TransportError::Framing("bad envelope"))?,
        );
        bytes = &rest[n..];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameDirection {
    Outbound,
    Inbound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub direction: FrameDirection,
    /// Full wire frame, length prefix included.
    pub frame: Vec<u8>,
}

/// Append-only record of the wire.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTranscript {
    pub session_id: Option<[u8; 8]>,
    entries: Vec<TranscriptEntry>,
}

impl MessageTranscript {
    pub fn push(&mut self, direction: FrameDirection, frame: Vec<u8>) {
        self.entries.push(TranscriptEntry { direction, frame });
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Concatenated octets that crossed the wire in one direction.
    pub fn wire_bytes(&self, direction: FrameDirection) -> Vec<u8> {
        self.entries
            .iter()
            .filter(|e| e.direction == direction)
            .flat_map(|e| e.frame.iter().copied())
            .collect()
    }

    /// Envelopes in one direction, in wire order.
    pub fn replay(&self, direction: FrameDirection) -> Result<Vec<PublicEnvelope>, TransportError> {
        decode_frames(&self.wire_bytes(direction))
    }
}

pub type SharedTranscript = Arc<Mutex<MessageTranscript>>;

fn lock(t: &SharedTranscript) -> MutexGuard<'_, MessageTranscript> {
    t.lock().unwrap_or_else(|p| p.into_inner())
}

pub struct FrameWriter<W> {
    inner: W,
    transcript: SharedTranscript,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(inner: W, transcript: SharedTranscript) -> Self {
        Self { inner, transcript }
    }

    pub fn send(&mut self, env: &PublicEnvelope) -> Result<(), TransportError> {
        let frame = encode_frame(env);
        self.inner.write_all(&frame)?;
        self.inner.flush()?;
        lock(&self.transcript).push(FrameDirection::Outbound, frame);
        Ok(())
    }

    /// Writes raw octets, bypassing framing. Test hook for malformed input.
    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), TransportError> {
        self.inner.write_all(bytes)?;
        self.inner.flush()?;
        lock(&self.transcript).push(FrameDirection::Outbound, bytes.to_vec());
        Ok(())
    }
}

pub struct FrameReader<R> {
    inner: R,
    transcript: SharedTranscript,
}

// Ok(false) on clean EOF before the first octet.
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> Result<bool, TransportError> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) if got == 0 => return Ok(false),
            Ok(0) => return Err(TransportError::Framing("truncated frame")),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R, transcript: SharedTranscript) -> Self {
        Self { inner, transcript }
    }

    pub fn recv(&mut self) -> Result<PublicEnvelope, TransportError> {
        let mut prefix = [0u8; FRAME_PREFIX_LEN];
        if !read_full(&mut self.inner, &mut prefix)? {
            return Err(TransportError::EndOfStream);
        }
        let n = u32::from_be_bytes(prefix) as usize;
        if n > MAX_FRAME_LEN {
            return Err(TransportError::Framing("frame too long"));
        }
        let mut frame = vec![0u8; FRAME_PREFIX_LEN + n];
        frame[..FRAME_PREFIX_LEN].copy_from_slice(&prefix);
        if !read_full(&mut self.inner, &mut frame[FRAME_PREFIX_LEN..])? && n > 0 {
            return Err(TransportError::Framing("truncated frame"));
        }
        let env = PublicEnvelope::from_bytes(&frame[FRAME_PREFIX_LEN..])
            .map_err(|_| TransportError::Framing("bad envelope"))?;
        lock(&self.transcript).push(FrameDirection::Inbound, frame);
        Ok(env)
    }
}

pub type BoxRead = Box<dyn Read + Send>;
pub type BoxWrite = Box<dyn Write + Send>;

/// One end of a two-party session.
pub struct Session {
    pub session_id: [u8; 8],
    reader: FrameReader<BoxRead>,
    writer: FrameWriter<BoxWrite>,
    transcript: SharedTranscript,
}

impl Session {
    pub fn from_parts(session_id: [u8; 8], read: BoxRead, write: BoxWrite) -> Self {
        let transcript = Arc::new(Mutex::new(MessageTranscript {
            session_id: Some(session_id),
            ..Default::default()
        }));
        Self {
            session_id,
            reader: FrameReader::new(read, transcript.clone()),
            writer: FrameWriter::new(write, transcript.clone()),
            transcript,
        }
    }

    pub fn send(&mut self, env: &PublicEnvelope) -> Result<(), TransportError> {
        self.writer.send(env)
    }

    pub fn recv(&mut self) -> Result<PublicEnvelope, TransportError> {
        self.reader.recv()
    }

    pub fn transcript(&self) -> SharedTranscript {
        self.transcript.clone()
    }

    pub fn snapshot(&self) -> MessageTranscript {
        lock(&self.transcript).clone()
    }

    /// Separate halves so one thread can read while another writes.
    pub fn split(
        self,
    ) -> (
        FrameReader<BoxRead>,
        FrameWriter<BoxWrite>,
        SharedTranscript,
    ) {
        (self.reader, self.writer, self.transcript)
    }
}

/// Opens a TCP session and announces `session_id` in clear.
pub fn connect(addr: impl ToSocketAddrs, session_id: [u8; 8]) -> Result<Session, TransportError> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    stream.write_all(&session_id)?;
    let read = stream.try_clone()?;
    Ok(Session::from_parts(
        session_id,
        Box::new(read),
        Box::new(stream),
    ))
}

/// Accepts one TCP session and reads the peer's session identifier.
pub fn accept(listener: &TcpListener) -> Result<Session, TransportError> {
    let (mut stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    let mut sid = [0u8; 8];
    if !read_full(&mut stream, &mut sid)? {
        return Err(TransportError::EndOfStream);
    }
    let read = stream.try_clone()?;
    Ok(Session::from_parts(sid, Box::new(read), Box::new(stream)))
}

struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    pos: usize,
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if self.pos == self.buf.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.buf = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

struct PipeWriter(Sender<Vec<u8>>);

impl Write for PipeWriter {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        self.0
            .send(data.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// In-memory duplex pipe: two connected sessions sharing `session_id`.
pub fn pipe(session_id: [u8; 8]) -> (Session, Session) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    let reader = |rx| -> BoxRead {
        Box::new(PipeReader {
            rx,
            buf: Vec::new(),
            pos: 0,
        })
    };
    (
        Session::from_parts(session_id, reader(a_rx), Box::new(PipeWriter(a_tx))),
        Session::from_parts(session_id, reader(b_rx), Box::new(PipeWriter(b_tx))),
    )
}

/// Shuffles consecutive blocks of `window` items, so no item moves more
/// than `window - 1` places. Labels travel with the items.
pub fn reorder_window<T>(mut items: Vec<T>, window: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    if window > 1 {
        for block in items.chunks_mut(window) {
            block.shuffle(rng);
        }
    }
    items
}

/// Delivery-order hook: buffers `window` envelopes and releases them in a
/// seeded random order.
pub struct WindowShuffle {
    window: usize,
    rng: ChaCha8Rng,
    held: Vec<PublicEnvelope>,
}

impl WindowShuffle {
    pub fn new(window: usize, seed: u64) -> Self {
        Self {
            window: window.max(1),
            rng: ChaCha8Rng::seed_from_u64(seed),
            held: Vec::new(),
        }
    }

    /// Envelopes ready for delivery after accepting `env`.
    pub fn push(&mut self, env: PublicEnvelope) -> Vec<PublicEnvelope> {
        self.held.push(env);
        if self.held.len() < self.window {
            return Vec::new();
        }
        self.flush()
    }

    pub fn flush(&mut self) -> Vec<PublicEnvelope> {
        let mut out = std::mem::take(&mut self.held);
        out.shuffle(&mut self.rng);
        out
    }
}
