//! The `.edls` binary logit-stream format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! header   "EDLS" | version u16 | value_kind u8 | value_width u8 | vocab_size u32
//!          | position_count_hint u32 | metadata_digest [u8; 8]
//!          | generation_id_len u16 | generation_id (UTF-8)
//! record*  record_len u32 (= 8 + V·width) | position_index u32
//!          | sampled_token_id u32 | V values (IEEE-754, declared width)
//! trailer  0xFFFF_FFFF | record_count u32 | checksum u64
//! ```
//!
//! The checksum is XXH64 (seed 0) over every byte preceding it.
//! The reader keeps exactly one encoded record in memory at a time.

use std::borrow::Borrow;
use std::hash::Hasher;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use twox_hash::XxHash64;

use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"EDLS";
pub const FORMAT_VERSION: u16 = 1;
const END_MARKER: u32 = u32::MAX;
const FIXED_HEADER_LEN: usize = 26;
const RECORD_PREFIX_LEN: usize = 8;
/// Records larger than this are buffered in steps as their bytes arrive, so
/// a corrupt header cannot force a huge allocation up front.
const BUFFER_STEP: usize = 16 << 20;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {found:?}, expected \"EDLS\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("stream truncated at byte offset {offset} while reading {what}")]
    Truncated { offset: u64, what: &'static str },
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("trailer declares {declared} records but {read} were read")]
    RecordCountMismatch { declared: u32, read: u32 },
    #[error("record at offset {offset} has {found} payload bytes, header implies {expected}")]
    WidthMismatch {
        offset: u64,
        expected: usize,
        found: usize,
    },
    #[error("position index {found} does not follow {previous}")]
    NonMonotonePosition { previous: u32, found: u32 },
    #[error("non-finite value at position {position_index}, vocab index {value_index}")]
    NonFinite {
        position_index: u32,
        value_index: usize,
    },
    #[error("sampled token {token} at position {position_index} is outside vocabulary of {vocab_size}")]
    TokenOutOfRange {
        position_index: u32,
        token: u32,
        vocab_size: u32,
    },
    #[error("unexpected data after the trailer at byte offset {offset}")]
    TrailingData { offset: u64 },
}

pub type Result<T> = std::result::Result<T, StreamError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    RawLogits,
    Probabilities,
}

impl ValueKind {
    fn code(self) -> u8 {
        match self {
            ValueKind::RawLogits => 0,
            ValueKind::Probabilities => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ValueKind::RawLogits),
            1 => Some(ValueKind::Probabilities),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueWidth {
    #[default]
    Binary32,
    Binary64,
}

impl ValueWidth {
    pub fn bytes(self) -> usize {
        match self {
            ValueWidth::Binary32 => 4,
            ValueWidth::Binary64 => 8,
        }
    }

    fn from_bytes(n: u8) -> Option<Self> {
        match n {
            4 => Some(ValueWidth::Binary32),
            8 => Some(ValueWidth::Binary64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    pub format_version: u16,
    pub vocab_size: u32,
    pub value_kind: ValueKind,
    pub value_width: ValueWidth,
    /// 0 when unknown.
    pub position_count_hint: u32,
    pub generation_id: String,
    pub metadata_digest: [u8; 8],
}

impl StreamHeader {
    pub fn new(vocab_size: u32, value_kind: ValueKind, value_width: ValueWidth) -> Self {
        StreamHeader {
            format_version: FORMAT_VERSION,
            vocab_size,
            value_kind,
            value_width,
            position_count_hint: 0,
            generation_id: String::new(),
            metadata_digest: [0; 8],
        }
    }

    pub fn with_generation_id(mut self, id: impl Into<String>) -> Self {
        self.generation_id = id.into();
        self
    }

    pub fn with_digest(mut self, digest: [u8; 8]) -> Self {
        self.metadata_digest = digest;
        self
    }

    pub fn with_position_count_hint(mut self, hint: u32) -> Self {
        self.position_count_hint = hint;
        self
    }

    /// Encoded size of one record's value payload.
    pub fn payload_len(&self) -> usize {
        self.vocab_size as usize * self.value_width.bytes()
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(StreamError::UnsupportedVersion(self.format_version));
        }
        if self.vocab_size < 2 {
            return Err(StreamError::InvalidHeader(format!(
                "vocab_size {} is below 2",
                self.vocab_size
            )));
        }
        if self.generation_id.len() > u16::MAX as usize {
            return Err(StreamError::InvalidHeader(
                "generation_id longer than 65535 bytes".into(),
            ));
        }
        Ok(())
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_HEADER_LEN + self.generation_id.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.push(self.value_kind.code());
        out.push(self.value_width.bytes() as u8);
        out.extend_from_slice(&self.vocab_size.to_le_bytes());
        out.extend_from_slice(&self.position_count_hint.to_le_bytes());
        out.extend_from_slice(&self.metadata_digest);
        out.extend_from_slice(&(self.generation_id.len() as u16).to_le_bytes());
        out.extend_from_slice(self.generation_id.as_bytes());
        out
    }
}

/// Owned per-position values in their declared width.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordValues {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl RecordValues {
    pub fn len(&self) -> usize {
        match self {
            RecordValues::F32(v) => v.len(),
            RecordValues::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> ValueWidth {
        match self {
            RecordValues::F32(_) => ValueWidth::Binary32,
            RecordValues::F64(_) => ValueWidth::Binary64,
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            RecordValues::F32(v) => v[i] as f64,
            RecordValues::F64(v) => v[i],
        }
    }
}

impl From<Vec<f32>> for RecordValues {
    fn from(v: Vec<f32>) -> Self {
        RecordValues::F32(v)
    }
}

impl From<Vec<f64>> for RecordValues {
    fn from(v: Vec<f64>) -> Self {
        RecordValues::F64(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionRecord {
    pub position_index: u32,
    pub sampled_token_id: u32,
    pub values: RecordValues,
}

/// Writes a stream incrementally; call [`StreamWriter::finish`] to emit the trailer.
pub struct StreamWriter<W: Write> {
    sink: W,
    header: StreamHeader,
    hasher: XxHash64,
    bytes_written: u64,
    records: u32,
    last_position: Option<u32>,
    scratch: Vec<u8>,
}

impl<W: Write> StreamWriter<W> {
    pub fn new(header: StreamHeader, sink: W) -> Result<Self> {
        header.validate()?;
        let mut w = StreamWriter {
            sink,
            hasher: XxHash64::with_seed(0),
            bytes_written: 0,
            records: 0,
            last_position: None,
            scratch: Vec::with_capacity(RECORD_PREFIX_LEN + 4 + header.payload_len()),
            header,
        };
        let encoded = w.header.encode();
        w.emit(&encoded)?;
        Ok(w)
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    fn emit(&mut self, bytes: &[u8]) -> Result<()> {
        self.sink.write_all(bytes)?;
        self.hasher.write(bytes);
        self.bytes_written += bytes.len() as u64;
        Ok(())
    }

    pub fn write_record(&mut self, record: &PositionRecord) -> Result<()> {
        match &record.values {
            RecordValues::F32(v) => {
                self.write_values(record.position_index, record.sampled_token_id, v)
            }
            RecordValues::F64(v) => {
                self.write_values(record.position_index, record.sampled_token_id, v)
            }
        }
    }

    /// Encodes one record from a typed slice whose width must match the header.
    pub fn write_values<S: Scalar>(
        &mut self,
        position_index: u32,
        sampled_token_id: u32,
        values: &[S],
    ) -> Result<()> {
        let expected = self.header.payload_len();
        let found = values.len() * S::WIDTH;
        if S::WIDTH != self.header.value_width.bytes() || found != expected {
            return Err(StreamError::WidthMismatch {
                offset: self.bytes_written,
                expected,
                found,
            });
        }
        if let Some(previous) = self.last_position {
            if position_index <= previous {
                return Err(StreamError::NonMonotonePosition {
                    previous,
                    found: position_index,
                });
            }
        }
        if sampled_token_id >= self.header.vocab_size {
            return Err(StreamError::TokenOutOfRange {
                position_index,
                token: sampled_token_id,
                vocab_size: self.header.vocab_size,
            });
        }
        if let Some(value_index) = values.iter().position(|v| !v.is_finite()) {
            return Err(StreamError::NonFinite {
                position_index,
                value_index,
            });
        }

        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.clear();
        scratch.extend_from_slice(&((RECORD_PREFIX_LEN + expected) as u32).to_le_bytes());
        scratch.extend_from_slice(&position_index.to_le_bytes());
        scratch.extend_from_slice(&sampled_token_id.to_le_bytes());
        let start = scratch.len();
        scratch.resize(start + expected, 0);
        for (chunk, v) in scratch[start..].chunks_exact_mut(S::WIDTH).zip(values) {
            v.write_le(chunk);
        }
        let res = self.emit(&scratch);
        self.scratch = scratch;
        res?;

        self.last_position = Some(position_index);
        self.records += 1;
        Ok(())
    }

    /// Writes the end marker, record count and checksum. Returns the sink and
    /// the total byte count.
    pub fn finish(mut self) -> Result<(W, u64)> {
        let mut tail = Vec::with_capacity(8);
        tail.extend_from_slice(&END_MARKER.to_le_bytes());
        tail.extend_from_slice(&self.records.to_le_bytes());
        self.emit(&tail)?;
        let checksum = self.hasher.finish();
        self.sink.write_all(&checksum.to_le_bytes())?;
        self.sink.flush()?;
        Ok((self.sink, self.bytes_written + 8))
    }
}

/// Writes a complete stream and returns the number of bytes emitted.
pub fn write_stream<W, I, B>(header: StreamHeader, records: I, sink: W) -> Result<u64>
where
    W: Write,
    I: IntoIterator<Item = B>,
    B: Borrow<PositionRecord>,
{
    let mut writer = StreamWriter::new(header, sink)?;
    for r in records {
        writer.write_record(r.borrow())?;
    }
    let (_, n) = writer.finish()?;
    Ok(n)
}

/// A borrowed view of the record currently held by a [`StreamReader`].
#[derive(Debug, Clone, Copy)]
pub struct RecordRef<'a> {
    pub position_index: u32,
    pub sampled_token_id: u32,
    width: ValueWidth,
    payload: &'a [u8],
}

impl<'a> RecordRef<'a> {
    pub fn len(&self) -> usize {
        self.payload.len() / self.width.bytes()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn width(&self) -> ValueWidth {
        self.width
    }

    /// Value `i`, widened to `f64`.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        match self.width {
            ValueWidth::Binary32 => f32::read_le(&self.payload[i * 4..]) as f64,
            ValueWidth::Binary64 => f64::read_le(&self.payload[i * 8..]),
        }
    }

    pub fn to_owned(&self) -> PositionRecord {
        let values = match self.width {
            ValueWidth::Binary32 => RecordValues::F32(
                self.payload.chunks_exact(4).map(f32::read_le).collect(),
            ),
            ValueWidth::Binary64 => RecordValues::F64(
                self.payload.chunks_exact(8).map(f64::read_le).collect(),
            ),
        };
        PositionRecord {
            position_index: self.position_index,
            sampled_token_id: self.sampled_token_id,
            values,
        }
    }
}

/// Streaming reader holding one record buffer.
pub struct StreamReader<R: Read> {
    source: R,
    header: StreamHeader,
    hasher: XxHash64,
    offset: u64,
    buf: Vec<u8>,
    records: u32,
    last_position: Option<u32>,
    finished: bool,
}

impl<R: Read> StreamReader<R> {
    pub fn new(source: R) -> Result<Self> {
        let mut reader = StreamReader {
            source,
            header: StreamHeader::new(2, ValueKind::RawLogits, ValueWidth::Binary32),
            hasher: XxHash64::with_seed(0),
            offset: 0,
            buf: Vec::new(),
            records: 0,
            last_position: None,
            finished: false,
        };
        reader.header = reader.read_header()?;
        Ok(reader)
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn records_read(&self) -> u32 {
        self.records
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn fill(&mut self, buf: &mut [u8], what: &'static str, hash: bool) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.source.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(StreamError::Truncated {
                        offset: self.offset + filled as u64,
                        what,
                    })
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        if hash {
            self.hasher.write(buf);
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn read_u32(&mut self, what: &'static str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what, true)?;
        Ok(u32::from_le_bytes(b))
    }

    fn read_header(&mut self) -> Result<StreamHeader> {
        let mut fixed = [0u8; FIXED_HEADER_LEN];
        self.fill(&mut fixed[..4], "magic", true)?;
        let found = [fixed[0], fixed[1], fixed[2], fixed[3]];
        if found != MAGIC {
            return Err(StreamError::BadMagic { found });
        }
        self.fill(&mut fixed[4..6], "format version", true)?;
        let version = u16::from_le_bytes([fixed[4], fixed[5]]);
        if version != FORMAT_VERSION {
            return Err(StreamError::UnsupportedVersion(version));
        }
        self.fill(&mut fixed[6..], "header", true)?;
        let value_kind = ValueKind::from_code(fixed[6])
            .ok_or_else(|| StreamError::InvalidHeader(format!("unknown value kind {}", fixed[6])))?;
        let value_width = ValueWidth::from_bytes(fixed[7])
            .ok_or_else(|| StreamError::InvalidHeader(format!("unknown value width {}", fixed[7])))?;
        let vocab_size = u32::from_le_bytes(fixed[8..12].try_into().unwrap());
        let position_count_hint = u32::from_le_bytes(fixed[12..16].try_into().unwrap());
        let metadata_digest: [u8; 8] = fixed[16..24].try_into().unwrap();
        let id_len = u16::from_le_bytes([fixed[24], fixed[25]]) as usize;
        let mut id = vec![0u8; id_len];
        self.fill(&mut id, "generation id", true)?;
        let generation_id = String::from_utf8(id)
            .map_err(|_| StreamError::InvalidHeader("generation_id is not UTF-8".into()))?;
        let header = StreamHeader {
            format_version: version,
            vocab_size,
            value_kind,
            value_width,
            position_count_hint,
            generation_id,
            metadata_digest,
        };
        header.validate()?;
        Ok(header)
    }

    /// Advances to the next record. Returns `None` once the trailer has been
    /// read and its checksum verified.
    pub fn next_record(&mut self) -> Result<Option<RecordRef<'_>>> {
        if self.finished {
            return Ok(None);
        }
        let record_start = self.offset;
        let len = self.read_u32("record length")?;
        if len == END_MARKER {
            self.read_trailer()?;
            return Ok(None);
        }
        let payload_len = self.header.payload_len();
        let expected = RECORD_PREFIX_LEN + payload_len;
        if len as usize != expected {
            return Err(StreamError::WidthMismatch {
                offset: record_start,
                expected,
                found: len as usize,
            });
        }

        let mut buf = std::mem::take(&mut self.buf);
        buf.clear();
        let mut res = Ok(());
        while buf.len() < expected && res.is_ok() {
            let start = buf.len();
            let step = (expected - start).min(BUFFER_STEP);
            buf.reserve_exact(step);
            buf.resize(start + step, 0);
            res = self.fill(&mut buf[start..], "record", true);
        }
        self.buf = buf;
        res?;

        let position_index = u32::from_le_bytes(self.buf[0..4].try_into().unwrap());
        let sampled_token_id = u32::from_le_bytes(self.buf[4..8].try_into().unwrap());
        if let Some(previous) = self.last_position {
            if position_index <= previous {
                return Err(StreamError::NonMonotonePosition {
                    previous,
                    found: position_index,
                });
            }
        }
        if sampled_token_id >= self.header.vocab_size {
            return Err(StreamError::TokenOutOfRange {
                position_index,
                token: sampled_token_id,
                vocab_size: self.header.vocab_size,
            });
        }
        let record = RecordRef {
            position_index,
            sampled_token_id,
            width: self.header.value_width,
            payload: &self.buf[RECORD_PREFIX_LEN..],
        };
        if let Some(value_index) = (0..record.len()).find(|&i| !record.value(i).is_finite()) {
            return Err(StreamError::NonFinite {
                position_index,
                value_index,
            });
        }
        self.last_position = Some(position_index);
        self.records += 1;
        Ok(Some(RecordRef {
            position_index,
            sampled_token_id,
            width: self.header.value_width,
            payload: &self.buf[RECORD_PREFIX_LEN..],
        }))
    }

    fn read_trailer(&mut self) -> Result<()> {
        let declared = self.read_u32("record count")?;
        let computed = self.hasher.finish();
        let mut b = [0u8; 8];
        self.fill(&mut b, "checksum", false)?;
        let stored = u64::from_le_bytes(b);
        if stored != computed {
            return Err(StreamError::ChecksumMismatch { stored, computed });
        }
        if declared != self.records {
            return Err(StreamError::RecordCountMismatch {
                declared,
                read: self.records,
            });
        }
        let mut probe = [0u8; 1];
        loop {
            match self.source.read(&mut probe) {
                Ok(0) => break,
                Ok(_) => return Err(StreamError::TrailingData { offset: self.offset }),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.finished = true;
        Ok(())
    }

    /// Drains all remaining records, validating structure and checksum.
    pub fn verify(mut self) -> Result<u32> {
        while self.next_record()?.is_some() {}
        Ok(self.records)
    }

    pub fn into_records(self) -> Records<R> {
        Records { reader: self }
    }
}

/// Owned-record iterator. Each item is decoded on demand; the previous one is
/// dropped by the caller.
pub struct Records<R: Read> {
    reader: StreamReader<R>,
}

impl<R: Read> Iterator for Records<R> {
    type Item = Result<PositionRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.reader.next_record() {
            Ok(Some(r)) => Some(Ok(r.to_owned())),
            Ok(None) => None,
            Err(e) => {
                self.reader.finished = true;
                Some(Err(e))
            }
        }
    }
}

/// Reads the header eagerly and returns a lazy record sequence.
pub fn read_stream<R: Read>(source: R) -> Result<(StreamHeader, Records<R>)> {
    let reader = StreamReader::new(source)?;
    let header = reader.header().clone();
    Ok((header, reader.into_records()))
}
