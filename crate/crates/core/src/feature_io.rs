//! Per-frame feature streams.
//!
//! Two interchangeable encodings are supported:
//!
//! * **binary** (`.cvst`): a 24-byte header followed by fixed-stride frame
//!   records, all little-endian.
//!
//!   ```text
//!   offset size field
//!   0      4    magic "CVST"
//!   4      4    u32 format version (1)
//!   8      4    u32 dimension D (>= 2)
//!   12     4    u32 frame count (0 = unknown / open-ended)
//!   16     1    u8 dtype (0 = float32)
//!   17     7    zero padding
//!   24     ...  frames: u64 frame_id, f64 timestamp, D x f32
//!   ```
//!
//! * **jsonl**: one object per line, `{"id":0,"t":0.0,"vec":[...]}`.
//!
//! Every vector is L2-normalized exactly once, when a [`FrameFeature`] is
//! constructed. Vectors whose norm is below [`MIN_NORM`] are rejected.

use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CVST";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const MIN_DIMENSION: usize = 2;

/// Raw vectors with a Euclidean norm below this are rejected at ingestion.
pub const MIN_NORM: f64 = 1e-8;

/// A vector whose norm is already within this distance of 1 is stored as-is.
/// This makes normalization idempotent bit-for-bit, so re-reading a written
/// stream reproduces it exactly.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// One frame's identity, timestamp and unit-norm feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeature {
    pub frame_id: u64,
    pub timestamp: f64,
    vector: Vec<f32>,
}

impl FrameFeature {
    /// Builds a frame from a raw vector, normalizing it.
    pub fn new(frame_id: u64, timestamp: f64, raw: Vec<f32>) -> Result<Self> {
        check_timestamp(frame_id, timestamp)?;
        let norm = checked_norm(frame_id, raw.iter().map(|&x| x as f64))?;
        let vector = if (norm - 1.0).abs() <= UNIT_TOLERANCE {
            raw
        } else {
            raw.iter().map(|&x| (x as f64 / norm) as f32).collect()
        };
        Ok(Self {
            frame_id,
            timestamp,
            vector,
        })
    }

    /// Builds a frame from a double-precision vector. Normalization happens
    /// in f64 before rounding to the f32 storage type.
    pub fn from_f64(frame_id: u64, timestamp: f64, raw: &[f64]) -> Result<Self> {
        check_timestamp(frame_id, timestamp)?;
        let norm = checked_norm(frame_id, raw.iter().copied())?;
        let scaled = raw.iter().map(|&x| (x / norm) as f32).collect();
        Self::new(frame_id, timestamp, scaled)
    }

    pub fn vector(&self) -> &[f32] {
        &self.vector
    }

    pub fn dimension(&self) -> usize {
        self.vector.len()
    }

    /// The vector widened to f64, which is what all scoring runs on.
    pub fn to_f64(&self) -> Vec<f64> {
        self.vector.iter().map(|&x| x as f64).collect()
    }
}

fn check_timestamp(frame_id: u64, timestamp: f64) -> Result<()> {
    if !timestamp.is_finite() || timestamp < 0.0 {
        return Err(Error::RejectedFrame {
            frame_id,
            reason: format!("timestamp {timestamp} is not a non-negative finite number"),
        });
    }
    Ok(())
}

fn checked_norm(frame_id: u64, values: impl Iterator<Item = f64>) -> Result<f64> {
    let mut sum = 0.0f64;
    let mut len = 0usize;
    for x in values {
        if !x.is_finite() {
            return Err(Error::RejectedFrame {
                frame_id,
                reason: "vector contains a non-finite value".into(),
            });
        }
        sum += x * x;
        len += 1;
    }
    if len < MIN_DIMENSION {
        return Err(Error::RejectedFrame {
            frame_id,
            reason: format!("dimension {len} is below the minimum of {MIN_DIMENSION}"),
        });
    }
    let norm = sum.sqrt();
    if norm < MIN_NORM {
        return Err(Error::RejectedFrame {
            frame_id,
            reason: format!("vector norm {norm:e} is below {MIN_NORM:e}"),
        });
    }
    Ok(norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    Float32,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::Float32 => 0,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::Float32),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u32,
    pub dimension: usize,
    /// Declared number of frames; 0 means unknown.
    pub frame_count: u32,
    pub dtype: Dtype,
}

impl StreamHeader {
    pub fn new(dimension: usize, frame_count: u32) -> Result<Self> {
        if dimension < MIN_DIMENSION {
            return Err(Error::Argument(format!(
                "dimension must be at least {MIN_DIMENSION}, got {dimension}"
            )));
        }
        if dimension > u32::MAX as usize {
            return Err(Error::Argument(format!("dimension {dimension} too large")));
        }
        Ok(Self {
            version: FORMAT_VERSION,
            dimension,
            frame_count,
            dtype: Dtype::Float32,
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_u32::<LittleEndian>(self.version)?;
        w.write_u32::<LittleEndian>(self.dimension as u32)?;
        w.write_u32::<LittleEndian>(self.frame_count)?;
        w.write_u8(self.dtype.code())?;
        w.write_all(&[0u8; 7])
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; HEADER_LEN];
        r.read_exact(&mut buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::Format("truncated header".into()),
            _ => Error::Io(e),
        })?;
        if buf[0..4] != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:02x?}, expected {:02x?}",
                &buf[0..4],
                MAGIC
            )));
        }
        let mut fields = &buf[4..16];
        let version = fields.read_u32::<LittleEndian>()?;
        let dimension = fields.read_u32::<LittleEndian>()? as usize;
        let frame_count = fields.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        if dimension < MIN_DIMENSION {
            return Err(Error::Format(format!(
                "header dimension {dimension} is below {MIN_DIMENSION}"
            )));
        }
        let dtype = Dtype::from_code(buf[16])
            .ok_or_else(|| Error::Format(format!("unknown dtype code {}", buf[16])))?;
        if buf[17..].iter().any(|&b| b != 0) {
            return Err(Error::Format("non-zero header padding".into()));
        }
        Ok(Self {
            version,
            dimension,
            frame_count,
            dtype,
        })
    }

    /// Size in bytes of one frame record.
    pub fn frame_stride(&self) -> usize {
        16 + 4 * self.dimension
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Binary,
    Jsonl,
}

impl StreamFormat {
    /// Guesses the format from a file extension: `.jsonl`/`.json` is JSONL,
    /// anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => StreamFormat::Jsonl,
            _ => StreamFormat::Binary,
        }
    }
}

impl FromStr for StreamFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "bin" | "cvst" => Ok(StreamFormat::Binary),
            "jsonl" => Ok(StreamFormat::Jsonl),
            other => Err(Error::Config(format!("unknown stream format '{other}'"))),
        }
    }
}

impl fmt::Display for StreamFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamFormat::Binary => "binary",
            StreamFormat::Jsonl => "jsonl",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct JsonFrame {
    id: u64,
    t: f64,
    vec: Vec<f32>,
}

enum Source<R> {
    Binary { reader: R, header: StreamHeader },
    Jsonl { lines: io::Lines<BufReader<R>>, line_no: usize },
}

/// Iterator over the frames of a stream. Yields `Err` once and then stops.
pub struct StreamReader<R: Read> {
    source: Source<R>,
    dimension: Option<usize>,
    last_id: Option<u64>,
    read: u64,
    done: bool,
}

/// Opens a stream for reading. For the binary format the header is parsed
/// immediately.
pub fn read_stream<R: Read>(source: R, format: StreamFormat) -> Result<StreamReader<R>> {
    let (source, dimension) = match format {
        StreamFormat::Binary => {
            let mut reader = source;
            let header = StreamHeader::read_from(&mut reader)?;
            let dim = header.dimension;
            (Source::Binary { reader, header }, Some(dim))
        }
        StreamFormat::Jsonl => (
            Source::Jsonl {
                lines: BufReader::new(source).lines(),
                line_no: 0,
            },
            None,
        ),
    };
    Ok(StreamReader {
        source,
        dimension,
        last_id: None,
        read: 0,
        done: false,
    })
}

/// Reads a whole stream from a file, choosing the format by extension.
pub fn read_stream_file(path: &Path) -> Result<Vec<FrameFeature>> {
    let file = std::fs::File::open(path)?;
    read_stream(io::BufReader::new(file), StreamFormat::from_path(path))?.collect()
}

impl<R: Read> StreamReader<R> {
    /// The stream dimension, once known (immediately for binary streams,
    /// after the first frame for JSONL).
    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn header(&self) -> Option<&StreamHeader> {
        match &self.source {
            Source::Binary { header, .. } => Some(header),
            Source::Jsonl { .. } => None,
        }
    }

    fn next_binary(reader: &mut R, header: &StreamHeader, read: u64) -> Result<Option<FrameFeature>> {
        let declared = header.frame_count as u64;
        let mut record = vec![0u8; header.frame_stride()];
        let filled = read_full(reader, &mut record)?;
        if filled == 0 {
            if declared != 0 && read != declared {
                return Err(Error::Corruption(format!(
                    "header declares {declared} frames but stream ended after {read}"
                )));
            }
            return Ok(None);
        }
        if filled < record.len() {
            return Err(Error::Corruption(format!(
                "truncated frame record {read}: {filled} of {} bytes",
                record.len()
            )));
        }
        if declared != 0 && read >= declared {
            return Err(Error::Corruption(format!(
                "stream holds more than the {declared} declared frames"
            )));
        }
        let mut cur = &record[..];
        let frame_id = cur.read_u64::<LittleEndian>()?;
        let timestamp = cur.read_f64::<LittleEndian>()?;
        let mut raw = vec![0f32; header.dimension];
        cur.read_f32_into::<LittleEndian>(&mut raw)?;
        FrameFeature::new(frame_id, timestamp, raw).map(Some)
    }

    fn next_frame(&mut self) -> Result<Option<FrameFeature>> {
        let frame = match &mut self.source {
            Source::Binary { reader, header } => Self::next_binary(reader, header, self.read)?,
            Source::Jsonl { lines, line_no } => loop {
                let Some(line) = lines.next() else { break None };
                *line_no += 1;
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: JsonFrame = serde_json::from_str(&line)
                    .map_err(|e| Error::Format(format!("line {line_no}: {e}")))?;
                if let Some(dim) = self.dimension {
                    if parsed.vec.len() != dim {
                        return Err(Error::Corruption(format!(
                            "line {line_no}: dimension {} differs from stream dimension {dim}",
                            parsed.vec.len()
                        )));
                    }
                }
                let frame = FrameFeature::new(parsed.id, parsed.t, parsed.vec)?;
                self.dimension = Some(frame.dimension());
                break Some(frame);
            },
        };
        if let Some(f) = &frame {
            if let Some(last) = self.last_id {
                if f.frame_id <= last {
                    return Err(Error::Corruption(format!(
                        "frame_id {} does not increase past {last}",
                        f.frame_id
                    )));
                }
            }
            self.last_id = Some(f.frame_id);
            self.read += 1;
        }
        Ok(frame)
    }
}

/// Like `read_exact` but reports how many bytes were available at EOF.
fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> Iterator for StreamReader<R> {
    type Item = Result<FrameFeature>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_frame() {
            Ok(Some(frame)) => Some(Ok(frame)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Writes frames incrementally. For the binary format the header is written
/// up front with the given frame count (0 when unknown).
pub struct StreamWriter<W: Write> {
    sink: W,
    format: StreamFormat,
    dimension: usize,
    written: usize,
}

impl<W: Write> StreamWriter<W> {
    pub fn new(mut sink: W, format: StreamFormat, dimension: usize, frame_count: u32) -> Result<Self> {
        let header = StreamHeader::new(dimension, frame_count)?;
        if format == StreamFormat::Binary {
            header.write_to(&mut sink)?;
        }
        Ok(Self {
            sink,
            format,
            dimension,
            written: 0,
        })
    }

    pub fn write_frame(&mut self, frame: &FrameFeature) -> Result<()> {
        if frame.dimension() != self.dimension {
            return Err(Error::Argument(format!(
                "frame {} has dimension {}, stream dimension is {}",
                frame.frame_id,
                frame.dimension(),
                self.dimension
            )));
        }
        match self.format {
            StreamFormat::Binary => {
                self.sink.write_u64::<LittleEndian>(frame.frame_id)?;
                self.sink.write_f64::<LittleEndian>(frame.timestamp)?;
                for &x in frame.vector() {
                    self.sink.write_f32::<LittleEndian>(x)?;
                }
            }
            StreamFormat::Jsonl => {
                let line = serde_json::to_string(&JsonFrame {
                    id: frame.frame_id,
                    t: frame.timestamp,
                    vec: frame.vector.clone(),
                })
                .map_err(io::Error::other)?;
                self.sink.write_all(line.as_bytes())?;
                self.sink.write_all(b"\n")?;
            }
        }
        self.written += 1;
        Ok(())
    }

    /// Flushes the sink and returns the number of frames written.
    pub fn finish(mut self) -> Result<usize> {
        self.sink.flush()?;
        Ok(self.written)
    }
}

/// Writes a complete stream. An empty sequence produces a header-only binary
/// stream with dimension [`MIN_DIMENSION`] (or an empty JSONL file).
pub fn write_stream<W: Write>(frames: &[FrameFeature], sink: W, format: StreamFormat) -> Result<usize> {
    let dimension = frames.first().map_or(MIN_DIMENSION, FrameFeature::dimension);
    if let Some(bad) = frames.iter().find(|f| f.dimension() != dimension) {
        return Err(Error::Argument(format!(
            "mixed dimensions: frame {} has {}, expected {dimension}",
            bad.frame_id,
            bad.dimension()
        )));
    }
    let count = u32::try_from(frames.len())
        .map_err(|_| Error::Argument("too many frames for one binary stream".into()))?;
    let mut writer = StreamWriter::new(sink, format, dimension, count)?;
    for frame in frames {
        writer.write_frame(frame)?;
    }
    writer.finish()
}

pub fn write_stream_file(path: &Path, frames: &[FrameFeature]) -> Result<usize> {
    let file = std::fs::File::create(path)?;
    write_stream(frames, io::BufWriter::new(file), StreamFormat::from_path(path))
}
