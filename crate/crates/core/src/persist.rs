//! On-disk forms for co-occurrence and inhibition matrices.
//!
//! Both matrix kinds share one layout in two encodings. The text form is a
//! line-oriented header followed by row-major values (and, for co-occurrence
//! matrices, the valid-track counts). The binary form carries the same fields
//! with little-endian integers and 64-bit floats. Either decodes back to the
//! identical in-memory matrix.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::cooccurrence::CooccurrenceMatrix;
use crate::error::{Error, Result};
use crate::inhibition::{InhibitionMatrix, WeightOrigin};

const TEXT_MAGIC: &str = "tabinhib-matrix";
const BINARY_MAGIC: &[u8; 8] = b"TABINHIB";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFile {
    Cooccurrence(CooccurrenceMatrix),
    Inhibition(InhibitionMatrix),
}

impl MatrixFile {
    pub fn kind(&self) -> &'static str {
        match self {
            MatrixFile::Cooccurrence(_) => "cooccurrence",
            MatrixFile::Inhibition(_) => "inhibition",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MatrixFile::Cooccurrence(m) => m.dim(),
            MatrixFile::Inhibition(m) => m.dim(),
        }
    }

    pub fn into_cooccurrence(self) -> Result<CooccurrenceMatrix> {
        match self {
            MatrixFile::Cooccurrence(m) => Ok(m),
            other => Err(Error::Format(format!("expected a cooccurrence matrix, found {}", other.kind()))),
        }
    }

    pub fn into_inhibition(self) -> Result<InhibitionMatrix> {
        match self {
            MatrixFile::Inhibition(m) => Ok(m),
            other => Err(Error::Format(format!("expected an inhibition matrix, found {}", other.kind()))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Text,
    Binary,
}

impl Encoding {
    /// `.bin` selects the binary form, anything else the text form.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Encoding::Binary,
            _ => Encoding::Text,
        }
    }
}

pub fn encode(file: &MatrixFile, encoding: Encoding) -> Vec<u8> {
    match encoding {
        Encoding::Text => encode_text(file).into_bytes(),
        Encoding::Binary => encode_binary(file),
    }
}

/// Decodes either encoding, detected from the leading magic.
pub fn decode(bytes: &[u8]) -> Result<MatrixFile> {
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(bytes)
    } else if bytes.starts_with(TEXT_MAGIC.as_bytes()) {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
        decode_text(text)
    } else {
        Err(Error::Format("not a matrix file (unknown magic)".into()))
    }
}

pub fn save(path: &Path, file: &MatrixFile) -> Result<()> {
    std::fs::write(path, encode(file, Encoding::for_path(path))).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<MatrixFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

struct Header<'a> {
    dim: usize,
    config_hash: &'a str,
    tracks: u64,
}

fn header(file: &MatrixFile) -> Header<'_> {
    match file {
        MatrixFile::Cooccurrence(m) => Header {
            dim: m.dim(),
            config_hash: &m.config_hash,
            tracks: m.track_count,
        },
        MatrixFile::Inhibition(m) => Header {
            dim: m.dim(),
            config_hash: m.config_hash(),
            tracks: m.track_count(),
        },
    }
}

fn encode_text(file: &MatrixFile) -> String {
    let h = header(file);
    let mut out = String::new();
    writeln!(out, "{TEXT_MAGIC} {VERSION}").unwrap();
    writeln!(out, "kind {}", file.kind()).unwrap();
    writeln!(out, "dim {}", h.dim).unwrap();
    writeln!(out, "config_hash {}", h.config_hash).unwrap();
    writeln!(out, "tracks {}", h.tracks).unwrap();
    let values = match file {
        MatrixFile::Cooccurrence(m) => &m.values,
        MatrixFile::Inhibition(m) => {
            writeln!(out, "boost {}", m.boost()).unwrap();
            writeln!(out, "source {}", m.source().as_str()).unwrap();
            m.weights()
        }
    };
    out.push_str("values\n");
    for row in values.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    if let MatrixFile::Cooccurrence(m) = file {
        out.push_str("counts\n");
        for row in m.valid_track_counts.rows() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
    }
    out
}

struct TextReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> TextReader<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Format("unexpected end of matrix file".into()))
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let (ln, line) = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::Format(format!("line {ln}: expected `{key} <value>`, got `{line}`")))
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.field(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("field `{key}`: cannot parse `{raw}`")))
    }

    fn marker(&mut self, key: &str) -> Result<()> {
        let (ln, line) = self.next_line()?;
        if line != key {
            return Err(Error::Format(format!("line {ln}: expected `{key}`")));
        }
        Ok(())
    }

    fn grid<T: std::str::FromStr + Clone + Default>(&mut self, dim: usize) -> Result<Array2<T>> {
        let mut out = Array2::default((dim, dim));
        for i in 0..dim {
            let (ln, line) = self.next_line()?;
            let cells: Vec<&str> = line.split(' ').collect();
            if cells.len() != dim {
                return Err(Error::Format(format!("line {ln}: expected {dim} values, found {}", cells.len())));
            }
            for (j, c) in cells.into_iter().enumerate() {
                out[[i, j]] = c
                    .parse()
                    .map_err(|_| Error::Format(format!("line {ln}: cannot parse `{c}`")))?;
            }
        }
        Ok(out)
    }
}

fn decode_text(text: &str) -> Result<MatrixFile> {
    let mut r = TextReader {
        lines: text.lines().enumerate(),
    };
    let version: u32 = r.parsed(TEXT_MAGIC)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported matrix version {version}")));
    }
    let kind = r.field("kind")?;
    let dim: usize = r.parsed("dim")?;
    let config_hash = r.field("config_hash")?.to_string();
    let tracks: u64 = r.parsed("tracks")?;
    match kind {
        "cooccurrence" => {
            r.marker("values")?;
            let values = r.grid::<f64>(dim)?;
            r.marker("counts")?;
            let valid_track_counts = r.grid::<u64>(dim)?;
            Ok(MatrixFile::Cooccurrence(CooccurrenceMatrix {
                values,
                valid_track_counts,
                config_hash,
                track_count: tracks,
            }))
        }
        "inhibition" => {
            let boost: u32 = r.parsed("boost")?;
            let source_raw = r.field("source")?;
            let source = WeightOrigin::parse(source_raw)
                .ok_or_else(|| Error::Format(format!("unknown weight source `{source_raw}`")))?;
            r.marker("values")?;
            let weights = r.grid::<f64>(dim)?;
            Ok(MatrixFile::Inhibition(InhibitionMatrix::from_parts(
                weights,
                boost,
                source,
                config_hash,
                tracks,
            )?))
        }
        other => Err(Error::Format(format!("unknown matrix kind `{other}`"))),
    }
}

fn encode_binary(file: &MatrixFile) -> Vec<u8> {
    let h = header(file);
    let mut out = Vec::with_capacity(64 + h.dim * h.dim * 16);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match file {
        MatrixFile::Cooccurrence(_) => 0,
        MatrixFile::Inhibition(_) => 1,
    });
    out.extend_from_slice(&(h.dim as u64).to_le_bytes());
    out.extend_from_slice(&(h.config_hash.len() as u32).to_le_bytes());
    out.extend_from_slice(h.config_hash.as_bytes());
    out.extend_from_slice(&h.tracks.to_le_bytes());
    match file {
        MatrixFile::Cooccurrence(m) => {
            m.values.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            m.valid_track_counts
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        MatrixFile::Inhibition(m) => {
            out.extend_from_slice(&m.boost().to_le_bytes());
            out.push(match m.source() {
                WeightOrigin::Corpus => 0,
                WeightOrigin::StringConstraints => 1,
            });
            m.weights().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
    }
    out
}

/// Little-endian cursor over a byte slice.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated data at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn read_grid<T>(r: &mut ByteReader<'_>, dim: usize, mut read: impl FnMut(&mut ByteReader<'_>) -> Result<T>) -> Result<Array2<T>> {
    let cells = dim
        .checked_mul(dim)
        .ok_or_else(|| Error::Format("matrix dimension overflows".into()))?;
    let mut data = Vec::with_capacity(cells.min(1 << 24));
    for _ in 0..cells {
        data.push(read(r)?);
    }
    Ok(Array2::from_shape_vec((dim, dim), data).expect("length matches"))
}

fn decode_binary(bytes: &[u8]) -> Result<MatrixFile> {
    let mut r = ByteReader::new(bytes);
    r.take(BINARY_MAGIC.len())?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported matrix version {version}")));
    }
    let kind = r.u8()?;
    let dim = r.u64()? as usize;
    let config_hash = r.string()?;
    let tracks = r.u64()?;
    let out = match kind {
        0 => {
            let values = read_grid(&mut r, dim, |r| r.f64())?;
            let valid_track_counts = read_grid(&mut r, dim, |r| r.u64())?;
            MatrixFile::Cooccurrence(CooccurrenceMatrix {
                values,
                valid_track_counts,
                config_hash,
                track_count: tracks,
            })
        }
        1 => {
            let boost = r.u32()?;
            let source = match r.u8()? {
                0 => WeightOrigin::Corpus,
                1 => WeightOrigin::StringConstraints,
                s => return Err(Error::Format(format!("unknown weight source tag {s}"))),
            };
            let weights = read_grid(&mut r, dim, |r| r.f64())?;
            MatrixFile::Inhibition(InhibitionMatrix::from_parts(weights, boost, source, config_hash, tracks)?)
        }
        k => return Err(Error::Format(format!("unknown matrix kind tag {k}"))),
    };
    r.finish()?;
    Ok(out)
}
