//! MRtrix `.tck` streamline files.
//!
//! Layout: the line `mrtrix tracks`, then `key: value` lines, then `END`. The
//! `file: . <offset>` entry gives the byte offset of the payload, a flat run of
//! float triplets in the byte order named by `datatype`. A NaN triplet closes
//! each streamline and an infinite triplet ends the data.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian, ReadBytesExt};

use crate::curve::Fiber;
use crate::error::{Error, Result};

pub const MAGIC: &str = "mrtrix tracks";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Float32Le,
    Float32Be,
    Float64Le,
    Float64Be,
}

impl Datatype {
    pub fn as_str(self) -> &'static str {
        match self {
            Datatype::Float32Le => "Float32LE",
            Datatype::Float32Be => "Float32BE",
            Datatype::Float64Le => "Float64LE",
            Datatype::Float64Be => "Float64BE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "Float32LE" => Datatype::Float32Le,
            "Float32BE" => Datatype::Float32Be,
            "Float64LE" => Datatype::Float64Le,
            "Float64BE" => Datatype::Float64Be,
            _ => return None,
        })
    }

    fn width(self) -> usize {
        match self {
            Datatype::Float32Le | Datatype::Float32Be => 4,
            Datatype::Float64Le | Datatype::Float64Be => 8,
        }
    }
}

/// A parsed track file. `header` holds every entry except `datatype` and
/// `file`, in file order; those two are rebuilt on write.
#[derive(Debug, Clone, PartialEq)]
pub struct TckFile {
    pub header: Vec<(String, String)>,
    pub datatype: Datatype,
    pub streamlines: Vec<Vec<[f64; 3]>>,
}

impl TckFile {
    /// New file with a `count` entry.
    pub fn new(streamlines: Vec<Vec<[f64; 3]>>, datatype: Datatype) -> Self {
        TckFile {
            header: vec![("count".into(), streamlines.len().to_string())],
            datatype,
            streamlines,
        }
    }

    pub fn from_fibers(fibers: &[Fiber], datatype: Datatype) -> Self {
        Self::new(fibers.iter().map(|f| f.clone().into()).collect(), datatype)
    }

    /// Streamlines as fibers; streamlines with fewer than two distinct points
    /// are skipped.
    pub fn fibers(&self) -> Vec<Fiber> {
        self.streamlines
            .iter()
            .filter_map(|s| Fiber::from_arrays(s).ok())
            .collect()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn header_text(tck: &TckFile, offset: usize) -> String {
    let mut s = String::from(MAGIC);
    s.push('\n');
    for (k, v) in &tck.header {
        s.push_str(&format!("{k}: {v}\n"));
    }
    s.push_str(&format!("datatype: {}\n", tck.datatype.as_str()));
    s.push_str(&format!("file: . {offset}\n"));
    s.push_str("END\n");
    s
}

/// Serialize to bytes. The payload starts right after the header.
pub fn to_bytes(tck: &TckFile) -> Result<Vec<u8>> {
    for (k, v) in &tck.header {
        if k.is_empty() || k.contains([':', '\n']) || v.contains('\n') || k == "datatype" || k == "file" {
            return Err(Error::BadSpec(format!("header entry {k:?} cannot be written")));
        }
    }
    // The offset is part of the header, so iterate until its digits settle.
    let mut offset = 0;
    let mut head = header_text(tck, offset);
    while head.len() != offset {
        offset = head.len();
        head = header_text(tck, offset);
    }
    let width = tck.datatype.width();
    let points: usize = tck.streamlines.iter().map(|s| s.len() + 1).sum::<usize>() + 1;
    let mut out = head.into_bytes();
    out.reserve(points * 3 * width);
    let mut push = |v: f64| {
        let mut buf = [0u8; 8];
        match tck.datatype {
            Datatype::Float32Le => LittleEndian::write_f32(&mut buf, v as f32),
            Datatype::Float32Be => BigEndian::write_f32(&mut buf, v as f32),
            Datatype::Float64Le => LittleEndian::write_f64(&mut buf, v),
            Datatype::Float64Be => BigEndian::write_f64(&mut buf, v),
        }
        out.extend_from_slice(&buf[..width]);
    };
    for s in &tck.streamlines {
        for p in s {
            p.iter().for_each(|&c| push(c));
        }
        (0..3).for_each(|_| push(f64::NAN));
    }
    (0..3).for_each(|_| push(f64::INFINITY));
    Ok(out)
}

pub fn write_tck(tck: &TckFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(tck)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parse a track file held in memory.
pub fn from_bytes(bytes: &[u8]) -> Result<TckFile> {
    let mut pos = 0usize;
    let next_line = |pos: &mut usize| -> Option<(usize, &[u8])> {
        if *pos >= bytes.len() {
            return None;
        }
        let start = *pos;
        let end = bytes[start..].iter().position(|&b| b == b'\n').map(|i| start + i);
        let line_end = end.unwrap_or(bytes.len());
        *pos = end.map_or(bytes.len(), |e| e + 1);
        let mut line = &bytes[start..line_end];
        if line.last() == Some(&b'\r') {
            line = &line[..line.len() - 1];
        }
        Some((start, line))
    };

    match next_line(&mut pos) {
        Some((_, line)) if line == MAGIC.as_bytes() => {}
        _ => return Err(Error::BadMagic { pos: 0 }),
    }
    let mut header = Vec::new();
    let mut datatype = None;
    let mut offset = None;
    let mut offset_pos = None;
    loop {
        let Some((start, line)) = next_line(&mut pos) else {
            // Ran out of bytes without an END line.
            return Err(Error::BadMagic { pos: bytes.len() as u64 });
        };
        if line == b"END" {
            break;
        }
        let text = std::str::from_utf8(line).map_err(|_| Error::MalformedHeader {
            pos: start as u64,
            line: String::from_utf8_lossy(line).into_owned(),
        })?;
        let Some((key, value)) = text.split_once(": ") else {
            return Err(Error::MalformedHeader {
                pos: start as u64,
                line: text.into(),
            });
        };
        match key {
            "datatype" => {
                datatype = Some(Datatype::parse(value).ok_or_else(|| Error::UnknownDatatype {
                    value: value.into(),
                    pos: start as u64,
                })?)
            }
            "file" => {
                offset_pos = Some(start);
                offset = value
                    .strip_prefix(". ")
                    .and_then(|o| o.trim().parse::<usize>().ok());
            }
            _ => header.push((key.to_string(), value.to_string())),
        }
    }
    let header_end = pos;
    let datatype = datatype.ok_or(Error::UnknownDatatype {
        value: String::new(),
        pos: header_end as u64,
    })?;
    let offset = match offset {
        Some(o) if o >= header_end && o <= bytes.len() => o,
        _ => {
            return Err(Error::MissingOffset {
                pos: offset_pos.unwrap_or(header_end) as u64,
            })
        }
    };

    let mut cur = Cursor::new(&bytes[offset..]);
    let read = |cur: &mut Cursor<&[u8]>| -> Result<[f64; 3]> {
        let at = offset as u64 + cur.position();
        let mut p = [0.0; 3];
        for c in p.iter_mut() {
            let r = match datatype {
                Datatype::Float32Le => cur.read_f32::<LittleEndian>().map(f64::from),
                Datatype::Float32Be => cur.read_f32::<BigEndian>().map(f64::from),
                Datatype::Float64Le => cur.read_f64::<LittleEndian>(),
                Datatype::Float64Be => cur.read_f64::<BigEndian>(),
            };
            *c = r.map_err(|_| Error::TruncatedPayload { pos: at })?;
        }
        Ok(p)
    };
    let mut streamlines = Vec::new();
    let mut current = Vec::new();
    loop {
        let p = read(&mut cur)?;
        if p.iter().any(|c| c.is_infinite()) {
            break;
        }
        if p.iter().any(|c| c.is_nan()) {
            streamlines.push(std::mem::take(&mut current));
        } else {
            current.push(p);
        }
    }
    if !current.is_empty() {
        streamlines.push(current);
    }
    Ok(TckFile {
        header,
        datatype,
        streamlines,
    })
}

pub fn read_tck(path: impl AsRef<Path>) -> Result<TckFile> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
