//! `PXPD` patch dump files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PXPD" | version u8 | patch_size u8 | strategy u8 | sequence count u64
//! per sequence:
//!   patch count u32 | truncated u8 | patches (256 bytes each, row-major)
//!   span count u32 | spans (word, first, last as u32)
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Patch, PatchSequence, RenderConfig, Strategy, WordSpan, PATCH_PIXELS, PATCH_SIZE};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PXPD";
const VERSION: u8 = 1;

pub const INK_CONVENTION: &str = "0 = background (white page), 255 = ink (black); EOS patch is all 255";

/// JSON sidecar written next to every dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpSidecar {
    pub config: RenderConfig,
    pub font_version: String,
    pub corpus: String,
    pub ink_convention: String,
    pub sequences: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchDump {
    pub strategy: Strategy,
    pub sequences: Vec<PatchSequence>,
}

fn u32_of(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::precondition(format!("{what} {n} does not fit in 32 bits")))
}

pub fn write_patch_dump<W: Write>(mut w: W, strategy: Strategy, sequences: &[PatchSequence]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, PATCH_SIZE as u8, strategy.code()])?;
    w.write_all(&(sequences.len() as u64).to_le_bytes())?;
    for seq in sequences {
        if seq.strategy() != strategy {
            return Err(Error::precondition(format!(
                "sequence rendered with {} in a {strategy} dump",
                seq.strategy()
            )));
        }
        w.write_all(&u32_of(seq.len(), "patch count")?.to_le_bytes())?;
        w.write_all(&[u8::from(seq.truncated())])?;
        for p in seq.patches() {
            w.write_all(p.pixels())?;
        }
        w.write_all(&u32_of(seq.word_spans().len(), "span count")?.to_le_bytes())?;
        for s in seq.word_spans() {
            for v in [s.word, s.first, s.last] {
                w.write_all(&u32_of(v, "span field")?.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format("patch dump", "unexpected end of file"),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(read_array(r)?) as usize)
}

pub fn read_patch_dump<R: Read>(mut r: R) -> Result<PatchDump> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(Error::format("patch dump", "bad magic"));
    }
    let [version, patch_size, code] = read_array(&mut r)?;
    if version != VERSION {
        return Err(Error::format("patch dump", format!("unsupported version {version}")));
    }
    if patch_size as usize != PATCH_SIZE {
        return Err(Error::format("patch dump", format!("patch size {patch_size}")));
    }
    let strategy =
        Strategy::from_code(code).ok_or_else(|| Error::format("patch dump", format!("strategy code {code}")))?;
    let count = u64::from_le_bytes(read_array(&mut r)?);
    let mut sequences = Vec::new();
    for _ in 0..count {
        let n = read_u32(&mut r)?;
        let [truncated] = read_array(&mut r)?;
        let patches = (0..n)
            .map(|_| read_array::<PATCH_PIXELS, _>(&mut r).map(Patch))
            .collect::<Result<Vec<_>>>()?;
        let spans = (0..read_u32(&mut r)?)
            .map(|_| Ok(WordSpan { word: read_u32(&mut r)?, first: read_u32(&mut r)?, last: read_u32(&mut r)? }))
            .collect::<Result<Vec<_>>>()?;
        sequences.push(PatchSequence::from_parts(strategy, patches, Vec::new(), spans, truncated != 0)?);
    }
    Ok(PatchDump { strategy, sequences })
}
