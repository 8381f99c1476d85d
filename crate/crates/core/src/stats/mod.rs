//! Exact corpus statistics over rendered patches: unique-patch growth,
//! most frequent patches, sequence-length histograms, and word frequencies.

mod words;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::corpus::{map_sharded, render_all};
use crate::error::{Error, Result};
use crate::raster::{FontAtlas, INK};
use crate::render::{render, Patch, PatchSequence, RenderConfig, PATCH_SIZE};

pub use words::{frequency_buckets, tokenize_words, CaseMode, FrequencyBuckets, WordFrequencyTable};

/// Lines rendered per parallel block when streaming a corpus.
const BLOCK: usize = 4096;

/// Exact patch-content → count table. Keys are the full 256 pixel bytes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PatchAccumulator {
    table: HashMap<Patch, u64>,
    total: u64,
    sequences: u64,
}

impl PatchAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts every patch of `seq`, blanks and EOS included.
    pub fn ingest(&mut self, seq: &PatchSequence) {
        for p in seq.patches() {
            *self.table.entry(*p).or_insert(0) += 1;
        }
        self.total += seq.len() as u64;
        self.sequences += 1;
    }

    pub fn merge(&mut self, other: PatchAccumulator) {
        for (p, n) in other.table {
            *self.table.entry(p).or_insert(0) += n;
        }
        self.total += other.total;
        self.sequences += other.sequences;
    }

    pub fn unique(&self) -> usize {
        self.table.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn sequences(&self) -> u64 {
        self.sequences
    }

    pub fn count(&self, patch: &Patch) -> u64 {
        self.table.get(patch).copied().unwrap_or(0)
    }

    /// The `k` most frequent patches, ties broken by ascending pixel bytes.
    pub fn top_k(&self, k: usize) -> Result<Vec<(Patch, u64)>> {
        if k == 0 {
            return Err(Error::precondition("top_k requires k >= 1"));
        }
        let mut all: Vec<(Patch, u64)> = self.table.iter().map(|(p, n)| (*p, *n)).collect();
        all.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        all.truncate(k);
        Ok(all)
    }
}

/// Renders and ingests a corpus, one private accumulator per worker, merged
/// at the end.
pub fn accumulate<S: AsRef<str> + Sync>(
    lines: &[S],
    cfg: &RenderConfig,
    font: &FontAtlas,
    workers: usize,
) -> Result<PatchAccumulator> {
    cfg.validate()?;
    let shards: Vec<&[S]> = lines.chunks(lines.len().div_ceil(workers.max(1)).max(1)).collect();
    let partial = map_sharded(&shards, workers, |shard| -> Result<PatchAccumulator> {
        let mut acc = PatchAccumulator::new();
        for l in shard.iter() {
            acc.ingest(&render(l.as_ref(), cfg, font)?);
        }
        Ok(acc)
    });
    let mut acc = PatchAccumulator::new();
    for p in partial {
        acc.merge(p?);
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CurvePoint {
    pub sequences: u64,
    pub unique_patches: u64,
    pub total_patches: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct UniqueCurve {
    pub points: Vec<CurvePoint>,
    /// Set when a checkpoint lay beyond the corpus; the last point is then
    /// the corpus end.
    pub exhausted: bool,
}

impl UniqueCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "sequences,unique_patches,total_patches")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.sequences, p.unique_patches, p.total_patches)?;
        }
        Ok(())
    }
}

/// Unique-patch count after each checkpoint (number of sequences processed).
pub fn unique_curve<S: AsRef<str> + Sync>(
    lines: &[S],
    cfg: &RenderConfig,
    font: &FontAtlas,
    checkpoints: &[u64],
    workers: usize,
) -> Result<UniqueCurve> {
    if checkpoints.first() == Some(&0) || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::precondition("checkpoints must be positive and strictly increasing"));
    }
    let mut curve = UniqueCurve::default();
    let mut acc = PatchAccumulator::new();
    let mut next = checkpoints.iter().peekable();
    let point = |acc: &PatchAccumulator| CurvePoint {
        sequences: acc.sequences(),
        unique_patches: acc.unique() as u64,
        total_patches: acc.total(),
    };
    let needed = checkpoints.last().map_or(0, |&c| (c as usize).min(lines.len()));
    for block in lines[..needed].chunks(BLOCK) {
        for seq in render_all(block, cfg, font, workers)? {
            acc.ingest(&seq);
            if next.peek().is_some_and(|&&c| c == acc.sequences()) {
                curve.points.push(point(&acc));
                next.next();
            }
        }
    }
    if next.peek().is_some() {
        curve.exhausted = true;
        if curve.points.last().map(|p| p.sequences) != Some(acc.sequences()) {
            curve.points.push(point(&acc));
        }
    }
    Ok(curve)
}

/// Sequence length (EOS included) → number of sequences.
pub fn length_histogram<S: AsRef<str> + Sync>(
    lines: &[S],
    cfg: &RenderConfig,
    font: &FontAtlas,
    workers: usize,
) -> Result<BTreeMap<usize, u64>> {
    cfg.validate()?;
    let lengths = map_sharded(lines, workers, |l| render(l.as_ref(), cfg, font).map(|s| s.len()));
    let mut hist = BTreeMap::new();
    for n in lengths {
        *hist.entry(n?).or_insert(0) += 1;
    }
    Ok(hist)
}

pub fn histogram_mean(hist: &BTreeMap<usize, u64>) -> f64 {
    let n: u64 = hist.values().sum();
    let sum: u64 = hist.iter().map(|(len, c)| *len as u64 * c).sum();
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

pub fn write_histogram_csv<W: Write>(mut w: W, hist: &BTreeMap<usize, u64>) -> Result<()> {
    writeln!(w, "length,count")?;
    for (len, c) in hist {
        writeln!(w, "{len},{c}")?;
    }
    Ok(())
}

/// Binary PGM (`P5 16 16 255`) of one patch. Values are inverted so that
/// ink shows dark on a light page in ordinary image viewers.
pub fn patch_pgm(patch: &Patch) -> Vec<u8> {
    let mut out = format!("P5\n{PATCH_SIZE} {PATCH_SIZE}\n255\n").into_bytes();
    out.extend(patch.pixels().iter().map(|&p| INK - p));
    out
}

/// File name for the patch at 1-based `rank` in a top-k export.
pub fn topk_file_name(rank: usize, count: u64) -> String {
    format!("rank_{rank}_count_{count}.pgm")
}
