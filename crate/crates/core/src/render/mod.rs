//! The four rendering strategies: text in, fixed-size patch sequence out.
//!
//! * `Continuous` rasterises the whole line proportionally and slices it every
//!   16 columns.
//! * `Mono` does the same with a fixed 8-pixel advance, so every patch holds
//!   two grapheme clusters.
//! * `Words` starts every whitespace-delimited word on a patch boundary.
//! * `Bigrams` draws each pair of grapheme clusters of a word into its own
//!   patch, left-aligned.
//!
//! Structured strategies (`Words`, `Bigrams`) start the next word at the first
//! patch boundary at least `min_whitespace` pixels past the previous word's
//! ink, which occasionally leaves a blank patch between words. Every sequence
//! ends with the all-ink EOS patch and holds at most `max_patches` patches.

mod dump;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{self, AdvanceMode, FontAtlas, Glyph, LineImage, BACKGROUND, INK, LINE_HEIGHT, MONO_ADVANCE};

pub use dump::{read_patch_dump, write_patch_dump, DumpSidecar, PatchDump, INK_CONVENTION};

pub const PATCH_SIZE: usize = 16;
pub const PATCH_PIXELS: usize = PATCH_SIZE * PATCH_SIZE;
/// Sequence cap, EOS included.
pub const MAX_PATCHES: usize = 529;
pub const MIN_WHITESPACE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Continuous,
    Bigrams,
    Mono,
    Words,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Continuous, Strategy::Bigrams, Strategy::Mono, Strategy::Words];

    /// One-byte code used in patch dumps.
    pub fn code(self) -> u8 {
        match self {
            Strategy::Continuous => 0,
            Strategy::Bigrams => 1,
            Strategy::Mono => 2,
            Strategy::Words => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Strategy::ALL.into_iter().find(|s| s.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Continuous => "continuous",
            Strategy::Bigrams => "bigrams",
            Strategy::Mono => "mono",
            Strategy::Words => "words",
        }
    }

    /// Whether words are aligned to patch boundaries.
    pub fn is_structured_by_word(self) -> bool {
        matches!(self, Strategy::Bigrams | Strategy::Words)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::precondition(format!("unknown strategy {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub patch_size: usize,
    pub max_patches: usize,
    pub min_whitespace: usize,
    pub strategy: Strategy,
}

impl RenderConfig {
    pub fn new(strategy: Strategy) -> Self {
        RenderConfig { patch_size: PATCH_SIZE, max_patches: MAX_PATCHES, min_whitespace: MIN_WHITESPACE, strategy }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size != PATCH_SIZE {
            return Err(Error::precondition(format!("patch_size must be {PATCH_SIZE}, got {}", self.patch_size)));
        }
        if self.max_patches < 2 {
            return Err(Error::precondition("max_patches must be at least 2"));
        }
        if self.min_whitespace < 1 {
            return Err(Error::precondition("min_whitespace must be at least 1"));
        }
        Ok(())
    }

    pub fn content_cap(&self) -> usize {
        self.max_patches - 1
    }
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig::new(Strategy::Bigrams)
    }
}

/// One 16x16 grayscale tile, row-major.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Patch(pub [u8; PATCH_PIXELS]);

impl Patch {
    pub fn blank() -> Self {
        Patch([BACKGROUND; PATCH_PIXELS])
    }

    /// The terminal patch: every pixel at full ink.
    pub fn eos() -> Self {
        Patch([INK; PATCH_PIXELS])
    }

    pub fn pixels(&self) -> &[u8; PATCH_PIXELS] {
        &self.0
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.0[y * PATCH_SIZE + x]
    }

    pub fn is_blank(&self) -> bool {
        self.0.iter().all(|&p| p == BACKGROUND)
    }

    pub fn is_eos(&self) -> bool {
        self.0.iter().all(|&p| p == INK)
    }

    /// Cuts the 16 columns starting at `x0` out of `line`, padding past its end.
    fn from_line(line: &LineImage, x0: usize) -> Self {
        let mut patch = Patch::blank();
        let end = (x0 + PATCH_SIZE).min(line.width());
        for y in 0..LINE_HEIGHT {
            for x in x0..end {
                patch.0[y * PATCH_SIZE + x - x0] = line.pixel(x, y);
            }
        }
        patch
    }

    /// Draws `glyph` at column `x`, clipped to the patch. Returns whether ink was lost.
    fn blit(&mut self, glyph: &Glyph, x: usize) -> bool {
        let visible = glyph.ink_width().min(PATCH_SIZE.saturating_sub(x));
        for y in 0..LINE_HEIGHT {
            for gx in 0..visible {
                let v = glyph.pixel(gx, y);
                if v != BACKGROUND {
                    let slot = &mut self.0[y * PATCH_SIZE + x + gx];
                    *slot = (*slot).max(v);
                }
            }
        }
        visible < glyph.ink_width()
    }
}

impl fmt::Debug for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Patch[")?;
        for row in self.0.chunks(PATCH_SIZE) {
            let s: String = row.iter().map(|&p| if p == BACKGROUND { '.' } else { '#' }).collect();
            writeln!(f, "  {s}")?;
        }
        write!(f, "]")
    }
}

/// Closed range of patch indices covered by one word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpan {
    pub word: usize,
    pub first: usize,
    pub last: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchSequence {
    strategy: Strategy,
    patches: Vec<Patch>,
    words: Vec<String>,
    spans: Vec<WordSpan>,
    truncated: bool,
    overflow_events: usize,
}

impl PatchSequence {
    /// Reassembles a sequence read back from a dump. Word strings are not
    /// stored in dumps, so `words` may be empty.
    pub fn from_parts(
        strategy: Strategy,
        patches: Vec<Patch>,
        words: Vec<String>,
        spans: Vec<WordSpan>,
        truncated: bool,
    ) -> Result<Self> {
        match patches.last() {
            Some(p) if p.is_eos() => {}
            _ => return Err(Error::format("patch sequence", "last patch must be EOS")),
        }
        let content = patches.len() - 1;
        if let Some(s) = spans.iter().find(|s| s.first > s.last || s.last >= content) {
            return Err(Error::format("patch sequence", format!("word span {s:?} outside content")));
        }
        Ok(PatchSequence { strategy, patches, words, spans, truncated, overflow_events: 0 })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    /// Patches before EOS.
    pub fn content(&self) -> &[Patch] {
        &self.patches[..self.patches.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn content_len(&self) -> usize {
        self.patches.len() - 1
    }

    pub fn eos_index(&self) -> usize {
        self.patches.len() - 1
    }

    /// All whitespace-delimited words of the source text, truncated or not.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_spans(&self) -> &[WordSpan] {
        &self.spans
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Number of bigram cells whose ink did not fit in 16 columns.
    pub fn overflow_events(&self) -> usize {
        self.overflow_events
    }
}

/// Grapheme-cluster view of a text with its words.
struct Layout<'a> {
    clusters: Vec<&'a str>,
    /// `[start, end)` cluster ranges of whitespace-delimited words.
    words: Vec<(usize, usize)>,
}

impl<'a> Layout<'a> {
    fn new(text: &'a str) -> Self {
        let clusters: Vec<&str> = raster::clusters(text).collect();
        let mut words = Vec::new();
        let mut start = None;
        for (i, c) in clusters.iter().enumerate() {
            let ws = c.chars().next().is_some_and(char::is_whitespace);
            match (ws, start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    words.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            words.push((s, clusters.len()));
        }
        Layout { clusters, words }
    }

    fn word_strings(&self) -> Vec<String> {
        self.words.iter().map(|&(s, e)| self.clusters[s..e].concat()).collect()
    }
}

/// Greedy left-to-right pairing of a word's grapheme clusters.
pub fn segment_word_bigrams(word: &str) -> Vec<String> {
    let word = raster::nfc(word);
    let clusters: Vec<&str> = raster::clusters(&word).collect();
    clusters.chunks(2).map(|c| c.concat()).collect()
}

/// Renders `text` under `cfg.strategy`.
pub fn render(text: &str, cfg: &RenderConfig, font: &FontAtlas) -> Result<PatchSequence> {
    cfg.validate()?;
    let text = raster::nfc(text);
    let layout = Layout::new(&text);
    let (content, spans, overflow_events) = match cfg.strategy {
        Strategy::Continuous => render_line(&layout, font, AdvanceMode::Proportional),
        Strategy::Mono => render_line(&layout, font, AdvanceMode::Mono),
        Strategy::Words => render_words(&layout, font, cfg.min_whitespace),
        Strategy::Bigrams => render_bigrams(&layout, font, cfg.min_whitespace),
    };
    Ok(finish(cfg, content, layout.word_strings(), spans, overflow_events))
}

fn finish(
    cfg: &RenderConfig,
    mut patches: Vec<Patch>,
    words: Vec<String>,
    mut spans: Vec<WordSpan>,
    overflow_events: usize,
) -> PatchSequence {
    let cap = cfg.content_cap();
    let truncated = patches.len() > cap;
    if truncated {
        patches.truncate(cap);
        spans.retain(|s| s.last < cap);
    }
    patches.push(Patch::eos());
    PatchSequence { strategy: cfg.strategy, patches, words, spans, truncated, overflow_events }
}

fn slice_line(line: &LineImage) -> Vec<Patch> {
    (0..line.width().div_ceil(PATCH_SIZE)).map(|i| Patch::from_line(line, i * PATCH_SIZE)).collect()
}

/// Inclusive ink column range of the glyphs of one word, placed at `xs`.
fn ink_extent<'g>(placed: impl Iterator<Item = (usize, &'g Glyph)>) -> Option<(usize, usize)> {
    placed
        .filter(|(_, g)| g.has_ink())
        .map(|(x, g)| (x + g.ink_left(), x + g.ink_width() - 1))
        .reduce(|(lo, hi), (l, h)| (lo.min(l), hi.max(h)))
}

/// Unstructured strategies: one line image sliced every 16 columns.
fn render_line(layout: &Layout<'_>, font: &FontAtlas, mode: AdvanceMode) -> (Vec<Patch>, Vec<WordSpan>, usize) {
    let glyphs: Vec<&Glyph> = layout.clusters.iter().map(|c| font.cluster_glyph(c)).collect();
    let mut xs = Vec::with_capacity(glyphs.len());
    let mut x = 0;
    for g in &glyphs {
        xs.push(x);
        x += g.advance(mode);
    }
    let clip = match mode {
        AdvanceMode::Proportional => raster::MAX_GLYPH_WIDTH,
        AdvanceMode::Mono => MONO_ADVANCE,
    };
    let mut line = LineImage::blank(x);
    for (g, &gx) in glyphs.iter().zip(&xs) {
        line.blit(g, gx, clip);
    }
    let spans = layout
        .words
        .iter()
        .enumerate()
        .filter_map(|(word, &(s, e))| {
            let placed = (s..e).map(|i| (xs[i], glyphs[i]));
            let (lo, hi) = match mode {
                AdvanceMode::Proportional => ink_extent(placed)?,
                AdvanceMode::Mono => {
                    let (lo, hi) = ink_extent(placed)?;
                    // Mono ink is clipped to each 8-pixel cell.
                    let cell_end = xs[e - 1] + MONO_ADVANCE - 1;
                    (lo, hi.min(cell_end))
                }
            };
            Some(WordSpan { word, first: lo / PATCH_SIZE, last: hi / PATCH_SIZE })
        })
        .collect();
    (slice_line(&line), spans, 0)
}

/// Smallest patch index whose left edge is at least `min_ws` columns past `ink_end`.
fn next_word_patch(ink_end: usize, min_ws: usize) -> usize {
    (ink_end + min_ws).div_ceil(PATCH_SIZE)
}

fn render_words(layout: &Layout<'_>, font: &FontAtlas, min_ws: usize) -> (Vec<Patch>, Vec<WordSpan>, usize) {
    let mut placed: Vec<(usize, &Glyph)> = Vec::new();
    let mut spans = Vec::with_capacity(layout.words.len());
    let mut start_patch = 0;
    let mut end = 0;
    for (word, &(s, e)) in layout.words.iter().enumerate() {
        let x0 = start_patch * PATCH_SIZE;
        let mut x = x0;
        let first_glyph = placed.len();
        for c in &layout.clusters[s..e] {
            let g = font.cluster_glyph(c);
            placed.push((x, g));
            x += g.advance_proportional();
        }
        // One past the last inked column; blank words keep their advance.
        let ink_end = ink_extent(placed[first_glyph..].iter().copied()).map_or(x, |(_, hi)| hi + 1);
        spans.push(WordSpan { word, first: start_patch, last: (ink_end.max(x0 + 1) - 1) / PATCH_SIZE });
        end = ink_end.max(x0 + 1);
        start_patch = next_word_patch(ink_end, min_ws);
    }
    let mut line = LineImage::blank(end.div_ceil(PATCH_SIZE) * PATCH_SIZE);
    for (x, g) in placed {
        line.blit(g, x, raster::MAX_GLYPH_WIDTH);
    }
    (slice_line(&line), spans, 0)
}

fn render_bigrams(layout: &Layout<'_>, font: &FontAtlas, min_ws: usize) -> (Vec<Patch>, Vec<WordSpan>, usize) {
    let mut patches = Vec::new();
    let mut spans = Vec::with_capacity(layout.words.len());
    let mut overflow = 0;
    for (word, &(s, e)) in layout.words.iter().enumerate() {
        if let Some(last) = spans.last().map(|sp: &WordSpan| sp.last) {
            let ink_end = last * PATCH_SIZE + bigram_ink_end(&patches[last]);
            patches.resize(next_word_patch(ink_end, min_ws), Patch::blank());
        }
        let first = patches.len();
        for group in layout.clusters[s..e].chunks(2) {
            let mut patch = Patch::blank();
            let mut x = 0;
            let mut clipped = false;
            for c in group {
                let g = font.cluster_glyph(c);
                clipped |= patch.blit(g, x);
                x += g.advance_proportional();
            }
            overflow += usize::from(clipped);
            patches.push(patch);
        }
        spans.push(WordSpan { word, first, last: patches.len() - 1 });
    }
    (patches, spans, overflow)
}

/// One past the rightmost inked column of a bigram cell, `0` if blank.
fn bigram_ink_end(patch: &Patch) -> usize {
    (0..PATCH_SIZE)
        .rev()
        .find(|&x| (0..PATCH_SIZE).any(|y| patch.pixel(x, y) != BACKGROUND))
        .map_or(0, |x| x + 1)
}

/// `(word, first_patch, last_patch)` for every word that survived truncation.
pub fn word_patch_spans(seq: &PatchSequence) -> Vec<(&str, usize, usize)> {
    seq.spans
        .iter()
        .map(|s| (seq.words.get(s.word).map_or("", String::as_str), s.first, s.last))
        .collect()
}

#[cfg(test)]
mod tests;
