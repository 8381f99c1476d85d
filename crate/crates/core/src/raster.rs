//! Deterministic text rasterisation onto a 16-pixel-tall line.
//!
//! The built-in atlas is compiled from `font/glyphs.txt`. Pixels use the
//! convention `0 = background`, `255 = ink`. Other font backends plug in by
//! building a [`FontAtlas`] from their own glyph bitmaps.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::sync::OnceLock;

use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};
use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};

mod table {
    include!(concat!(env!("OUT_DIR"), "/glyph_table.rs"));
}

/// Height of every line image and glyph cell.
pub const LINE_HEIGHT: usize = 16;
/// Widest glyph a [`Glyph`] can hold.
pub const MAX_GLYPH_WIDTH: usize = 16;
/// Fixed advance of every glyph in monospaced mode.
pub const MONO_ADVANCE: usize = 8;
/// Proportional advance of whitespace.
pub const SPACE_ADVANCE: usize = 3;
/// Identifier of the compiled-in font table, recorded in dump sidecars.
pub const FONT_VERSION: &str = "builtin-x11-6x10-latin1/1";

pub const INK: u8 = 255;
pub const BACKGROUND: u8 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvanceMode {
    Proportional,
    Mono,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Glyph {
    codepoint: char,
    /// 16x16 cell, row-major; ink only in columns `[0, ink_width)`.
    bitmap: [u8; LINE_HEIGHT * MAX_GLYPH_WIDTH],
    ink_left: usize,
    ink_width: usize,
}

impl Glyph {
    /// Builds a glyph from a 16x16 row-major grayscale cell.
    pub fn from_bitmap(codepoint: char, bitmap: [u8; LINE_HEIGHT * MAX_GLYPH_WIDTH]) -> Self {
        let inked = |x: &usize| (0..LINE_HEIGHT).any(|y| bitmap[y * MAX_GLYPH_WIDTH + x] != BACKGROUND);
        let ink_width = (0..MAX_GLYPH_WIDTH).rev().find(inked).map_or(0, |x| x + 1);
        let ink_left = (0..MAX_GLYPH_WIDTH).find(inked).unwrap_or(0);
        Glyph { codepoint, bitmap, ink_left, ink_width }
    }

    fn from_rows(codepoint: char, rows: &[u8; LINE_HEIGHT]) -> Self {
        let mut bitmap = [BACKGROUND; LINE_HEIGHT * MAX_GLYPH_WIDTH];
        for (y, row) in rows.iter().enumerate() {
            for x in 0..8 {
                if row & (1 << x) != 0 {
                    bitmap[y * MAX_GLYPH_WIDTH + x] = INK;
                }
            }
        }
        Self::from_bitmap(codepoint, bitmap)
    }

    pub fn codepoint(&self) -> char {
        self.codepoint
    }

    pub fn ink_width(&self) -> usize {
        self.ink_width
    }

    /// Leftmost inked column, `0` for blank glyphs.
    pub fn ink_left(&self) -> usize {
        self.ink_left
    }

    pub fn has_ink(&self) -> bool {
        self.ink_width > 0
    }

    /// `ink_width + 1`, or [`SPACE_ADVANCE`] for blank glyphs.
    pub fn advance_proportional(&self) -> usize {
        if self.has_ink() {
            self.ink_width + 1
        } else {
            SPACE_ADVANCE
        }
    }

    pub fn advance_mono(&self) -> usize {
        MONO_ADVANCE
    }

    pub fn advance(&self, mode: AdvanceMode) -> usize {
        match mode {
            AdvanceMode::Proportional => self.advance_proportional(),
            AdvanceMode::Mono => self.advance_mono(),
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.bitmap[y * MAX_GLYPH_WIDTH + x]
    }
}

/// Immutable codepoint → glyph map with a `.notdef` fallback.
#[derive(Clone, Debug)]
pub struct FontAtlas {
    glyphs: BTreeMap<char, Glyph>,
    notdef: Glyph,
    space: Glyph,
}

impl FontAtlas {
    /// Builds an atlas from arbitrary glyphs. `notdef` must carry ink.
    pub fn from_glyphs(glyphs: impl IntoIterator<Item = Glyph>, notdef: Glyph) -> Result<Self> {
        if !notdef.has_ink() {
            return Err(Error::precondition("notdef glyph must carry ink"));
        }
        let glyphs: BTreeMap<char, Glyph> = glyphs.into_iter().map(|g| (g.codepoint, g)).collect();
        let space = glyphs
            .get(&' ')
            .cloned()
            .unwrap_or_else(|| Glyph::from_bitmap(' ', [BACKGROUND; LINE_HEIGHT * MAX_GLYPH_WIDTH]));
        Ok(FontAtlas { glyphs, notdef, space })
    }

    pub fn lookup(&self, c: char) -> &Glyph {
        self.glyphs.get(&c).unwrap_or(&self.notdef)
    }

    pub fn notdef(&self) -> &Glyph {
        &self.notdef
    }

    pub fn covers(&self, c: char) -> bool {
        self.glyphs.contains_key(&c)
    }

    pub fn coverage(&self) -> impl Iterator<Item = char> + '_ {
        self.glyphs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    /// Glyph drawn for one extended grapheme cluster: whitespace clusters map
    /// to the space glyph, anything else to the glyph of its base character.
    /// Combining marks that survive NFC are not drawn.
    pub fn cluster_glyph(&self, cluster: &str) -> &Glyph {
        match cluster.chars().next() {
            Some(c) if c.is_whitespace() => &self.space,
            Some(c) => self.lookup(c),
            None => &self.space,
        }
    }
}

/// The compiled-in atlas (printable ASCII plus Latin-1).
pub fn load_builtin_font() -> &'static FontAtlas {
    static FONT: OnceLock<FontAtlas> = OnceLock::new();
    FONT.get_or_init(|| {
        let glyphs = table::GLYPH_TABLE.iter().map(|(cp, rows)| {
            let c = char::from_u32(*cp).expect("table holds scalar values");
            Glyph::from_rows(c, rows)
        });
        let notdef = Glyph::from_rows('\u{FFFD}', &table::NOTDEF_ROWS);
        FontAtlas::from_glyphs(glyphs, notdef).expect("embedded NOTDEF is inked")
    })
}

/// Number of entries in the embedded glyph table.
pub fn builtin_glyph_count() -> usize {
    table::GLYPH_COUNT
}

/// NFC-normalises `text`, borrowing when it already is.
pub fn nfc(text: &str) -> Cow<'_, str> {
    match is_nfc_quick(text.chars()) {
        IsNormalized::Yes => Cow::Borrowed(text),
        _ => Cow::Owned(text.nfc().collect()),
    }
}

/// Extended grapheme clusters of already-normalised text.
pub fn clusters(text: &str) -> impl Iterator<Item = &str> {
    text.graphemes(true)
}

pub fn measure_text(font: &FontAtlas, text: &str, mode: AdvanceMode) -> usize {
    let text = nfc(text);
    clusters(&text).map(|c| font.cluster_glyph(c).advance(mode)).sum()
}

/// A single 16-pixel-tall row-major grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineImage {
    width: usize,
    pixels: Vec<u8>,
}

impl LineImage {
    pub fn blank(width: usize) -> Self {
        LineImage { width, pixels: vec![BACKGROUND; width * LINE_HEIGHT] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        LINE_HEIGHT
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Draws `glyph` with its left edge at column `x`, clipping ink to
    /// `[x, x + clip)` and to the image width. Returns whether ink was clipped.
    pub fn blit(&mut self, glyph: &Glyph, x: usize, clip: usize) -> bool {
        let visible = glyph.ink_width().min(clip).min(self.width.saturating_sub(x));
        for y in 0..LINE_HEIGHT {
            for gx in 0..visible {
                let v = glyph.pixel(gx, y);
                if v != BACKGROUND {
                    let slot = &mut self.pixels[y * self.width + x + gx];
                    *slot = (*slot).max(v);
                }
            }
        }
        visible < glyph.ink_width()
    }

    /// Horizontal concatenation.
    pub fn hconcat(&self, other: &LineImage) -> LineImage {
        let width = self.width + other.width;
        let mut pixels = Vec::with_capacity(width * LINE_HEIGHT);
        for y in 0..LINE_HEIGHT {
            pixels.extend_from_slice(&self.pixels[y * self.width..(y + 1) * self.width]);
            pixels.extend_from_slice(&other.pixels[y * other.width..(y + 1) * other.width]);
        }
        LineImage { width, pixels }
    }
}

/// Rasterises one line, glyphs left to right at their advances.
pub fn raster_line(font: &FontAtlas, text: &str, mode: AdvanceMode) -> LineImage {
    let text = nfc(text);
    let glyphs: Vec<&Glyph> = clusters(&text).map(|c| font.cluster_glyph(c)).collect();
    let width = glyphs.iter().map(|g| g.advance(mode)).sum();
    let mut image = LineImage::blank(width);
    let mut x = 0;
    for g in glyphs {
        let advance = g.advance(mode);
        let clip = match mode {
            AdvanceMode::Proportional => MAX_GLYPH_WIDTH,
            AdvanceMode::Mono => MONO_ADVANCE,
        };
        image.blit(g, x, clip);
        x += advance;
    }
    image
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reading of the shipped table file.
    fn table_entries() -> Vec<(String, Vec<String>)> {
        let text = include_str!("../font/glyphs.txt");
        let lines: Vec<&str> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .filter(|l| !l.starts_with("# ") && *l != "#")
            .collect();
        lines
            .chunks(17)
            .map(|c| (c[0].to_string(), c[1..].iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    fn table_glyph(c: char) -> Vec<String> {
        let header = format!("U+{:04X}", c as u32);
        table_entries()
            .into_iter()
            .find(|(h, _)| h.split_whitespace().next() == Some(header.as_str()))
            .map(|(_, rows)| rows)
            .unwrap()
    }

    #[test]
    fn coverage_matches_table_rows() {
        let entries = table_entries();
        let glyph_rows = entries.iter().filter(|(h, _)| h.starts_with("U+")).count();
        assert_eq!(glyph_rows, 189);
        assert_eq!(load_builtin_font().len(), glyph_rows);
        assert_eq!(builtin_glyph_count(), glyph_rows);
    }

    #[test]
    fn covers_printable_ascii_and_latin1_letters() {
        let font = load_builtin_font();
        for c in (0x20u8..=0x7E).map(char::from) {
            assert!(font.covers(c), "{c:?}");
        }
        for c in ('\u{C0}'..='\u{FF}').filter(|c| c.is_alphabetic()) {
            assert!(font.covers(c), "{c:?}");
        }
    }

    #[test]
    fn lookup_and_fallback() {
        let font = load_builtin_font();
        assert!(font.lookup('A').ink_width() > 0);
        assert_eq!(font.lookup('\u{4E00}'), font.notdef());
        assert!(font.notdef().has_ink());
    }

    #[test]
    fn glyph_metrics() {
        let font = load_builtin_font();
        for c in font.coverage() {
            let g = font.lookup(c);
            assert!(g.ink_width() <= MONO_ADVANCE);
            assert_eq!(g.advance_mono(), 8);
            if c == ' ' {
                assert_eq!(g.advance_proportional(), 3);
            } else {
                assert_eq!(g.advance_proportional(), g.ink_width() + 1);
            }
        }
    }

    #[test]
    fn measure_examples() {
        let font = load_builtin_font();
        assert_eq!(measure_text(font, "", AdvanceMode::Mono), 0);
        assert_eq!(measure_text(font, "", AdvanceMode::Proportional), 0);
        assert_eq!(measure_text(font, "ab", AdvanceMode::Mono), 16);
        // 'a' and 'b' both span five columns in the table.
        let width = |c| table_glyph(c).iter().map(|r| r.rfind('#').map_or(0, |i| i + 1)).max().unwrap();
        assert_eq!(width('a'), 5);
        assert_eq!(width('b'), 5);
        assert_eq!(measure_text(font, "ab", AdvanceMode::Proportional), 12);
    }

    #[test]
    fn mono_counts_grapheme_clusters() {
        let font = load_builtin_font();
        // e + combining acute composes under NFC; flag is one cluster of two scalars.
        assert_eq!(measure_text(font, "e\u{301}x", AdvanceMode::Mono), 16);
        assert_eq!(measure_text(font, "\u{1F1E9}\u{1F1EA}", AdvanceMode::Mono), 8);
    }

    #[test]
    fn raster_examples() {
        let font = load_builtin_font();
        assert_eq!(raster_line(font, "", AdvanceMode::Proportional).width(), 0);
        let space = raster_line(font, " ", AdvanceMode::Proportional);
        assert_eq!(space.width(), 3);
        assert!(space.pixels().iter().all(|&p| p == 0));

        let a = raster_line(font, "A", AdvanceMode::Proportional);
        let rows = table_glyph('A');
        let ink = font.lookup('A').ink_width();
        for (y, row) in rows.iter().enumerate() {
            for x in 0..ink {
                let expect = if row.as_bytes()[x] == b'#' { 255 } else { 0 };
                assert_eq!(a.pixel(x, y), expect);
            }
        }
    }

    #[test]
    fn hconcat_widths() {
        let font = load_builtin_font();
        let a = raster_line(font, "ab", AdvanceMode::Mono);
        let b = raster_line(font, "c", AdvanceMode::Mono);
        let ab = a.hconcat(&b);
        assert_eq!(ab, raster_line(font, "abc", AdvanceMode::Mono));
    }
}
