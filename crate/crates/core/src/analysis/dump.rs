//! Embedding dumps: `PXEB` binary vectors plus a JSON annotation sidecar.
//!
//! Binary layout, little-endian: magic, `u32` version, `u32` layers, `u32`
//! width, `u64` item count, then items of `u32` sentence id, `u16` layer,
//! `u16` position and `width` `f32` values.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::PatchSequence;
use crate::scalar::Scalar;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"PXEB";
pub const EMBEDDING_VERSION: u32 = 1;

/// A word's inclusive position range within a sentence's hidden states.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordAnnotation {
    pub word: String,
    pub first: usize,
    pub last: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceAnnotation {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub positions: usize,
    pub cls: usize,
    pub eos: usize,
    pub words: Vec<WordAnnotation>,
}

impl SentenceAnnotation {
    /// Annotation for encoder states of `seq`: CLS at 0, patch `t` at `t + 1`.
    pub fn for_sequence(id: u32, text: Option<String>, seq: &PatchSequence) -> Self {
        let words = seq
            .word_spans()
            .iter()
            .map(|s| WordAnnotation { word: seq.words()[s.word].clone(), first: s.first + 1, last: s.last + 1 })
            .collect();
        SentenceAnnotation { id, text, positions: seq.len() + 1, cls: 0, eos: seq.len(), words }
    }
}

/// One word occurrence: sentence id and index into its `words`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Occurrence {
    pub sentence: u32,
    pub word: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Similar,
    Different,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WicPair {
    pub a: Occurrence,
    pub b: Occurrence,
    pub label: PairLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StsPair {
    pub a: u32,
    pub b: u32,
    pub gold: f64,
}

/// JSON sidecar of a dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpAnnotations {
    pub layers: usize,
    pub width: usize,
    pub sentences: Vec<SentenceAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wic_pairs: Option<Vec<WicPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sts_pairs: Option<Vec<StsPair>>,
}

/// Per-layer hidden states of annotated sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingDump<T> {
    annotations: DumpAnnotations,
    /// `[sentence][layer]`, each `positions x width` row-major.
    states: Vec<Vec<Vec<T>>>,
    index: HashMap<u32, usize>,
}

impl<T: Scalar> EmbeddingDump<T> {
    /// `states[s][l]` holds sentence `s`'s layer-`l` states, row-major.
    pub fn new(annotations: DumpAnnotations, states: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let a = &annotations;
        let invalid = |d: String| Err(Error::precondition(d));
        if a.width == 0 || a.layers == 0 {
            return invalid("dump needs at least one layer and a positive width".into());
        }
        if states.len() != a.sentences.len() {
            return invalid(format!("{} state blocks for {} sentences", states.len(), a.sentences.len()));
        }
        let mut index = HashMap::new();
        for (i, (s, st)) in a.sentences.iter().zip(&states).enumerate() {
            if index.insert(s.id, i).is_some() {
                return invalid(format!("duplicate sentence id {}", s.id));
            }
            if st.len() != a.layers || st.iter().any(|l| l.len() != s.positions * a.width) {
                return invalid(format!("sentence {} states do not match {} layers of width {}", s.id, a.layers, a.width));
            }
            if s.cls >= s.positions || s.eos >= s.positions {
                return invalid(format!("sentence {} CLS/EOS index out of range", s.id));
            }
            if let Some(w) = s.words.iter().find(|w| w.first > w.last || w.last >= s.positions) {
                return invalid(format!("sentence {} word {:?} span out of range", s.id, w.word));
            }
        }
        let dump = EmbeddingDump { annotations, states, index };
        for p in dump.annotations.wic_pairs.iter().flatten() {
            dump.word(p.a)?;
            dump.word(p.b)?;
        }
        for p in dump.annotations.sts_pairs.iter().flatten() {
            dump.sentence_index(p.a)?;
            dump.sentence_index(p.b)?;
        }
        Ok(dump)
    }

    pub fn annotations(&self) -> &DumpAnnotations {
        &self.annotations
    }

    pub fn set_wic_pairs(&mut self, pairs: Option<Vec<WicPair>>) -> Result<()> {
        for p in pairs.iter().flatten() {
            self.word(p.a)?;
            self.word(p.b)?;
        }
        self.annotations.wic_pairs = pairs;
        Ok(())
    }

    pub fn set_sts_pairs(&mut self, pairs: Option<Vec<StsPair>>) -> Result<()> {
        for p in pairs.iter().flatten() {
            self.sentence_index(p.a)?;
            self.sentence_index(p.b)?;
        }
        self.annotations.sts_pairs = pairs;
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.annotations.layers
    }

    pub fn width(&self) -> usize {
        self.annotations.width
    }

    pub fn sentences(&self) -> &[SentenceAnnotation] {
        &self.annotations.sentences
    }

    pub fn sentence_index(&self, id: u32) -> Result<usize> {
        self.index.get(&id).copied().ok_or_else(|| Error::precondition(format!("unknown sentence id {id}")))
    }

    pub fn sentence(&self, id: u32) -> Result<&SentenceAnnotation> {
        Ok(&self.annotations.sentences[self.sentence_index(id)?])
    }

    pub fn word(&self, occ: Occurrence) -> Result<&WordAnnotation> {
        self.sentence(occ.sentence)?
            .words
            .get(occ.word)
            .ok_or_else(|| Error::precondition(format!("sentence {} has no word {}", occ.sentence, occ.word)))
    }

    /// Every word occurrence, in sentence then word order.
    pub fn occurrences(&self) -> Vec<Occurrence> {
        self.sentences()
            .iter()
            .flat_map(|s| (0..s.words.len()).map(move |w| Occurrence { sentence: s.id, word: w }))
            .collect()
    }

    /// Hidden state of one position.
    pub fn vector(&self, sentence: u32, layer: usize, position: usize) -> Result<&[T]> {
        let s = self.sentence_index(sentence)?;
        if layer >= self.layers() {
            return Err(Error::precondition(format!("layer {layer} outside {} layers", self.layers())));
        }
        if position >= self.annotations.sentences[s].positions {
            return Err(Error::precondition(format!("position {position} outside sentence {sentence}")));
        }
        let w = self.width();
        Ok(&self.states[s][layer][position * w..(position + 1) * w])
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(EMBEDDING_MAGIC)?;
        w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
        w.write_all(&(self.layers() as u32).to_le_bytes())?;
        w.write_all(&(self.width() as u32).to_le_bytes())?;
        let items: usize = self.sentences().iter().map(|s| s.positions * self.layers()).sum();
        w.write_all(&(items as u64).to_le_bytes())?;
        let mut buf = Vec::new();
        for (s, st) in self.sentences().iter().zip(&self.states) {
            for (layer, values) in st.iter().enumerate() {
                for (pos, v) in values.chunks_exact(self.width()).enumerate() {
                    buf.clear();
                    buf.extend_from_slice(&s.id.to_le_bytes());
                    buf.extend_from_slice(&(layer as u16).to_le_bytes());
                    buf.extend_from_slice(&(pos as u16).to_le_bytes());
                    for x in v {
                        buf.extend_from_slice(&x.as_f32().to_le_bytes());
                    }
                    w.write_all(&buf)?;
                }
            }
        }
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.annotations)?;
        Ok(())
    }

    /// Reads the binary vectors and pairs them with `annotations`; every
    /// annotated position must appear exactly once.
    pub fn read<R: Read>(mut r: R, annotations: DumpAnnotations) -> Result<Self> {
        let bad = |d: String| Error::format("embedding dump", d);
        let mut head = [0u8; 24];
        r.read_exact(&mut head).map_err(|_| bad("truncated header".into()))?;
        if &head[..4] != EMBEDDING_MAGIC {
            return Err(bad("wrong magic".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().expect("4 bytes"));
        if u32_at(4) != EMBEDDING_VERSION {
            return Err(bad(format!("unsupported version {}", u32_at(4))));
        }
        let (layers, width) = (u32_at(8) as usize, u32_at(12) as usize);
        if layers != annotations.layers || width != annotations.width {
            return Err(bad(format!(
                "binary has {layers} layers of width {width}, sidecar {} of width {}",
                annotations.layers, annotations.width
            )));
        }
        let count = u64::from_le_bytes(head[16..24].try_into().expect("8 bytes"));
        let index: HashMap<u32, usize> = annotations.sentences.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        let mut states: Vec<Vec<Vec<T>>> =
            annotations.sentences.iter().map(|s| vec![vec![T::zero(); s.positions * width]; layers]).collect();
        let mut seen: Vec<Vec<bool>> = annotations.sentences.iter().map(|s| vec![false; s.positions * layers]).collect();
        let mut item = vec![0u8; 8 + 4 * width];
        for _ in 0..count {
            r.read_exact(&mut item).map_err(|_| bad("truncated items".into()))?;
            let sid = u32::from_le_bytes(item[..4].try_into().expect("4 bytes"));
            let layer = u16::from_le_bytes([item[4], item[5]]) as usize;
            let pos = u16::from_le_bytes([item[6], item[7]]) as usize;
            let s = *index.get(&sid).ok_or_else(|| bad(format!("item for unknown sentence {sid}")))?;
            let positions = annotations.sentences[s].positions;
            if layer >= layers || pos >= positions {
                return Err(bad(format!("item ({sid}, {layer}, {pos}) out of range")));
            }
            if std::mem::replace(&mut seen[s][layer * positions + pos], true) {
                return Err(bad(format!("duplicate item ({sid}, {layer}, {pos})")));
            }
            let dst = &mut states[s][layer][pos * width..(pos + 1) * width];
            for (d, c) in dst.iter_mut().zip(item[8..].chunks_exact(4)) {
                *d = T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
            }
        }
        if seen.iter().flatten().any(|s| !s) {
            return Err(bad("annotated positions missing from the binary".into()));
        }
        Self::new(annotations, states)
    }
}
