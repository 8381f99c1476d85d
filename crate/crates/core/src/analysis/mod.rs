//! Embedding-geometry metrics over [`EmbeddingDump`]s: pooled word and
//! sentence vectors, cosine similarity distributions and rank correlation.

mod dump;

use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dump::{
    DumpAnnotations, EmbeddingDump, Occurrence, PairLabel, SentenceAnnotation, StsPair, WicPair, WordAnnotation,
    EMBEDDING_MAGIC, EMBEDDING_VERSION,
};

use crate::error::{Error, Result};
use crate::masking::rng_stream;
use crate::scalar::Scalar;

/// Word-occurrence pairs in the random baseline.
pub const RANDOM_BASELINE_PAIRS: usize = 1000;

pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::precondition(format!("cosine of vectors of width {} and {}", u.len(), v.len())));
    }
    let dot = u.iter().zip(v).map(|(a, b)| *a * *b).sum::<T>();
    let nu = u.iter().map(|a| *a * *a).sum::<T>().sqrt();
    let nv = v.iter().map(|a| *a * *a).sum::<T>().sqrt();
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::precondition("cosine of a zero vector"));
    }
    Ok((dot / (nu * nv)).max(-T::one()).min(T::one()))
}

fn mean_of<'a, T: Scalar>(rows: impl Iterator<Item = &'a [T]>, width: usize) -> Option<Vec<T>> {
    let mut acc = vec![T::zero(); width];
    let mut n = 0usize;
    for r in rows {
        for (a, b) in acc.iter_mut().zip(r) {
            *a += *b;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let k = T::of_usize(n);
    Some(acc.into_iter().map(|a| a / k).collect())
}

/// Mean of the states at positions `first..=last`.
pub fn pooled_span<T: Scalar>(dump: &EmbeddingDump<T>, sentence: u32, first: usize, last: usize, layer: usize) -> Result<Vec<T>> {
    if first > last {
        return Err(Error::precondition("empty word span"));
    }
    let rows = (first..=last).map(|p| dump.vector(sentence, layer, p)).collect::<Result<Vec<_>>>()?;
    Ok(mean_of(rows.into_iter(), dump.width()).expect("span is nonempty"))
}

pub fn pooled_word<T: Scalar>(dump: &EmbeddingDump<T>, occ: Occurrence, layer: usize) -> Result<Vec<T>> {
    let w = dump.word(occ)?;
    pooled_span(dump, occ.sentence, w.first, w.last, layer)
}

/// Mean over every position except CLS and EOS.
pub fn sentence_rep<T: Scalar>(dump: &EmbeddingDump<T>, sentence: u32, layer: usize) -> Result<Vec<T>> {
    let s = dump.sentence(sentence)?;
    let rows = (0..s.positions)
        .filter(|&p| p != s.cls && p != s.eos)
        .map(|p| dump.vector(sentence, layer, p))
        .collect::<Result<Vec<_>>>()?;
    mean_of(rows.into_iter(), dump.width())
        .ok_or_else(|| Error::precondition(format!("sentence {sentence} has no position besides CLS and EOS")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityLabel {
    Similar,
    Different,
    Random,
    HighHigh,
    LowLow,
    HighLow,
}

impl SimilarityLabel {
    pub fn name(self) -> &'static str {
        match self {
            SimilarityLabel::Similar => "similar",
            SimilarityLabel::Different => "different",
            SimilarityLabel::Random => "random",
            SimilarityLabel::HighHigh => "high-high",
            SimilarityLabel::LowLow => "low-low",
            SimilarityLabel::HighLow => "high-low",
        }
    }
}

impl fmt::Display for SimilarityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDistribution {
    pub label: SimilarityLabel,
    pub layer: usize,
    pub values: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

impl SimilarityDistribution {
    fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn median(&self) -> Option<f64> {
        quantile(&self.sorted(), 0.5)
    }

    /// First and third quartiles.
    pub fn quartiles(&self) -> Option<(f64, f64)> {
        let s = self.sorted();
        Some((quantile(&s, 0.25)?, quantile(&s, 0.75)?))
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.values.is_empty()).then(|| self.values.iter().sum::<f64>() / self.values.len() as f64)
    }
}

/// Summary CSV: a `#` metadata line, then
/// `label,layer,count,min,q1,median,q3,max,mean`. Empty distributions leave
/// the statistics blank.
pub fn write_summary_csv<W: Write>(dists: &[SimilarityDistribution], metadata: &str, mut w: W) -> Result<()> {
    writeln!(w, "# {metadata}")?;
    writeln!(w, "label,layer,count,min,q1,median,q3,max,mean")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for d in dists {
        let s = d.sorted();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            d.label,
            d.layer,
            s.len(),
            opt(s.first().copied()),
            opt(quantile(&s, 0.25)),
            opt(quantile(&s, 0.5)),
            opt(quantile(&s, 0.75)),
            opt(s.last().copied()),
            opt(d.mean())
        )?;
    }
    Ok(())
}

/// Raw values CSV: a `#` metadata line, then `label,layer,value`.
pub fn write_values_csv<W: Write>(dists: &[SimilarityDistribution], metadata: &str, mut w: W) -> Result<()> {
    writeln!(w, "# {metadata}")?;
    writeln!(w, "label,layer,value")?;
    for d in dists {
        for v in &d.values {
            writeln!(w, "{},{},{}", d.label, d.layer, v)?;
        }
    }
    Ok(())
}

fn cos_f64<T: Scalar>(u: &[T], v: &[T]) -> Result<f64> {
    cosine(u, v).map(Scalar::as_f64)
}

/// Occurrence pairs for the random baseline: each draws a sentence uniformly
/// among those with words, then a word uniformly within it, for two
/// distinct sentences when the dump has more than one.
pub fn random_baseline_pairs<T: Scalar>(dump: &EmbeddingDump<T>, pairs: usize, seed: u64) -> Vec<(Occurrence, Occurrence)> {
    let pool: Vec<&SentenceAnnotation> = dump.sentences().iter().filter(|s| !s.words.is_empty()).collect();
    if pool.is_empty() {
        return Vec::new();
    }
    let mut rng = rng_stream(seed, 0);
    let mut draw = |exclude: Option<usize>| {
        let s = loop {
            let s = rng.random_range(0..pool.len());
            if exclude != Some(s) || pool.len() == 1 {
                break s;
            }
        };
        (s, Occurrence { sentence: pool[s].id, word: rng.random_range(0..pool[s].words.len()) })
    };
    (0..pairs)
        .map(|_| {
            let (s, a) = draw(None);
            let (_, b) = draw(Some(s));
            (a, b)
        })
        .collect()
}

/// Per layer, `[similar, different, random]` distributions of cosine
/// similarities between pooled target words.
pub fn wic_distributions<T: Scalar>(dump: &EmbeddingDump<T>, baseline_pairs: usize, seed: u64) -> Result<Vec<[SimilarityDistribution; 3]>> {
    let pairs = dump
        .annotations()
        .wic_pairs
        .as_ref()
        .ok_or_else(|| Error::precondition("dump carries no labelled word pairs"))?;
    let random = random_baseline_pairs(dump, baseline_pairs, seed);
    (0..dump.layers())
        .map(|layer| {
            let mut out = [SimilarityLabel::Similar, SimilarityLabel::Different, SimilarityLabel::Random]
                .map(|label| SimilarityDistribution { label, layer, values: Vec::new() });
            for p in pairs {
                let v = cos_f64(&pooled_word(dump, p.a, layer)?, &pooled_word(dump, p.b, layer)?)?;
                let slot = if p.label == PairLabel::Similar { 0 } else { 1 };
                out[slot].values.push(v);
            }
            for &(a, b) in &random {
                out[2].values.push(cos_f64(&pooled_word(dump, a, layer)?, &pooled_word(dump, b, layer)?)?);
            }
            Ok(out)
        })
        .collect()
}

/// Occurrences of `word` in distinct sentences (first occurrence per
/// sentence).
pub fn word_occurrences<T: Scalar>(dump: &EmbeddingDump<T>, word: &str) -> Vec<Occurrence> {
    dump.sentences()
        .iter()
        .filter_map(|s| s.words.iter().position(|w| w.word == word).map(|i| Occurrence { sentence: s.id, word: i }))
        .collect()
}

/// Mean cosine over all unordered pairs of the word's occurrences in
/// different sentences.
pub fn self_similarity<T: Scalar>(dump: &EmbeddingDump<T>, word: &str, layer: usize) -> Result<f64> {
    let occ = word_occurrences(dump, word);
    if occ.len() < 2 {
        return Err(Error::precondition(format!("word {word:?} occurs in fewer than 2 sentences")));
    }
    let vecs = occ.iter().map(|&o| pooled_word(dump, o, layer)).collect::<Result<Vec<_>>>()?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..vecs.len() {
        for j in i + 1..vecs.len() {
            sum += cos_f64(&vecs[i], &vecs[j])?;
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

pub fn intra_sentence_similarity<T: Scalar>(dump: &EmbeddingDump<T>, occ: Occurrence, layer: usize) -> Result<f64> {
    cos_f64(&pooled_word(dump, occ, layer)?, &sentence_rep(dump, occ.sentence, layer)?)
}

/// All occurrences (every word position, including repeats within a
/// sentence) of words in `set`.
fn bucket_occurrences<T: Scalar>(dump: &EmbeddingDump<T>, set: &[String]) -> Vec<Occurrence> {
    dump.occurrences().into_iter().filter(|&o| dump.word(o).is_ok_and(|w| set.contains(&w.word))).collect()
}

/// `[high-high, low-low, high-low]` at `layer`. Within a bucket every
/// unordered pair of distinct occurrences counts once; across buckets every
/// (high, low) occurrence pair counts except an occurrence with itself.
pub fn frequency_bucket_distributions<T: Scalar>(
    dump: &EmbeddingDump<T>,
    high: &[String],
    low: &[String],
    layer: usize,
) -> Result<[SimilarityDistribution; 3]> {
    if high.is_empty() || low.is_empty() {
        return Err(Error::precondition("frequency buckets must be nonempty"));
    }
    let hi = bucket_occurrences(dump, high);
    let lo = bucket_occurrences(dump, low);
    let pooled = |occ: &[Occurrence]| occ.iter().map(|&o| pooled_word(dump, o, layer)).collect::<Result<Vec<_>>>();
    let (hv, lv) = (pooled(&hi)?, pooled(&lo)?);
    let within = |v: &[Vec<T>]| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                out.push(cos_f64(&v[i], &v[j])?);
            }
        }
        Ok(out)
    };
    let mut across = Vec::new();
    for (a, av) in hi.iter().zip(&hv) {
        for (b, bv) in lo.iter().zip(&lv) {
            if a != b {
                across.push(cos_f64(av, bv)?);
            }
        }
    }
    Ok([
        SimilarityDistribution { label: SimilarityLabel::HighHigh, layer, values: within(&hv)? },
        SimilarityDistribution { label: SimilarityLabel::LowLow, layer, values: within(&lv)? },
        SimilarityDistribution { label: SimilarityLabel::HighLow, layer, values: across },
    ])
}

/// 1-based ranks, ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::precondition("correlation needs two equal-length samples of at least 2 values"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::precondition("correlation of a constant sample is undefined"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::precondition("spearman needs two equal-length samples of at least 2 values"));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::precondition("spearman input contains NaN"));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Per layer, Spearman correlation between the gold scores and the cosine of
/// each pair's sentence representations.
pub fn sts_layer_curve<T: Scalar>(dump: &EmbeddingDump<T>) -> Result<Vec<f64>> {
    let pairs = dump
        .annotations()
        .sts_pairs
        .as_ref()
        .ok_or_else(|| Error::precondition("dump carries no gold similarity scores"))?;
    let gold: Vec<f64> = pairs.iter().map(|p| p.gold).collect();
    (0..dump.layers())
        .map(|layer| {
            let sims = pairs
                .iter()
                .map(|p| cos_f64(&sentence_rep(dump, p.a, layer)?, &sentence_rep(dump, p.b, layer)?))
                .collect::<Result<Vec<_>>>()?;
            spearman_rho(&sims, &gold)
        })
        .collect()
}

#[cfg(test)]
mod tests;
