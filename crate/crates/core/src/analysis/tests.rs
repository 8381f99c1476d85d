use super::*;

fn sentence(id: u32, positions: usize, words: &[(&str, usize, usize)]) -> SentenceAnnotation {
    SentenceAnnotation {
        id,
        text: None,
        positions,
        cls: 0,
        eos: positions - 1,
        words: words.iter().map(|&(w, f, l)| WordAnnotation { word: w.into(), first: f, last: l }).collect(),
    }
}

/// One layer; `rows[s]` are sentence `s`'s position vectors.
fn dump(sentences: Vec<SentenceAnnotation>, rows: Vec<Vec<Vec<f64>>>) -> EmbeddingDump<f64> {
    let width = rows[0][0].len();
    let states = rows.into_iter().map(|r| vec![r.concat()]).collect();
    let ann = DumpAnnotations { layers: 1, width, sentences, wic_pairs: None, sts_pairs: None };
    EmbeddingDump::new(ann, states).unwrap()
}

fn occ(sentence: u32, word: usize) -> Occurrence {
    Occurrence { sentence, word }
}

#[test]
fn cosine_examples() {
    let v = [0.3f64, -1.2, 2.0];
    assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(cosine(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
    let neg: Vec<f64> = v.iter().map(|x| -x).collect();
    assert!((cosine(&v, &neg).unwrap() + 1.0).abs() < 1e-15);
    assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
}

#[test]
fn pooling_examples() {
    let d = dump(
        vec![sentence(7, 5, &[("ab", 1, 2), ("c", 3, 3)])],
        vec![vec![vec![9.0, 9.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0], vec![5.0, 5.0]]],
    );
    assert_eq!(pooled_word(&d, occ(7, 0), 0).unwrap(), vec![0.5, 0.5]);
    assert_eq!(pooled_word(&d, occ(7, 1), 0).unwrap(), vec![2.0, 2.0]);
    assert!(pooled_span(&d, 7, 2, 1, 0).is_err());
    assert!(pooled_word(&d, occ(7, 2), 0).is_err());
    assert!(pooled_word(&d, occ(8, 0), 0).is_err());
    let same = dump(vec![sentence(0, 4, &[("x", 1, 2)])], vec![vec![vec![0.0], vec![3.0], vec![3.0], vec![0.0]]]);
    assert_eq!(pooled_word(&same, occ(0, 0), 0).unwrap(), vec![3.0]);
}

#[test]
fn sentence_rep_excludes_cls_and_eos() {
    let rows = vec![vec![4.0, 4.0, 4.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![7.0, 7.0, 7.0]];
    let d = dump(vec![sentence(0, 5, &[])], vec![rows.clone()]);
    let third = 1.0 / 3.0;
    assert_eq!(sentence_rep(&d, 0, 0).unwrap(), vec![third, third, third]);
    let mut moved = rows;
    moved[0] = vec![-100.0, 3.0, 1.0];
    let d2 = dump(vec![sentence(0, 5, &[])], vec![moved]);
    assert_eq!(sentence_rep(&d2, 0, 0).unwrap(), sentence_rep(&d, 0, 0).unwrap());
    let one = dump(vec![sentence(0, 3, &[])], vec![vec![vec![1.0], vec![2.0], vec![3.0]]]);
    assert_eq!(sentence_rep(&one, 0, 0).unwrap(), vec![2.0]);
    let none = dump(vec![sentence(0, 2, &[])], vec![vec![vec![1.0], vec![2.0]]]);
    assert!(sentence_rep(&none, 0, 0).is_err());
}

#[test]
fn self_similarity_examples() {
    let mk = |vs: [[f64; 2]; 3]| {
        dump(
            (0..3).map(|i| sentence(i, 3, &[("w", 1, 1)])).collect(),
            vs.iter().map(|v| vec![vec![1.0, 1.0], v.to_vec(), vec![1.0, 1.0]]).collect(),
        )
    };
    let same = mk([[1.0, 2.0]; 3]);
    assert!((self_similarity(&same, "w", 0).unwrap() - 1.0).abs() < 1e-15);
    let d = mk([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((self_similarity(&d, "w", 0).unwrap() - (0.0 + h + h) / 3.0).abs() < 1e-12);
    assert!(self_similarity(&d, "missing", 0).is_err());
    let single = dump(vec![sentence(0, 3, &[("w", 1, 1)])], vec![vec![vec![1.0], vec![1.0], vec![1.0]]]);
    assert!(self_similarity(&single, "w", 0).is_err());
}

#[test]
fn intra_sentence_examples() {
    let d = dump(vec![sentence(0, 3, &[("w", 1, 1)])], vec![vec![vec![5.0, 1.0], vec![0.2, 0.7], vec![3.0, 3.0]]]);
    assert!((intra_sentence_similarity(&d, occ(0, 0), 0).unwrap() - 1.0).abs() < 1e-15);
    // word [1,0]; sentence mean of [1,0], [0,1], [0,1] = [1/3, 2/3].
    let rows = vec![vec![9.0, 9.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![9.0, 9.0]];
    let d = dump(vec![sentence(0, 5, &[("a", 1, 1), ("b", 2, 3)])], vec![rows.clone()]);
    let expected = (1.0 / 3.0) / (5.0f64 / 9.0).sqrt();
    assert!((intra_sentence_similarity(&d, occ(0, 0), 0).unwrap() - expected).abs() < 1e-12);
    let mut scaled = rows;
    scaled[1] = vec![4.0, 0.0];
    let d2 = dump(vec![sentence(0, 5, &[("a", 1, 1), ("b", 2, 3)])], vec![scaled]);
    let a = intra_sentence_similarity(&d2, occ(0, 0), 0).unwrap();
    // Scaling the word also moves the sentence mean, so compare with the
    // direct computation instead of the unscaled value.
    let expected2 = (4.0 / 3.0) / (1.0 * ((4.0f64 / 3.0).powi(2) + (2.0f64 / 3.0).powi(2)).sqrt());
    assert!((a - expected2).abs() < 1e-12);
}

#[test]
fn frequency_bucket_examples() {
    let d = dump(
        vec![sentence(0, 3, &[("the", 1, 1)]), sentence(1, 3, &[("the", 1, 1)])],
        vec![vec![vec![1.0], vec![1.0], vec![1.0]], vec![vec![1.0], vec![2.0], vec![1.0]]],
    );
    let set = vec!["the".to_string()];
    let [hh, ll, hl] = frequency_bucket_distributions(&d, &set, &set, 0).unwrap();
    assert_eq!(hh.values.len(), 1);
    assert_eq!(ll.values.len(), 1);
    assert_eq!(hl.values.len(), 2);
    assert!(frequency_bucket_distributions(&d, &[], &set, 0).is_err());

    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let d = dump(
        (0..3).map(|i| sentence(i, 3, &[("rare", 1, 1), ("the", 1, 1)])).collect(),
        axes.iter().map(|a| vec![vec![1.0; 3], a.to_vec(), vec![1.0; 3]]).collect(),
    );
    let [_, ll, _] = frequency_bucket_distributions(&d, &set, &["rare".to_string()], 0).unwrap();
    assert_eq!(ll.values, vec![0.0, 0.0, 0.0]);
}

#[test]
fn spearman_examples() {
    let xs = [3.0, 1.0, 4.0, 1.5, 9.0];
    assert!((spearman_rho(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
    let ys: Vec<f64> = xs.iter().map(|x| -x).collect();
    assert!((spearman_rho(&xs, &ys).unwrap() + 1.0).abs() < 1e-15);
    assert!((spearman_rho(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
    assert!(spearman_rho(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    assert!(spearman_rho(&[1.0], &[1.0]).is_err());
    assert!(spearman_rho(&[1.0, 2.0], &[1.0]).is_err());
    assert_eq!(average_ranks(&[2.0, 1.0, 2.0, 5.0]), vec![2.5, 1.0, 2.5, 4.0]);
}

fn sts_dump(gold: Vec<f64>, vecs: Vec<[f64; 2]>) -> EmbeddingDump<f64> {
    let n = vecs.len() as u32;
    let sentences = (0..n).map(|i| sentence(i, 3, &[])).collect();
    let states = vecs.iter().map(|v| vec![[vec![0.0, 0.0], v.to_vec(), vec![0.0, 0.0]].concat()]).collect();
    let sts = gold.iter().enumerate().map(|(i, &g)| StsPair { a: 0, b: i as u32 + 1, gold: g }).collect();
    let ann = DumpAnnotations { layers: 1, width: 2, sentences, wic_pairs: None, sts_pairs: Some(sts) };
    EmbeddingDump::new(ann, states).unwrap()
}

#[test]
fn sts_examples() {
    let vecs = vec![[1.0, 0.0], [1.0, 0.1], [1.0, 1.0], [0.0, 1.0], [-1.0, 0.2]];
    let cos: Vec<f64> = vecs[1..].iter().map(|v| cosine(&vecs[0], v).unwrap()).collect();
    assert_eq!(sts_layer_curve(&sts_dump(cos, vecs.clone())).unwrap(), vec![1.0]);
    let two = sts_layer_curve(&sts_dump(vec![0.1, 0.9], vecs[..3].to_vec())).unwrap();
    assert_eq!(two, vec![-1.0]);
    let mut missing = sts_dump(vec![0.1, 0.9], vecs[..3].to_vec());
    missing.set_sts_pairs(None).unwrap();
    assert!(sts_layer_curve(&missing).is_err());
}

fn wic_dump(pairs: Option<Vec<WicPair>>) -> EmbeddingDump<f64> {
    let sentences = (0..4).map(|i| sentence(i, 4, &[("bank", 1, 2)])).collect();
    let states = (0..4)
        .map(|i| vec![[vec![1.0, 1.0], vec![1.0, i as f64], vec![2.0, 0.5], vec![1.0, 1.0]].concat()])
        .collect();
    let ann = DumpAnnotations { layers: 1, width: 2, sentences, wic_pairs: pairs, sts_pairs: None };
    EmbeddingDump::new(ann, states).unwrap()
}

#[test]
fn wic_examples() {
    assert!(wic_distributions(&wic_dump(None), 10, 0).is_err());
    let empty = wic_distributions(&wic_dump(Some(vec![])), 10, 0).unwrap();
    assert!(empty[0][0].values.is_empty() && empty[0][1].values.is_empty());
    assert_eq!(empty[0][2].values.len(), 10);
    let pairs = vec![
        WicPair { a: occ(1, 0), b: occ(1, 0), label: PairLabel::Similar },
        WicPair { a: occ(0, 0), b: occ(3, 0), label: PairLabel::Different },
    ];
    let d = wic_dump(Some(pairs));
    let dists = wic_distributions(&d, 50, 4).unwrap();
    assert_eq!(dists.len(), 1);
    assert!((dists[0][0].values[0] - 1.0).abs() < 1e-15);
    assert_eq!(dists[0][1].values.len(), 1);
    assert_eq!(dists, wic_distributions(&d, 50, 4).unwrap());
    assert!(random_baseline_pairs(&d, 50, 4).iter().all(|(a, b)| a.sentence != b.sentence));
}

#[test]
fn distribution_summaries() {
    let d = SimilarityDistribution { label: SimilarityLabel::Random, layer: 2, values: vec![0.4, -0.2, 0.1, 0.9] };
    assert!((d.median().unwrap() - 0.25).abs() < 1e-15);
    let (q1, q3) = d.quartiles().unwrap();
    assert!((q1 - 0.025).abs() < 1e-15 && (q3 - 0.525).abs() < 1e-15);
    let empty = SimilarityDistribution { label: SimilarityLabel::Similar, layer: 0, values: vec![] };
    assert_eq!(empty.median(), None);
    let mut csv = Vec::new();
    write_summary_csv(&[empty], "seed=1", &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), "# seed=1\nlabel,layer,count,min,q1,median,q3,max,mean\nsimilar,0,0,,,,,,\n");
}

#[test]
fn binary_round_trip() {
    let d = wic_dump(Some(vec![WicPair { a: occ(0, 0), b: occ(2, 0), label: PairLabel::Different }]));
    let mut bin = Vec::new();
    d.write_binary(&mut bin).unwrap();
    assert_eq!(&bin[..4], b"PXEB");
    assert_eq!(bin.len(), 24 + 4 * 4 * (8 + 2 * 4));
    let mut side = Vec::new();
    d.write_sidecar(&mut side).unwrap();
    let ann: DumpAnnotations = serde_json::from_slice(&side).unwrap();
    let back = EmbeddingDump::<f64>::read(&bin[..], ann.clone()).unwrap();
    assert_eq!(back, d);
    assert!(EmbeddingDump::<f64>::read(&bin[..bin.len() - 1], ann.clone()).is_err());
    let mut ann_bad = ann;
    ann_bad.width = 3;
    assert!(EmbeddingDump::<f64>::read(&bin[..], ann_bad).is_err());
}
