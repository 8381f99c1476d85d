//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use patchtext::analysis::{
    frequency_bucket_distributions, intra_sentence_similarity, self_similarity, spearman_rho, sts_layer_curve,
    wic_distributions, word_occurrences, write_summary_csv, write_values_csv, DumpAnnotations, EmbeddingDump,
    Occurrence, PairLabel, SentenceAnnotation, SimilarityDistribution, SimilarityLabel, StsPair, WicPair,
};
use patchtext::corpus::{read_corpus, render_all};
use patchtext::masking::{sample_span_mask, MaskConfig, TargetNorm};
use patchtext::model::{read_checkpoint, train_steps, write_checkpoint, write_log_csv, AdamConfig, TrainConfig};
use patchtext::raster::FONT_VERSION;
use patchtext::render::{write_patch_dump, DumpSidecar, INK_CONVENTION};
use patchtext::stats::{
    accumulate, length_histogram, patch_pgm, topk_file_name, unique_curve, write_histogram_csv, CaseMode,
    FrequencyBuckets, WordFrequencyTable,
};
use patchtext::{load_builtin_font, Model, ModelConfig};
use serde_json::json;

use crate::output::{io_context, CliError, CliResult, Run};
use crate::{
    AnalyzeCommand, Cli, Command, CurveArgs, DumpArgs, EncodeArgs, FreqbiasArgs, LengthsArgs, MaskArgs, RenderArgs,
    SelfsimArgs, SpearmanArgs, StatsCommand, StsArgs, TargetNormArg, TopkArgs, TrainArgs, WicArgs, WordfreqArgs,
};

pub fn run(cli: Cli) -> CliResult<()> {
    let manifest = cli.manifest.clone();
    let run = match cli.command {
        Command::Render(a) => render(a)?,
        Command::Stats(StatsCommand::Curve(a)) => curve(a)?,
        Command::Stats(StatsCommand::Topk(a)) => topk(a)?,
        Command::Stats(StatsCommand::Lengths(a)) => lengths(a)?,
        Command::Stats(StatsCommand::Wordfreq(a)) => wordfreq(a)?,
        Command::Mask(a) => mask(a)?,
        Command::Train(a) => train(a)?,
        Command::Encode(a) => encode(a)?,
        Command::Analyze(AnalyzeCommand::Wic(a)) => wic(a)?,
        Command::Analyze(AnalyzeCommand::Selfsim(a)) => selfsim(a)?,
        Command::Analyze(AnalyzeCommand::Freqbias(a)) => freqbias(a)?,
        Command::Analyze(AnalyzeCommand::Sts(a)) => sts(a)?,
        Command::Analyze(AnalyzeCommand::Spearman(a)) => spearman(a)?,
    };
    run.finish(manifest.as_deref())
}

fn corpus(run: &mut Run, path: &Path) -> CliResult<Vec<String>> {
    run.input(path);
    read_corpus(path).map_err(|e| match e {
        patchtext::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => other.into(),
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", path.display()))
}

fn render(a: RenderArgs) -> CliResult<Run> {
    let mut run = Run::new("render");
    let cfg = a.render.config();
    run.config = json!({ "render": cfg, "workers": a.workers });
    let lines = corpus(&mut run, &a.input)?;
    let seqs = render_all(&lines, &cfg, load_builtin_font(), a.workers)?;
    let mut dump = Vec::new();
    write_patch_dump(&mut dump, cfg.strategy, &seqs)?;
    let sidecar = DumpSidecar {
        config: cfg,
        font_version: FONT_VERSION.to_string(),
        corpus: a.input.display().to_string(),
        ink_convention: INK_CONVENTION.to_string(),
        sequences: seqs.len() as u64,
    };
    let truncated = seqs.iter().filter(|s| s.truncated()).count();
    if truncated > 0 {
        eprintln!("patchtext: {truncated} sequences truncated to {} patches", cfg.max_patches);
    }
    run.output(&a.out, &dump)?;
    run.output(&with_suffix(&a.out, ".json"), &json_bytes(&sidecar)?)?;
    Ok(run)
}

fn json_bytes<T: serde::Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn curve(a: CurveArgs) -> CliResult<Run> {
    let mut run = Run::new("stats curve");
    let cfg = a.render.config();
    let lines = corpus(&mut run, &a.input)?;
    let checkpoints = if a.checkpoints.is_empty() {
        let n = lines.len() as u64;
        let mut c: Vec<u64> = std::iter::successors(Some(1u64), |&x| Some(x * 2)).take_while(|&x| x < n).collect();
        c.push(n.max(1));
        c
    } else {
        a.checkpoints.clone()
    };
    run.config = json!({ "render": cfg, "checkpoints": checkpoints, "workers": a.workers });
    let curve = unique_curve(&lines, &cfg, load_builtin_font(), &checkpoints, a.workers)?;
    if curve.exhausted {
        eprintln!("patchtext: corpus ended before the last checkpoint");
    }
    let mut out = Vec::new();
    curve.write_csv(&mut out)?;
    run.output(&a.out, &out)?;
    Ok(run)
}

fn topk(a: TopkArgs) -> CliResult<Run> {
    let mut run = Run::new("stats topk");
    let cfg = a.render.config();
    run.config = json!({ "render": cfg, "k": a.k, "workers": a.workers });
    let lines = corpus(&mut run, &a.input)?;
    let acc = accumulate(&lines, &cfg, load_builtin_font(), a.workers)?;
    let top = acc.top_k(a.k)?;
    fs::create_dir_all(&a.out_dir).map_err(io_context(&a.out_dir))?;
    let names: Vec<String> = top.iter().enumerate().map(|(i, (_, count))| topk_file_name(i + 1, *count)).collect();
    let mut index = String::from("rank,count,file\n");
    for (i, ((_, count), name)) in top.iter().zip(&names).enumerate() {
        writeln!(index, "{},{count},{name}", i + 1).expect("string write");
    }
    run.output(&a.out_dir.join("topk.csv"), index.as_bytes())?;
    for ((patch, _), name) in top.iter().zip(&names) {
        run.output(&a.out_dir.join(name), &patch_pgm(patch))?;
    }
    Ok(run)
}

fn lengths(a: LengthsArgs) -> CliResult<Run> {
    let mut run = Run::new("stats lengths");
    let cfg = a.render.config();
    run.config = json!({ "render": cfg, "workers": a.workers });
    let lines = corpus(&mut run, &a.input)?;
    let hist = length_histogram(&lines, &cfg, load_builtin_font(), a.workers)?;
    let mut out = Vec::new();
    write_histogram_csv(&mut out, &hist)?;
    run.output(&a.out, &out)?;
    Ok(run)
}

fn wordfreq(a: WordfreqArgs) -> CliResult<Run> {
    let mut run = Run::new("stats wordfreq");
    run.config = json!({ "lowercase": a.lowercase, "high_k": a.high_k, "low_k": a.low_k, "low_target": a.low_target });
    let lines = corpus(&mut run, &a.input)?;
    let case = if a.lowercase { CaseMode::Lower } else { CaseMode::Sensitive };
    let table = WordFrequencyTable::from_lines(&lines, case);
    let mut out = String::from("word,count\n");
    for (w, c) in table.sorted() {
        writeln!(out, "{},{c}", csv_field(&w)).expect("string write");
    }
    run.output(&a.out, out.as_bytes())?;
    if let Some(path) = &a.buckets {
        let b = patchtext::stats::frequency_buckets(&table, a.high_k, a.low_target, a.low_k)?;
        if b.short {
            eprintln!("patchtext: fewer words than requested for the frequency buckets");
        }
        run.output(path, &json_bytes(&b)?)?;
    }
    Ok(run)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn mask(a: MaskArgs) -> CliResult<Run> {
    let mut run = Run::new("mask");
    let cfg = MaskConfig { ratio: a.ratio, max_span: a.max_span, seed: a.seed };
    run.config = json!({ "n": a.n, "mask": cfg });
    run.seeds.push(a.seed);
    let plan = sample_span_mask(a.n, &cfg)?;
    let text = plan.to_json() + "\n";
    match &a.out {
        Some(path) => run.output(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(run)
}

fn train(a: TrainArgs) -> CliResult<Run> {
    let mut run = Run::new("train");
    let render_cfg = a.render.config();
    let mut model_cfg = ModelConfig::by_name(&a.preset)?;
    model_cfg.target_norm = match a.target_norm {
        TargetNormArg::PerPatch => TargetNorm::PerPatch,
        TargetNormArg::Raw => TargetNorm::Raw,
    };
    let train_cfg = TrainConfig {
        steps: a.steps,
        batch_size: a.batch_size,
        seed: a.seed,
        mask: MaskConfig { ratio: a.mask_ratio, max_span: a.max_span, seed: a.seed },
        adam: AdamConfig { lr: a.lr, beta1: a.beta1, beta2: a.beta2, epsilon: a.adam_epsilon },
        fixed_masks: a.fixed_masks,
        workers: a.workers,
    };
    run.config = json!({ "render": render_cfg, "model": model_cfg, "train": train_cfg });
    run.seeds.push(a.seed);
    let lines = corpus(&mut run, &a.input)?;
    let mut model = Model::<f32>::new(model_cfg, a.seed)?;
    let report = train_steps(&mut model, &lines, &render_cfg, load_builtin_font(), &train_cfg)?;
    if report.skipped_lines > 0 {
        eprintln!("patchtext: skipped {} lines without content patches", report.skipped_lines);
    }
    if let Some(last) = report.records.last() {
        eprintln!("patchtext: step {} loss {:.6}", last.step, last.loss);
    }
    let mut ckpt = Vec::new();
    write_checkpoint(&model, &mut ckpt)?;
    run.output(&a.out, &ckpt)?;
    if let Some(log) = &a.log {
        let mut csv = Vec::new();
        write_log_csv(&report.records, &mut csv)?;
        run.output(log, &csv)?;
    }
    Ok(run)
}

fn read_tsv(run: &mut Run, path: &Path, fields: usize) -> CliResult<Vec<Vec<String>>> {
    let rows = corpus(run, path)?;
    rows.iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let cols: Vec<String> = l.split('\t').map(str::to_string).collect();
            if cols.len() != fields {
                return Err(CliError::Precondition(format!(
                    "{}:{}: expected {fields} tab-separated fields, found {}",
                    path.display(),
                    i + 1,
                    cols.len()
                )));
            }
            Ok(cols)
        })
        .collect()
}

fn normalise_word(w: &str) -> String {
    w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

fn find_word(ann: &SentenceAnnotation, target: &str) -> CliResult<Occurrence> {
    let t = normalise_word(target);
    ann.words
        .iter()
        .position(|w| normalise_word(&w.word) == t)
        .map(|word| Occurrence { sentence: ann.id, word })
        .ok_or_else(|| {
            CliError::Precondition(format!("target {target:?} not found in sentence {:?}", ann.text.clone().unwrap_or_default()))
        })
}

fn encode(a: EncodeArgs) -> CliResult<Run> {
    let mut run = Run::new("encode");
    let cfg = a.render.config();
    run.input(&a.checkpoint);
    let bytes = fs::read(&a.checkpoint).map_err(io_context(&a.checkpoint))?;
    let model: Model<f32> = read_checkpoint(&bytes[..])?;
    run.config = json!({ "render": cfg, "model": model.config });

    let mut texts: Vec<String> = Vec::new();
    if let Some(p) = &a.input {
        texts.extend(corpus(&mut run, p)?);
    }
    let mut wic_rows = Vec::new();
    if let Some(p) = &a.wic {
        for row in read_tsv(&mut run, p, 4)? {
            let label = match row[3].trim().to_ascii_lowercase().as_str() {
                "t" | "true" | "similar" => PairLabel::Similar,
                "f" | "false" | "different" => PairLabel::Different,
                other => return Err(CliError::Precondition(format!("unknown pair label {other:?}"))),
            };
            let first = texts.len() as u32;
            texts.push(row[1].clone());
            texts.push(row[2].clone());
            wic_rows.push((row[0].clone(), first, label));
        }
    }
    let mut sts_pairs = Vec::new();
    if let Some(p) = &a.sts {
        for row in read_tsv(&mut run, p, 3)? {
            let gold: f64 = row[2]
                .trim()
                .parse()
                .map_err(|_| CliError::Precondition(format!("gold score {:?} is not a number", row[2])))?;
            let first = texts.len() as u32;
            texts.push(row[0].clone());
            texts.push(row[1].clone());
            sts_pairs.push(StsPair { a: first, b: first + 1, gold });
        }
    }
    if texts.is_empty() {
        return Err(CliError::Precondition("nothing to encode: give --in, --wic or --sts".into()));
    }
    let seqs = render_all(&texts, &cfg, load_builtin_font(), 1)?;
    let mut sentences = Vec::with_capacity(seqs.len());
    let mut states = Vec::with_capacity(seqs.len());
    for (i, (seq, text)) in seqs.iter().zip(&texts).enumerate() {
        sentences.push(SentenceAnnotation::for_sequence(i as u32, Some(text.clone()), seq));
        states.push(model.encode_layers(seq)?);
    }
    let wic_pairs = if a.wic.is_some() {
        let mut pairs = Vec::new();
        for (target, first, label) in &wic_rows {
            let pa = find_word(&sentences[*first as usize], target)?;
            let pb = find_word(&sentences[*first as usize + 1], target)?;
            pairs.push(WicPair { a: pa, b: pb, label: *label });
        }
        Some(pairs)
    } else {
        None
    };
    let annotations = DumpAnnotations {
        layers: model.config.enc_layers + 1,
        width: model.config.hidden,
        sentences,
        wic_pairs,
        sts_pairs: a.sts.is_some().then_some(sts_pairs),
    };
    let dump = EmbeddingDump::new(annotations, states)?;
    let mut bin = Vec::new();
    dump.write_binary(&mut bin)?;
    let mut side = Vec::new();
    dump.write_sidecar(&mut side)?;
    side.push(b'\n');
    run.output(&a.out, &bin)?;
    run.output(&with_suffix(&a.out, ".json"), &side)?;
    Ok(run)
}

fn load_dump(run: &mut Run, a: &DumpArgs) -> CliResult<EmbeddingDump<f64>> {
    let sidecar = a.sidecar.clone().unwrap_or_else(|| with_suffix(&a.dump, ".json"));
    run.input(&a.dump);
    run.input(&sidecar);
    let side = fs::read(&sidecar).map_err(io_context(&sidecar))?;
    let ann: DumpAnnotations = serde_json::from_slice(&side)?;
    let bin = fs::read(&a.dump).map_err(io_context(&a.dump))?;
    Ok(EmbeddingDump::read(&bin[..], ann)?)
}

fn distributions_out(run: &mut Run, out: &Path, dists: &[SimilarityDistribution], metadata: &str) -> CliResult<()> {
    let mut summary = Vec::new();
    write_summary_csv(dists, metadata, &mut summary)?;
    let mut values = Vec::new();
    write_values_csv(dists, metadata, &mut values)?;
    run.output(out, &summary)?;
    run.output(&with_suffix(out, ".values.csv"), &values)?;
    Ok(())
}

fn wic(a: WicArgs) -> CliResult<Run> {
    let mut run = Run::new("analyze wic");
    run.config = json!({ "baseline_pairs": a.baseline_pairs });
    run.seeds.push(a.seed);
    let dump = load_dump(&mut run, &a.dump)?;
    let dists: Vec<SimilarityDistribution> =
        wic_distributions(&dump, a.baseline_pairs, a.seed)?.into_iter().flatten().collect();
    let anisotropy: Vec<String> = dists
        .iter()
        .filter(|d| d.label == SimilarityLabel::Random)
        .map(|d| d.mean().map_or_else(String::new, |m| m.to_string()))
        .collect();
    let meta = format!(
        "metric=wic baseline_pairs={} seed={} anisotropy_estimate_mean_random_cosine_by_layer={}",
        a.baseline_pairs,
        a.seed,
        anisotropy.join(";")
    );
    distributions_out(&mut run, &a.out, &dists, &meta)?;
    Ok(run)
}

fn selfsim(a: SelfsimArgs) -> CliResult<Run> {
    let mut run = Run::new("analyze selfsim");
    run.config = json!({ "words": a.words, "min_sentences": a.min_sentences });
    let dump = load_dump(&mut run, &a.dump)?;
    let words: Vec<String> = if a.words.is_empty() {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for s in dump.sentences() {
            let mut uniq: Vec<&str> = s.words.iter().map(|w| w.word.as_str()).collect();
            uniq.sort_unstable();
            uniq.dedup();
            for w in uniq {
                *seen.entry(w.to_string()).or_default() += 1;
            }
        }
        seen.into_iter().filter(|(_, n)| *n >= a.min_sentences.max(2)).map(|(w, _)| w).collect()
    } else {
        a.words.clone()
    };
    let mut out = format!("# metric=selfsim words={}\nword,layer,sentences,self_similarity,intra_sentence_mean\n", words.len());
    for w in &words {
        let occ = word_occurrences(&dump, w);
        for layer in 0..dump.layers() {
            let ss = self_similarity(&dump, w, layer)?;
            let intra = occ
                .iter()
                .map(|&o| intra_sentence_similarity(&dump, o, layer))
                .collect::<patchtext::Result<Vec<f64>>>()?;
            let mean = intra.iter().sum::<f64>() / intra.len() as f64;
            writeln!(out, "{},{layer},{},{ss},{mean}", csv_field(w), occ.len()).expect("string write");
        }
    }
    run.output(&a.out, out.as_bytes())?;
    Ok(run)
}

fn freqbias(a: FreqbiasArgs) -> CliResult<Run> {
    let mut run = Run::new("analyze freqbias");
    let dump = load_dump(&mut run, &a.dump)?;
    run.input(&a.buckets);
    let raw = fs::read(&a.buckets).map_err(io_context(&a.buckets))?;
    let buckets: FrequencyBuckets = serde_json::from_slice(&raw)?;
    let high: Vec<String> = buckets.high.iter().map(|w| w.0.clone()).collect();
    let low: Vec<String> = buckets.low.iter().map(|w| w.0.clone()).collect();
    run.config = json!({ "high": high, "low": low });
    let mut dists = Vec::new();
    for layer in 0..dump.layers() {
        dists.extend(frequency_bucket_distributions(&dump, &high, &low, layer)?);
    }
    let meta = format!("metric=freqbias high_words={} low_words={}", high.len(), low.len());
    distributions_out(&mut run, &a.out, &dists, &meta)?;
    Ok(run)
}

fn sts(a: StsArgs) -> CliResult<Run> {
    let mut run = Run::new("analyze sts");
    let dump = load_dump(&mut run, &a.dump)?;
    let curve = sts_layer_curve(&dump)?;
    let pairs = dump.annotations().sts_pairs.as_ref().map_or(0, Vec::len);
    let mut out = format!("# metric=sts pairs={pairs}\nlayer,spearman\n");
    for (l, rho) in curve.iter().enumerate() {
        writeln!(out, "{l},{rho}").expect("string write");
    }
    run.output(&a.out, out.as_bytes())?;
    Ok(run)
}

fn spearman(a: SpearmanArgs) -> CliResult<Run> {
    let mut run = Run::new("analyze spearman");
    let rows = corpus(&mut run, &a.input)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, row) in rows.iter().enumerate().skip(1).filter(|(_, r)| !r.trim().is_empty()) {
        let cols: Vec<&str> = row.split(',').collect();
        let parse = |c: Option<&&str>| c.and_then(|v| v.trim().parse::<f64>().ok());
        match (parse(cols.first()), parse(cols.get(1))) {
            (Some(x), Some(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ => return Err(CliError::Precondition(format!("{}:{}: expected two numbers", a.input.display(), i + 1))),
        }
    }
    let rho = spearman_rho(&xs, &ys)?;
    let text = format!("# metric=spearman n={}\nrho\n{rho}\n", xs.len());
    match &a.out {
        Some(p) => run.output(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(run)
}
