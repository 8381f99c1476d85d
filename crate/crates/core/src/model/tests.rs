use super::*;
use crate::masking::{normalize_targets, patch_unit, MaskConfig, MaskPlan, TargetNorm};
use crate::raster::load_builtin_font;
use crate::render::{render, Patch, PatchSequence, RenderConfig, Strategy, PATCH_PIXELS};

fn seq(text: &str, strategy: Strategy) -> PatchSequence {
    render(text, &RenderConfig::new(strategy), load_builtin_font()).unwrap()
}

fn eight_patch_seq() -> PatchSequence {
    let s = seq("a cat sat on it", Strategy::Bigrams);
    assert_eq!(s.len(), 8, "fixture should render to 8 patches");
    s
}

#[test]
fn param_counts_match_formula_and_presets() {
    for (cfg, target) in [(ModelConfig::tiny(), 5.5e6), (ModelConfig::small(), 22e6), (ModelConfig::base(), 86e6)] {
        let p = Params::<f32>::init(&cfg, 0);
        assert_eq!(p.encoder_count(), cfg.encoder_param_formula());
        let rel = (p.encoder_count() as f64 - target).abs() / target;
        assert!(rel <= 0.05, "{} vs {target}", p.encoder_count());
    }
}

#[test]
fn init_is_deterministic() {
    let a = Params::<f32>::init(&ModelConfig::desk(), 7);
    let b = Params::<f32>::init(&ModelConfig::desk(), 7);
    let c = Params::<f32>::init(&ModelConfig::desk(), 8);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.tensors().iter().filter(|(n, _)| n.ends_with(".bias")).all(|(_, t)| t.data.iter().all(|&v| v == 0.0)));
}

#[test]
fn reconstruction_shape() {
    let s = eight_patch_seq();
    let model = Model::<f32>::new(ModelConfig::desk(), 1).unwrap();
    let plan = MaskPlan::from_indices(7, 0, [2, 5]).unwrap();
    let rec = model.forward_loss(&s, &plan).unwrap();
    assert_eq!(rec.predictions.len(), 2 * PATCH_PIXELS);
    assert_eq!(rec.masked, vec![2, 5]);
    assert!(rec.loss >= 0.0);
}

#[test]
fn preconditions() {
    let s = eight_patch_seq();
    let model = Model::<f32>::new(ModelConfig::desk(), 1).unwrap();
    assert!(model.forward_loss(&s, &MaskPlan::from_indices(7, 0, []).unwrap()).is_err());
    assert!(model.forward_loss(&s, &MaskPlan::from_indices(6, 0, [1]).unwrap()).is_err());
    let mut bad = ModelConfig::desk();
    bad.heads = 3;
    assert!(Model::<f32>::new(bad, 0).is_err());
}

#[test]
fn unmasked_targets_do_not_change_loss() {
    let s = eight_patch_seq();
    let model = Model::<f64>::new(ModelConfig::desk(), 3).unwrap();
    let plan = MaskPlan::from_indices(7, 0, [1, 2, 4]).unwrap();
    let base = model.forward_loss(&s, &plan).unwrap();
    let mut targets = s.patches().to_vec();
    for t in [0, 3, 5, 6] {
        targets[t] = Patch([t as u8 * 40; PATCH_PIXELS]);
    }
    let perturbed = model.forward_loss_targets(s.patches(), &targets, &plan).unwrap();
    assert_eq!(base.loss.to_bits(), perturbed.loss.to_bits());
    let mut masked_change = targets.clone();
    masked_change[2] = Patch([9; PATCH_PIXELS]);
    let changed = model.forward_loss_targets(s.patches(), &masked_change, &plan).unwrap();
    assert_ne!(base.loss, changed.loss);
}

#[test]
fn zero_loss_configuration_has_zero_gradient() {
    let p = Patch(std::array::from_fn(|i| if i % 3 == 0 { 255 } else { 0 }));
    let s = PatchSequence::from_parts(Strategy::Continuous, vec![p, p, p, p, Patch::eos()], vec![], vec![], false)
        .unwrap();
    let mut model = Model::<f64>::new(ModelConfig::desk(), 5).unwrap();
    let (target, _) = normalize_targets::<f64>(&p, TargetNorm::PerPatch, 1e-6);
    model.params.head.weight.data.iter_mut().for_each(|w| *w = 0.0);
    model.params.head.bias.data = target;
    let plan = MaskPlan::from_indices(4, 0, [1, 2]).unwrap();
    let (rec, grads) = model.loss_and_grad(&s, &plan).unwrap();
    assert!(rec.loss.abs() < 1e-24);
    for (name, t) in grads.tensors() {
        assert!(t.data.iter().all(|v| v.abs() < 1e-12), "{name}");
    }
}

/// With no blocks and no norms the predictions are affine in the mask token:
/// `pred = W (mask + pos_t) + b`. The loss gradient has a closed form.
#[test]
fn linear_ablation_matches_closed_form() {
    let mut cfg = ModelConfig::desk();
    cfg.enc_layers = 0;
    cfg.dec_layers = 0;
    cfg.layer_norm = false;
    cfg.target_norm = TargetNorm::Raw;
    let s = seq("hi there you", Strategy::Words);
    let n = s.content_len();
    let model = Model::<f64>::new(cfg.clone(), 11).unwrap();
    let plan = MaskPlan::from_indices(n, 0, [0, n - 1]).unwrap();
    let (rec, grads) = model.loss_and_grad(&s, &plan).unwrap();

    let dh = cfg.decoder_hidden;
    let pos = crate::masking::sinusoidal_positions::<f64>(POSITIONS, dh).unwrap();
    let w = &model.params.head.weight.data;
    let b = &model.params.head.bias.data;
    let m = plan.masked();
    let denom = (m.len() * PATCH_PIXELS) as f64;
    let mut loss = 0.0;
    let mut dw = vec![0.0; PATCH_PIXELS * dh];
    let mut db = vec![0.0; PATCH_PIXELS];
    let mut dmask = vec![0.0; dh];
    for &t in &m {
        let x: Vec<f64> = (0..dh).map(|j| model.params.mask_token.data[j] + pos[(t + 1) * dh + j]).collect();
        let y = patch_unit::<f64>(&s.patches()[t]);
        for o in 0..PATCH_PIXELS {
            let pred = b[o] + (0..dh).map(|j| w[o * dh + j] * x[j]).sum::<f64>();
            let r = pred - y[o];
            loss += r * r / denom;
            let d = 2.0 * r / denom;
            db[o] += d;
            for j in 0..dh {
                dw[o * dh + j] += d * x[j];
                dmask[j] += d * w[o * dh + j];
            }
        }
    }
    assert!((rec.loss - loss).abs() < 1e-12);
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close(&grads.head.weight.data, &dw));
    assert!(close(&grads.head.bias.data, &db));
    assert!(close(&grads.mask_token.data, &dmask));
    assert!(grads.patch_embed.weight.data.iter().all(|&v| v == 0.0));
}

#[test]
fn desk_grad_check() {
    let s = seq("the quick brown fox jumps", Strategy::Bigrams);
    let model = Model::<f64>::new(ModelConfig::desk(), 21).unwrap();
    let plan = crate::masking::sample_span_mask(s.content_len(), &MaskConfig { seed: 4, ..Default::default() }).unwrap();
    let report = grad_check(&model, &s, &plan, 1e-5, 200, 9).unwrap();
    assert!(report.checked >= 200);
    assert!(report.max_relative_error <= 1e-4, "{report:?}");
}

#[test]
fn raw_targets_grad_check() {
    let mut cfg = ModelConfig::desk();
    cfg.target_norm = TargetNorm::Raw;
    cfg.heads = 4;
    let s = seq("pack my box", Strategy::Continuous);
    let model = Model::<f64>::new(cfg, 2).unwrap();
    let plan = MaskPlan::from_indices(s.content_len(), 0, [0, 1]).unwrap();
    let report = grad_check(&model, &s, &plan, 1e-5, 200, 1).unwrap();
    assert!(report.max_relative_error <= 1e-4, "{report:?}");
}

#[test]
fn encode_layers_shapes_and_layer_zero() {
    let model = Model::<f64>::new(ModelConfig::desk(), 4).unwrap();
    let s = seq("ab ab", Strategy::Bigrams);
    let layers = model.encode_layers(&s).unwrap();
    assert_eq!(layers.len(), 3);
    let h = 32;
    assert!(layers.iter().all(|l| l.len() == (s.len() + 1) * h));
    let pos = crate::masking::sinusoidal_positions::<f64>(POSITIONS, h).unwrap();
    // "ab" occupies patches 0 and 1 (positions 1 and 2).
    assert_eq!(s.patches()[0], s.patches()[1]);
    for j in 0..h {
        let a = layers[0][h + j] - pos[h + j];
        let b = layers[0][2 * h + j] - pos[2 * h + j];
        assert!((a - b).abs() < 1e-12);
    }
    let mut other = model.clone();
    other.params.encoder[0].query.weight.data[0] += 1.0;
    assert_eq!(other.encode_layers(&s).unwrap()[0], layers[0]);
}

#[test]
fn zero_steps_leave_params_unchanged() {
    let mut model = Model::<f32>::new(ModelConfig::desk(), 0).unwrap();
    let before = model.params.clone();
    let cfg = TrainConfig { steps: 0, ..Default::default() };
    let report = train_steps(&mut model, &["a line"], &RenderConfig::default(), load_builtin_font(), &cfg).unwrap();
    assert!(report.records.is_empty());
    assert_eq!(model.params, before);
}

#[test]
fn empty_lines_are_skipped_and_counted() {
    let mut model = Model::<f32>::new(ModelConfig::desk(), 0).unwrap();
    let cfg = TrainConfig { steps: 2, ..Default::default() };
    let lines = ["", "hello world", "   "];
    let report = train_steps(&mut model, &lines, &RenderConfig::default(), load_builtin_font(), &cfg).unwrap();
    assert_eq!(report.skipped_lines, 2);
    assert_eq!(report.records.len(), 2);
    let none: [&str; 1] = [""];
    assert!(train_steps(&mut model, &none, &RenderConfig::default(), load_builtin_font(), &cfg).is_err());
}

#[test]
fn training_is_deterministic() {
    let lines = ["the cat sat", "on the mat today", "a dog ran far away", "it was late"];
    let cfg = TrainConfig { steps: 5, batch_size: 2, seed: 3, ..Default::default() };
    let run = || {
        let mut model = Model::<f32>::new(ModelConfig::desk(), 1).unwrap();
        let r = train_steps(&mut model, &lines, &RenderConfig::default(), load_builtin_font(), &cfg).unwrap();
        (r.records, model.params)
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    assert!(a.iter().all(|r| r.loss >= 0.0 && r.strategy == Strategy::Bigrams));
}

#[test]
fn overfits_eight_sequences() {
    let lines = [
        "the cat sat on the mat",
        "a dog ran in the park",
        "she sells sea shells",
        "time flies like an arrow",
        "all good things end",
        "we met at noon",
        "rain falls on the plain",
        "keep it simple",
    ];
    let mut model = Model::<f32>::new(ModelConfig::desk(), 5).unwrap();
    let cfg = TrainConfig { steps: 300, batch_size: 8, seed: 5, fixed_masks: true, ..Default::default() };
    let report = train_steps(&mut model, &lines, &RenderConfig::default(), load_builtin_font(), &cfg).unwrap();
    let first = report.records[0].loss;
    let last = report.records.last().unwrap().loss;
    assert!(last < 0.25 * first, "{first} -> {last}");
}

#[test]
fn checkpoint_round_trip() {
    let model = Model::<f32>::new(ModelConfig::desk(), 6).unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&model, &mut buf).unwrap();
    assert_eq!(&buf[..4], b"PXCK");
    let back: Model<f32> = read_checkpoint(&buf[..]).unwrap();
    assert_eq!(back, model);
    assert!(read_checkpoint::<f32, _>(&buf[..buf.len() - 3]).is_err());
    let mut wrong = buf.clone();
    wrong[0] = b'X';
    assert!(read_checkpoint::<f32, _>(&wrong[..]).is_err());
}

#[test]
fn smoothing_is_trailing_mean() {
    let recs: Vec<TrainRecord> = [4.0, 2.0, 6.0, 0.0]
        .iter()
        .enumerate()
        .map(|(i, &l)| TrainRecord { step: i + 1, loss: l, masked_patches: 1, strategy: Strategy::Mono })
        .collect();
    assert_eq!(smoothed_losses(&recs, 2), vec![4.0, 3.0, 4.0, 3.0]);
    let mut csv = Vec::new();
    write_log_csv(&recs[..1], &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), "step,loss,masked_patches\n1,4,1\n");
}
