use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest};

use super::*;
use crate::raster::{load_builtin_font, measure_text, raster_line};

fn font() -> &'static FontAtlas {
    load_builtin_font()
}

fn seq(text: &str, strategy: Strategy) -> PatchSequence {
    render(text, &RenderConfig::new(strategy), font()).unwrap()
}

/// Hand-built bigram cell: first glyph at column 0, second at its advance.
fn oracle_cell(group: &str) -> Patch {
    let mut p = Patch::blank();
    let mut x = 0;
    for c in group.chars() {
        let g = font().lookup(c);
        for y in 0..16 {
            for gx in 0..g.ink_width() {
                if x + gx < 16 && g.pixel(gx, y) != 0 {
                    p.0[y * 16 + x + gx] = 255;
                }
            }
        }
        x += g.advance_proportional();
    }
    p
}

/// Ink end of a bigram cell computed from glyph metrics alone.
fn oracle_ink_end(group: &str) -> usize {
    let cs: Vec<char> = group.chars().collect();
    match cs.as_slice() {
        [a] => font().lookup(*a).ink_width(),
        [a, b] => font().lookup(*a).advance_proportional() + font().lookup(*b).ink_width(),
        _ => unreachable!(),
    }
}

#[test]
fn empty_text_is_only_eos() {
    for s in Strategy::ALL {
        let out = seq("", s);
        assert_eq!(out.len(), 1);
        assert!(out.patches()[0].is_eos());
        assert!(word_patch_spans(&out).is_empty());
    }
}

#[test]
fn segment_examples() {
    assert_eq!(segment_word_bigrams("growing"), ["gr", "ow", "in", "g"]);
    assert_eq!(segment_word_bigrams("a"), ["a"]);
    assert_eq!(segment_word_bigrams("be"), ["be"]);
    assert!(segment_word_bigrams("").is_empty());
    // NFC composes the accent, so the pairs are clusters not scalars.
    assert_eq!(segment_word_bigrams("cafe\u{301}s"), ["ca", "fé", "s"]);
}

#[test]
fn growing_under_bigrams() {
    let out = seq("growing", Strategy::Bigrams);
    assert_eq!(out.len(), 5);
    for (patch, group) in out.content().iter().zip(["gr", "ow", "in", "g"]) {
        assert_eq!(*patch, oracle_cell(group), "{group}");
    }
    assert!(out.patches()[4].is_eos());
    assert_eq!(out.overflow_events(), 0);
}

#[test]
fn alice_sentence_under_bigrams() {
    let text = "I must be growing small again.";
    // Hand layout: one cell per group, plus a blank cell whenever the word's
    // last group leaves fewer than 3 free columns.
    let mut expected_ink = 0;
    let mut expected_blank = 0;
    let tokens: Vec<&str> = text.split(' ').collect();
    for (i, tok) in tokens.iter().enumerate() {
        let groups = segment_word_bigrams(tok);
        expected_ink += groups.len();
        if i + 1 < tokens.len() && oracle_ink_end(groups.last().unwrap()) + 3 > 16 {
            expected_blank += 1;
        }
    }
    assert_eq!(expected_ink, 1 + 2 + 1 + 4 + 3 + 3);
    let out = seq(text, Strategy::Bigrams);
    let ink = out.content().iter().filter(|p| !p.is_blank()).count();
    let blank = out.content().iter().filter(|p| p.is_blank()).count();
    assert_eq!(ink, 14);
    assert_eq!(blank, expected_blank);
    assert_eq!(out.len(), 14 + expected_blank + 1);
    let groups: Vec<String> = tokens.iter().flat_map(|t| segment_word_bigrams(t)).collect();
    let inked: Vec<&Patch> = out.content().iter().filter(|p| !p.is_blank()).collect();
    for (p, g) in inked.iter().zip(&groups) {
        assert_eq!(**p, oracle_cell(g), "{g}");
    }
}

#[test]
fn bigram_spans_for_must_be() {
    let out = seq("must be", Strategy::Bigrams);
    let gap = usize::from(oracle_ink_end("st") + 3 > 16);
    assert_eq!(word_patch_spans(&out), vec![("must", 0, 1), ("be", 2 + gap, 2 + gap)]);
}

#[test]
fn continuous_spans_follow_ink() {
    let text = "must be";
    let out = seq(text, Strategy::Continuous);
    let line = raster_line(font(), text, AdvanceMode::Proportional);
    // Pixel-level ink accounting: each word owns the columns between its
    // advance-based start and end.
    let words = [("must", 0, measure_text(font(), "must", AdvanceMode::Proportional))];
    let be_start = measure_text(font(), "must ", AdvanceMode::Proportional);
    let words = [words[0], ("be", be_start, line.width())];
    let mut expected = Vec::new();
    for (w, start, end) in words {
        let inked: Vec<usize> = (start..end).filter(|&x| (0..16).any(|y| line.pixel(x, y) != 0)).collect();
        expected.push((w, inked[0] / 16, inked[inked.len() - 1] / 16));
    }
    assert_eq!(word_patch_spans(&out), expected);
}

#[test]
fn mono_word_straddles_after_odd_offset() {
    // "it be": `b` sits in the second half of patch 1, `e` in patch 2.
    let out = seq("it be", Strategy::Mono);
    assert_eq!(word_patch_spans(&out), vec![("it", 0, 0), ("be", 1, 2)]);
    let even = seq("a be", Strategy::Mono);
    assert_eq!(word_patch_spans(&even)[1], ("be", 1, 1));
}

#[test]
fn words_layout_rule() {
    let out = seq("must be", Strategy::Words);
    let must_end = measure_text(font(), "must", AdvanceMode::Proportional) - 1;
    let be_first = (must_end + 3).div_ceil(16);
    let spans = word_patch_spans(&out);
    assert_eq!(spans[0], ("must", 0, (must_end - 1) / 16));
    assert_eq!(spans[1].1, be_first);
}

#[test]
fn whitespace_runs_collapse_for_structured_strategies() {
    for s in [Strategy::Bigrams, Strategy::Words] {
        assert_eq!(seq("must   be", s), seq("must be", s));
        assert_eq!(seq("  must be ", s).patches(), seq("must be", s).patches());
    }
    // Unstructured strategies keep every whitespace cluster.
    assert_ne!(seq("must   be", Strategy::Mono).patches(), seq("must be", Strategy::Mono).patches());
}

#[test]
fn truncation_keeps_cap_and_drops_cut_spans() {
    let text = "abcdefgh ".repeat(400);
    for s in Strategy::ALL {
        let out = seq(&text, s);
        assert_eq!(out.len(), MAX_PATCHES, "{s}");
        assert!(out.truncated());
        assert!(out.patches()[MAX_PATCHES - 1].is_eos());
        assert!(out.word_spans().iter().all(|sp| sp.last < MAX_PATCHES - 1));
        assert_eq!(out.words().len(), 400);
    }
    let cfg = RenderConfig { max_patches: 2, ..RenderConfig::new(Strategy::Bigrams) };
    let out = render("growing", &cfg, font()).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(word_patch_spans(&out), vec![]);
}

#[test]
fn invalid_config_rejected() {
    let bad = [
        RenderConfig { patch_size: 8, ..RenderConfig::default() },
        RenderConfig { max_patches: 1, ..RenderConfig::default() },
        RenderConfig { min_whitespace: 0, ..RenderConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(render("x", &cfg, font()), Err(Error::Precondition(_))));
    }
}

#[test]
fn wide_pairs_overflow() {
    let cfg = RenderConfig::new(Strategy::Bigrams);
    let wide = FontAtlas::from_glyphs(
        [Glyph::from_bitmap('W', [255; 256])],
        Glyph::from_bitmap('?', [255; 256]),
    )
    .unwrap();
    let out = render("WW W", &cfg, &wide).unwrap();
    assert_eq!(out.overflow_events(), 1);
}

#[test]
fn dump_round_trip() {
    let seqs: Vec<PatchSequence> =
        ["I must be growing small again.", "", "ab cd"].iter().map(|t| seq(t, Strategy::Bigrams)).collect();
    let mut buf = Vec::new();
    write_patch_dump(&mut buf, Strategy::Bigrams, &seqs).unwrap();
    assert_eq!(&buf[..4], b"PXPD");
    assert_eq!(buf[4..7], [1, 16, 1]);
    assert_eq!(u64::from_le_bytes(buf[7..15].try_into().unwrap()), 3);
    let back = read_patch_dump(buf.as_slice()).unwrap();
    assert_eq!(back.strategy, Strategy::Bigrams);
    for (a, b) in seqs.iter().zip(&back.sequences) {
        assert_eq!(a.patches(), b.patches());
        assert_eq!(a.word_spans(), b.word_spans());
    }
    assert!(read_patch_dump(&buf[..buf.len() - 1]).is_err());
    assert!(read_patch_dump(&b"PXPQ"[..]).is_err());
}

fn word_strategy() -> impl proptest::strategy::Strategy<Value = Strategy> {
    prop::sample::select(Strategy::ALL.to_vec())
}

proptest! {
    #[test]
    fn continuous_count_matches_measure(text in "[ -~]{0,200}") {
        let out = seq(&text, Strategy::Continuous);
        let width = measure_text(font(), &text, AdvanceMode::Proportional);
        prop_assert_eq!(out.content_len(), width.div_ceil(16));
    }

    #[test]
    fn cap_and_eos(text in "[ -~]{0,2000}", s in word_strategy()) {
        let out = seq(&text, s);
        prop_assert!(out.len() <= MAX_PATCHES);
        prop_assert!(out.patches().last().unwrap().is_eos());
        prop_assert_eq!(out.eos_index(), out.len() - 1);
        prop_assert!(out.content().iter().all(|p| !p.is_eos()));
    }

    #[test]
    fn structured_spans_are_disjoint_and_aligned(text in "[ -~]{0,300}", words in any::<bool>()) {
        let s = if words { Strategy::Words } else { Strategy::Bigrams };
        let out = seq(&text, s);
        for pair in out.word_spans().windows(2) {
            prop_assert!(pair[0].last < pair[1].first);
        }
        for sp in out.word_spans() {
            let p = out.patches()[sp.first];
            prop_assert!((0..16).any(|y| p.pixel(0, y) != 0), "word does not start at column 0");
        }
    }

    #[test]
    fn bigram_word_patches_context_free(
        word in "[!-~]{1,12}",
        left in "[a-z ]{0,30}",
        right in "[a-z ]{0,30}",
    ) {
        let alone = seq(&word, Strategy::Bigrams);
        let ctx = seq(&format!("{left} {word} {right}"), Strategy::Bigrams);
        let idx = ctx.words().iter().position(|w| *w == word).unwrap();
        let span = ctx.word_spans().iter().find(|sp| sp.word == idx).unwrap();
        prop_assert_eq!(&ctx.patches()[span.first..=span.last], alone.content());
    }

    #[test]
    fn mono_word_spans_cover_cells(prefix in "[a-z]{0,9}", word in "[a-z]{1,9}") {
        let out = seq(&format!("{prefix} {word}"), Strategy::Mono);
        let offset = prefix.len() + 1;
        let sp = *out.word_spans().last().unwrap();
        prop_assert_eq!(sp.first, (offset * 8) / 16);
        let last_ink = (offset + word.len() - 1) * 8 + font().lookup(word.chars().last().unwrap()).ink_width() - 1;
        prop_assert_eq!(sp.last, last_ink / 16);
    }
}
