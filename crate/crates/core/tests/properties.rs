use proptest::prelude::*;

use segcue_core::analysis::{normalized_entropy, pearson, word_final_distribution, PhonemeDistribution, PositionClass};
use segcue_core::corpus::{Corpus, Delimiters, PhonemeInventory, Utterance};
use segcue_core::evaluator::{mcnemar, score};
use segcue_core::predictor::{NGramModel, Predictor};
use segcue_core::segmenter::{candidates, segment_peak, segment_relative, segment_threshold, Strategy as Seg};
use segcue_core::tokenizer::{train_cue_merges, train_freq_bpe, MergeCue, ScoredStream, TrainOptions};

fn track() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec(0u8..4, 2..30).prop_map(|v| v.into_iter().map(f64::from).collect()),
        prop::collection::vec(-5.0f64..5.0, 2..30),
    ]
}

fn flags(n: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), n).prop_map(|mut v| {
        v[0] = true;
        v
    })
}

/// Gold and predicted flag vectors over the same utterance lengths.
fn paired(max_utts: usize) -> impl Strategy<Value = (Vec<Vec<bool>>, Vec<Vec<bool>>)> {
    prop::collection::vec(1usize..12, 1..max_utts).prop_flat_map(|lens| {
        let g: Vec<_> = lens.iter().map(|&n| flags(n)).collect();
        let p: Vec<_> = lens.iter().map(|&n| flags(n)).collect();
        (g, p)
    })
}

fn subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y)
}

/// A random stream over ids `1..v` with `<UB>` (0) at both ends and
/// between utterances.
fn stream(v: u32) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(prop::collection::vec(1..v, 1..12), 1..12).prop_map(|utts| {
        let mut s = vec![0];
        for u in utts {
            s.extend(u);
            s.push(0);
        }
        s
    })
}

const NAMES: [&str; 5] = ["<UB>", "a", "b", "c", "d"];

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn threshold_is_antitone(c in track(), t1 in -6.0f64..6.0, t2 in -6.0f64..6.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(subset(&segment_threshold(&c, hi), &segment_threshold(&c, lo)));
        prop_assert!(subset(&segment_relative(&c, hi), &segment_relative(&c, lo)));
    }

    #[test]
    fn peaks_never_adjacent(c in track()) {
        let p = segment_peak(&c);
        prop_assert!(p[0]);
        for j in 1..p.len().saturating_sub(1) {
            prop_assert!(!(p[j] && p[j + 1]));
        }
    }

    #[test]
    fn candidates_are_sorted_observed_values(tracks in prop::collection::vec(track(), 1..5), n in 1usize..600) {
        for s in [Seg::Threshold, Seg::Relative] {
            let c = candidates(s, &tracks, n);
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(c.len() <= n);
            let doubled: Vec<Vec<f64>> = tracks.iter().chain(&tracks).cloned().collect();
            prop_assert_eq!(&c, &candidates(s, &doubled, n));
        }
    }

    #[test]
    fn score_ignores_utterance_order((gold, pred) in paired(8), rot in 0usize..8) {
        let k = rot % gold.len();
        let (mut g2, mut p2) = (gold.clone(), pred.clone());
        g2.rotate_left(k);
        p2.rotate_left(k);
        prop_assert_eq!(score(&gold, &pred).unwrap(), score(&g2, &p2).unwrap());
    }

    #[test]
    fn adding_boundaries_moves_f1_the_right_way((gold, pred) in paired(6)) {
        let base = score(&gold, &pred).unwrap().f1;
        for u in 0..gold.len() {
            for j in 1..gold[u].len() {
                if pred[u][j] {
                    continue;
                }
                let mut more = pred.clone();
                more[u][j] = true;
                let f = score(&gold, &more).unwrap().f1;
                if gold[u][j] {
                    prop_assert!(f >= base);
                } else {
                    prop_assert!(f <= base);
                }
            }
        }
    }

    #[test]
    fn mcnemar_is_symmetric((gold, a) in paired(6), seed in any::<u64>()) {
        let b: Vec<Vec<bool>> = a
            .iter()
            .enumerate()
            .map(|(u, v)| v.iter().enumerate().map(|(j, &x)| x ^ ((seed >> ((u * 7 + j) % 64)) & 1 == 1)).collect())
            .collect();
        let ab = mcnemar(&gold, &a, &b).unwrap();
        let ba = mcnemar(&gold, &b, &a).unwrap();
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert_eq!((ab.b, ab.c), (ba.c, ba.b));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn ngram_distributions_normalize(s in stream(5), order in 1usize..6, ctx in prop::collection::vec(0u32..5, 0..8)) {
        let m = NGramModel::train(&s, order, 5).unwrap();
        let q = m.distribution(&ctx);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(q.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn cue_merges_conserve_mass(s in stream(5), vals in prop::collection::vec(0.0f64..3.0, 200), target in 6usize..30) {
        let values: Vec<f64> = s.iter().enumerate().map(|(i, _)| vals[i % vals.len()]).collect();
        let scored = ScoredStream::new(s.clone(), values).unwrap();
        let mass = scored.mass();
        let out = train_cue_merges(scored, &NAMES, 0, MergeCue::Ubp, &TrainOptions::new(target)).unwrap();
        let mut prev = s.len();
        for step in &out.steps {
            prop_assert_eq!(step.mass_after, mass);
            prop_assert!(step.tokens_after < prev);
            prev = step.tokens_after;
        }
        prop_assert_eq!(out.stream.mass(), mass);
        prop_assert_eq!(out.table.merges().len(), out.table.vocab().len() - NAMES.len());
    }

    #[test]
    fn encode_replays_and_is_idempotent(s in stream(5), target in 6usize..30) {
        let out = train_freq_bpe(s.clone(), &NAMES, 0, &TrainOptions::new(target)).unwrap();
        let once = out.table.encode(&s).unwrap();
        prop_assert_eq!(&once, &out.stream.tokens().to_vec());
        prop_assert_eq!(out.table.encode(&once).unwrap(), once);
        for m in out.table.merges() {
            prop_assert!(!out.table.vocab().name(m.new).unwrap().contains("<UB>"));
        }
    }

    #[test]
    fn pearson_symmetric_and_bounded(xs in prop::collection::vec(-100.0f64..100.0, 3..30), seed in any::<u64>()) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * ((seed >> (i % 64)) & 3) as f64 - i as f64).collect();
        if let (Ok(a), Ok(b)) = (pearson(&xs, &ys), pearson(&ys, &xs)) {
            prop_assert_eq!(a, b);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn normalized_entropy_permutation_invariant(mut counts in prop::collection::vec(0u64..20, 2..12), rot in 0usize..12) {
        counts[0] += 1;
        counts[1] += 1;
        let d = PhonemeDistribution::from_counts(PositionClass::Other, counts.clone()).unwrap();
        let mut rotated = counts.clone();
        let k = rot % counts.len();
        rotated.rotate_left(k);
        let r = PhonemeDistribution::from_counts(PositionClass::Other, rotated).unwrap();
        let (a, b) = (normalized_entropy(&d).unwrap(), normalized_entropy(&r).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn corpus_render_round_trips(words in prop::collection::vec(prop::collection::vec(prop::collection::vec(0usize..6, 1..4), 1..5), 1..6)) {
        let syms = ["a", "b", "ts", "u:", "e", "o"];
        let text: String = words
            .iter()
            .map(|u| u.iter().map(|w| w.iter().map(|&p| syms[p]).collect::<Vec<_>>().join(" ")).collect::<Vec<_>>().join("\t") + "\n")
            .collect();
        let c = Corpus::ingest(&text, &Delimiters::default()).unwrap();
        prop_assert_eq!(c.render(&Delimiters::default()), text);
        let (fin, other) = match word_final_distribution(&c) {
            Ok(d) => d,
            Err(_) => return Ok(()),
        };
        prop_assert_eq!(fin.total() + other.total(), c.token_count() as u64);
    }

    #[test]
    fn split_partitions_utterances(n in 5usize..60, seed in any::<u64>()) {
        let mut inv = PhonemeInventory::new();
        let a = inv.intern("a");
        let utts: Vec<Utterance> = (0..n).map(|k| Utterance::from_words(&[vec![a; k % 3 + 1]]).unwrap()).collect();
        let c = Corpus::new(inv, utts).unwrap();
        let s = c.split([0.6, 0.2, 0.2], seed).unwrap();
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.dev_indices).chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let again = c.split([0.6, 0.2, 0.2], seed).unwrap();
        prop_assert_eq!(&s.test_indices, &again.test_indices);
        prop_assert_eq!(s.train.token_count() + s.dev.token_count() + s.test.token_count(), c.token_count());
    }
}
