//! Independent reference implementations used as test oracles. They share
//! no code with the library beyond plain data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use segcue::corpus::{synthesize, Corpus};

pub const SAFFRAN_WORDS: [&str; 6] = ["badiku", "padoti", "gomabu", "tupimo", "kinuda", "nogipu"];

/// Six trisyllabic CV words over twelve phonemes.
pub fn saffran_lexicon() -> Vec<Vec<String>> {
    SAFFRAN_WORDS
        .iter()
        .map(|w| w.chars().map(|c| c.to_string()).collect())
        .collect()
}

pub fn saffran_corpus(n: usize, seed: u64) -> Corpus {
    synthesize(&saffran_lexicon(), 4..=8, n, seed).unwrap()
}

/// Witten-Bell interpolation written as the textbook recursion over
/// suffixes, with counts gathered by a plain scan.
pub struct OracleNGram {
    order: usize,
    vocab: usize,
    counts: HashMap<Vec<u32>, HashMap<u32, u64>>,
}

impl OracleNGram {
    pub fn train(stream: &[u32], order: usize, vocab: usize) -> Self {
        let mut counts: HashMap<Vec<u32>, HashMap<u32, u64>> = HashMap::new();
        for j in 0..stream.len() {
            for k in 0..order {
                if k > j {
                    break;
                }
                *counts.entry(stream[j - k..j].to_vec()).or_default().entry(stream[j]).or_default() += 1;
            }
        }
        Self { order, vocab, counts }
    }

    pub fn prob(&self, w: u32, context: &[u32]) -> f64 {
        let keep = context.len().min(self.order - 1);
        self.rec(w, &context[context.len() - keep..])
    }

    fn rec(&self, w: u32, h: &[u32]) -> f64 {
        let lower = if h.is_empty() { 1.0 / self.vocab as f64 } else { self.rec(w, &h[1..]) };
        match self.counts.get(h) {
            None => lower,
            Some(succ) => {
                let total: u64 = succ.values().sum();
                let types = succ.len() as f64;
                let c = succ.get(&w).copied().unwrap_or(0) as f64;
                (c + types * lower) / (total as f64 + types)
            }
        }
    }

    pub fn distribution(&self, context: &[u32]) -> Vec<f64> {
        (0..self.vocab as u32).map(|w| self.prob(w, context)).collect()
    }
}

/// `(entropy, surprisal, rank, ubp)` of one distribution, from definitions.
pub fn oracle_cues(q: &[f64], target: usize, ub: usize) -> (f64, f64, u32, f64) {
    let ln2 = std::f64::consts::LN_2;
    let mut h = 0.0;
    for &p in q {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    let s = -q[target].ln() / ln2;
    let mut rank = 1;
    for (v, &p) in q.iter().enumerate() {
        if p > q[target] || (p == q[target] && v < target) {
            rank += 1;
        }
    }
    (h / ln2, s, rank, q[ub])
}

/// Cue vectors `[entropy, loss, rank, ubp]` per utterance, each
/// conditioned on the stream prefix before it.
pub fn oracle_corpus_cues(predict: impl Fn(&[u32]) -> Vec<f64>, corpus: &Corpus) -> Vec<[Vec<f64>; 4]> {
    let ub = 0u32;
    let mut history = vec![ub];
    let mut out = Vec::new();
    for utt in corpus.utterances() {
        let mut cues: [Vec<f64>; 4] = Default::default();
        let targets: Vec<u32> = utt.tokens().iter().copied().chain([ub]).collect();
        for &t in &targets {
            let q = predict(&history);
            let (e, s, r, u) = oracle_cues(&q, t as usize, ub as usize);
            cues[0].push(e);
            cues[1].push(s.min(64.0));
            cues[2].push(r as f64);
            cues[3].push(u);
            history.push(t);
        }
        out.push(cues);
    }
    out
}

/// 1-based positions `2..=N` where a boundary is placed.
pub fn oracle_segment(c: &[f64], strategy: &str, param: f64) -> Vec<usize> {
    let n = c.len() - 1;
    let mut out = Vec::new();
    for i in 2..=n {
        // c is 0-based: position i lives at c[i - 1]
        let here = c[i - 1];
        let keep = match strategy {
            "peak" => here > c[i - 2] && here > c[i],
            "threshold" => here >= param,
            "relative" => here - c[i - 2] >= param,
            _ => unreachable!(),
        };
        if keep {
            out.push(i);
        }
    }
    out
}

pub fn positions(flags: &[bool]) -> Vec<usize> {
    (2..=flags.len()).filter(|&i| flags[i - 1]).collect()
}

/// Micro-averaged boundary F1 from position sets.
pub fn oracle_f1(gold: &[Vec<usize>], pred: &[Vec<usize>]) -> (usize, usize, usize, f64) {
    let (mut tp, mut fp, mut fnn) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        tp += p.iter().filter(|x| g.contains(x)).count();
        fp += p.iter().filter(|x| !g.contains(x)).count();
        fnn += g.iter().filter(|x| !p.contains(x)).count();
    }
    let f1 = if tp + fp + fnn == 0 { 1.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fnn) as f64 };
    (tp, fp, fnn, f1)
}

/// Best F1 of a tunable strategy over every distinct decision value on
/// the tuning data, then scored on the evaluation data. Ties keep the
/// smallest parameter.
pub fn oracle_best_param(tracks: &[Vec<f64>], gold: &[Vec<usize>], strategy: &str) -> (f64, f64) {
    let mut values: Vec<f64> = Vec::new();
    for c in tracks {
        for i in 2..c.len() {
            values.push(if strategy == "relative" { c[i - 1] - c[i - 2] } else { c[i - 1] });
        }
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut best = (f64::NAN, -1.0);
    for &v in &values {
        let pred: Vec<Vec<usize>> = tracks.iter().map(|c| oracle_segment(c, strategy, v)).collect();
        let f1 = oracle_f1(gold, &pred).3;
        if f1 > best.1 {
            best = (v, f1);
        }
    }
    best
}

/// Frequency BPE on symbol strings: greedy left-to-right non-overlapping
/// counts, most frequent pair first, ties by name, no pair touching
/// `<UB>`, no pair whose concatenation is already a token.
pub fn reference_bpe(stream: &[String], initial: &[String], target: usize) -> (Vec<String>, Vec<String>) {
    let mut s: Vec<String> = stream.to_vec();
    let mut vocab: Vec<String> = initial.to_vec();
    while vocab.len() < target {
        let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut covered_until: HashMap<(String, String), usize> = HashMap::new();
        for i in 0..s.len().saturating_sub(1) {
            let key = (s[i].clone(), s[i + 1].clone());
            if key.0 == "<UB>" || key.1 == "<UB>" {
                continue;
            }
            let until = covered_until.entry(key.clone()).or_insert(0);
            if *until <= i {
                *until = i + 2;
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        let best = counts
            .into_iter()
            .filter(|((l, r), _)| !vocab.contains(&format!("{l}{r}")))
            .fold(None::<((String, String), usize)>, |acc, (k, c)| match acc {
                Some((_, bc)) if bc >= c => acc,
                _ => Some((k, c)),
            });
        let Some(((l, r), _)) = best else { break };
        let merged = format!("{l}{r}");
        let mut next = Vec::with_capacity(s.len());
        let mut i = 0;
        while i < s.len() {
            if i + 1 < s.len() && s[i] == l && s[i + 1] == r {
                next.push(merged.clone());
                i += 2;
            } else {
                next.push(s[i].clone());
                i += 1;
            }
        }
        s = next;
        vocab.push(merged);
    }
    (s, vocab)
}

pub fn symbols(corpus: &Corpus, ids: &[u32]) -> Vec<String> {
    ids.iter().map(|&t| corpus.inventory().symbol(t).unwrap().to_string()).collect()
}

/// `n_words` distinct words with lengths drawn from `lengths` over
/// phonemes `p0..p{n_phonemes-1}`.
pub fn random_lexicon(n_words: usize, lengths: std::ops::RangeInclusive<usize>, n_phonemes: usize, seed: u64) -> Vec<Vec<String>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < n_words {
        let len = rng.random_range(lengths.clone());
        let w: Vec<String> = (0..len).map(|_| format!("p{}", rng.random_range(0..n_phonemes))).collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Standard normal draw by Box-Muller.
pub fn normal(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
