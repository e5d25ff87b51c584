//! Balanced, word-disjoint linear probes for word-final positions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{word_spans, Corpus};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeExample {
    pub embedding: Vec<f64>,
    /// Whether the position ends a word.
    pub word_final: bool,
    /// Phoneme string of the word containing the position.
    pub word_type: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDataset {
    pub train: Vec<ProbeExample>,
    pub test: Vec<ProbeExample>,
    pub train_types: BTreeSet<String>,
    pub test_types: BTreeSet<String>,
}

/// Fraction of word types assigned to the training side.
pub const TRAIN_TYPE_FRACTION: f64 = 0.8;

/// Builds the probe dataset from per-position embeddings.
///
/// `embeddings[u][i]` is the embedding at phoneme `i` of utterance `u`; a
/// trailing entry for the closing `<UB>` step is allowed and ignored. Word
/// types are split 80/20 by `seed`, then each side is downsampled to equal
/// class counts.
pub fn build_probe_dataset(embeddings: &[Vec<Vec<f64>>], corpus: &Corpus, seed: u64) -> Result<ProbeDataset> {
    let utts = corpus.utterances();
    if embeddings.len() != utts.len() {
        return Err(Error::InvalidArgument(format!(
            "{} embedding sequences for {} utterances",
            embeddings.len(),
            utts.len()
        )));
    }
    let inventory = corpus.inventory();
    let mut dim = None;
    let mut all = Vec::with_capacity(corpus.token_count());
    for (u, (utt, embs)) in utts.iter().zip(embeddings).enumerate() {
        let n = utt.len();
        if embs.len() != n && embs.len() != n + 1 {
            return Err(Error::Mismatch {
                utterance: u,
                message: format!("{} embeddings for {n} phonemes", embs.len()),
            });
        }
        for (start, end) in word_spans(utt.boundaries()) {
            let word_type = utt.tokens()[start..end]
                .iter()
                .map(|&t| inventory.symbol(t).unwrap_or_default())
                .collect::<Vec<_>>()
                .join(" ");
            for i in start..end {
                let e = &embs[i];
                if *dim.get_or_insert(e.len()) != e.len() {
                    return Err(Error::Mismatch {
                        utterance: u,
                        message: "embedding dimensions differ".into(),
                    });
                }
                all.push(ProbeExample {
                    embedding: e.clone(),
                    word_final: i + 1 == end,
                    word_type: word_type.clone(),
                });
            }
        }
    }

    let types: BTreeSet<&str> = all.iter().map(|e| e.word_type.as_str()).collect();
    if types.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 word types, found {}",
            types.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled: Vec<&str> = types.into_iter().collect();
    shuffled.shuffle(&mut rng);
    let n_types = shuffled.len();
    let n_train = (libm::round(TRAIN_TYPE_FRACTION * n_types as f64) as usize).clamp(1, n_types - 1);
    let train_types: BTreeSet<String> = shuffled[..n_train].iter().map(|s| String::from(*s)).collect();
    let test_types: BTreeSet<String> = shuffled[n_train..].iter().map(|s| String::from(*s)).collect();

    let (train, test): (Vec<_>, Vec<_>) = all.into_iter().partition(|e| train_types.contains(&e.word_type));
    let train = balance(train, &mut rng, "train")?;
    let test = balance(test, &mut rng, "test")?;
    Ok(ProbeDataset {
        train,
        test,
        train_types,
        test_types,
    })
}

fn balance(examples: Vec<ProbeExample>, rng: &mut ChaCha8Rng, side: &str) -> Result<Vec<ProbeExample>> {
    let mut finals: Vec<usize> = Vec::new();
    let mut internals: Vec<usize> = Vec::new();
    for (i, e) in examples.iter().enumerate() {
        if e.word_final {
            finals.push(i);
        } else {
            internals.push(i);
        }
    }
    if finals.is_empty() || internals.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{side} split has {} word-final and {} word-internal positions",
            finals.len(),
            internals.len()
        )));
    }
    let keep = finals.len().min(internals.len());
    finals.shuffle(rng);
    internals.shuffle(rng);
    let mut chosen: Vec<usize> = finals[..keep].iter().chain(&internals[..keep]).copied().collect();
    chosen.sort_unstable();
    let mut slots: Vec<Option<ProbeExample>> = examples.into_iter().map(Some).collect();
    Ok(chosen.into_iter().filter_map(|i| slots[i].take()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
        }
    }
}

/// Logistic-regression probe over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean logistic loss and its gradient `(d/dw, d/db)`.
pub fn logistic_loss_and_grad(weights: &[f64], bias: f64, xs: &[Vec<f64>], ys: &[bool]) -> (f64, Vec<f64>, f64) {
    let n = xs.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z = dot(weights, x) + bias;
        let target = if y { 1.0 } else { 0.0 };
        loss += softplus(z) - target * z;
        let r = sigmoid(z) - target;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += r * xi;
        }
        grad_b += r;
    }
    for g in &mut grad {
        *g /= n;
    }
    (loss / n, grad, grad_b / n)
}

/// Full-batch gradient descent on the mean logistic loss.
pub fn train_probe(train: &[ProbeExample], config: &ProbeConfig) -> Result<LinearProbe> {
    let Some(first) = train.first() else {
        return Err(Error::InsufficientData("empty probe training split".into()));
    };
    let dim = first.embedding.len();
    if train.iter().any(|e| e.embedding.len() != dim) {
        return Err(Error::InvalidArgument("embedding dimensions differ".into()));
    }
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for e in train {
        for (m, x) in mean.iter_mut().zip(&e.embedding) {
            *m += x / n;
        }
    }
    let mut sd = vec![0.0; dim];
    for e in train {
        for ((s, x), m) in sd.iter_mut().zip(&e.embedding).zip(&mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    for (s, m) in sd.iter_mut().zip(&mean) {
        *s = libm::sqrt(*s);
        // constant feature, up to rounding of the mean
        if !(*s > 1e-12 * (1.0 + m.abs())) {
            *s = 1.0;
        }
    }
    let mut probe = LinearProbe {
        weights: vec![0.0; dim],
        bias: 0.0,
        mean,
        sd,
    };
    let xs: Vec<Vec<f64>> = train.iter().map(|e| probe.standardize(&e.embedding)).collect();
    let ys: Vec<bool> = train.iter().map(|e| e.word_final).collect();
    for epoch in 0..config.epochs {
        let (loss, grad, grad_b) = logistic_loss_and_grad(&probe.weights, probe.bias, &xs, &ys);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("probe loss became {loss} at epoch {epoch}")));
        }
        for (w, g) in probe.weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        probe.bias -= config.learning_rate * grad_b;
    }
    if probe.weights.iter().any(|w| !w.is_finite()) || !probe.bias.is_finite() {
        return Err(Error::Numerical("probe parameters are not finite".into()));
    }
    Ok(probe)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeAccuracy {
    pub accuracy: f64,
    pub final_accuracy: f64,
    pub internal_accuracy: f64,
    pub n_final: usize,
    pub n_internal: usize,
}

impl LinearProbe {
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    /// Probability that the position is word-final.
    pub fn probability(&self, embedding: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, &self.standardize(embedding)) + self.bias)
    }

    pub fn predict(&self, embedding: &[f64]) -> bool {
        self.probability(embedding) >= 0.5
    }

    pub fn accuracy(&self, examples: &[ProbeExample]) -> ProbeAccuracy {
        let mut correct = BTreeMap::from([(true, 0usize), (false, 0usize)]);
        let mut total = BTreeMap::from([(true, 0usize), (false, 0usize)]);
        for e in examples {
            *total.get_mut(&e.word_final).unwrap() += 1;
            if self.predict(&e.embedding) == e.word_final {
                *correct.get_mut(&e.word_final).unwrap() += 1;
            }
        }
        let ratio = |c: usize, t: usize| if t == 0 { 0.0 } else { c as f64 / t as f64 };
        ProbeAccuracy {
            accuracy: ratio(correct[&true] + correct[&false], examples.len()),
            final_accuracy: ratio(correct[&true], total[&true]),
            internal_accuracy: ratio(correct[&false], total[&false]),
            n_final: total[&true],
            n_internal: total[&false],
        }
    }
}
