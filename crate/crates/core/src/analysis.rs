//! Corpus statistics behind cross-lingual confounds.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Corpus, TokenId};
use crate::cues::entropy_bits;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionClass {
    WordFinal,
    Other,
}

/// Phoneme frequencies in one positional context. Counts are indexed by
/// inventory id; `<UB>` never occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeDistribution {
    pub class: PositionClass,
    counts: Vec<u64>,
    total: u64,
}

impl PhonemeDistribution {
    pub fn from_counts(class: PositionClass, counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InsufficientData(format!("no phonemes in {class:?} positions")));
        }
        Ok(Self { class, counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, id: TokenId) -> f64 {
        self.counts.get(id as usize).map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Number of phonemes with a nonzero count.
    pub fn support(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Splits phoneme occurrences into word-final and all other positions.
pub fn word_final_distribution(corpus: &Corpus) -> Result<(PhonemeDistribution, PhonemeDistribution)> {
    let v = corpus.inventory().len();
    let mut finals = vec![0u64; v];
    let mut others = vec![0u64; v];
    for utt in corpus.utterances() {
        let b = utt.boundaries();
        for (i, &t) in utt.tokens().iter().enumerate() {
            let is_final = i + 1 == b.len() || b[i + 1];
            if is_final {
                finals[t as usize] += 1;
            } else {
                others[t as usize] += 1;
            }
        }
    }
    if others.iter().all(|&c| c == 0) {
        return Err(Error::InsufficientData(
            "every word has a single phoneme, so no non-final positions exist".into(),
        ));
    }
    Ok((
        PhonemeDistribution::from_counts(PositionClass::WordFinal, finals)?,
        PhonemeDistribution::from_counts(PositionClass::Other, others)?,
    ))
}

/// Entropy of `dist` divided by `log2` of its observed support (phonemes
/// with a nonzero count).
pub fn normalized_entropy(dist: &PhonemeDistribution) -> Result<f64> {
    let observed: Vec<f64> = dist.probabilities().into_iter().filter(|&p| p > 0.0).collect();
    normalized_entropy_of(&observed)
}

/// Entropy of an explicit distribution over `probs.len()` outcomes divided
/// by `log2(probs.len())`: 0 for a point mass, 1 for uniform.
pub fn normalized_entropy_of(probs: &[f64]) -> Result<f64> {
    let n = probs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "normalized entropy needs a support of at least 2, got {n}"
        )));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidArgument("probabilities must be finite and non-negative".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {total}, not 1")));
    }
    // summing n terms of p log p rounds; equal masses are uniform by definition
    if probs.windows(2).all(|w| w[0] == w[1]) {
        return Ok(1.0);
    }
    let h = entropy_bits(probs);
    Ok((h / libm::log2(n as f64)).clamp(0.0, 1.0))
}

/// Phonemes per word.
pub fn mean_word_length(corpus: &Corpus) -> f64 {
    corpus.token_count() as f64 / corpus.word_count() as f64
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "pearson needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData("pearson needs at least 3 points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InsufficientData("pearson undefined for zero variance".into()));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}
