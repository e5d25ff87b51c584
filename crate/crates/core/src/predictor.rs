//! Next-symbol predictors over a phoneme inventory (phonemes plus `<UB>`).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::TokenId;
use crate::{Error, Result};

/// Anything that yields a probability vector over the inventory given the
/// full preceding stream.
pub trait Predictor {
    fn vocab_size(&self) -> usize;

    /// Distribution of the next symbol. `context` is every stream token
    /// before the predicted position, oldest first.
    fn distribution(&self, context: &[TokenId]) -> Vec<f64>;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn distribution(&self, context: &[TokenId]) -> Vec<f64> {
        (**self).distribution(context)
    }
}

/// Successor counts observed after one context.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextCounts {
    total: u64,
    successors: BTreeMap<TokenId, u64>,
}

impl ContextCounts {
    fn add(&mut self, token: TokenId, count: u64) {
        *self.successors.entry(token).or_insert(0) += count;
        self.total += count;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct successor types, the Witten-Bell `T(h)`.
    pub fn distinct(&self) -> usize {
        self.successors.len()
    }

    pub fn count(&self, token: TokenId) -> u64 {
        self.successors.get(&token).copied().unwrap_or(0)
    }

    pub fn successors(&self) -> impl Iterator<Item = (TokenId, u64)> + '_ {
        self.successors.iter().map(|(&t, &c)| (t, c))
    }
}

/// Interpolated Witten-Bell n-gram model.
///
/// `tables[k]` maps contexts of length `k` (for `k < order`) to their
/// successor counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramModel {
    order: usize,
    vocab_size: usize,
    tables: Vec<BTreeMap<Vec<TokenId>, ContextCounts>>,
}

impl NGramModel {
    /// Counts every k-gram (`k <= order`) of `stream`.
    pub fn train(stream: &[TokenId], order: usize, vocab_size: usize) -> Result<Self> {
        if stream.is_empty() {
            return Err(Error::EmptyStream);
        }
        let mut model = Self::untrained(order, vocab_size)?;
        for (j, &token) in stream.iter().enumerate() {
            if token as usize >= vocab_size {
                return Err(Error::InvalidArgument(format!(
                    "token id {token} outside vocabulary of size {vocab_size}"
                )));
            }
            for k in 0..order.min(j + 1) {
                model.tables[k]
                    .entry(stream[j - k..j].to_vec())
                    .or_default()
                    .add(token, 1);
            }
        }
        Ok(model)
    }

    /// A model with no counts; every query returns the uniform distribution.
    pub fn untrained(order: usize, vocab_size: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("n-gram order must be at least 1".into()));
        }
        if vocab_size == 0 {
            return Err(Error::InvalidArgument("vocabulary is empty".into()));
        }
        Ok(Self {
            order,
            vocab_size,
            tables: vec![BTreeMap::new(); order],
        })
    }

    /// Rebuilds a model from `(context, successor, count)` triples, e.g.
    /// when loading a saved model.
    pub fn from_counts<I>(order: usize, vocab_size: usize, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<TokenId>, TokenId, u64)>,
    {
        let mut model = Self::untrained(order, vocab_size)?;
        for (context, token, count) in counts {
            if context.len() >= order {
                return Err(Error::InvalidArgument(format!(
                    "context of length {} in an order-{order} model",
                    context.len()
                )));
            }
            if count == 0 {
                return Err(Error::InvalidArgument("stored counts must be positive".into()));
            }
            if token as usize >= vocab_size || context.iter().any(|&t| t as usize >= vocab_size) {
                return Err(Error::InvalidArgument(format!(
                    "token id outside vocabulary of size {vocab_size}"
                )));
            }
            model.tables[context.len()].entry(context).or_default().add(token, count);
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Counts for a context of length `< order`, if it was observed.
    pub fn counts(&self, context: &[TokenId]) -> Option<&ContextCounts> {
        self.tables.get(context.len())?.get(context)
    }

    /// All stored `(context, successor, count)` triples, shortest contexts
    /// first, each table in sorted order.
    pub fn entries(&self) -> impl Iterator<Item = (&[TokenId], TokenId, u64)> + '_ {
        self.tables.iter().flat_map(|table| {
            table
                .iter()
                .flat_map(|(ctx, counts)| counts.successors().map(move |(t, c)| (ctx.as_slice(), t, c)))
        })
    }
}

impl Predictor for NGramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn distribution(&self, context: &[TokenId]) -> Vec<f64> {
        let v = self.vocab_size;
        let mut probs = vec![1.0 / v as f64; v];
        for k in 0..self.order.min(context.len() + 1) {
            let history = &context[context.len() - k..];
            let Some(counts) = self.tables[k].get(history) else {
                // a longer context cannot have been seen if its suffix was not
                break;
            };
            let distinct = counts.distinct() as f64;
            let denom = counts.total as f64 + distinct;
            for (t, p) in probs.iter_mut().enumerate() {
                let c = counts.count(t as TokenId) as f64;
                *p = (c + distinct * *p) / denom;
            }
        }
        probs
    }
}

/// Untrained baseline: an independent symmetric Dirichlet draw for every
/// stream position, keyed by `(seed, position)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPredictor {
    seed: u64,
    alpha: f64,
    vocab_size: usize,
}

impl RandomPredictor {
    pub fn new(seed: u64, alpha: f64, vocab_size: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Dirichlet concentration must be positive, got {alpha}"
            )));
        }
        if vocab_size == 0 {
            return Err(Error::InvalidArgument("vocabulary is empty".into()));
        }
        Ok(Self {
            seed,
            alpha,
            vocab_size,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn random_distribution(&self, position: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(position);
        let gamma = Gamma::new(self.alpha, 1.0).expect("alpha validated in constructor");
        let mut draws: Vec<f64> = (0..self.vocab_size).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            // every draw underflowed (tiny alpha)
            return vec![1.0 / self.vocab_size as f64; self.vocab_size];
        }
        for d in &mut draws {
            *d /= total;
        }
        draws
    }
}

impl Predictor for RandomPredictor {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn distribution(&self, context: &[TokenId]) -> Vec<f64> {
        self.random_distribution(context.len() as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const UB: TokenId = 0;
    const A: TokenId = 1;
    const B: TokenId = 2;

    fn assert_normalized(p: &[f64]) {
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bigram_counts() {
        let m = NGramModel::train(&[UB, A, B, UB], 2, 3).unwrap();
        let bigrams: Vec<_> = m.entries().filter(|(ctx, _, _)| ctx.len() == 1).map(|(c, t, n)| (c[0], t, n)).collect();
        assert_eq!(bigrams, vec![(UB, A, 1), (A, B, 1), (B, UB, 1)]);
        assert_eq!(m.counts(&[]).unwrap().total(), 4);
    }

    #[test]
    fn long_context_truncated() {
        let stream = [UB, A, B, UB, A, B, UB];
        let m = NGramModel::train(&stream, 2, 3).unwrap();
        assert_eq!(m.distribution(&[B, B, B, A]), m.distribution(&[A]));
        let m3 = NGramModel::train(&stream, 3, 3).unwrap();
        assert_eq!(m3.distribution(&[A, A, UB, A]), m3.distribution(&[UB, A]));
    }

    #[test]
    fn witten_bell_closed_form() {
        // stream <UB> (A B <UB>) x 50
        let mut stream = vec![UB];
        for _ in 0..50 {
            stream.extend([A, B, UB]);
        }
        let m = NGramModel::train(&stream, 2, 3).unwrap();
        // unigram: N = 151, T = 3, counts UB 51, A 50, B 50
        let uni = |c: f64| (c + 3.0 / 3.0) / (151.0 + 3.0);
        let expected_b = (50.0 + 1.0 * uni(50.0)) / (50.0 + 1.0);
        let p = m.distribution(&[UB, A]);
        assert!((p[B as usize] - expected_b).abs() < 1e-15);
        assert!((p[A as usize] - uni(50.0) / 51.0).abs() < 1e-15);
        assert!((p[UB as usize] - uni(51.0) / 51.0).abs() < 1e-15);
    }

    #[test]
    fn untrained_is_uniform() {
        let m = NGramModel::untrained(5, 4).unwrap();
        assert_eq!(m.distribution(&[1, 2, 3]), vec![0.25; 4]);
        assert!(NGramModel::train(&[], 2, 3).is_err());
        assert!(NGramModel::train(&[0, 5], 2, 3).is_err());
        assert!(NGramModel::untrained(0, 3).is_err());
    }

    #[test]
    fn mode_preserved_and_no_zeros() {
        let mut stream = vec![UB];
        for _ in 0..40 {
            stream.extend([A, B]);
        }
        stream.push(UB);
        let m = NGramModel::train(&stream, 5, 4).unwrap();
        let p = m.distribution(&stream[..4]);
        assert_eq!(stream[3], A);
        for (x, &q) in p.iter().enumerate() {
            assert!(q > 0.0);
            if x != B as usize {
                assert!(p[B as usize] > q);
            }
        }
    }

    #[test]
    fn normalized_over_random_contexts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let stream: Vec<TokenId> = (0..2000).map(|_| rng.random_range(0..6)).collect();
        let m = NGramModel::train(&stream, 5, 7).unwrap();
        for _ in 0..1000 {
            let len = rng.random_range(0..8);
            let ctx: Vec<TokenId> = (0..len).map(|_| rng.random_range(0..7)).collect();
            let p = m.distribution(&ctx);
            assert_eq!(p.len(), 7);
            assert_normalized(&p);
            assert!(p.iter().all(|&q| q > 0.0));
        }
    }

    #[test]
    fn retraining_is_deterministic_and_roundtrips() {
        let stream = [UB, A, B, A, A, B, UB, B, A, UB];
        let m1 = NGramModel::train(&stream, 3, 3).unwrap();
        let m2 = NGramModel::train(&stream, 3, 3).unwrap();
        assert_eq!(m1, m2);
        let rebuilt = NGramModel::from_counts(
            3,
            3,
            m1.entries().map(|(c, t, n)| (c.to_vec(), t, n)).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(rebuilt, m1);
        assert!(NGramModel::from_counts(2, 3, vec![(vec![0, 1], 1, 1)]).is_err());
        assert!(NGramModel::from_counts(2, 3, vec![(vec![0], 1, 0)]).is_err());
    }

    #[test]
    fn random_predictor_is_keyed() {
        let r = RandomPredictor::new(3, 1.0, 5).unwrap();
        let a = r.random_distribution(17);
        let b = r.random_distribution(17);
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_ne!(a, r.random_distribution(18));
        assert_ne!(a, RandomPredictor::new(4, 1.0, 5).unwrap().random_distribution(17));
        assert_normalized(&a);
        assert_eq!(r.distribution(&[0; 17]), a);
        assert!(RandomPredictor::new(1, 0.0, 5).is_err());
    }

    #[test]
    fn random_predictor_large_alpha_is_near_uniform() {
        let r = RandomPredictor::new(9, 1e6, 8).unwrap();
        for pos in 0..50 {
            let p = r.random_distribution(pos);
            let dev = p.iter().map(|&x| (x - 0.125).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-2, "deviation {dev}");
        }
    }

    #[test]
    fn random_predictor_mean_is_uniform() {
        // each coordinate of Dir(1,..,1) over V=4 has variance
        // (1/4)(3/4)/(4+1) = 0.0375
        let v = 4;
        let r = RandomPredictor::new(5, 1.0, v).unwrap();
        let n = 10_000;
        let mut mean = vec![0.0; v];
        for pos in 0..n {
            for (m, x) in mean.iter_mut().zip(r.random_distribution(pos)) {
                *m += x / n as f64;
            }
        }
        let se = libm::sqrt(0.0375 / n as f64);
        for m in mean {
            assert!((m - 0.25).abs() < 3.0 * se, "mean {m}");
        }
    }
}
