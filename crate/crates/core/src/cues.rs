//! Per-position boundary cues derived from next-symbol distributions.
//!
//! A track for an utterance of `N` phonemes holds `N + 1` values per cue:
//! position `i` (1-based) describes the prediction of `t_i` from everything
//! before it, and position `N + 1` the prediction of the closing `<UB>`.
//! All logarithms are base 2.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::corpus::{Corpus, TokenId};
use crate::predictor::Predictor;
use crate::{Error, Result};

/// The four cues, declared in grid tie-break priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CueKind {
    /// Probability of the utterance-boundary symbol.
    Ubp,
    /// Entropy of the predicted distribution.
    Entropy,
    /// Surprisal of the observed symbol.
    Loss,
    /// 1-based rank of the observed symbol.
    Rank,
}

impl CueKind {
    pub const ALL: [CueKind; 4] = [CueKind::Ubp, CueKind::Entropy, CueKind::Loss, CueKind::Rank];

    pub fn name(self) -> &'static str {
        match self {
            CueKind::Ubp => "ubp",
            CueKind::Entropy => "entropy",
            CueKind::Loss => "loss",
            CueKind::Rank => "rank",
        }
    }
}

impl fmt::Display for CueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CueKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ubp" => Ok(CueKind::Ubp),
            "entropy" => Ok(CueKind::Entropy),
            "loss" | "surprisal" => Ok(CueKind::Loss),
            "rank" => Ok(CueKind::Rank),
            _ => Err(Error::InvalidArgument(format!("unknown cue `{s}`"))),
        }
    }
}

/// Cue values for one utterance, positions `1..=N+1` stored at `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CueTrack {
    entropy: Vec<f64>,
    loss: Vec<f64>,
    rank: Vec<u32>,
    ubp: Vec<f64>,
}

impl CueTrack {
    pub fn new(entropy: Vec<f64>, loss: Vec<f64>, rank: Vec<u32>, ubp: Vec<f64>) -> Result<Self> {
        let n = entropy.len();
        if n < 2 || loss.len() != n || rank.len() != n || ubp.len() != n {
            return Err(Error::InvalidArgument(format!(
                "cue vectors must share a length of at least 2 (got {}, {}, {}, {})",
                entropy.len(),
                loss.len(),
                rank.len(),
                ubp.len()
            )));
        }
        let bad = |what: &str, i: usize, v: String| {
            Err(Error::InvalidArgument(format!("position {}: {what} = {v}", i + 1)))
        };
        for i in 0..n {
            if !(entropy[i].is_finite() && entropy[i] >= 0.0) {
                return bad("entropy", i, format!("{}", entropy[i]));
            }
            if !(loss[i].is_finite() && loss[i] >= 0.0) {
                return bad("loss", i, format!("{}", loss[i]));
            }
            if rank[i] == 0 {
                return bad("rank", i, format!("{}", rank[i]));
            }
            if !(0.0..=1.0).contains(&ubp[i]) {
                return bad("ubp", i, format!("{}", ubp[i]));
            }
        }
        Ok(Self { entropy, loss, rank, ubp })
    }

    /// Number of positions, `N + 1`.
    pub fn len(&self) -> usize {
        self.entropy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entropy.is_empty()
    }

    /// Number of phonemes `N` of the utterance.
    pub fn phonemes(&self) -> usize {
        self.entropy.len() - 1
    }

    pub fn entropy(&self) -> &[f64] {
        &self.entropy
    }

    pub fn loss(&self) -> &[f64] {
        &self.loss
    }

    pub fn ranks(&self) -> &[u32] {
        &self.rank
    }

    pub fn ubp(&self) -> &[f64] {
        &self.ubp
    }

    pub fn values(&self, cue: CueKind) -> Vec<f64> {
        match cue {
            CueKind::Ubp => self.ubp.clone(),
            CueKind::Entropy => self.entropy.clone(),
            CueKind::Loss => self.loss.clone(),
            CueKind::Rank => self.rank.iter().map(|&r| f64::from(r)).collect(),
        }
    }
}

/// Shannon entropy in bits; zero-probability entries contribute nothing.
pub fn entropy_bits(q: &[f64]) -> f64 {
    let h: f64 = q
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * libm::log2(p))
        .sum();
    h.max(0.0)
}

/// `-log2 q[token]`, or `+inf` for a zero probability.
pub fn surprisal_bits(q: &[f64], token: TokenId) -> f64 {
    let p = q[token as usize];
    if p > 0.0 {
        (-libm::log2(p)).max(0.0)
    } else {
        f64::INFINITY
    }
}

/// 1-based rank of `token` under `q`, ties broken by ascending id.
pub fn rank_of(q: &[f64], token: TokenId) -> u32 {
    let t = token as usize;
    let p = q[t];
    let above = q
        .iter()
        .enumerate()
        .filter(|&(v, &pv)| pv > p || (pv == p && v < t))
        .count();
    above as u32 + 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueOptions {
    /// Surprisal assigned when the observed symbol has probability zero.
    pub loss_ceiling: f64,
}

impl Default for CueOptions {
    fn default() -> Self {
        Self { loss_ceiling: 64.0 }
    }
}

/// Computes the cue track of `utterance` given the stream that precedes it.
/// `context` must end with `<UB>`.
pub fn compute_cues<P: Predictor + ?Sized>(
    predictor: &P,
    utterance: &[TokenId],
    context: &[TokenId],
    ub: TokenId,
    options: &CueOptions,
) -> Result<CueTrack> {
    if utterance.is_empty() {
        return Err(Error::InvalidArgument("utterance has no phonemes".into()));
    }
    if context.last() != Some(&ub) {
        return Err(Error::InvalidArgument(
            "cue context must end with the utterance boundary".into(),
        ));
    }
    let vocab = predictor.vocab_size();
    if let Some(&t) = utterance.iter().find(|&&t| t as usize >= vocab || t == ub) {
        return Err(Error::InvalidArgument(format!(
            "token id {t} is not a phoneme of the predictor vocabulary"
        )));
    }
    let n = utterance.len();
    let mut entropy = Vec::with_capacity(n + 1);
    let mut loss = Vec::with_capacity(n + 1);
    let mut rank = Vec::with_capacity(n + 1);
    let mut ubp = Vec::with_capacity(n + 1);
    let mut ctx = Vec::with_capacity(context.len() + n + 1);
    ctx.extend_from_slice(context);
    for i in 0..=n {
        let target = if i < n { utterance[i] } else { ub };
        let q = predictor.distribution(&ctx);
        if q.len() != vocab {
            return Err(Error::Numerical(format!(
                "predictor returned {} probabilities for a vocabulary of {vocab}",
                q.len()
            )));
        }
        entropy.push(entropy_bits(&q));
        let mut s = surprisal_bits(&q, target);
        if s > options.loss_ceiling {
            log::warn!(
                "position {}: surprisal {s} capped at {} bits",
                i + 1,
                options.loss_ceiling
            );
            s = options.loss_ceiling;
        }
        loss.push(s);
        rank.push(rank_of(&q, target));
        ubp.push(q[ub as usize].clamp(0.0, 1.0));
        ctx.push(target);
    }
    CueTrack::new(entropy, loss, rank, ubp)
}

/// Cue tracks for every utterance of `corpus`, each conditioned on the
/// whole modelling stream before it.
pub fn corpus_cues<P: Predictor + ?Sized>(
    predictor: &P,
    corpus: &Corpus,
    options: &CueOptions,
) -> Result<Vec<CueTrack>> {
    if predictor.vocab_size() != corpus.inventory().len() {
        return Err(Error::InvalidArgument(format!(
            "predictor vocabulary has {} symbols but the corpus inventory has {}",
            predictor.vocab_size(),
            corpus.inventory().len()
        )));
    }
    let stream = corpus.strip_boundaries();
    let ub = corpus.inventory().ub_id();
    let mut offset = 1;
    let mut tracks = Vec::with_capacity(corpus.utterances().len());
    for utt in corpus.utterances() {
        tracks.push(compute_cues(predictor, utt.tokens(), &stream[..offset], ub, options)?);
        offset += utt.len() + 1;
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    struct Fixed(Vec<f64>);

    impl Predictor for Fixed {
        fn vocab_size(&self) -> usize {
            self.0.len()
        }
        fn distribution(&self, _: &[TokenId]) -> Vec<f64> {
            self.0.clone()
        }
    }

    #[test]
    fn uniform_entropy() {
        let h = entropy_bits(&[1.0 / 3.0; 3]);
        assert!((h - libm::log2(3.0)).abs() < 1e-12);
        assert!((h - 1.5849625).abs() < 1e-7);
        assert_eq!(entropy_bits(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn quarter_probability_is_two_bits() {
        assert_eq!(surprisal_bits(&[0.25, 0.75], 0), 2.0);
        assert_eq!(surprisal_bits(&[0.0, 1.0], 0), f64::INFINITY);
    }

    #[test]
    fn rank_and_ubp_read_directly() {
        // ids: UB=0, A=1, B=2
        let q = [0.2, 0.5, 0.3];
        assert_eq!(rank_of(&q, 2), 2);
        assert_eq!(rank_of(&q, 1), 1);
        assert_eq!(rank_of(&q, 0), 3);
        let track = compute_cues(&Fixed(q.to_vec()), &[2], &[0], 0, &CueOptions::default()).unwrap();
        assert_eq!(track.ranks(), &[2, 3]);
        assert_eq!(track.ubp(), &[0.2, 0.2]);
    }

    #[test]
    fn rank_ties_by_id() {
        let q = [0.25; 4];
        assert_eq!((0..4).map(|t| rank_of(&q, t)).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn zero_probability_loss_is_capped() {
        let p = Fixed(vec![0.5, 0.5, 0.0]);
        let track = compute_cues(&p, &[2, 1], &[0], 0, &CueOptions { loss_ceiling: 40.0 }).unwrap();
        assert_eq!(track.loss(), &[40.0, 1.0, 1.0]);
    }

    #[test]
    fn context_and_vocab_checked() {
        let p = Fixed(vec![0.5, 0.5]);
        let opts = CueOptions::default();
        assert!(compute_cues(&p, &[1], &[1], 0, &opts).is_err());
        assert!(compute_cues(&p, &[3], &[0], 0, &opts).is_err());
        assert!(compute_cues(&p, &[], &[0], 0, &opts).is_err());
    }

    #[test]
    fn track_shape_and_values() {
        let p = Fixed(vec![0.2, 0.5, 0.3]);
        let track = compute_cues(&p, &[1, 2, 1], &[0], 0, &CueOptions::default()).unwrap();
        assert_eq!(track.len(), 4);
        assert_eq!(track.phonemes(), 3);
        assert_eq!(track.values(CueKind::Rank), vec![1.0, 2.0, 1.0, 3.0]);
        assert_eq!(track.values(CueKind::Loss)[0], -libm::log2(0.5));
    }

    #[test]
    fn track_validation() {
        assert!(CueTrack::new(vec![0.0], vec![0.0], vec![1], vec![0.0]).is_err());
        assert!(CueTrack::new(vec![0.0; 2], vec![0.0; 2], vec![1, 0], vec![0.0; 2]).is_err());
        assert!(CueTrack::new(vec![0.0; 2], vec![0.0; 2], vec![1; 2], vec![0.0, 1.02]).is_err());
        assert!(CueTrack::new(vec![0.0; 2], vec![-1.0, 0.0], vec![1; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn cue_names_roundtrip() {
        for cue in CueKind::ALL {
            assert_eq!(cue.name().parse::<CueKind>().unwrap(), cue);
        }
        assert!("bogus".parse::<CueKind>().is_err());
    }
}
