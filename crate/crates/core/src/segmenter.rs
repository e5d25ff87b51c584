//! Boundary placement strategies.
//!
//! A cue vector `c` has `N + 1` entries for an utterance of `N` phonemes
//! (see [`crate::cues`]). A strategy returns `N` flags where flag `i` means
//! a word starts at phoneme `i`. Flag 0 is always set and never scored;
//! only flags `1..N` (positions 2..=N) are decided by the strategy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::cues::{CueKind, CueTrack};
use crate::evaluator::{score, BoundaryScore};
use crate::{Error, Result};

/// Placement strategies, declared in grid tie-break priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    /// Local maxima of the cue.
    Peak,
    /// Step increase `c_i - c_{i-1}` at or above a learned `delta`.
    Relative,
    /// Cue at or above a learned `theta`.
    Threshold,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Peak, Strategy::Relative, Strategy::Threshold];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Peak => "peak",
            Strategy::Relative => "relative",
            Strategy::Threshold => "threshold",
        }
    }

    pub fn is_tunable(self) -> bool {
        self != Strategy::Peak
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "peak" => Ok(Strategy::Peak),
            "relative" => Ok(Strategy::Relative),
            "threshold" => Ok(Strategy::Threshold),
            _ => Err(Error::InvalidArgument(format!("unknown strategy `{s}`"))),
        }
    }
}

fn place(cues: &[f64], decide: impl Fn(usize) -> bool) -> Vec<bool> {
    let n = cues.len().saturating_sub(1);
    let mut flags = vec![false; n];
    if let Some(first) = flags.first_mut() {
        *first = true;
    }
    for (j, flag) in flags.iter_mut().enumerate().skip(1) {
        *flag = decide(j);
    }
    flags
}

pub fn segment_peak(cues: &[f64]) -> Vec<bool> {
    place(cues, |j| cues[j] > cues[j - 1] && cues[j] > cues[j + 1])
}

pub fn segment_threshold(cues: &[f64], theta: f64) -> Vec<bool> {
    place(cues, |j| cues[j] >= theta)
}

pub fn segment_relative(cues: &[f64], delta: f64) -> Vec<bool> {
    place(cues, |j| cues[j] - cues[j - 1] >= delta)
}

/// Dispatches on `strategy`; tunable strategies need a finite parameter.
pub fn segment(cues: &[f64], strategy: Strategy, parameter: Option<f64>) -> Result<Vec<bool>> {
    if cues.len() < 2 {
        return Err(Error::InvalidArgument("cue track shorter than 2 positions".into()));
    }
    let param = || match parameter {
        Some(p) if p.is_finite() => Ok(p),
        Some(p) => Err(Error::InvalidArgument(format!("{strategy} parameter {p} is not finite"))),
        None => Err(Error::InvalidArgument(format!("{strategy} strategy needs a parameter"))),
    };
    Ok(match strategy {
        Strategy::Peak => segment_peak(cues),
        Strategy::Threshold => segment_threshold(cues, param()?),
        Strategy::Relative => segment_relative(cues, param()?),
    })
}

/// Predicted boundaries for a whole corpus from one cue and strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub boundaries: Vec<Vec<bool>>,
    pub cue: CueKind,
    pub strategy: Strategy,
    pub parameter: Option<f64>,
}

impl Segmentation {
    pub fn from_tracks(
        tracks: &[CueTrack],
        cue: CueKind,
        strategy: Strategy,
        parameter: Option<f64>,
    ) -> Result<Self> {
        let parameter = if strategy.is_tunable() { parameter } else { None };
        let boundaries = tracks
            .iter()
            .map(|t| segment(&t.values(cue), strategy, parameter))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            boundaries,
            cue,
            strategy,
            parameter,
        })
    }
}

/// Values a tunable strategy compares against its parameter at scored
/// positions: the cue itself (threshold) or its step change (relative).
fn decision_values(strategy: Strategy, tracks: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for c in tracks {
        let n = c.len().saturating_sub(1);
        for j in 1..n {
            out.push(match strategy {
                Strategy::Relative => c[j] - c[j - 1],
                _ => c[j],
            });
        }
    }
    out
}

/// Candidate parameters: `n` equally spaced quantiles of the decision
/// values, using the lower inverse of the empirical CDF so that candidates
/// are observed values and duplicating the data leaves them unchanged.
/// Returned sorted and deduplicated.
pub fn candidates(strategy: Strategy, tracks: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut values = decision_values(strategy, tracks);
    if values.is_empty() || n == 0 {
        return Vec::new();
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let mut out: Vec<f64> = if n == 1 {
        vec![values[0]]
    } else {
        (0..n)
            .map(|k| {
                // ceil(k * m / (n - 1)) - 1, clamped to 0
                let idx = (k * m).div_ceil(n - 1).saturating_sub(1);
                values[idx.min(m - 1)]
            })
            .collect()
    };
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuned {
    pub parameter: f64,
    pub score: BoundaryScore,
}

/// Picks the candidate parameter maximizing corpus boundary F1 on the
/// given (development) tracks; ties go to the smallest candidate.
pub fn tune(
    strategy: Strategy,
    tracks: &[Vec<f64>],
    gold: &[Vec<bool>],
    n_candidates: usize,
) -> Result<Tuned> {
    if !strategy.is_tunable() {
        return Err(Error::InvalidArgument("peak strategy has no parameter".into()));
    }
    if tracks.is_empty() || gold.is_empty() {
        return Err(Error::InsufficientData("empty development set".into()));
    }
    if n_candidates == 0 {
        return Err(Error::InvalidArgument("need at least one candidate".into()));
    }
    let cands = candidates(strategy, tracks, n_candidates);
    if cands.is_empty() {
        return Err(Error::InsufficientData(
            "development set has no scorable positions".into(),
        ));
    }
    let mut best: Option<Tuned> = None;
    for &parameter in &cands {
        let predicted = tracks
            .iter()
            .map(|c| segment(c, strategy, Some(parameter)))
            .collect::<Result<Vec<_>>>()?;
        let s = score(gold, &predicted)?;
        if best.is_none_or(|b| s.f1 > b.score.f1) {
            best = Some(Tuned { parameter, score: s });
        }
    }
    Ok(best.expect("at least one candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(flags: &[bool]) -> Vec<usize> {
        (1..flags.len()).filter(|&j| flags[j]).map(|j| j + 1).collect()
    }

    const C: [f64; 5] = [1.0, 3.0, 2.0, 4.0, 1.0];

    #[test]
    fn peak_hand_example() {
        assert_eq!(set(&segment_peak(&C)), vec![2, 4]);
        assert_eq!(segment_peak(&C)[0], true);
    }

    #[test]
    fn peak_on_increasing_track() {
        assert!(set(&segment_peak(&[1.0, 2.0, 3.0, 4.0, 5.0])).is_empty());
        assert_eq!(set(&segment_peak(&[1.0, 2.0, 3.0, 4.0, 0.0])), vec![4]);
        // plateau
        assert!(set(&segment_peak(&[1.0, 2.0, 2.0, 1.0])).is_empty());
    }

    #[test]
    fn threshold_extremes() {
        assert_eq!(set(&segment_threshold(&C, -1e9)), vec![2, 3, 4]);
        assert!(set(&segment_threshold(&C, 10.0)).is_empty());
        assert_eq!(set(&segment_threshold(&C, 2.5)), vec![2, 4]);
    }

    #[test]
    fn relative_examples() {
        assert_eq!(set(&segment_relative(&C, 1.5)), vec![2, 4]);
        assert_eq!(set(&segment_relative(&C, 0.0)), vec![2, 4]);
        assert_eq!(set(&segment_relative(&[1.0, 1.0, 2.0, 2.0], 0.0)), vec![2, 3]);
        assert!(set(&segment_relative(&[0.5; 6], 0.1)).is_empty());
    }

    #[test]
    fn single_phoneme_track() {
        assert_eq!(segment_peak(&[1.0, 2.0]), vec![true]);
        assert_eq!(segment_threshold(&[1.0, 2.0], 0.0), vec![true]);
    }

    #[test]
    fn segment_requires_parameter() {
        assert!(segment(&C, Strategy::Threshold, None).is_err());
        assert!(segment(&C, Strategy::Relative, Some(f64::NAN)).is_err());
        assert_eq!(segment(&C, Strategy::Peak, None).unwrap(), segment_peak(&C));
    }

    #[test]
    fn tune_hand_example() {
        let gold = vec![vec![true, true, false, true]];
        let t = tune(Strategy::Threshold, &[C.to_vec()], &gold, 512).unwrap();
        assert!(t.parameter > 2.0 && t.parameter <= 3.0, "{}", t.parameter);
        assert_eq!(t.score.f1, 1.0);
    }

    #[test]
    fn tune_all_gold_picks_minimum() {
        let gold = vec![vec![true; 4]];
        let t = tune(Strategy::Threshold, &[C.to_vec()], &gold, 512).unwrap();
        assert_eq!(t.parameter, 2.0);
        let t = tune(Strategy::Relative, &[C.to_vec()], &gold, 512).unwrap();
        assert_eq!(t.parameter, -1.0);
    }

    #[test]
    fn tune_errors() {
        assert!(tune(Strategy::Threshold, &[], &[], 8).is_err());
        assert!(tune(Strategy::Peak, &[C.to_vec()], &[vec![true; 4]], 8).is_err());
        // only single-phoneme utterances: nothing to score
        assert!(tune(Strategy::Threshold, &[vec![1.0, 2.0]], &[vec![true]], 8).is_err());
    }

    #[test]
    fn candidates_are_quantiles() {
        let tracks = vec![vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]];
        assert_eq!(candidates(Strategy::Threshold, &tracks, 512), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(candidates(Strategy::Threshold, &tracks, 2), vec![1.0, 4.0]);
        assert_eq!(candidates(Strategy::Threshold, &tracks, 3), vec![1.0, 2.0, 4.0]);
        assert_eq!(candidates(Strategy::Threshold, &tracks, 1), vec![1.0]);
        assert_eq!(candidates(Strategy::Relative, &tracks, 4), vec![1.0]);
        let doubled = vec![tracks[0].clone(), tracks[0].clone()];
        for n in 1..10 {
            assert_eq!(candidates(Strategy::Threshold, &tracks, n), candidates(Strategy::Threshold, &doubled, n));
        }
    }
}
