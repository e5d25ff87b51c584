//! Boundary scoring, cue x strategy grids and McNemar tests.
//!
//! Only word-internal positions are scored: for an utterance of `N`
//! phonemes these are flags `1..N` (positions 2..=N). Utterance edges are
//! given for free by the utterance boundaries and never count.

use alloc::format;
use alloc::vec::Vec;

use crate::cues::{CueKind, CueTrack};
use crate::segmenter::{tune, Segmentation, Strategy};
use crate::{Error, Result};

/// Corpus-level (micro-averaged) boundary counts and ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Default for BoundaryScore {
    fn default() -> Self {
        Self::from_counts(0, 0, 0)
    }
}

impl BoundaryScore {
    /// With no boundaries in either set, precision, recall and F1 are 1.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize, empty: f64| {
            if den == 0 {
                empty
            } else {
                num as f64 / den as f64
            }
        };
        let nothing = tp + fp + fn_ == 0;
        let precision = ratio(tp, tp + fp, if nothing || fn_ == 0 { 1.0 } else { 0.0 });
        let recall = ratio(tp, tp + fn_, 1.0);
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_, 1.0);
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self::from_counts(
            self.true_positives + other.true_positives,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
        )
    }
}

fn check_lengths<G: AsRef<[bool]>, P: AsRef<[bool]>>(gold: &[G], predicted: &[P]) -> Result<()> {
    if gold.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gold utterances but {} predicted",
            gold.len(),
            predicted.len()
        )));
    }
    for (u, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let (g, p) = (g.as_ref(), p.as_ref());
        if g.len() != p.len() {
            return Err(Error::Mismatch {
                utterance: u,
                message: format!("gold has {} phonemes, prediction has {}", g.len(), p.len()),
            });
        }
    }
    Ok(())
}

/// Scores predicted against gold boundary flags.
pub fn score<G: AsRef<[bool]>, P: AsRef<[bool]>>(gold: &[G], predicted: &[P]) -> Result<BoundaryScore> {
    check_lengths(gold, predicted)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, p) in gold.iter().zip(predicted) {
        for (&g, &p) in g.as_ref().iter().zip(p.as_ref()).skip(1) {
            match (g, p) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(BoundaryScore::from_counts(tp, fp, fn_))
}

/// Gold flags and cue tracks for one evaluation or tuning set.
#[derive(Debug, Clone, Copy)]
pub struct LabelledTracks<'a> {
    pub gold: &'a [Vec<bool>],
    pub tracks: &'a [CueTrack],
}

impl<'a> LabelledTracks<'a> {
    pub fn new(gold: &'a [Vec<bool>], tracks: &'a [CueTrack]) -> Result<Self> {
        if gold.len() != tracks.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gold utterances but {} cue tracks",
                gold.len(),
                tracks.len()
            )));
        }
        for (u, (g, t)) in gold.iter().zip(tracks).enumerate() {
            if g.len() != t.phonemes() {
                return Err(Error::Mismatch {
                    utterance: u,
                    message: format!("{} phonemes but a cue track of {} positions", g.len(), t.len()),
                });
            }
        }
        Ok(Self { gold, tracks })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub cue: CueKind,
    pub strategy: Strategy,
    pub parameter: Option<f64>,
    pub score: BoundaryScore,
    /// Boundaries predicted on the evaluation set.
    pub predicted: Vec<Vec<bool>>,
}

/// Tunes (if needed) on `tuning` and scores one cell on `evaluation`.
pub fn grid_cell(
    cue: CueKind,
    strategy: Strategy,
    tuning: LabelledTracks<'_>,
    evaluation: LabelledTracks<'_>,
    n_candidates: usize,
) -> Result<GridCell> {
    let parameter = if strategy.is_tunable() {
        let values: Vec<Vec<f64>> = tuning.tracks.iter().map(|t| t.values(cue)).collect();
        Some(tune(strategy, &values, tuning.gold, n_candidates)?.parameter)
    } else {
        None
    };
    let seg = Segmentation::from_tracks(evaluation.tracks, cue, strategy, parameter)?;
    let score = score(evaluation.gold, &seg.boundaries)?;
    Ok(GridCell {
        cue,
        strategy,
        parameter,
        score,
        predicted: seg.boundaries,
    })
}

/// All twelve cue x strategy cells plus the best one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    cells: Vec<GridCell>,
    best: usize,
}

impl GridReport {
    /// Accepts the cells in any order; they are stored cue-major in
    /// priority order (UBP, entropy, loss, rank x peak, relative,
    /// threshold), which is also the tie-break order for the best cell.
    pub fn from_cells(mut cells: Vec<GridCell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidArgument("empty grid".into()));
        }
        cells.sort_by_key(|c| (c.cue, c.strategy));
        let mut best = 0;
        for (i, cell) in cells.iter().enumerate() {
            if cell.score.f1 > cells[best].score.f1 {
                best = i;
            }
        }
        Ok(Self { cells, best })
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn best(&self) -> &GridCell {
        &self.cells[self.best]
    }

    pub fn cell(&self, cue: CueKind, strategy: Strategy) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.cue == cue && c.strategy == strategy)
    }
}

/// Runs every cue x strategy combination sequentially.
pub fn grid(
    tuning: LabelledTracks<'_>,
    evaluation: LabelledTracks<'_>,
    n_candidates: usize,
) -> Result<GridReport> {
    let mut cells = Vec::with_capacity(12);
    for cue in CueKind::ALL {
        for strategy in Strategy::ALL {
            cells.push(grid_cell(cue, strategy, tuning, evaluation, n_candidates)?);
        }
    }
    GridReport::from_cells(cells)
}

/// Discordant-pair counts above which [`mcnemar`] switches from the exact
/// binomial test to the continuity-corrected chi-square approximation.
pub const EXACT_MAX_DISCORDANT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McNemarMethod {
    Exact,
    ChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemar {
    /// Positions where A is right and B is wrong.
    pub b: usize,
    /// Positions where A is wrong and B is right.
    pub c: usize,
    pub p_value: f64,
    pub method: McNemarMethod,
}

/// Counts `(b, c)` over scored positions.
pub fn discordant_counts<G, A, B>(gold: &[G], a: &[A], b: &[B]) -> Result<(usize, usize)>
where
    G: AsRef<[bool]>,
    A: AsRef<[bool]>,
    B: AsRef<[bool]>,
{
    check_lengths(gold, a)?;
    check_lengths(gold, b)?;
    let (mut nb, mut nc) = (0, 0);
    for ((g, x), y) in gold.iter().zip(a).zip(b) {
        let positions = g.as_ref().iter().zip(x.as_ref()).zip(y.as_ref()).skip(1);
        for ((&g, &x), &y) in positions {
            match (x == g, y == g) {
                (true, false) => nb += 1,
                (false, true) => nc += 1,
                _ => {}
            }
        }
    }
    Ok((nb, nc))
}

/// McNemar test between segmenters A and B. Uses the exact test up to
/// [`EXACT_MAX_DISCORDANT`] discordant positions, chi-square beyond.
pub fn mcnemar<G, A, B>(gold: &[G], a: &[A], b: &[B]) -> Result<McNemar>
where
    G: AsRef<[bool]>,
    A: AsRef<[bool]>,
    B: AsRef<[bool]>,
{
    let (nb, nc) = discordant_counts(gold, a, b)?;
    let method = if nb + nc <= EXACT_MAX_DISCORDANT {
        McNemarMethod::Exact
    } else {
        McNemarMethod::ChiSquare
    };
    Ok(mcnemar_from_counts(nb, nc, method))
}

pub fn mcnemar_from_counts(b: usize, c: usize, method: McNemarMethod) -> McNemar {
    let p_value = match method {
        McNemarMethod::Exact => mcnemar_exact_p(b, c),
        McNemarMethod::ChiSquare => mcnemar_chi2_p(b, c),
    };
    McNemar { b, c, p_value, method }
}

/// Two-sided exact binomial p-value, `2 * P(X <= min(b, c))` for
/// `X ~ Bin(b + c, 1/2)`, capped at 1.
pub fn mcnemar_exact_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let p = if n <= 126 {
        // exact integer arithmetic: C(126, 63) < 2^127
        let mut term: u128 = 1;
        let mut sum: u128 = 1;
        for i in 1..=k {
            term = term * (n - i + 1) as u128 / i as u128;
            sum += term;
        }
        2.0 * (sum as f64) / libm::exp2(n as f64)
    } else {
        let log_half_n = -(n as f64) * core::f64::consts::LN_2;
        let ln_choose = |i: usize| {
            libm::lgamma(n as f64 + 1.0) - libm::lgamma(i as f64 + 1.0) - libm::lgamma((n - i) as f64 + 1.0)
        };
        // sum from the largest term (i = k) downwards
        let top = ln_choose(k);
        let mut acc = 0.0;
        for i in (0..=k).rev() {
            let rel = libm::exp(ln_choose(i) - top);
            acc += rel;
            if rel < 1e-18 * acc {
                break;
            }
        }
        2.0 * libm::exp(top + log_half_n + libm::log(acc))
    };
    p.min(1.0)
}

/// Continuity-corrected chi-square (1 df) p-value.
pub fn mcnemar_chi2_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let stat = diff.max(0.0) * diff.max(0.0) / n as f64;
    libm::erfc(libm::sqrt(stat / 2.0)).min(1.0)
}
