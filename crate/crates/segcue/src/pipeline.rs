//! Glue between files and algorithms shared by the CLI and tests.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use segcue_core::corpus::Corpus;
use segcue_core::cues::CueKind;
use segcue_core::evaluator::{grid_cell, GridReport, LabelledTracks};
use segcue_core::predictor::{NGramModel, Predictor, RandomPredictor};
use segcue_core::segmenter::Strategy;

use crate::{model_io, Error, Result};

pub const DEFAULT_ORDER: usize = 5;
pub const DEFAULT_ALPHA: f64 = 1.0;

/// `ngram[:ORDER]`, `random[:ALPHA]` or `model:PATH`.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictorSpec {
    NGram { order: usize },
    Random { alpha: f64 },
    Model { path: PathBuf },
}

impl FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let bad = || Error::Invalid(format!("bad predictor `{s}`; expected ngram[:N], random[:ALPHA] or model:PATH"));
        match (kind, arg) {
            ("ngram", None) => Ok(Self::NGram { order: DEFAULT_ORDER }),
            ("ngram", Some(a)) => match a.parse() {
                Ok(order) if order > 0 => Ok(Self::NGram { order }),
                _ => Err(bad()),
            },
            ("random", None) => Ok(Self::Random { alpha: DEFAULT_ALPHA }),
            ("random", Some(a)) => match a.parse::<f64>() {
                Ok(alpha) if alpha.is_finite() && alpha > 0.0 => Ok(Self::Random { alpha }),
                _ => Err(bad()),
            },
            ("model", Some(p)) if !p.is_empty() => Ok(Self::Model { path: p.into() }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NGram { order } => write!(f, "ngram:{order}"),
            Self::Random { alpha } => write!(f, "random:{alpha}"),
            Self::Model { path } => write!(f, "model:{}", path.display()),
        }
    }
}

pub type BoxedPredictor = Box<dyn Predictor + Send + Sync>;

/// Resolves a spec into a predictor whose vocabulary matches `inventory`
/// size. `train` supplies n-gram training data and must share the
/// inventory. Saved models carry their own inventory, which must match.
pub fn build_predictor(
    spec: &PredictorSpec,
    train: Option<&Corpus>,
    inventory_len: usize,
    seed: u64,
) -> Result<BoxedPredictor> {
    Ok(match spec {
        PredictorSpec::NGram { order } => {
            let train = train.ok_or_else(|| Error::Invalid("n-gram predictor needs training data".into()))?;
            Box::new(NGramModel::train(&train.strip_boundaries(), *order, inventory_len)?)
        }
        PredictorSpec::Random { alpha } => Box::new(RandomPredictor::new(seed, *alpha, inventory_len)?),
        PredictorSpec::Model { path } => {
            let (model, _) = model_io::load_model(path)?;
            if model.vocab_size() != inventory_len {
                return Err(Error::Invalid(format!(
                    "model vocabulary has {} symbols, corpus inventory {inventory_len}",
                    model.vocab_size()
                )));
            }
            Box::new(model)
        }
    })
}

/// Log-probability features: the embedding after reading token `i` is
/// `log2` of the predicted distribution for the next position, floored at
/// `-floor_bits`. Returns `N + 1` vectors per utterance.
pub fn predictive_embeddings<P: Predictor + ?Sized>(
    predictor: &P,
    corpus: &Corpus,
    floor_bits: f64,
) -> Vec<Vec<Vec<f64>>> {
    let stream = corpus.strip_boundaries();
    let mut out = Vec::with_capacity(corpus.utterances().len());
    let mut offset = 1;
    for utt in corpus.utterances() {
        let embs = (1..=utt.len() + 1)
            .map(|i| {
                predictor
                    .distribution(&stream[..offset + i])
                    .iter()
                    .map(|&p| if p > 0.0 { p.log2().max(-floor_bits) } else { -floor_bits })
                    .collect()
            })
            .collect();
        out.push(embs);
        offset += utt.len() + 1;
    }
    out
}

/// The twelve-cell grid with cells fanned out over at most `threads`
/// workers (0 means rayon's default). Output is independent of the
/// thread count.
pub fn parallel_grid(
    tuning: LabelledTracks<'_>,
    evaluation: LabelledTracks<'_>,
    n_candidates: usize,
    threads: usize,
) -> Result<GridReport> {
    let combos: Vec<(CueKind, Strategy)> = CueKind::ALL
        .iter()
        .flat_map(|&c| Strategy::ALL.iter().map(move |&s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let cells = pool.install(|| {
        combos
            .par_iter()
            .map(|&(c, s)| grid_cell(c, s, tuning, evaluation, n_candidates))
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;
    Ok(GridReport::from_cells(cells)?)
}
