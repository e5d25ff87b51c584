//! Text and CSV reports. Every report is a deterministic function of its
//! inputs; floats use fixed decimal places.

use std::fmt::Write as _;

use segcue_core::analysis::{mean_word_length, normalized_entropy, pearson, word_final_distribution, PhonemeDistribution};
use segcue_core::corpus::Corpus;
use segcue_core::cues::CueKind;
use segcue_core::evaluator::{BoundaryScore, GridReport, McNemar, McNemarMethod, EXACT_MAX_DISCORDANT};
use segcue_core::probe::{ProbeAccuracy, ProbeDataset};
use segcue_core::segmenter::Strategy;

fn opt(v: Option<f64>, places: usize) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.places$}"))
}

/// Rows are cues, columns strategies, cells F1 to 4 decimals; `best`
/// names the strategy of the overall best cell on its row.
pub fn grid_csv(report: &GridReport) -> String {
    let mut out = String::from("cue");
    for s in Strategy::ALL {
        let _ = write!(out, ",{s}");
    }
    out.push_str(",best\n");
    let best = report.best();
    for cue in CueKind::ALL {
        out.push_str(cue.name());
        for s in Strategy::ALL {
            let f1 = report.cell(cue, s).map(|c| c.score.f1);
            let _ = write!(out, ",{}", opt(f1, 4));
        }
        let flag = if best.cue == cue { best.strategy.name() } else { "" };
        let _ = writeln!(out, ",{flag}");
    }
    out
}

/// One row per cell with its tuned parameter and raw counts.
pub fn grid_details_csv(report: &GridReport) -> String {
    let mut out = String::from("cue,strategy,parameter,tp,fp,fn,precision,recall,f1\n");
    for c in report.cells() {
        let s = &c.score;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6}",
            c.cue,
            c.strategy,
            c.parameter.map_or_else(|| "NA".into(), crate::format_f64),
            s.true_positives,
            s.false_positives,
            s.false_negatives,
            s.precision,
            s.recall,
            s.f1
        );
    }
    out
}

pub fn score_csv(score: &BoundaryScore) -> String {
    format!(
        "precision,recall,f1,tp,fp,fn\n{:.6},{:.6},{:.6},{},{},{}\n",
        score.precision, score.recall, score.f1, score.true_positives, score.false_positives, score.false_negatives
    )
}

pub fn mcnemar_csv(m: &McNemar) -> String {
    let method = match m.method {
        McNemarMethod::Exact => "exact",
        McNemarMethod::ChiSquare => "chi-square",
    };
    format!(
        "field,value\nb,{}\nc,{}\np_value,{}\nmethod,{method}\nexact_max_discordant,{EXACT_MAX_DISCORDANT}\n",
        m.b,
        m.c,
        crate::format_f64(m.p_value),
    )
}

/// One probe evaluation row.
#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub label: String,
    pub test: ProbeAccuracy,
    pub train_accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_types: usize,
    pub test_types: usize,
}

impl ProbeRow {
    pub fn new(label: impl Into<String>, data: &ProbeDataset, train_accuracy: f64, test: ProbeAccuracy) -> Self {
        Self {
            label: label.into(),
            test,
            train_accuracy,
            n_train: data.train.len(),
            n_test: data.test.len(),
            train_types: data.train_types.len(),
            test_types: data.test_types.len(),
        }
    }
}

pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut out = String::from(
        "source,accuracy,final_accuracy,internal_accuracy,train_accuracy,n_train,n_test,train_types,test_types\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            r.label,
            r.test.accuracy,
            r.test.final_accuracy,
            r.test.internal_accuracy,
            r.train_accuracy,
            r.n_train,
            r.n_test,
            r.train_types,
            r.test_types
        );
    }
    out
}

/// Positional statistics of one named corpus.
#[derive(Debug, Clone)]
pub struct CorpusStats {
    pub name: String,
    pub tokens: usize,
    pub words: usize,
    pub mean_word_length: f64,
    pub final_entropy: Option<f64>,
    pub other_entropy: Option<f64>,
    /// Word-final and other-position distributions, when both exist.
    pub distributions: Option<(PhonemeDistribution, PhonemeDistribution)>,
    pub symbols: Vec<String>,
}

impl CorpusStats {
    pub fn compute(name: impl Into<String>, corpus: &Corpus) -> Self {
        let distributions = word_final_distribution(corpus).ok();
        let (final_entropy, other_entropy) = match &distributions {
            Some((f, o)) => (normalized_entropy(f).ok(), normalized_entropy(o).ok()),
            None => (None, None),
        };
        Self {
            name: name.into(),
            tokens: corpus.token_count(),
            words: corpus.word_count(),
            mean_word_length: mean_word_length(corpus),
            final_entropy,
            other_entropy,
            distributions,
            symbols: corpus.inventory().symbols().to_vec(),
        }
    }

    fn columns(&self) -> [Option<f64>; 3] {
        [Some(self.mean_word_length), self.final_entropy, self.other_entropy]
    }
}

const STAT_COLUMNS: [&str; 3] = ["mean_word_length", "final_norm_entropy", "other_norm_entropy"];

/// Relative frequency of every phoneme in word-final and other positions.
pub fn phoneme_csv(stats: &[CorpusStats]) -> String {
    let mut out = String::from("corpus,phoneme,final_count,final_freq,other_count,other_freq\n");
    for s in stats {
        let Some((fin, other)) = &s.distributions else { continue };
        for (id, sym) in s.symbols.iter().enumerate().skip(1) {
            let id32 = id as u32;
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{},{:.6}",
                s.name,
                sym,
                fin.counts()[id],
                fin.probability(id32),
                other.counts()[id],
                other.probability(id32)
            );
        }
    }
    out
}

pub fn stats_csv(stats: &[CorpusStats]) -> String {
    let mut out = String::from("corpus,tokens,words");
    for c in STAT_COLUMNS {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for s in stats {
        let _ = write!(out, "{},{},{}", s.name, s.tokens, s.words);
        for v in s.columns() {
            let _ = write!(out, ",{}", opt(v, 6));
        }
        out.push('\n');
    }
    out
}

/// Pearson correlation between every pair of statistics across corpora;
/// `NA` where undefined (fewer than 3 corpora, missing values or zero
/// variance).
pub fn correlation_csv(stats: &[CorpusStats]) -> String {
    let cols: Vec<Option<Vec<f64>>> = (0..STAT_COLUMNS.len())
        .map(|k| stats.iter().map(|s| s.columns()[k]).collect::<Option<Vec<f64>>>())
        .collect();
    let mut out = String::from("statistic");
    for c in STAT_COLUMNS {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for (i, name) in STAT_COLUMNS.iter().enumerate() {
        out.push_str(name);
        for j in 0..STAT_COLUMNS.len() {
            let rho = match (&cols[i], &cols[j]) {
                (Some(x), Some(y)) => pearson(x, y).ok(),
                _ => None,
            };
            let _ = write!(out, ",{}", opt(rho, 6));
        }
        out.push('\n');
    }
    out
}
