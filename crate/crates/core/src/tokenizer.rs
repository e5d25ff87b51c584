//! Merge-based subword vocabularies driven by boundary cues.
//!
//! Training starts from the phoneme inventory (including `<UB>`) and
//! repeatedly merges one adjacent token pair everywhere in the stream:
//!
//! * cue merges score a pair by the mean cue value of its second token over
//!   the pair's occurrences and merge the lowest-scoring pair; the merged
//!   token carries the sum of its parts' values, so the total cue mass of
//!   the stream never changes;
//! * frequency merges (plain BPE) merge the most frequent pair.
//!
//! Occurrences are matched left to right without overlap (`A A A` with the
//! merge `(A, A)` becomes `AA A`). Ties go to the lexicographically
//! smallest `(left, right)` name pair. Pairs involving `<UB>` and pairs
//! whose concatenated name is already a vocabulary entry are never merged.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::corpus::{Corpus, TokenId};
use crate::cues::{CueKind, CueTrack};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MergeCue {
    Ubp,
    Entropy,
    Frequency,
}

impl MergeCue {
    pub fn name(self) -> &'static str {
        match self {
            MergeCue::Ubp => "ubp",
            MergeCue::Entropy => "entropy",
            MergeCue::Frequency => "frequency",
        }
    }

    /// The per-position cue the merges are scored with, if any.
    pub fn cue_kind(self) -> Option<CueKind> {
        match self {
            MergeCue::Ubp => Some(CueKind::Ubp),
            MergeCue::Entropy => Some(CueKind::Entropy),
            MergeCue::Frequency => None,
        }
    }
}

impl fmt::Display for MergeCue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MergeCue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ubp" => Ok(MergeCue::Ubp),
            "entropy" => Ok(MergeCue::Entropy),
            "frequency" | "freq" | "bpe" => Ok(MergeCue::Frequency),
            _ => Err(Error::InvalidArgument(format!("unknown merge cue `{s}`"))),
        }
    }
}

/// Token stream with one cue value per token.
///
/// Values are snapped to a dyadic grid sized from the total absolute mass,
/// which makes every partial sum of stream values exactly representable:
/// merging two tokens and summing their values never rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredStream {
    tokens: Vec<TokenId>,
    values: Vec<f64>,
}

impl ScoredStream {
    pub fn new(tokens: Vec<TokenId>, mut values: Vec<f64>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyStream);
        }
        if tokens.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} tokens but {} cue values",
                tokens.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("cue value {v} is not finite")));
        }
        let mass: f64 = values.iter().map(|v| v.abs()).sum();
        if mass > 0.0 {
            let (_, exp) = libm::frexp(mass);
            let quantum = libm::ldexp(1.0, exp - 52);
            for v in &mut values {
                *v = libm::round(*v / quantum) * quantum;
            }
        }
        Ok(Self { tokens, values })
    }

    /// Stream with all values zero, for frequency merges.
    pub fn unscored(tokens: Vec<TokenId>) -> Result<Self> {
        let n = tokens.len();
        Self::new(tokens, alloc::vec![0.0; n])
    }

    /// Lays the cue values of `tracks` over the modelling stream of
    /// `corpus`. Position `i` of a track scores token `t_i`, the final
    /// position scores the closing `<UB>`; the stream's leading `<UB>` gets 0.
    pub fn from_tracks(corpus: &Corpus, tracks: &[CueTrack], cue: CueKind) -> Result<Self> {
        if tracks.len() != corpus.utterances().len() {
            return Err(Error::InvalidArgument(format!(
                "{} cue tracks for {} utterances",
                tracks.len(),
                corpus.utterances().len()
            )));
        }
        let mut values = Vec::with_capacity(corpus.token_count() + tracks.len() + 1);
        values.push(0.0);
        for (u, (utt, track)) in corpus.utterances().iter().zip(tracks).enumerate() {
            if track.phonemes() != utt.len() {
                return Err(Error::Mismatch {
                    utterance: u,
                    message: format!("{} phonemes but {} track positions", utt.len(), track.len()),
                });
            }
            values.extend(track.values(cue));
        }
        Self::new(corpus.strip_boundaries(), values)
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Sum of all cue values.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Token names by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: BTreeMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self {
            names: Vec::new(),
            index: BTreeMap::new(),
        };
        for name in names {
            let name = name.into();
            if name.is_empty() || vocab.index.contains_key(&name) {
                return Err(Error::InvalidArgument(format!("duplicate or empty token `{name}`")));
            }
            vocab.push(name);
        }
        Ok(vocab)
    }

    fn push(&mut self, name: String) -> TokenId {
        let id = self.names.len() as TokenId;
        self.index.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    pub fn id(&self, name: &str) -> Option<TokenId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: TokenId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: TokenId,
    pub right: TokenId,
    pub new: TokenId,
    /// Mean cue value (cue merges) or occurrence count (frequency merges).
    pub score: f64,
}

/// Ordered merges plus the vocabulary they build.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeTable {
    cue: MergeCue,
    target_vocab: usize,
    initial_size: usize,
    ub: TokenId,
    vocab: Vocabulary,
    merges: Vec<Merge>,
}

impl MergeTable {
    /// Rebuilds a table from its initial vocabulary and `(left, right,
    /// score)` merges given by name, resolving names step by step.
    pub fn from_named_merges<S: AsRef<str>>(
        cue: MergeCue,
        target_vocab: usize,
        initial: &[S],
        ub: TokenId,
        merges: &[(S, S, f64)],
    ) -> Result<Self> {
        let mut vocab = Vocabulary::new(initial.iter().map(|s| String::from(s.as_ref())))?;
        let initial_size = vocab.len();
        if ub as usize >= initial_size {
            return Err(Error::InvalidArgument(format!("boundary id {ub} outside the initial vocabulary")));
        }
        let mut table = Vec::with_capacity(merges.len());
        for (l, r, score) in merges {
            let (l, r) = (l.as_ref(), r.as_ref());
            let left = vocab.id(l).ok_or_else(|| Error::UnknownToken(l.into()))?;
            let right = vocab.id(r).ok_or_else(|| Error::UnknownToken(r.into()))?;
            if left == ub || right == ub {
                return Err(Error::InvalidArgument("merges may not involve the utterance boundary".into()));
            }
            let name = format!("{l}{r}");
            if vocab.id(&name).is_some() {
                return Err(Error::InvalidArgument(format!("merge creates existing token `{name}`")));
            }
            let new = vocab.push(name);
            table.push(Merge { left, right, new, score: *score });
        }
        Ok(Self {
            cue,
            target_vocab,
            initial_size,
            ub,
            vocab,
            merges: table,
        })
    }

    pub fn cue(&self) -> MergeCue {
        self.cue
    }

    pub fn target_vocab(&self) -> usize {
        self.target_vocab
    }

    pub fn initial_size(&self) -> usize {
        self.initial_size
    }

    pub fn ub(&self) -> TokenId {
        self.ub
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn initial_names(&self) -> &[String] {
        &self.vocab.names()[..self.initial_size]
    }

    /// Applies every merge in table order to a token sequence over this
    /// table's vocabulary.
    pub fn encode(&self, tokens: &[TokenId]) -> Result<Vec<TokenId>> {
        if let Some(&t) = tokens.iter().find(|&&t| t as usize >= self.vocab.len()) {
            return Err(Error::UnknownToken(format!("#{t}")));
        }
        let mut out = tokens.to_vec();
        for m in &self.merges {
            apply_merge(&mut out, None, m.left, m.right, m.new);
        }
        Ok(out)
    }

    /// Encodes a sequence given by token names.
    pub fn encode_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<TokenId>> {
        let ids = names
            .iter()
            .map(|n| self.vocab.id(n.as_ref()).ok_or_else(|| Error::UnknownToken(n.as_ref().into())))
            .collect::<Result<Vec<_>>>()?;
        self.encode(&ids)
    }
}

/// Replaces non-overlapping `(left, right)` occurrences left to right,
/// summing values when given. Returns the number of replacements.
fn apply_merge(
    tokens: &mut Vec<TokenId>,
    mut values: Option<&mut Vec<f64>>,
    left: TokenId,
    right: TokenId,
    new: TokenId,
) -> usize {
    let n = tokens.len();
    let mut read = 0;
    let mut write = 0;
    let mut merged = 0;
    while read < n {
        if read + 1 < n && tokens[read] == left && tokens[read + 1] == right {
            tokens[write] = new;
            if let Some(v) = values.as_deref_mut() {
                v[write] = v[read] + v[read + 1];
            }
            read += 2;
            merged += 1;
        } else {
            tokens[write] = tokens[read];
            if let Some(v) = values.as_deref_mut() {
                v[write] = v[read];
            }
            read += 1;
        }
        write += 1;
    }
    tokens.truncate(write);
    if let Some(v) = values {
        v.truncate(write);
    }
    merged
}

#[derive(Debug, Clone, Copy, Default)]
struct PairStats {
    count: usize,
    value_sum: f64,
}

/// Occurrence counts and second-token value sums of every mergeable pair,
/// counting the same non-overlapping occurrences [`apply_merge`] replaces.
fn pair_stats(stream: &ScoredStream, ub: TokenId) -> BTreeMap<(TokenId, TokenId), PairStats> {
    let mut stats: BTreeMap<(TokenId, TokenId), PairStats> = BTreeMap::new();
    let mut prev_same_counted = false;
    for (i, w) in stream.tokens.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if a == ub || b == ub {
            prev_same_counted = false;
            continue;
        }
        if a == b && prev_same_counted {
            prev_same_counted = false;
            continue;
        }
        prev_same_counted = a == b;
        let s = stats.entry((a, b)).or_default();
        s.count += 1;
        s.value_sum += stream.values[i + 1];
    }
    stats
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub target_vocab: usize,
    /// Pairs seen fewer times than this are never merged.
    pub min_pair_count: usize,
}

impl TrainOptions {
    pub fn new(target_vocab: usize) -> Self {
        Self {
            target_vocab,
            min_pair_count: 1,
        }
    }
}

/// Stream statistics after one merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeStep {
    pub occurrences: usize,
    pub tokens_after: usize,
    pub mass_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub table: MergeTable,
    /// The training stream after all merges.
    pub stream: ScoredStream,
    pub steps: Vec<MergeStep>,
    /// False when training ran out of mergeable pairs first.
    pub reached_target: bool,
}

/// Trains a merge table on `stream`, whose ids index `initial` names.
pub fn train_merges<S: AsRef<str>>(
    mut stream: ScoredStream,
    initial: &[S],
    ub: TokenId,
    cue: MergeCue,
    options: &TrainOptions,
) -> Result<TrainOutput> {
    let mut vocab = Vocabulary::new(initial.iter().map(|s| String::from(s.as_ref())))?;
    let initial_size = vocab.len();
    if ub as usize >= initial_size {
        return Err(Error::InvalidArgument(format!("boundary id {ub} outside the initial vocabulary")));
    }
    if options.target_vocab <= initial_size {
        return Err(Error::InvalidArgument(format!(
            "target vocabulary {} must exceed the initial {initial_size}",
            options.target_vocab
        )));
    }
    if let Some(&t) = stream.tokens.iter().find(|&&t| t as usize >= initial_size) {
        return Err(Error::UnknownToken(format!("#{t}")));
    }

    let mut merges = Vec::new();
    let mut steps = Vec::new();
    while vocab.len() < options.target_vocab {
        let stats = pair_stats(&stream, ub);
        let mut best: Option<((TokenId, TokenId), f64)> = None;
        for (&(a, b), s) in &stats {
            if s.count < options.min_pair_count.max(1) {
                continue;
            }
            let (la, lb) = (&vocab.names[a as usize], &vocab.names[b as usize]);
            if vocab.index.contains_key(&format!("{la}{lb}")) {
                continue;
            }
            let score = match cue {
                MergeCue::Frequency => s.count as f64,
                _ => s.value_sum / s.count as f64,
            };
            let better = match best {
                None => true,
                Some(((ba, bb), bs)) => {
                    let improves = match cue {
                        MergeCue::Frequency => score > bs,
                        _ => score < bs,
                    };
                    improves
                        || (score == bs
                            && (la.as_str(), lb.as_str())
                                < (vocab.names[ba as usize].as_str(), vocab.names[bb as usize].as_str()))
                }
            };
            if better {
                best = Some(((a, b), score));
            }
        }
        let Some(((left, right), score)) = best else {
            log::warn!(
                "no mergeable pair left; stopping at vocabulary size {} of {}",
                vocab.len(),
                options.target_vocab
            );
            break;
        };
        let name = format!("{}{}", vocab.names[left as usize], vocab.names[right as usize]);
        let new = vocab.push(name);
        let occurrences = apply_merge(&mut stream.tokens, Some(&mut stream.values), left, right, new);
        merges.push(Merge { left, right, new, score });
        steps.push(MergeStep {
            occurrences,
            tokens_after: stream.len(),
            mass_after: stream.mass(),
        });
    }
    let reached_target = vocab.len() >= options.target_vocab;
    Ok(TrainOutput {
        table: MergeTable {
            cue,
            target_vocab: options.target_vocab,
            initial_size,
            ub,
            vocab,
            merges,
        },
        stream,
        steps,
        reached_target,
    })
}

/// Cue merges on a scored stream.
pub fn train_cue_merges<S: AsRef<str>>(
    stream: ScoredStream,
    initial: &[S],
    ub: TokenId,
    cue: MergeCue,
    options: &TrainOptions,
) -> Result<TrainOutput> {
    if cue == MergeCue::Frequency {
        return Err(Error::InvalidArgument("use train_freq_bpe for frequency merges".into()));
    }
    train_merges(stream, initial, ub, cue, options)
}

/// Frequency BPE baseline.
pub fn train_freq_bpe<S: AsRef<str>>(
    tokens: Vec<TokenId>,
    initial: &[S],
    ub: TokenId,
    options: &TrainOptions,
) -> Result<TrainOutput> {
    train_merges(ScoredStream::unscored(tokens)?, initial, ub, MergeCue::Frequency, options)
}
