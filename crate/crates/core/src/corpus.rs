//! Phoneme inventories and gold-segmented corpora.
//!
//! The text format is one utterance per line, words separated by the word
//! delimiter (TAB by default) and phonemes inside a word separated by the
//! phoneme delimiter (a single space by default). Multi-character phonemes
//! such as `u:` are therefore unambiguous.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, UB_SYMBOL};

/// Index of a symbol in a [`PhonemeInventory`].
pub type TokenId = u32;

/// Bidirectional symbol/id map. `<UB>` is always id 0, every other symbol
/// gets the next id in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
    index: BTreeMap<String, TokenId>,
}

impl Default for PhonemeInventory {
    fn default() -> Self {
        Self::new()
    }
}

impl PhonemeInventory {
    pub fn new() -> Self {
        let mut index = BTreeMap::new();
        index.insert(UB_SYMBOL.to_owned(), 0);
        Self {
            symbols: alloc::vec![UB_SYMBOL.to_owned()],
            index,
        }
    }

    /// Builds an inventory from an explicit symbol list whose first entry
    /// must be `<UB>`.
    pub fn from_symbols<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut iter = symbols.into_iter();
        match iter.next().map(Into::into) {
            Some(first) if first == UB_SYMBOL => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "inventory must start with {UB_SYMBOL}"
                )))
            }
        }
        let mut inventory = Self::new();
        for symbol in iter {
            let symbol = symbol.into();
            if symbol.is_empty() || inventory.index.contains_key(&symbol) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate or empty inventory symbol `{symbol}`"
                )));
            }
            inventory.intern(&symbol);
        }
        Ok(inventory)
    }

    /// Returns the id of `symbol`, adding it if unseen.
    pub fn intern(&mut self, symbol: &str) -> TokenId {
        if let Some(&id) = self.index.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as TokenId;
        self.symbols.push(symbol.to_owned());
        self.index.insert(symbol.to_owned(), id);
        id
    }

    pub fn id(&self, symbol: &str) -> Option<TokenId> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: TokenId) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn ub_id(&self) -> TokenId {
        0
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    /// An inventory always holds `<UB>`; this reports whether it holds
    /// anything else.
    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= 1
    }
}

/// One utterance: phoneme ids plus a gold boundary bit per position.
///
/// `boundaries[i]` is set iff a word starts at `tokens[i]`, so
/// `boundaries[0]` is always set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    tokens: Vec<TokenId>,
    boundaries: Vec<bool>,
}

impl Utterance {
    pub fn new(tokens: Vec<TokenId>, boundaries: Vec<bool>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("utterance has no phonemes".into()));
        }
        if tokens.len() != boundaries.len() {
            return Err(Error::InvalidArgument(format!(
                "{} tokens but {} boundary flags",
                tokens.len(),
                boundaries.len()
            )));
        }
        if !boundaries[0] {
            return Err(Error::InvalidArgument(
                "first position must start a word".into(),
            ));
        }
        Ok(Self { tokens, boundaries })
    }

    /// Concatenates words, marking each word start.
    pub fn from_words<W: AsRef<[TokenId]>>(words: &[W]) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut boundaries = Vec::new();
        for word in words {
            let word = word.as_ref();
            if word.is_empty() {
                return Err(Error::InvalidArgument("empty word".into()));
            }
            for (k, &t) in word.iter().enumerate() {
                tokens.push(t);
                boundaries.push(k == 0);
            }
        }
        Self::new(tokens, boundaries)
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn boundaries(&self) -> &[bool] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.boundaries.iter().filter(|&&b| b).count()
    }

    /// Iterates over the words as token slices.
    pub fn words(&self) -> impl Iterator<Item = &[TokenId]> + '_ {
        word_spans(&self.boundaries).map(move |(s, e)| &self.tokens[s..e])
    }
}

/// Half-open `(start, end)` spans of the words described by a boundary
/// vector whose first entry is set.
pub fn word_spans(boundaries: &[bool]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let n = boundaries.len();
    (0..n).filter(move |&i| boundaries[i]).map(move |start| {
        let end = (start + 1..n).find(|&j| boundaries[j]).unwrap_or(n);
        (start, end)
    })
}

/// Word and phoneme delimiters of the corpus text format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delimiters {
    pub word: String,
    pub phoneme: String,
}

impl Default for Delimiters {
    fn default() -> Self {
        Self {
            word: "\t".into(),
            phoneme: " ".into(),
        }
    }
}

impl Delimiters {
    fn validate(&self) -> Result<()> {
        if self.word.is_empty() || self.phoneme.is_empty() {
            return Err(Error::InvalidArgument("delimiters must be non-empty".into()));
        }
        if self.word == self.phoneme {
            return Err(Error::InvalidArgument(
                "word and phoneme delimiters must differ".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    inventory: PhonemeInventory,
    utterances: Vec<Utterance>,
    language_tag: String,
    token_count: usize,
}

impl Corpus {
    pub fn new(inventory: PhonemeInventory, utterances: Vec<Utterance>) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let limit = inventory.len() as TokenId;
        let ub = inventory.ub_id();
        for (u, utt) in utterances.iter().enumerate() {
            if let Some(&bad) = utt.tokens.iter().find(|&&t| t >= limit || t == ub) {
                return Err(Error::Mismatch {
                    utterance: u,
                    message: format!("token id {bad} is not a phoneme of the inventory"),
                });
            }
        }
        let token_count = utterances.iter().map(Utterance::len).sum();
        Ok(Self {
            inventory,
            utterances,
            language_tag: String::new(),
            token_count,
        })
    }

    /// Parses the corpus text format.
    pub fn ingest(text: &str, delims: &Delimiters) -> Result<Self> {
        Self::ingest_with_inventory(text, delims, PhonemeInventory::new())
    }

    /// Like [`Corpus::ingest`] but starts from an existing inventory so
    /// that ids stay aligned with another corpus or a trained model.
    pub fn ingest_with_inventory(
        text: &str,
        delims: &Delimiters,
        mut inventory: PhonemeInventory,
    ) -> Result<Self> {
        delims.validate()?;
        let mut utterances = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            let mut tokens = Vec::new();
            let mut boundaries = Vec::new();
            for word in line.split(delims.word.as_str()) {
                for (k, phoneme) in word.split(delims.phoneme.as_str()).enumerate() {
                    if phoneme.is_empty() {
                        return Err(Error::Ingest {
                            line: lineno + 1,
                            message: "empty phoneme token".into(),
                        });
                    }
                    if phoneme == UB_SYMBOL {
                        return Err(Error::Ingest {
                            line: lineno + 1,
                            message: format!("{UB_SYMBOL} is reserved"),
                        });
                    }
                    tokens.push(inventory.intern(phoneme));
                    boundaries.push(k == 0);
                }
            }
            utterances.push(Utterance { tokens, boundaries });
        }
        Self::new(inventory, utterances)
    }

    /// Renders the corpus back to text with its gold segmentation.
    pub fn render(&self, delims: &Delimiters) -> String {
        let boundaries: Vec<&[bool]> = self.utterances.iter().map(|u| u.boundaries()).collect();
        self.render_impl(&boundaries, delims)
    }

    /// Renders the corpus phonemes with an arbitrary boundary vector per
    /// utterance (e.g. a predicted segmentation).
    pub fn render_with<B: AsRef<[bool]>>(&self, boundaries: &[B], delims: &Delimiters) -> Result<String> {
        if boundaries.len() != self.utterances.len() {
            return Err(Error::InvalidArgument(format!(
                "{} boundary vectors for {} utterances",
                boundaries.len(),
                self.utterances.len()
            )));
        }
        let mut refs = Vec::with_capacity(boundaries.len());
        for (u, (b, utt)) in boundaries.iter().zip(&self.utterances).enumerate() {
            let b = b.as_ref();
            if b.len() != utt.len() {
                return Err(Error::Mismatch {
                    utterance: u,
                    message: format!("{} boundary flags for {} phonemes", b.len(), utt.len()),
                });
            }
            refs.push(b);
        }
        Ok(self.render_impl(&refs, delims))
    }

    fn render_impl(&self, boundaries: &[&[bool]], delims: &Delimiters) -> String {
        let mut out = String::new();
        for (utt, b) in self.utterances.iter().zip(boundaries) {
            for (i, &t) in utt.tokens.iter().enumerate() {
                if i > 0 {
                    out.push_str(if b[i] { &delims.word } else { &delims.phoneme });
                }
                out.push_str(self.inventory.symbol(t).unwrap_or_default());
            }
            out.push('\n');
        }
        out
    }

    pub fn inventory(&self) -> &PhonemeInventory {
        &self.inventory
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn with_language_tag(mut self, tag: impl Into<String>) -> Self {
        self.language_tag = tag.into();
        self
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn word_count(&self) -> usize {
        self.utterances.iter().map(Utterance::word_count).sum()
    }

    pub fn gold_boundaries(&self) -> Vec<Vec<bool>> {
        self.utterances.iter().map(|u| u.boundaries.clone()).collect()
    }

    /// The modelling stream: utterances joined by single `<UB>` symbols,
    /// with one at each end. Word boundaries are dropped.
    pub fn strip_boundaries(&self) -> Vec<TokenId> {
        let ub = self.inventory.ub_id();
        let mut stream = Vec::with_capacity(self.token_count + self.utterances.len() + 1);
        stream.push(ub);
        for utt in &self.utterances {
            stream.extend_from_slice(&utt.tokens);
            stream.push(ub);
        }
        stream
    }

    /// Longest prefix of utterances holding at most `max_tokens` phonemes.
    pub fn subsample(&self, max_tokens: usize) -> Result<Self> {
        if max_tokens == 0 {
            return Err(Error::InvalidArgument("max_tokens must be at least 1".into()));
        }
        let mut total = 0;
        let mut keep = 0;
        for utt in &self.utterances {
            if total + utt.len() > max_tokens {
                break;
            }
            total += utt.len();
            keep += 1;
        }
        if keep == 0 {
            return Err(Error::InvalidArgument(format!(
                "first utterance has {} phonemes, more than the budget of {max_tokens}",
                self.utterances[0].len()
            )));
        }
        self.with_utterances(self.utterances[..keep].to_vec())
    }

    /// Seeded utterance-level train/dev/test partition. Sizes follow the
    /// largest-remainder rule; utterances keep their corpus order within
    /// each part.
    pub fn split(&self, fractions: [f64; 3], seed: u64) -> Result<Splits> {
        let sizes = largest_remainder(self.utterances.len(), &fractions)?;
        let mut order: Vec<usize> = (0..self.utterances.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut parts = [Vec::new(), Vec::new(), Vec::new()];
        let mut start = 0;
        for (part, &size) in parts.iter_mut().zip(&sizes) {
            let mut idx = order[start..start + size].to_vec();
            idx.sort_unstable();
            *part = idx;
            start += size;
        }
        let [train, dev, test] = parts;
        Ok(Splits {
            train: self.select(&train)?,
            dev: self.select(&dev)?,
            test: self.select(&test)?,
            train_indices: train,
            dev_indices: dev,
            test_indices: test,
        })
    }

    /// Corpus restricted to the given utterance indices, same inventory.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut utts = Vec::with_capacity(indices.len());
        for &i in indices {
            let utt = self.utterances.get(i).ok_or_else(|| {
                Error::InvalidArgument(format!("utterance index {i} out of range"))
            })?;
            utts.push(utt.clone());
        }
        self.with_utterances(utts)
    }

    fn with_utterances(&self, utterances: Vec<Utterance>) -> Result<Self> {
        Ok(Self::new(self.inventory.clone(), utterances)?.with_language_tag(self.language_tag.clone()))
    }
}

/// Result of [`Corpus::split`]; indices refer to the source corpus.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    pub train_indices: Vec<usize>,
    pub dev_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn largest_remainder(n: usize, fractions: &[f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::InvalidArgument("split fractions must be positive".into()));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions sum to {total}, expected 1"
        )));
    }
    let quotas = fractions.map(|f| f * n as f64);
    let mut sizes = quotas.map(|q| libm::floor(q) as usize);
    let assigned: usize = sizes.iter().sum();
    let mut order = [0usize, 1, 2];
    // stable sort keeps index order for equal remainders
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - libm::floor(quotas[a]);
        let rb = quotas[b] - libm::floor(quotas[b]);
        rb.total_cmp(&ra)
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "split of {n} utterances leaves an empty part ({sizes:?})"
        )));
    }
    Ok(sizes)
}

/// Generates a corpus of uniformly random word concatenations.
///
/// Each utterance draws its length uniformly from `words_per_utterance`,
/// then each word uniformly from `lexicon` (words given as phoneme lists).
pub fn synthesize<W: AsRef<str>>(
    lexicon: &[Vec<W>],
    words_per_utterance: RangeInclusive<usize>,
    n_utterances: usize,
    seed: u64,
) -> Result<Corpus> {
    if lexicon.is_empty() {
        return Err(Error::InvalidArgument("lexicon is empty".into()));
    }
    let (lo, hi) = (*words_per_utterance.start(), *words_per_utterance.end());
    if lo > hi || lo == 0 {
        return Err(Error::InvalidArgument(format!(
            "invalid utterance length range {lo}..={hi}"
        )));
    }
    if n_utterances == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut inventory = PhonemeInventory::new();
    let mut words = Vec::with_capacity(lexicon.len());
    for word in lexicon {
        if word.is_empty() {
            return Err(Error::InvalidArgument("lexicon contains an empty word".into()));
        }
        let mut ids = Vec::with_capacity(word.len());
        for p in word {
            let p = p.as_ref();
            if p.is_empty() || p == UB_SYMBOL {
                return Err(Error::InvalidArgument(format!("invalid phoneme `{p}` in lexicon")));
            }
            ids.push(inventory.intern(p));
        }
        words.push(ids);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut utterances = Vec::with_capacity(n_utterances);
    for _ in 0..n_utterances {
        let len = rng.random_range(lo..=hi);
        let chosen: Vec<&[TokenId]> = (0..len)
            .map(|_| words[rng.random_range(0..words.len())].as_slice())
            .collect();
        utterances.push(Utterance::from_words(&chosen)?);
    }
    Corpus::new(inventory, utterances).map(|c| c.with_language_tag("synthetic".to_string()))
}
