//! Per-position trace files (JSON Lines).
//!
//! The first line is the header `{"segcue_trace_version":1}`. Every other
//! line is one [`PositionRecord`] with keys `utt,pos,token,entropy,
//! surprisal,rank,ubp` and an optional `emb` array. Records are grouped by
//! utterance and `pos` runs `1..=N+1`, the last step predicting `<UB>`.
//! The embedding at `pos = i` is the representation after reading token
//! `i`, i.e. the state that predicts position `i + 1`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use segcue_core::corpus::Corpus;
use segcue_core::cues::CueTrack;
use segcue_core::UB_SYMBOL;

use crate::{format_f64, Error, Result};

pub const TRACE_VERSION: u64 = 1;
const VERSION_KEY: &str = "segcue_trace_version";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionRecord {
    pub utt: usize,
    pub pos: usize,
    pub token: String,
    pub entropy: f64,
    pub surprisal: f64,
    pub rank: u32,
    pub ubp: f64,
    #[serde(default)]
    pub emb: Option<Vec<f64>>,
}

impl PositionRecord {
    /// Range checks on a single record.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.pos == 0 {
            return Err("pos is 1-based".into());
        }
        if !(self.entropy.is_finite() && self.entropy >= 0.0) {
            return Err(format!("entropy {} out of range", self.entropy));
        }
        if !(self.surprisal.is_finite() && self.surprisal >= 0.0) {
            return Err(format!("surprisal {} out of range", self.surprisal));
        }
        if self.rank == 0 {
            return Err("rank must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.ubp) {
            return Err(format!("ubp {} outside [0, 1]", self.ubp));
        }
        if let Some(emb) = &self.emb {
            if let Some(v) = emb.iter().find(|v| !v.is_finite()) {
                return Err(format!("embedding value {v} is not finite"));
            }
        }
        Ok(())
    }

    fn to_json(&self) -> String {
        let mut s = String::with_capacity(128);
        let token = serde_json::to_string(&self.token).expect("strings serialize");
        let _ = write!(
            s,
            "{{\"utt\":{},\"pos\":{},\"token\":{token},\"entropy\":{},\"surprisal\":{},\"rank\":{},\"ubp\":{}",
            self.utt,
            self.pos,
            format_f64(self.entropy),
            format_f64(self.surprisal),
            self.rank,
            format_f64(self.ubp),
        );
        if let Some(emb) = &self.emb {
            s.push_str(",\"emb\":[");
            for (k, v) in emb.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                s.push_str(&format_f64(*v));
            }
            s.push(']');
        }
        s.push('}');
        s
    }
}

/// Ordering and dimension checks shared by reader and writer.
#[derive(Debug, Default)]
struct Sequencer {
    last: Option<(usize, usize)>,
    dim: Option<Option<usize>>,
}

impl Sequencer {
    fn check(&mut self, r: &PositionRecord) -> std::result::Result<(), String> {
        r.validate()?;
        if let Some((utt, pos)) = self.last {
            if r.utt < utt {
                return Err(format!("utterance {} appears after utterance {utt}", r.utt));
            }
            if r.utt == utt && r.pos <= pos {
                return Err(format!("pos {} does not increase after {pos} in utterance {utt}", r.pos));
            }
        }
        let dim = r.emb.as_ref().map(Vec::len);
        match self.dim {
            None => self.dim = Some(dim),
            Some(d) if d != dim => {
                return Err(format!(
                    "embedding dimension {} differs from earlier records ({})",
                    describe(dim),
                    describe(d)
                ))
            }
            Some(_) => {}
        }
        self.last = Some((r.utt, r.pos));
        Ok(())
    }
}

fn describe(dim: Option<usize>) -> String {
    dim.map_or_else(|| "none".into(), |d| d.to_string())
}

pub struct TraceWriter<W: Write> {
    out: W,
    seq: Sequencer,
    written: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{{\"{VERSION_KEY}\":{TRACE_VERSION}}}")?;
        Ok(Self { out, seq: Sequencer::default(), written: 0 })
    }

    pub fn write(&mut self, record: &PositionRecord) -> Result<()> {
        self.seq
            .check(record)
            .map_err(|m| Error::Invalid(format!("record {}: {m}", self.written + 1)))?;
        writeln!(self.out, "{}", record.to_json())?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Streaming reader; yields one record per line with line-numbered errors.
pub struct TraceReader<R: BufRead> {
    lines: std::io::Lines<R>,
    line: usize,
    seq: Sequencer,
    failed: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(l) => l?,
            None => return Err(Error::parse(1, "missing trace header")),
        };
        let value: serde_json::Value = serde_json::from_str(header.trim_end_matches('\r'))
            .map_err(|e| Error::parse(1, format!("bad trace header: {e}")))?;
        let version = value
            .as_object()
            .filter(|o| o.len() == 1)
            .and_then(|o| o.get(VERSION_KEY))
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::parse(1, format!("expected {{\"{VERSION_KEY}\":{TRACE_VERSION}}}")))?;
        if version != TRACE_VERSION {
            return Err(Error::parse(1, format!("unsupported trace version {version}")));
        }
        Ok(Self { lines, line: 1, seq: Sequencer::default(), failed: false })
    }

    fn parse_line(&mut self, text: &str) -> Result<PositionRecord> {
        let text = text.strip_suffix('\r').unwrap_or(text);
        let record: PositionRecord =
            serde_json::from_str(text).map_err(|e| Error::parse(self.line, e.to_string()))?;
        self.seq.check(&record).map_err(|m| Error::parse(self.line, m))?;
        Ok(record)
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<PositionRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let text = self.lines.next()?;
        self.line += 1;
        let out = match text {
            Ok(t) => self.parse_line(&t),
            Err(e) => Err(e.into()),
        };
        self.failed = out.is_err();
        Some(out)
    }
}

pub fn write_trace(path: &Path, records: &[PositionRecord]) -> Result<()> {
    let mut w = TraceWriter::new(BufWriter::new(File::create(path)?))?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

pub fn open_trace(path: &Path) -> Result<TraceReader<BufReader<File>>> {
    TraceReader::new(BufReader::new(File::open(path)?))
}

pub fn read_trace(path: &Path) -> Result<Vec<PositionRecord>> {
    open_trace(path)?.collect()
}

/// Cue tracks (and embeddings, when every record has one) aligned with a
/// gold corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTracks {
    pub tracks: Vec<CueTrack>,
    pub embeddings: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Default)]
struct Pending {
    entropy: Vec<f64>,
    loss: Vec<f64>,
    rank: Vec<u32>,
    ubp: Vec<f64>,
    emb: Vec<Vec<f64>>,
}

/// Groups records into per-utterance cue tracks, checking them against
/// `corpus`: utterances `0..U` in order, positions `1..=N+1`, observed
/// tokens equal to the corpus phonemes and `<UB>` last.
pub fn tracks_from_records<I>(records: I, corpus: &Corpus) -> Result<TraceTracks>
where
    I: IntoIterator<Item = Result<PositionRecord>>,
{
    let utts = corpus.utterances();
    let inv = corpus.inventory();
    let mut tracks = Vec::with_capacity(utts.len());
    let mut embeddings = Vec::with_capacity(utts.len());
    let mut has_emb = None;
    let mut current = Pending::default();
    let mut cur_utt = 0usize;
    let mismatch = |utterance: usize, message: String| Error::Core(segcue_core::Error::Mismatch { utterance, message });

    let finish = |p: Pending, u: usize, tracks: &mut Vec<CueTrack>, embeddings: &mut Vec<Vec<Vec<f64>>>| -> Result<()> {
        let n = utts[u].len();
        if p.entropy.len() != n + 1 {
            return Err(mismatch(u, format!("{} records for {n} phonemes (expected {})", p.entropy.len(), n + 1)));
        }
        tracks.push(CueTrack::new(p.entropy, p.loss, p.rank, p.ubp)?);
        embeddings.push(p.emb);
        Ok(())
    };

    for rec in records {
        let rec = rec?;
        if rec.utt != cur_utt {
            if rec.utt != cur_utt + 1 || current.entropy.is_empty() {
                return Err(mismatch(rec.utt, format!("expected records for utterance {cur_utt}")));
            }
            finish(std::mem::take(&mut current), cur_utt, &mut tracks, &mut embeddings)?;
            cur_utt = rec.utt;
        }
        let utt = utts
            .get(rec.utt)
            .ok_or_else(|| mismatch(rec.utt, format!("corpus has only {} utterances", utts.len())))?;
        let i = current.entropy.len() + 1;
        if rec.pos != i {
            return Err(mismatch(rec.utt, format!("pos {} where {i} was expected", rec.pos)));
        }
        let expected = if i <= utt.len() {
            inv.symbol(utt.tokens()[i - 1]).unwrap_or_default()
        } else {
            UB_SYMBOL
        };
        if rec.token != expected {
            return Err(mismatch(rec.utt, format!("pos {i}: token `{}` but corpus has `{expected}`", rec.token)));
        }
        match (has_emb, rec.emb.is_some()) {
            (None, e) => has_emb = Some(e),
            (Some(a), b) if a != b => {
                return Err(Error::Invalid("embeddings present on some records only".into()));
            }
            _ => {}
        }
        current.entropy.push(rec.entropy);
        current.loss.push(rec.surprisal);
        current.rank.push(rec.rank);
        current.ubp.push(rec.ubp);
        if let Some(e) = rec.emb {
            current.emb.push(e);
        }
    }
    if current.entropy.is_empty() {
        return Err(Error::Invalid("trace has no records".into()));
    }
    finish(current, cur_utt, &mut tracks, &mut embeddings)?;
    if tracks.len() != utts.len() {
        return Err(mismatch(tracks.len(), format!("trace covers {} of {} utterances", tracks.len(), utts.len())));
    }
    Ok(TraceTracks {
        tracks,
        embeddings: has_emb.unwrap_or(false).then_some(embeddings),
    })
}

/// Inverse of [`tracks_from_records`].
pub fn records_from_tracks(
    corpus: &Corpus,
    tracks: &[CueTrack],
    embeddings: Option<&[Vec<Vec<f64>>]>,
) -> Result<Vec<PositionRecord>> {
    let utts = corpus.utterances();
    if tracks.len() != utts.len() {
        return Err(Error::Invalid(format!("{} tracks for {} utterances", tracks.len(), utts.len())));
    }
    if let Some(e) = embeddings {
        if e.len() != utts.len() {
            return Err(Error::Invalid(format!("{} embedding sequences for {} utterances", e.len(), utts.len())));
        }
    }
    let inv = corpus.inventory();
    let mut out = Vec::with_capacity(corpus.token_count() + utts.len());
    for (u, (utt, track)) in utts.iter().zip(tracks).enumerate() {
        let n = utt.len();
        if track.len() != n + 1 {
            return Err(Error::Core(segcue_core::Error::Mismatch {
                utterance: u,
                message: format!("track of {} positions for {n} phonemes", track.len()),
            }));
        }
        let emb = embeddings.map(|e| &e[u]);
        if let Some(e) = emb {
            if e.len() != n + 1 {
                return Err(Error::Core(segcue_core::Error::Mismatch {
                    utterance: u,
                    message: format!("{} embeddings for {} positions", e.len(), n + 1),
                }));
            }
        }
        for i in 0..=n {
            let token = if i < n { inv.symbol(utt.tokens()[i]).unwrap_or_default() } else { UB_SYMBOL };
            out.push(PositionRecord {
                utt: u,
                pos: i + 1,
                token: token.to_string(),
                entropy: track.entropy()[i],
                surprisal: track.loss()[i],
                rank: track.ranks()[i],
                ubp: track.ubp()[i],
                emb: emb.map(|e| e[i].clone()),
            });
        }
    }
    Ok(out)
}

/// Reads a trace file straight into tracks aligned with `corpus`.
pub fn load_tracks(path: &Path, corpus: &Corpus) -> Result<TraceTracks> {
    tracks_from_records(open_trace(path)?, corpus)
}
