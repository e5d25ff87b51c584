//! Merge table and vocabulary files.
//!
//! Merge file: a header line `#segcue-merges<TAB>version=1<TAB>cue=<cue>
//! <TAB>target_vocab=<n>`, then one `left<TAB>right<TAB>score` line per
//! merge in training order. Vocabulary file: one token per line in id
//! order, the initial vocabulary first.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use segcue_core::tokenizer::{MergeCue, MergeTable};
use segcue_core::UB_SYMBOL;

use crate::{format_f64, Error, Result};

pub const MERGES_VERSION: u32 = 1;
const MAGIC: &str = "#segcue-merges";

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(['\t', '\n', '\r']) {
        return Err(Error::Invalid(format!("token name {name:?} cannot be stored in a merge file")));
    }
    Ok(())
}

pub fn write_merges<W: Write>(mut out: W, table: &MergeTable) -> Result<()> {
    writeln!(
        out,
        "{MAGIC}\tversion={MERGES_VERSION}\tcue={}\ttarget_vocab={}",
        table.cue(),
        table.target_vocab()
    )?;
    let vocab = table.vocab();
    for m in table.merges() {
        let (l, r) = (vocab.name(m.left).unwrap_or_default(), vocab.name(m.right).unwrap_or_default());
        check_name(l)?;
        check_name(r)?;
        writeln!(out, "{l}\t{r}\t{}", format_f64(m.score))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_vocab<W: Write>(mut out: W, table: &MergeTable) -> Result<()> {
    for name in table.vocab().names() {
        check_name(name)?;
        writeln!(out, "{name}")?;
    }
    out.flush()?;
    Ok(())
}

fn header_field<'a>(fields: &[&'a str], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| Error::parse(1, format!("merge header lacks `{key}`")))
}

/// Rebuilds a table from its merge and vocabulary files, checking that the
/// replayed vocabulary equals the stored one.
pub fn read_merges<M: BufRead, V: BufRead>(merges: M, vocab: V) -> Result<MergeTable> {
    let mut lines = merges.lines();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty merge file"))??;
    let fields: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    if fields.first() != Some(&MAGIC) {
        return Err(Error::parse(1, "not a merge file"));
    }
    if header_field(&fields, "version")? != MERGES_VERSION.to_string() {
        return Err(Error::parse(1, "unsupported merge file version"));
    }
    let cue: MergeCue = header_field(&fields, "cue")?.parse().map_err(|e: segcue_core::Error| Error::parse(1, e.to_string()))?;
    let target: usize = header_field(&fields, "target_vocab")?
        .parse()
        .map_err(|_| Error::parse(1, "bad target_vocab"))?;
    let mut entries = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let parts: Vec<&str> = line.split('\t').collect();
        let [l, r, s] = parts[..] else {
            return Err(Error::parse(k + 2, "expected left<TAB>right<TAB>score"));
        };
        let score: f64 = s.parse().map_err(|_| Error::parse(k + 2, format!("bad score `{s}`")))?;
        entries.push((l.to_string(), r.to_string(), score));
    }
    let names: Vec<String> = vocab
        .lines()
        .map(|l| l.map(|s| s.trim_end_matches('\r').to_string()))
        .collect::<std::io::Result<_>>()?;
    let initial = names
        .len()
        .checked_sub(entries.len())
        .ok_or_else(|| Error::Invalid("vocabulary file is shorter than the merge list".into()))?;
    let ub = names[..initial]
        .iter()
        .position(|n| n == UB_SYMBOL)
        .ok_or_else(|| Error::Invalid(format!("initial vocabulary lacks {UB_SYMBOL}")))?;
    let table = MergeTable::from_named_merges(cue, target, &names[..initial], ub as u32, &entries)?;
    if table.vocab().names() != names.as_slice() {
        return Err(Error::Invalid("vocabulary file does not match the merges".into()));
    }
    Ok(table)
}

pub fn save_merges(merges: &Path, vocab: &Path, table: &MergeTable) -> Result<()> {
    write_merges(BufWriter::new(File::create(merges)?), table)?;
    write_vocab(BufWriter::new(File::create(vocab)?), table)
}

pub fn load_merges(merges: &Path, vocab: &Path) -> Result<MergeTable> {
    read_merges(BufReader::new(File::open(merges)?), BufReader::new(File::open(vocab)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use segcue_core::tokenizer::{train_freq_bpe, TrainOptions};

    fn table() -> MergeTable {
        let names = ["<UB>", "a", "b", "c"];
        let stream = vec![0, 1, 2, 3, 1, 2, 0, 1, 2, 3, 3, 0];
        train_freq_bpe(stream, &names, 0, &TrainOptions::new(7)).unwrap().table
    }

    fn round(t: &MergeTable) -> (Vec<u8>, Vec<u8>) {
        let (mut m, mut v) = (Vec::new(), Vec::new());
        write_merges(&mut m, t).unwrap();
        write_vocab(&mut v, t).unwrap();
        (m, v)
    }

    #[test]
    fn round_trip_is_stable() {
        let t = table();
        assert!(!t.merges().is_empty());
        let (m, v) = round(&t);
        let back = read_merges(m.as_slice(), v.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(round(&back), (m, v));
    }

    #[test]
    fn format() {
        let (m, v) = round(&table());
        let m = String::from_utf8(m).unwrap();
        assert!(m.starts_with("#segcue-merges\tversion=1\tcue=frequency\ttarget_vocab=7\na\tb\t3.0000000000000000e0\n"), "{m}");
        assert!(String::from_utf8(v).unwrap().starts_with("<UB>\na\nb\nc\nab\n"));
    }

    #[test]
    fn rejects_inconsistent_files() {
        let (m, v) = round(&table());
        let mut v2 = v.clone();
        v2.extend_from_slice(b"zz\n");
        assert!(read_merges(m.as_slice(), v2.as_slice()).is_err());
        assert!(read_merges("nope\n".as_bytes(), v.as_slice()).is_err());
        let mut m2 = m.clone();
        m2.extend_from_slice(b"a\n");
        assert!(matches!(read_merges(m2.as_slice(), v.as_slice()), Err(Error::Parse { .. })));
    }
}
