//! A frozen trace file exercised without any predictor in the loop.

mod common;

use std::io::Cursor;
use std::path::PathBuf;

use common::{oracle_best_param, oracle_corpus_cues, oracle_f1, oracle_segment, positions, OracleNGram};
use segcue::corpus::{Corpus, Delimiters};
use segcue::cues::CueKind;
use segcue::evaluator::{grid, LabelledTracks};
use segcue::segmenter::Strategy;
use segcue::trace_io::{load_tracks, read_trace, records_from_tracks, tracks_from_records, TraceReader, TraceWriter};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn corpus() -> Corpus {
    Corpus::ingest(&std::fs::read_to_string(fixture("tiny.txt")).unwrap(), &Delimiters::default()).unwrap()
}

fn oracle_model(c: &Corpus) -> OracleNGram {
    OracleNGram::train(&c.strip_boundaries(), 3, c.inventory().len())
}

#[test]
fn fixture_cues_match_oracle() {
    let c = corpus();
    let oracle = oracle_model(&c);
    let expected = oracle_corpus_cues(|h| oracle.distribution(h), &c);
    let got = load_tracks(&fixture("tiny.trace.jsonl"), &c).unwrap();
    assert_eq!(got.tracks.len(), expected.len());
    for (t, e) in got.tracks.iter().zip(&expected) {
        for (k, cue) in [CueKind::Entropy, CueKind::Loss, CueKind::Rank, CueKind::Ubp].into_iter().enumerate() {
            for (a, b) in t.values(cue).iter().zip(&e[k]) {
                assert!((a - b).abs() < 1e-12, "{cue:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn fixture_embeddings_are_next_step_log_probabilities() {
    let c = corpus();
    let oracle = oracle_model(&c);
    let stream = c.strip_boundaries();
    let embs = load_tracks(&fixture("tiny.trace.jsonl"), &c).unwrap().embeddings.unwrap();
    let mut offset = 1;
    for (u, utt) in c.utterances().iter().enumerate() {
        assert_eq!(embs[u].len(), utt.len() + 1);
        for (i, e) in embs[u].iter().enumerate() {
            let q = oracle.distribution(&stream[..offset + i + 1]);
            for (x, p) in e.iter().zip(&q) {
                assert!((x - p.log2().max(-64.0)).abs() < 1e-12);
            }
        }
        offset += utt.len() + 1;
    }
}

#[test]
fn fixture_round_trips_byte_for_byte() {
    let c = corpus();
    let bytes = std::fs::read(fixture("tiny.trace.jsonl")).unwrap();
    let t = load_tracks(&fixture("tiny.trace.jsonl"), &c).unwrap();
    let records = records_from_tracks(&c, &t.tracks, t.embeddings.as_deref()).unwrap();
    assert_eq!(records, read_trace(&fixture("tiny.trace.jsonl")).unwrap());
    let mut w = TraceWriter::new(Vec::new()).unwrap();
    for r in &records {
        w.write(r).unwrap();
    }
    assert_eq!(w.finish().unwrap(), bytes);
}

#[test]
fn grid_from_fixture_matches_recount() {
    let c = corpus();
    let t = load_tracks(&fixture("tiny.trace.jsonl"), &c).unwrap();
    let gold = c.gold_boundaries();
    let gold_pos: Vec<Vec<usize>> = gold.iter().map(|g| positions(g)).collect();
    let set = LabelledTracks::new(&gold, &t.tracks).unwrap();
    let report = grid(set, set, 512).unwrap();
    assert_eq!(report.cells().len(), 12);
    for cell in report.cells() {
        let values: Vec<Vec<f64>> = t.tracks.iter().map(|x| x.values(cell.cue)).collect();
        let name = cell.strategy.name();
        let expected = match cell.strategy {
            Strategy::Peak => {
                let pred: Vec<Vec<usize>> = values.iter().map(|v| oracle_segment(v, name, 0.0)).collect();
                oracle_f1(&gold_pos, &pred).3
            }
            _ => {
                let (param, f1) = oracle_best_param(&values, &gold_pos, name);
                assert_eq!(cell.parameter, Some(param), "{:?}/{name}", cell.cue);
                f1
            }
        };
        assert!((cell.score.f1 - expected).abs() < 1e-12, "{:?}/{name}: {} vs {expected}", cell.cue, cell.score.f1);
        let pred: Vec<Vec<usize>> = cell.predicted.iter().map(|p| positions(p)).collect();
        assert!((oracle_f1(&gold_pos, &pred).3 - cell.score.f1).abs() < 1e-12);
    }
    let best = report.best();
    assert!(report.cells().iter().all(|x| x.score.f1 <= best.score.f1));
}

#[test]
fn corrupted_traces_fail_with_line_numbers() {
    let c = corpus();
    let text = std::fs::read_to_string(fixture("tiny.trace.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();

    let check = |body: String, needle: &str| {
        let reader = TraceReader::new(Cursor::new(body.into_bytes()));
        let err = match reader {
            Err(e) => e.to_string(),
            Ok(r) => match r.collect::<segcue::Result<Vec<_>>>() {
                Err(e) => e.to_string(),
                Ok(records) => tracks_from_records(records.into_iter().map(Ok), &c).unwrap_err().to_string(),
            },
        };
        assert!(err.contains(needle), "{err:?} lacks {needle:?}");
    };

    check(lines[1..].join("\n"), "line 1");
    let mut swapped = lines.clone();
    swapped.swap(2, 3);
    check(swapped.join("\n"), "line 4");
    let mut extra = lines.clone();
    let bad = lines[5].replacen("\"rank\"", "\"bogus\":1,\"rank\"", 1);
    extra[5] = &bad;
    check(extra.join("\n"), "line 6");
    let truncated = lines[..lines.len() - 1].join("\n");
    check(truncated, "utterance 3");
}
