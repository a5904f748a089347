use std::io::Write;

use proptest::prelude::*;
use streammap_core::ingest::{self, IngestError, Message, Query, SourceConfig, Window};

fn file_with(lines: &[&str]) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
    f
}

fn replay_source(f: &tempfile::NamedTempFile) -> SourceConfig {
    SourceConfig::parse(&format!("replay:{}", f.path().display()), None).unwrap()
}

fn ids(w: &Window) -> Vec<String> {
    w.iter().map(|m| m.id.clone()).collect()
}

#[test]
fn empty_replay_is_empty() {
    let f = file_with(&[]);
    let mut stream = ingest::open_source(&replay_source(&f)).unwrap();
    assert!(stream.next().is_none());
    assert_eq!(stream.malformed(), 0);
}

#[test]
fn replay_yields_timestamp_order() {
    let f = file_with(&[
        r#"{"id":"c","ts":3,"text":"third"}"#,
        r#"{"id":"a","ts":1,"text":"first"}"#,
        r#"{"id":"b","ts":2,"text":"second","author":"x"}"#,
    ]);
    let got: Vec<u64> = ingest::open_source(&replay_source(&f)).unwrap().map(|m| m.ts).collect();
    assert_eq!(got, [1, 2, 3]);
}

#[test]
fn one_malformed_line_of_four() {
    let f = file_with(&[
        r#"{"id":"a","ts":1,"text":"x"}"#,
        r#"{"id":"b","ts":2,"text":"#,
        r#"{"id":"c","ts":3,"text":"z"}"#,
        r#"{"id":"d","ts":4,"text":"w"}"#,
    ]);
    let mut stream = ingest::open_source(&replay_source(&f)).unwrap();
    let got: Vec<Message> = stream.by_ref().collect();
    assert_eq!(got.len(), 3);
    assert_eq!(stream.malformed(), 1);
}

#[test]
fn unreadable_file_is_an_error() {
    let cfg = SourceConfig::parse("replay:/definitely/not/here.ndjson", None).unwrap();
    assert!(matches!(ingest::open_source(&cfg), Err(IngestError::Unreadable { .. })));
}

#[test]
fn source_specs() {
    assert_eq!(SourceConfig::parse("stdin", None).unwrap(), SourceConfig::Stdin);
    assert_eq!(SourceConfig::parse("http", None).unwrap(), SourceConfig::Http);
    assert!(SourceConfig::parse("ftp://x", None).is_err());
    assert!(SourceConfig::parse("replay:a", Some(0.0)).is_err());
}

#[test]
fn capacity_evicts_oldest() {
    let mut w = Window::new(2, None).unwrap();
    w.push(Message::new("A", 1, "")).unwrap();
    w.push(Message::new("B", 2, "")).unwrap();
    let evicted = w.push(Message::new("C", 3, "")).unwrap();
    assert_eq!(ids(&w), ["B", "C"]);
    assert_eq!(evicted.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(), ["A"]);
}

#[test]
fn duplicate_leaves_window_unchanged() {
    let mut w = Window::new(2, None).unwrap();
    w.push(Message::new("A", 1, "")).unwrap();
    w.push(Message::new("B", 2, "")).unwrap();
    let before = ids(&w);
    assert!(matches!(w.push(Message::new("B", 9, "")), Err(IngestError::DuplicateId(id)) if id == "B"));
    assert_eq!(ids(&w), before);
}

#[test]
fn max_age_evicts_by_newest() {
    let mut w = Window::new(100, Some(10)).unwrap();
    for (id, ts) in [("a", 96), ("b", 97), ("c", 100), ("d", 104), ("e", 105)] {
        w.push(Message::new(id, ts, "")).unwrap();
    }
    assert_eq!(w.len(), 5);
    // newest is now 115, so the cutoff is 105: a, b, c, d go
    let evicted = w.push(Message::new("f", 115, "")).unwrap();
    let expected: Vec<&str> = [("a", 96), ("b", 97), ("c", 100), ("d", 104)]
        .iter()
        .filter(|(_, ts)| *ts < 115 - 10)
        .map(|(id, _)| *id)
        .collect();
    assert_eq!(evicted.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(), expected);
    assert_eq!(ids(&w), ["e", "f"]);
}

fn tokens(tokens: &[&str]) -> Message {
    let mut m = Message::new("m", 0, "");
    m.tokens = tokens.iter().map(|t| t.to_string()).collect();
    m
}

#[test]
fn matching_is_conjunctive() {
    let abc = tokens(&["a", "b", "c"]);
    assert!(ingest::matches(&abc, &Query::match_all()));
    assert!(ingest::matches(&abc, &Query::parse("a c").unwrap()));
    assert!(!ingest::matches(&tokens(&["a", "b"]), &Query::parse("a z").unwrap()));
}

#[test]
fn query_normalization() {
    let q = Query::parse("  Storm,COAST+storm ").unwrap();
    assert_eq!(q.keywords(), ["coast", "storm"]);
    assert_eq!(q.key(), Query::parse("coast storm").unwrap().key());
    assert!(Query::parse("").unwrap().is_match_all());
    assert!(matches!(Query::parse("a\u{0}b"), Err(IngestError::MalformedQuery(_))));
    assert!(matches!(Query::parse("ok !!!"), Err(IngestError::MalformedQuery(_))));
}

#[test]
fn replay_is_reproducible() {
    let path = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/stream-200.ndjson");
    let a = ingest::read_replay(&path).unwrap();
    let b = ingest::read_replay(&path).unwrap();
    assert_eq!(a.messages, b.messages);
    assert_eq!(a.messages.len(), 200);
    assert!(a.messages.windows(2).all(|w| w[0].ts <= w[1].ts));
}

proptest! {
    #[test]
    fn window_respects_bounds(
        capacity in 1usize..20,
        max_age in proptest::option::of(1u64..50),
        pushes in proptest::collection::vec((0u8..40, 0u64..200), 0..80),
    ) {
        let mut w = Window::new(capacity, max_age).unwrap();
        for (id, ts) in pushes {
            let _ = w.push(Message::new(format!("m{id}"), ts, ""));
            prop_assert!(w.len() <= capacity);
            if let (Some(age), Some(newest)) = (max_age, w.newest_ts()) {
                prop_assert!(w.iter().all(|m| m.ts + age >= newest));
            }
            let order: Vec<(u64, String)> = w.iter().map(|m| (m.ts, m.id.clone())).collect();
            let mut sorted = order.clone();
            sorted.sort();
            prop_assert_eq!(order, sorted);
        }
    }

    #[test]
    fn adding_keywords_never_widens(
        toks in proptest::collection::vec("[a-e]", 0..6),
        query in proptest::collection::vec("[a-e]", 0..4),
        extra in "[a-f]",
    ) {
        let msg = tokens(&toks.iter().map(String::as_str).collect::<Vec<_>>());
        let narrow_terms = format!("{} {}", query.join(" "), extra);
        let wide = Query::parse(&query.join(" ")).unwrap();
        let narrow = Query::parse(&narrow_terms).unwrap();
        prop_assert!(!ingest::matches(&msg, &narrow) || ingest::matches(&msg, &wide));
    }
}
