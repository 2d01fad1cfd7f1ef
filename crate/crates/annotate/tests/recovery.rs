mod common;

use axum::http::StatusCode;
use common::{create, verdict, Harness};
use conjnli_annotate::journal::parse_journal;
use conjnli_annotate::{Event, SessionState, Store};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Drives a complete 12-pair session and returns the journal bytes.
async fn scripted_journal() -> Vec<u8> {
    let h = Harness::new();
    create(&h, "crash", 12).await;
    for (i, (x, y)) in "ENCENCENCENU".chars().zip("ENCNNCECCUNC".chars()).enumerate() {
        h.label("crash", "ann", &format!("p{i}"), verdict(x)).await;
        h.label("crash", "bob", &format!("p{i}"), verdict(y)).await;
    }
    for who in ["ann", "bob"] {
        h.label("crash", who, "p3", "neutral").await;
        h.label("crash", who, "p7", "neutral").await;
    }
    h.post("/sessions/crash/resolutions", json!({"pair_id": "p3", "resolution": "neutral"})).await;
    h.post("/sessions/crash/resolutions", json!({"pair_id": "p7", "resolution": "discard"})).await;
    assert_eq!(h.post("/sessions/crash/close", json!({})).await.0, StatusCode::OK);
    std::fs::read(h.dir.path().join("crash.jsonl")).unwrap()
}

/// Events on complete lines only, decoded independently of the journal module.
fn complete_prefix(bytes: &[u8]) -> Vec<Event> {
    let end = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    std::str::from_utf8(&bytes[..end]).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[tokio::test]
async fn truncated_journals_replay_to_their_complete_prefix() {
    let full = scripted_journal().await;
    let total_events = complete_prefix(&full).len();
    assert_eq!(total_events, 1 + 24 + 4 + 2 + 1);
    let first_line = full.iter().position(|&b| b == b'\n').unwrap() + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut cuts: Vec<usize> = (0..18).map(|_| rng.gen_range(first_line..full.len())).collect();
    // one cut exactly on a boundary and one inside the creation line
    cuts.push(first_line);
    cuts.push(first_line / 2);

    for cut in cuts {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("crash.jsonl");
        std::fs::write(&path, &full[..cut]).unwrap();
        let store = Store::open(dir.path()).unwrap();
        let events = complete_prefix(&full[..cut]);

        if events.is_empty() {
            assert!(store.read("crash", |s| Ok(s.clone())).is_err());
            assert!(!path.exists(), "a torn creation leaves no session behind");
            continue;
        }
        let expected = SessionState::replay(&events).unwrap();
        let got = store.read("crash", |s| Ok(s.clone())).unwrap();
        assert_eq!(got, expected, "cut at byte {cut}");

        // the torn tail is gone, so the next append lands on a fresh line
        let ack = store.write("crash", |s| Ok(Event::WarmupAck { annotator: s.annotators[0].clone(), at: 1 }));
        assert!(ack.is_ok(), "cut at byte {cut}: {:?}", ack.err());
        let bytes = std::fs::read(&path).unwrap();
        let (reparsed, valid) = parse_journal(&bytes).unwrap();
        assert_eq!(valid, bytes.len());
        assert!(reparsed.len() >= events.len());
        drop(store);
        let reopened = Store::open(dir.path()).unwrap();
        assert_eq!(reopened.read("crash", |s| Ok(s.clone())).unwrap(), SessionState::replay(&reparsed).unwrap());
    }
}

#[tokio::test]
async fn corrupt_middle_line_is_reported() {
    let full = scripted_journal().await;
    let text = String::from_utf8(full).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "{not json";
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("crash.jsonl"), lines.join("\n") + "\n").unwrap();
    let store = Store::open(dir.path()).unwrap();
    let err = store.read("crash", |s| Ok(s.clone())).unwrap_err();
    assert_eq!(err.code, "corrupt_journal");
}

#[test]
fn torn_tail_is_not_an_event() {
    let (events, valid) = parse_journal(b"").unwrap();
    assert!(events.is_empty());
    assert_eq!(valid, 0);
    let (events, valid) = parse_journal(b"{\"event\":\"closed\"").unwrap();
    assert!(events.is_empty());
    assert_eq!(valid, 0);
}
