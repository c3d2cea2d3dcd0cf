//! Wire codec round trips, mutation fuzzing and record crash recovery.

mod common;

use std::io::BufReader;

use common::*;
use sandbox_core::device_link::{decode_frame, encode_frame, read_frame, DecodeError, LinkError};
use sandbox_core::sensor_synth::Channel;
use sandbox_core::session::{parse_record, run_configured_session, SessionConfig, SessionControl};

#[test]
fn golden_frames_round_trip() {
    let text = golden_text();
    assert_golden(&golden_dir().join("frames.jsonl"), &text);
    for (line, frame) in text.split_inclusive('\n').zip(golden_frames()) {
        let decoded = decode_frame(line.as_bytes()).unwrap();
        assert_eq!(decoded, frame);
        assert_eq!(encode_frame(&decoded), line.as_bytes());
    }
    let mut reader = BufReader::new(text.as_bytes());
    for frame in golden_frames() {
        assert_eq!(read_frame(&mut reader).unwrap(), frame);
    }
    assert!(matches!(read_frame(&mut reader), Err(LinkError::Closed)));
}

#[test]
fn wrong_arity_is_rejected() {
    let line = br#"{"v":1,"type":"spoof","payload":{"t":0,"channel":"step_counter","values":[1.0,2.0]}}
"#;
    assert_eq!(decode_frame(line), Err(DecodeError::ArityMismatch(Channel::StepCounter)));
    let line = br#"{"v":2,"type":"ack","payload":{"of":"spoof"}}
"#;
    assert!(matches!(decode_frame(line), Err(DecodeError::BadVersion(_))));
    assert!(matches!(decode_frame(br#"{"v":1,"type":"tele"#), Err(_)));
}

#[test]
fn mutation_fuzz_never_panics() {
    let lines: Vec<Vec<u8>> = golden_text().split_inclusive('\n').map(|l| l.as_bytes().to_vec()).collect();
    let mut rng = rng(2024);
    let (mut ok, mut rejected) = (0, 0);
    for i in 0..10_000 {
        let input = mutate_bytes(&lines[i % lines.len()], &mut rng);
        let outcome = std::panic::catch_unwind(|| {
            let direct = decode_frame(&input);
            let streamed = read_frame(&mut BufReader::new(input.as_slice()));
            (direct, streamed)
        });
        let (direct, _streamed) = outcome.unwrap_or_else(|_| panic!("panic on {:?}", String::from_utf8_lossy(&input)));
        match direct {
            Ok(frame) => {
                ok += 1;
                // Whatever decodes must re-encode to something that decodes to the same frame.
                assert_eq!(decode_frame(&encode_frame(&frame)).unwrap(), frame);
            }
            Err(_) => rejected += 1,
        }
    }
    assert_eq!(ok + rejected, 10_000);
    assert!(rejected > 5_000);
}

#[test]
fn truncated_records_recover_every_complete_event() {
    let dir = scenario_dir();
    let config = SessionConfig::load(&dir.join("rideshare_toronto.json")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let record = run_configured_session(&config, &dir, out.path(), &SessionControl::default()).unwrap();
    let bytes = record.to_jsonl().into_bytes();
    let line_ends: Vec<usize> = bytes.iter().enumerate().filter(|(_, b)| **b == b'\n').map(|(i, _)| i + 1).collect();
    let header_end = line_ends[0];
    for cut in 0..=bytes.len() {
        let parsed = parse_record(&bytes[..cut]);
        if cut < header_end {
            assert!(parsed.is_err(), "cut {cut}");
            continue;
        }
        let loaded = parsed.unwrap_or_else(|e| panic!("cut {cut}: {e}"));
        let complete = line_ends.iter().filter(|&&e| e <= cut).count();
        let events = complete.saturating_sub(1).min(record.events.len());
        assert_eq!(loaded.record.events, record.events[..events], "cut {cut}");
        assert_eq!(loaded.truncation.is_some(), !line_ends.contains(&cut), "cut {cut}");
        assert_eq!(loaded.record.footer.is_some(), cut == bytes.len());
    }
}
