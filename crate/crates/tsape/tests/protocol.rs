use std::io::{BufRead, BufReader, Cursor, Write};
use std::net::TcpListener;
use std::process::{Command, Stdio};
use std::thread;

use proptest::prelude::*;
use tsape::mock::{mock_model, Fault, Faulty};
use tsape::protocol::{serve, ExternalPredictor, Message, ServeStats, PROTOCOL_VERSION};
use tsape_core::predict::{predict_proba, CentroidModel, Predictor};
use tsape_core::PredictError;

const MOCK: &str = env!("CARGO_BIN_EXE_tsape-mock-predictor");

fn model() -> Faulty<CentroidModel> {
    Faulty::new(mock_model(3, 4, 0.5), Fault::None, 8)
}

/// Feeds raw lines to an in-memory server and returns the parsed replies.
fn session(p: &dyn Predictor, lines: &[String]) -> (Vec<Message>, ServeStats) {
    let input: String = lines.iter().map(|l| format!("{l}\n")).collect();
    let mut out = Vec::new();
    let stats = serve(Cursor::new(input.into_bytes()), &mut out, p).unwrap();
    let replies = String::from_utf8(out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    (replies, stats)
}

fn hello() -> String {
    Message::Hello {
        version: PROTOCOL_VERSION,
    }
    .to_line()
    .trim_end()
    .to_string()
}

fn predict(id: u64, series: Vec<Vec<f64>>) -> String {
    Message::Predict { id, series }.to_line().trim_end().to_string()
}

fn is_error_for(m: &Message, want: Option<u64>) -> bool {
    matches!(m, Message::Error { id, .. } if *id == want)
}

fn local_probs(p: &dyn Predictor, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    predict_proba(p, &refs)
        .unwrap()
        .into_iter()
        .map(|r| r.into_inner())
        .collect()
}

fn batch(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![i as f64 / n as f64, 0.2, -0.1, 1.3]).collect()
}

#[test]
fn messages_are_tagged_lowercase_json() {
    let line = Message::Predict {
        id: 3,
        series: vec![vec![1.0]],
    }
    .to_line();
    assert_eq!(line, "{\"type\":\"predict\",\"id\":3,\"series\":[[1.0]]}\n");
    let ready: Message =
        serde_json::from_str(r#"{"type":"ready","n_classes":2,"series_length":null,"batch_limit":5}"#).unwrap();
    assert_eq!(
        ready,
        Message::Ready {
            n_classes: 2,
            series_length: None,
            batch_limit: 5
        }
    );
    assert_eq!(Message::Bye.to_line(), "{\"type\":\"bye\"}\n");
}

#[test]
fn handshake_then_predict() {
    let m = model();
    let rows = batch(3);
    let (replies, stats) = session(&m, &[hello(), predict(1, rows.clone())]);
    assert_eq!(
        replies[0],
        Message::Ready {
            n_classes: 3,
            series_length: Some(4),
            batch_limit: 8
        }
    );
    assert_eq!(
        replies[1],
        Message::Probs {
            id: 1,
            probs: local_probs(&m, &rows)
        }
    );
    assert_eq!((stats.answered, stats.errors), (1, 0));
}

#[test]
fn errors_keep_the_session_alive() {
    let m = model();
    let lines = vec![
        predict(1, batch(1)), // before hello
        hello(),
        "{not json".to_string(),               // malformed, no id
        r#"{"type":"predict","id":2}"#.into(), // missing series, id recovered
        predict(3, vec![vec![0.0; 5]]),        // wrong length
        predict(4, batch(9)),                  // over batch limit
        predict(5, batch(2)),
        predict(5, batch(2)), // repeated id
        predict(4, batch(2)), // decreasing id
        r#"{"type":"probs","id":9,"probs":[]}"#.into(),
        predict(10, batch(2)),
    ];
    let (replies, stats) = session(&m, &lines);
    assert_eq!(replies.len(), lines.len());
    assert!(is_error_for(&replies[0], Some(1)));
    assert!(matches!(replies[1], Message::Ready { .. }));
    assert!(is_error_for(&replies[2], None));
    assert!(is_error_for(&replies[3], Some(2)));
    assert!(is_error_for(&replies[4], Some(3)));
    assert!(is_error_for(&replies[5], Some(4)));
    assert!(matches!(replies[6], Message::Probs { id: 5, .. }));
    assert!(is_error_for(&replies[7], Some(5)));
    assert!(is_error_for(&replies[8], Some(4)));
    assert!(is_error_for(&replies[9], None));
    assert!(matches!(replies[10], Message::Probs { id: 10, .. }));
    assert_eq!((stats.answered, stats.errors), (2, 8));
}

#[test]
fn unsupported_version_is_refused() {
    let (replies, _) = session(
        &model(),
        &[r#"{"type":"hello","version":99}"#.into(), predict(1, batch(1))],
    );
    assert!(is_error_for(&replies[0], None));
    assert!(is_error_for(&replies[1], Some(1)));
}

#[test]
fn bye_ends_the_session() {
    let (replies, _) = session(&model(), &[hello(), r#"{"type":"bye"}"#.into(), predict(1, batch(1))]);
    assert_eq!(replies.len(), 1);
}

#[test]
fn off_simplex_rows_are_never_sent() {
    let m = Faulty::new(mock_model(2, 4, 1.0), Fault::OffSimplex, 8);
    let (replies, _) = session(&m, &[hello(), predict(1, batch(2))]);
    assert!(is_error_for(&replies[1], Some(1)));
}

fn tcp_server<P: Predictor + Send + 'static>(p: P) -> (String, thread::JoinHandle<ServeStats>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        serve(BufReader::new(stream.try_clone().unwrap()), stream, &p).unwrap()
    });
    (addr, handle)
}

#[test]
fn tcp_client_matches_local_model_and_chunks_batches() {
    let (addr, server) = tcp_server(model());
    let remote = ExternalPredictor::connect(&addr).unwrap();
    assert_eq!(remote.n_classes(), 3);
    assert_eq!(remote.series_length(), Some(4));
    assert_eq!(remote.batch_limit(), 8);
    let rows = batch(21);
    assert_eq!(local_probs(&remote, &rows), local_probs(&model(), &rows));
    drop(remote);
    let stats = server.join().unwrap();
    assert_eq!((stats.answered, stats.errors), (3, 0));
}

#[test]
fn remote_errors_leave_the_connection_usable() {
    let (addr, _server) = tcp_server(Faulty::new(mock_model(2, 4, 1.0), Fault::FailAfter(1), 8));
    let remote = ExternalPredictor::connect(&addr).unwrap();
    let rows = batch(2);
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    assert!(remote.predict_rows(&refs).is_ok());
    for _ in 0..3 {
        assert!(matches!(remote.predict_rows(&refs), Err(PredictError::Remote(_))));
    }
}

#[test]
fn mismatched_reply_id_breaks_the_connection() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut w = stream;
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        w.write_all(
            Message::Ready {
                n_classes: 2,
                series_length: None,
                batch_limit: 4,
            }
            .to_line()
            .as_bytes(),
        )
        .unwrap();
        line.clear();
        reader.read_line(&mut line).unwrap();
        w.write_all(
            Message::Probs {
                id: 999,
                probs: vec![vec![0.5, 0.5]],
            }
            .to_line()
            .as_bytes(),
        )
        .unwrap();
    });
    let remote = ExternalPredictor::connect(&addr).unwrap();
    let row = [0.0, 1.0];
    assert!(matches!(remote.predict_rows(&[&row]), Err(PredictError::Protocol(_))));
    assert!(remote.predict_rows(&[&row]).is_err());
    server.join().unwrap();
}

#[test]
fn bad_handshakes_are_rejected() {
    for ready in [
        Message::Ready {
            n_classes: 1,
            series_length: None,
            batch_limit: 4,
        },
        Message::Ready {
            n_classes: 2,
            series_length: None,
            batch_limit: 0,
        },
        Message::Ready {
            n_classes: 2,
            series_length: Some(0),
            batch_limit: 4,
        },
        Message::Bye,
    ] {
        let reply = ready.to_line();
        let result = ExternalPredictor::from_streams(
            Box::new(Cursor::new(reply.into_bytes())),
            Box::new(Vec::new()),
            "canned",
        );
        assert!(result.is_err(), "{ready:?} accepted");
    }
    let silent = ExternalPredictor::from_streams(Box::new(Cursor::new(Vec::new())), Box::new(Vec::new()), "silent");
    assert!(matches!(silent, Err(PredictError::Transport(_))));
}

#[test]
fn subprocess_over_stdio() {
    let cmd: Vec<String> = [
        MOCK,
        "--classes",
        "3",
        "--length",
        "4",
        "--temperature",
        "0.5",
        "--batch-limit",
        "8",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let remote = ExternalPredictor::spawn(&cmd).unwrap();
    let rows = batch(17);
    assert_eq!(local_probs(&remote, &rows), local_probs(&model(), &rows));
    assert!(remote.describe().contains("tsape-mock-predictor"));
}

#[test]
fn subprocess_startup_failures_are_transport_errors() {
    assert!(matches!(
        ExternalPredictor::spawn(&["/nonexistent/predictor".to_string()]),
        Err(PredictError::Transport(_))
    ));
    assert!(matches!(ExternalPredictor::spawn(&[]), Err(PredictError::Transport(_))));
    let exits = ["sh".to_string(), "-c".to_string(), "exit 0".to_string()];
    assert!(matches!(
        ExternalPredictor::spawn(&exits),
        Err(PredictError::Transport(_))
    ));
}

#[test]
fn mock_binary_over_tcp() {
    let mut child = Command::new(MOCK)
        .args(["--length", "4", "--tcp", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut first)
        .unwrap();
    let addr = first.trim().strip_prefix("listening ").unwrap().to_string();
    let a = ExternalPredictor::connect(&addr).unwrap();
    let b = ExternalPredictor::connect(&addr).unwrap();
    let rows = batch(5);
    let expected = local_probs(&mock_model(2, 4, 1.0), &rows);
    assert_eq!(local_probs(&a, &rows), expected);
    assert_eq!(local_probs(&b, &rows), expected);
    drop((a, b));
    child.kill().unwrap();
    child.wait().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn garbage_never_stops_the_server(junk in prop::collection::vec(".{0,40}", 0..12)) {
        let m = model();
        let mut lines: Vec<String> = junk.into_iter().map(|l| l.replace(['\n', '\r'], " ")).collect();
        lines.push(hello());
        lines.push(predict(u64::MAX, batch(1)));
        let (replies, _) = session(&m, &lines);
        let answered = replies.iter().any(|r| matches!(r, Message::Probs { id: u64::MAX, .. }));
        let closed_early = lines.iter().any(|l| l.contains(r#""type":"bye""#));
        prop_assert!(answered || closed_early);
    }
}
