//! Newline-delimited JSON protocol for predictors running in another process.
//!
//! ```text
//! -> {"type":"hello","version":1}
//! <- {"type":"ready","n_classes":2,"series_length":64,"batch_limit":256}
//! -> {"type":"predict","id":0,"series":[[0.1,0.2,...],...]}
//! <- {"type":"probs","id":0,"probs":[[0.7,0.3],...]}
//! <- {"type":"error","id":0,"message":"..."}
//! -> {"type":"bye"}
//! ```
//!
//! One message per line, UTF-8. Ids are strictly increasing per connection
//! and answered in order; a connection carries one request at a time.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tsape_core::predict::{predict_proba, Predictor};
use tsape_core::PredictError;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Hello {
        version: u32,
    },
    Ready {
        n_classes: usize,
        series_length: Option<usize>,
        batch_limit: usize,
    },
    Predict {
        id: u64,
        series: Vec<Vec<f64>>,
    },
    Probs {
        id: u64,
        probs: Vec<Vec<f64>>,
    },
    Error {
        id: Option<u64>,
        message: String,
    },
    Bye,
}

impl Message {
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("messages serialize");
        line.push('\n');
        line
    }
}

fn send<W: Write + ?Sized>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(msg.to_line().as_bytes())?;
    w.flush()
}

/// Next non-blank line, `None` at end of stream.
fn read_line<R: BufRead + ?Sized>(r: &mut R) -> io::Result<Option<String>> {
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        if !line.trim().is_empty() {
            return Ok(Some(line));
        }
    }
}

enum Transport {
    Child {
        child: Child,
        stdin: Option<ChildStdin>,
        stdout: BufReader<ChildStdout>,
    },
    Tcp {
        reader: BufReader<TcpStream>,
        writer: TcpStream,
    },
    Streams {
        reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
    },
}

impl Transport {
    fn send(&mut self, msg: &Message) -> io::Result<()> {
        match self {
            Transport::Child { stdin, .. } => match stdin {
                Some(w) => send(w, msg),
                None => Err(io::Error::new(io::ErrorKind::BrokenPipe, "stdin closed")),
            },
            Transport::Tcp { writer, .. } => send(writer, msg),
            Transport::Streams { writer, .. } => send(writer.as_mut(), msg),
        }
    }

    fn recv(&mut self) -> io::Result<Option<String>> {
        match self {
            Transport::Child { stdout, .. } => read_line(stdout),
            Transport::Tcp { reader, .. } => read_line(reader),
            Transport::Streams { reader, .. } => read_line(reader.as_mut()),
        }
    }
}

struct Connection {
    transport: Transport,
    next_id: u64,
    broken: Option<String>,
}

/// Client side of the protocol. Requests on one handle are serialized; open
/// several handles for parallel evaluation.
pub struct ExternalPredictor {
    conn: Mutex<Connection>,
    n_classes: usize,
    series_length: Option<usize>,
    batch_limit: usize,
    description: String,
}

fn transport_err(context: &str, e: io::Error) -> PredictError {
    PredictError::Transport(format!("{context}: {e}"))
}

impl ExternalPredictor {
    /// Starts `command[0]` with the remaining arguments and talks to it over
    /// its stdin and stdout. Stderr is inherited.
    pub fn spawn(command: &[String]) -> Result<Self, PredictError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| PredictError::Transport("empty predictor command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| transport_err(&format!("cannot start {program:?}"), e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let transport = Transport::Child {
            child,
            stdin: Some(stdin),
            stdout,
        };
        Self::handshake(transport, format!("command {}", command.join(" ")))
    }

    pub fn connect(address: &str) -> Result<Self, PredictError> {
        let stream =
            TcpStream::connect(address).map_err(|e| transport_err(&format!("cannot connect to {address}"), e))?;
        stream.set_nodelay(true).ok();
        let reader = BufReader::new(stream.try_clone().map_err(|e| transport_err("socket", e))?);
        Self::handshake(Transport::Tcp { reader, writer: stream }, format!("tcp {address}"))
    }

    /// Runs the protocol over arbitrary streams.
    pub fn from_streams(
        reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
        description: impl Into<String>,
    ) -> Result<Self, PredictError> {
        Self::handshake(Transport::Streams { reader, writer }, description.into())
    }

    fn handshake(mut transport: Transport, endpoint: String) -> Result<Self, PredictError> {
        transport
            .send(&Message::Hello {
                version: PROTOCOL_VERSION,
            })
            .map_err(|e| transport_err("handshake", e))?;
        let line = transport
            .recv()
            .map_err(|e| transport_err("handshake", e))?
            .ok_or_else(|| PredictError::Transport("connection closed during handshake".into()))?;
        let reply: Message = serde_json::from_str(&line)
            .map_err(|e| PredictError::Protocol(format!("malformed handshake reply: {e}")))?;
        let (n_classes, series_length, batch_limit) = match reply {
            Message::Ready {
                n_classes,
                series_length,
                batch_limit,
            } => (n_classes, series_length, batch_limit),
            Message::Error { message, .. } => return Err(PredictError::Remote(message)),
            other => {
                return Err(PredictError::Protocol(format!("expected ready, got {other:?}")));
            }
        };
        if n_classes < 2 {
            return Err(PredictError::Protocol(format!("server declares {n_classes} classes")));
        }
        if batch_limit < 1 {
            return Err(PredictError::Protocol("server declares batch_limit 0".into()));
        }
        if series_length == Some(0) {
            return Err(PredictError::Protocol("server declares series_length 0".into()));
        }
        let length = series_length.map_or("any".to_string(), |n| n.to_string());
        Ok(Self {
            conn: Mutex::new(Connection {
                transport,
                next_id: 0,
                broken: None,
            }),
            n_classes,
            series_length,
            batch_limit,
            description: format!("external({endpoint}, classes={n_classes}, length={length})"),
        })
    }

    fn exchange(conn: &mut Connection, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError> {
        let id = conn.next_id;
        conn.next_id += 1;
        let request = Message::Predict {
            id,
            series: batch.iter().map(|x| x.to_vec()).collect(),
        };
        conn.transport
            .send(&request)
            .map_err(|e| transport_err(&format!("request {id}"), e))?;
        let line = conn
            .transport
            .recv()
            .map_err(|e| transport_err(&format!("response {id}"), e))?
            .ok_or_else(|| PredictError::Transport(format!("connection closed before response {id}")))?;
        let reply: Message = serde_json::from_str(&line)
            .map_err(|e| PredictError::Protocol(format!("malformed response to request {id}: {e}")))?;
        match reply {
            Message::Probs { id: got, probs } if got == id => Ok(probs),
            Message::Probs { id: got, .. } => Err(PredictError::Protocol(format!(
                "response id {got} does not match request id {id}"
            ))),
            Message::Error { id: got, message } if got.is_none() || got == Some(id) => {
                Err(PredictError::Remote(message))
            }
            Message::Error { id: got, .. } => Err(PredictError::Protocol(format!(
                "error for id {got:?} while waiting for {id}"
            ))),
            other => Err(PredictError::Protocol(format!(
                "unexpected reply to request {id}: {other:?}"
            ))),
        }
    }

    /// Sends `bye` and waits briefly for a spawned server to exit.
    pub fn shutdown(self) {
        drop(self);
    }
}

impl Predictor for ExternalPredictor {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn series_length(&self) -> Option<usize> {
        self.series_length
    }

    fn batch_limit(&self) -> usize {
        self.batch_limit
    }

    fn describe(&self) -> String {
        self.description.clone()
    }

    /// A transport or protocol failure leaves the stream in an unknown state,
    /// so the handle refuses further requests. Remote errors do not.
    fn predict_rows(&self, batch: &[&[f64]]) -> Result<Vec<Vec<f64>>, PredictError> {
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(reason) = &conn.broken {
            return Err(PredictError::Transport(format!(
                "connection unusable after earlier failure: {reason}"
            )));
        }
        let result = Self::exchange(&mut conn, batch);
        if let Err(e @ (PredictError::Transport(_) | PredictError::Protocol(_))) = &result {
            conn.broken = Some(e.to_string());
        }
        result
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        let conn = self.conn.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = conn.transport.send(&Message::Bye);
        match &mut conn.transport {
            Transport::Child { child, stdin, .. } => {
                drop(stdin.take());
                let deadline = Instant::now() + Duration::from_secs(2);
                loop {
                    match child.try_wait() {
                        Ok(Some(_)) | Err(_) => break,
                        Ok(None) if Instant::now() >= deadline => {
                            let _ = child.kill();
                            let _ = child.wait();
                            break;
                        }
                        Ok(None) => thread::sleep(Duration::from_millis(5)),
                    }
                }
            }
            Transport::Tcp { writer, .. } => {
                let _ = writer.shutdown(std::net::Shutdown::Both);
            }
            Transport::Streams { .. } => {}
        }
    }
}

/// Counters from one [`serve`] session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeStats {
    pub answered: usize,
    pub errors: usize,
}

/// Server side: answers requests from `reader` on `writer` until `bye` or end
/// of input. Malformed or invalid requests get an error message and the
/// session continues. Rows are checked against the probability simplex
/// before they are sent.
pub fn serve<R: BufRead, W: Write>(mut reader: R, mut writer: W, predictor: &dyn Predictor) -> io::Result<ServeStats> {
    let mut stats = ServeStats::default();
    let mut greeted = false;
    let mut last_id: Option<u64> = None;
    while let Some(line) = read_line(&mut reader)? {
        let reply = match serde_json::from_str::<Message>(&line) {
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64));
                Message::Error {
                    id,
                    message: format!("malformed message: {e}"),
                }
            }
            Ok(Message::Hello { version }) if version == PROTOCOL_VERSION => {
                greeted = true;
                Message::Ready {
                    n_classes: predictor.n_classes(),
                    series_length: predictor.series_length(),
                    batch_limit: predictor.batch_limit(),
                }
            }
            Ok(Message::Hello { version }) => Message::Error {
                id: None,
                message: format!("unsupported protocol version {version}, this server speaks {PROTOCOL_VERSION}"),
            },
            Ok(Message::Bye) => break,
            Ok(Message::Predict { id, .. }) if !greeted => Message::Error {
                id: Some(id),
                message: "handshake required before predict".into(),
            },
            Ok(Message::Predict { id, .. }) if last_id.is_some_and(|last| id <= last) => Message::Error {
                id: Some(id),
                message: format!(
                    "id {id} is not greater than previous id {}",
                    last_id.unwrap_or_default()
                ),
            },
            Ok(Message::Predict { id, series }) => {
                last_id = Some(id);
                answer(predictor, id, &series)
            }
            Ok(other) => Message::Error {
                id: None,
                message: format!("unexpected message from client: {other:?}"),
            },
        };
        match reply {
            Message::Error { .. } => stats.errors += 1,
            Message::Probs { .. } => stats.answered += 1,
            _ => {}
        }
        send(&mut writer, &reply)?;
    }
    Ok(stats)
}

fn answer(predictor: &dyn Predictor, id: u64, series: &[Vec<f64>]) -> Message {
    let error = |message: String| Message::Error { id: Some(id), message };
    if series.len() > predictor.batch_limit() {
        return error(format!(
            "batch of {} exceeds batch_limit {}",
            series.len(),
            predictor.batch_limit()
        ));
    }
    if let Some((row, _)) = series
        .iter()
        .enumerate()
        .find(|(_, x)| x.iter().any(|v| !v.is_finite()))
    {
        return error(format!("row {row} contains a non-finite value"));
    }
    let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
    match predict_proba(predictor, &refs) {
        Ok(rows) => Message::Probs {
            id,
            probs: rows.into_iter().map(|p| p.into_inner()).collect(),
        },
        Err(e) => error(e.to_string()),
    }
}
