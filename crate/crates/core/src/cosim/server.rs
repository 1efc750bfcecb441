//! Model host: one session per connection, one connection at a time.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};

use super::message::{decode, encode, Message};
use super::{CosimError, PROTOCOL_VERSION};
use crate::surrogate::Seq2SeqModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    AwaitHello,
    Ready,
    Closed,
}

/// Protocol state machine for one client, independent of the transport.
#[derive(Debug)]
pub struct Session<'m> {
    model: &'m Seq2SeqModel,
    phase: Phase,
    last_seq: Option<u64>,
    answered: u64,
}

impl<'m> Session<'m> {
    pub fn new(model: &'m Seq2SeqModel) -> Self {
        Self {
            model,
            phase: Phase::AwaitHello,
            last_seq: None,
            answered: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn answered(&self) -> u64 {
        self.answered
    }

    fn fail(&mut self, code: &str, detail: impl Into<String>) -> Option<Message> {
        self.phase = Phase::Closed;
        Some(Message::error(code, detail))
    }

    /// Feeds one raw line; returns the reply to send, if any.
    pub fn handle_line(&mut self, line: &str) -> Option<Message> {
        match decode(line) {
            Ok(msg) => self.handle(msg),
            Err(e) => self.fail("PROTO_MALFORMED", e.to_string()),
        }
    }

    pub fn handle(&mut self, msg: Message) -> Option<Message> {
        if self.phase == Phase::Closed {
            return None;
        }
        match (self.phase, msg) {
            (_, Message::Shutdown) => {
                self.phase = Phase::Closed;
                None
            }
            (Phase::AwaitHello, Message::Hello {
                version,
                features,
                label,
                enc_len,
                dec_len,
            }) => {
                if version != PROTOCOL_VERSION {
                    return self.fail("SPEC_MISMATCH", format!("protocol version {version}, server speaks {PROTOCOL_VERSION}"));
                }
                let spec = self.model.spec();
                if features != spec.features || label != spec.label || enc_len != spec.enc_len || dec_len != spec.dec_len {
                    return self.fail(
                        "SPEC_MISMATCH",
                        format!(
                            "model serves features {:?} label {} enc_len {} dec_len {}",
                            spec.features, spec.label, spec.enc_len, spec.dec_len
                        ),
                    );
                }
                self.phase = Phase::Ready;
                Some(Message::HelloAck {
                    version: PROTOCOL_VERSION,
                })
            }
            (Phase::Ready, Message::Predict { seq, enc, dec }) => {
                if self.last_seq.is_some_and(|last| seq <= last) {
                    return self.fail("SEQ_ORDER", format!("seq {seq} after {}", self.last_seq.unwrap_or(0)));
                }
                self.last_seq = Some(seq);
                let d = self.model.dims;
                let shape_ok = |m: &[Vec<f64>], rows: usize, cols: usize| m.len() == rows && m.iter().all(|r| r.len() == cols);
                if !shape_ok(&enc, d.enc_len, d.enc_features) || !shape_ok(&dec, d.dec_len, d.dec_features) {
                    return self.fail(
                        "SHAPE_MISMATCH",
                        format!(
                            "expected enc {}x{} and dec {}x{}",
                            d.enc_len, d.enc_features, d.dec_len, d.dec_features
                        ),
                    );
                }
                let enc: Vec<f64> = enc.into_iter().flatten().collect();
                let dec: Vec<f64> = dec.into_iter().flatten().collect();
                match self.model.predict(&enc, &dec) {
                    Ok(y) if y.iter().all(|v| v.is_finite()) => {
                        self.answered += 1;
                        Some(Message::Prediction { seq, y })
                    }
                    Ok(_) => self.fail("NONFINITE_PREDICTION", "model produced a non-finite value"),
                    Err(e) => self.fail(e.code(), e.to_string()),
                }
            }
            (Phase::AwaitHello, other) => self.fail("PROTO_ORDER", format!("expected hello, got {}", kind(&other))),
            (_, other) => self.fail("PROTO_ORDER", format!("unexpected {} in session", kind(&other))),
        }
    }
}

fn kind(m: &Message) -> &'static str {
    match m {
        Message::Hello { .. } => "hello",
        Message::HelloAck { .. } => "hello_ack",
        Message::Predict { .. } => "predict",
        Message::Prediction { .. } => "prediction",
        Message::Error { .. } => "error",
        Message::Shutdown => "shutdown",
    }
}

/// Runs one session over an accepted stream until it closes. Returns the
/// number of predictions answered.
pub fn serve_one(stream: TcpStream, model: &Seq2SeqModel) -> Result<u64, CosimError> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut session = Session::new(model);
    let mut line = String::new();
    while session.phase() != Phase::Closed {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        if let Some(reply) = session.handle_line(&line) {
            // Replies are built from finite values, so encoding cannot fail.
            let text = encode(&reply).unwrap_or_else(|e| encode(&Message::error(e.code(), e.to_string())).unwrap_or_default());
            writer.write_all(text.as_bytes())?;
            writer.flush()?;
        }
    }
    Ok(session.answered())
}

/// Accepts `sessions` connections in turn (forever if `None`) and serves each.
pub fn serve_model(listener: &TcpListener, model: &Seq2SeqModel, sessions: Option<usize>) -> Result<u64, CosimError> {
    let mut total = 0;
    let mut served = 0;
    while sessions.is_none_or(|n| served < n) {
        let (stream, _) = listener.accept()?;
        total += serve_one(stream, model)?;
        served += 1;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{Dims, NormStats, Seq2SeqParams, SignalStats};

    fn model() -> Seq2SeqModel {
        let d = Dims {
            enc_features: 2,
            dec_features: 2,
            hidden: 3,
            enc_len: 3,
            dec_len: 2,
        };
        let s = |t: &str| SignalStats {
            tag: t.into(),
            mean: 0.0,
            std: 1.0,
        };
        Seq2SeqModel::new(
            d,
            Seq2SeqParams::init(&d, 1),
            NormStats {
                features: vec![s("a"), s("b")],
                label: s("y"),
            },
        )
        .unwrap()
    }

    fn hello(m: &Seq2SeqModel) -> Message {
        let spec = m.spec();
        Message::Hello {
            version: 1,
            features: spec.features,
            label: spec.label,
            enc_len: spec.enc_len,
            dec_len: spec.dec_len,
        }
    }

    fn predict(seq: u64) -> Message {
        Message::Predict {
            seq,
            enc: vec![vec![0.1, 0.2]; 3],
            dec: vec![vec![0.3, -0.4]; 2],
        }
    }

    fn code(reply: Option<Message>) -> String {
        match reply {
            Some(Message::Error { code, .. }) => code,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn happy_path_matches_local_forward() {
        let m = model();
        let mut s = Session::new(&m);
        assert_eq!(s.handle(hello(&m)), Some(Message::HelloAck { version: 1 }));
        let y = m.predict(&[0.1, 0.2, 0.1, 0.2, 0.1, 0.2], &[0.3, -0.4, 0.3, -0.4]).unwrap();
        assert_eq!(s.handle(predict(1)), Some(Message::Prediction { seq: 1, y }));
        assert!(matches!(s.handle(predict(5)), Some(Message::Prediction { seq: 5, .. })));
        assert_eq!(s.handle(Message::Shutdown), None);
        assert_eq!(s.phase(), Phase::Closed);
        assert_eq!(s.answered(), 2);
    }

    #[test]
    fn wrong_features_rejected() {
        let m = model();
        let mut s = Session::new(&m);
        let mut h = hello(&m);
        if let Message::Hello { features, .. } = &mut h {
            features.reverse();
        }
        assert_eq!(code(s.handle(h)), "SPEC_MISMATCH");
        assert_eq!(s.phase(), Phase::Closed);
        assert_eq!(s.handle(predict(1)), None);
    }

    #[test]
    fn repeated_seq_rejected() {
        let m = model();
        let mut s = Session::new(&m);
        s.handle(hello(&m));
        assert!(matches!(s.handle(predict(2)), Some(Message::Prediction { .. })));
        assert_eq!(code(s.handle(predict(2))), "SEQ_ORDER");
        assert_eq!(s.phase(), Phase::Closed);
    }

    #[test]
    fn predict_before_hello_rejected() {
        let m = model();
        let mut s = Session::new(&m);
        assert_eq!(code(s.handle(predict(1))), "PROTO_ORDER");
        assert_eq!(s.phase(), Phase::Closed);
    }

    #[test]
    fn bad_shapes_and_lines_close() {
        let m = model();
        let mut s = Session::new(&m);
        s.handle(hello(&m));
        let bad = Message::Predict {
            seq: 1,
            enc: vec![vec![0.0; 2]; 2],
            dec: vec![vec![0.0; 2]; 2],
        };
        assert_eq!(code(s.handle(bad)), "SHAPE_MISMATCH");

        let mut s = Session::new(&m);
        assert_eq!(code(s.handle_line("{\"type\":\"bogus\"}\n")), "PROTO_MALFORMED");
        assert_eq!(s.phase(), Phase::Closed);
    }

    #[test]
    fn version_checked() {
        let m = model();
        let mut s = Session::new(&m);
        let mut h = hello(&m);
        if let Message::Hello { version, .. } = &mut h {
            *version = 2;
        }
        assert_eq!(code(s.handle(h)), "SPEC_MISMATCH");
    }
}
