//! Client side: a remote model usable wherever a local one is.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::message::{decode, encode, Message};
use super::{CosimError, PROTOCOL_VERSION};
use crate::hybrid::{HorizonModel, HybridError};
use crate::surrogate::{NormStats, SurrogateSpec};

#[derive(Debug)]
pub struct RemoteModel {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
    norm: NormStats,
    spec: Option<SurrogateSpec>,
    seq: u64,
    timeout: Duration,
    line: String,
}

impl RemoteModel {
    /// Connects; `norm` must be the statistics of the model the server hosts.
    pub fn connect(addr: impl ToSocketAddrs, norm: NormStats, timeout: Duration) -> Result<Self, CosimError> {
        let mut last = None;
        for a in addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(timeout))?;
                    stream.set_nodelay(true)?;
                    return Ok(Self {
                        writer: stream.try_clone()?,
                        reader: BufReader::new(stream),
                        norm,
                        spec: None,
                        seq: 0,
                        timeout,
                        line: String::new(),
                    });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.map_or_else(|| CosimError::Connection("address resolved to nothing".into()), CosimError::from))
    }

    fn send(&mut self, msg: &Message) -> Result<(), CosimError> {
        self.writer.write_all(encode(msg)?.as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    fn receive(&mut self) -> Result<Message, CosimError> {
        self.line.clear();
        match self.reader.read_line(&mut self.line) {
            Ok(0) => Err(CosimError::Connection("server closed the connection".into())),
            Ok(_) => match decode(&self.line)? {
                Message::Error { code, detail } => Err(CosimError::Remote { code, detail }),
                m => Ok(m),
            },
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                Err(CosimError::Timeout(self.timeout))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Handshake. A `SPEC_MISMATCH` reply comes back as a remote error.
    pub fn hello(&mut self, spec: &SurrogateSpec) -> Result<(), CosimError> {
        self.send(&Message::Hello {
            version: PROTOCOL_VERSION,
            features: spec.features.clone(),
            label: spec.label.clone(),
            enc_len: spec.enc_len,
            dec_len: spec.dec_len,
        })?;
        match self.receive()? {
            Message::HelloAck {
                version: PROTOCOL_VERSION,
            } => {
                self.spec = Some(spec.clone());
                Ok(())
            }
            other => Err(CosimError::malformed(0, format!("expected hello_ack, got {other:?}"))),
        }
    }

    /// One lock-step exchange on normalized rows.
    pub fn predict_normalized(&mut self, enc: Vec<Vec<f64>>, dec: Vec<Vec<f64>>) -> Result<Vec<f64>, CosimError> {
        self.seq += 1;
        let seq = self.seq;
        self.send(&Message::Predict { seq, enc, dec })?;
        match self.receive()? {
            Message::Prediction { seq: s, y } if s == seq => Ok(y),
            Message::Prediction { seq: s, .. } => Err(CosimError::malformed(0, format!("prediction for seq {s}, expected {seq}"))),
            other => Err(CosimError::malformed(0, format!("expected prediction, got {other:?}"))),
        }
    }

    pub fn shutdown(&mut self) -> Result<(), CosimError> {
        if self.spec.take().is_some() {
            self.send(&Message::Shutdown)?;
        }
        Ok(())
    }
}

impl Drop for RemoteModel {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

impl HorizonModel for RemoteModel {
    fn attach(&mut self, spec: &SurrogateSpec) -> Result<(), HybridError> {
        let tags: Vec<&str> = self.norm.features.iter().map(|s| s.tag.as_str()).collect();
        if tags != spec.feature_refs() || self.norm.label.tag != spec.label {
            return Err(HybridError::DimMismatch("normalization statistics do not cover the binding".into()));
        }
        match self.hello(spec) {
            Err(CosimError::Remote { code, detail }) if code == "SPEC_MISMATCH" => {
                Err(HybridError::RemoteSpecMismatch(detail))
            }
            other => Ok(other?),
        }
    }

    fn predict(&mut self, _time: f64, enc: &[f64], dec: &[f64]) -> Result<Vec<f64>, HybridError> {
        let f = self.norm.features.len();
        let rows = |raw: &[f64]| -> Vec<Vec<f64>> {
            let mut z = raw.to_vec();
            self.norm.apply_features(&mut z);
            z.chunks(f).map(<[f64]>::to_vec).collect()
        };
        let (enc, dec) = (rows(enc), rows(dec));
        let y = self.predict_normalized(enc, dec)?;
        Ok(y.into_iter().map(|v| self.norm.label.invert(v)).collect())
    }
}
