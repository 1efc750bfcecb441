//! Wire messages and their line codec.

use serde::{Deserialize, Serialize};

use super::CosimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Message {
    Hello {
        version: u32,
        features: Vec<String>,
        label: String,
        enc_len: usize,
        dec_len: usize,
    },
    HelloAck {
        version: u32,
    },
    /// `enc` is `T_enc` rows of `F` values, `dec` is `T_dec` rows.
    Predict {
        seq: u64,
        enc: Vec<Vec<f64>>,
        dec: Vec<Vec<f64>>,
    },
    Prediction {
        seq: u64,
        y: Vec<f64>,
    },
    Error {
        code: String,
        detail: String,
    },
    Shutdown,
}

impl Message {
    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        Self::Error {
            code: code.to_string(),
            detail: detail.into(),
        }
    }

    fn numbers(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            Self::Predict { enc, dec, .. } => Box::new(enc.iter().chain(dec).flatten().copied()),
            Self::Prediction { y, .. } => Box::new(y.iter().copied()),
            _ => Box::new(std::iter::empty()),
        }
    }
}

/// One JSON object followed by `\n`. Non-finite numbers have no JSON form
/// and are refused.
pub fn encode(msg: &Message) -> Result<String, CosimError> {
    if let Some(bad) = msg.numbers().find(|v| !v.is_finite()) {
        return Err(CosimError::malformed(0, format!("cannot encode non-finite value {bad}")));
    }
    let mut s = serde_json::to_string(msg).map_err(|e| CosimError::malformed(0, e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses one line, with or without its trailing newline.
pub fn decode(line: &str) -> Result<Message, CosimError> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    let body = body.strip_suffix('\r').unwrap_or(body);
    if body.contains('\n') {
        return Err(CosimError::malformed(body.find('\n').unwrap_or(0), "embedded newline"));
    }
    serde_json::from_str(body).map_err(|e| {
        // Single line, so the column is the byte position.
        let offset = e.column().saturating_sub(1).min(body.len());
        CosimError::malformed(offset, e.to_string())
    })
}
