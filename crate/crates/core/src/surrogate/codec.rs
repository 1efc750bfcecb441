//! JSON model file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lstm::{LstmCellParams, GATES};
use super::seq2seq::{Dims, Seq2SeqModel, Seq2SeqParams};
use super::{NormStats, SurrogateError};

pub const MODEL_FORMAT: &str = "hytwin-lstm";
pub const MODEL_VERSION: u64 = 1;

const GATE_NAMES: [&str; GATES] = ["i", "f", "o", "g"];

#[derive(Serialize, Deserialize)]
struct OutLayer {
    #[serde(rename = "W")]
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u64,
    dims: Dims,
    norm: NormStats,
    encoder: BTreeMap<String, Vec<f64>>,
    decoder: BTreeMap<String, Vec<f64>>,
    out: OutLayer,
}

fn cell_to_blocks(cell: &LstmCellParams) -> BTreeMap<String, Vec<f64>> {
    let mut m = BTreeMap::new();
    for (g, name) in GATE_NAMES.iter().enumerate() {
        m.insert(format!("W_{name}"), cell.w_block(g).to_vec());
        m.insert(format!("U_{name}"), cell.u_block(g).to_vec());
        m.insert(format!("b_{name}"), cell.b_block(g).to_vec());
    }
    m
}

fn cell_from_blocks(
    which: &str,
    blocks: &BTreeMap<String, Vec<f64>>,
    input: usize,
    hidden: usize,
) -> Result<LstmCellParams, SurrogateError> {
    let mut cell = LstmCellParams::zeros(input, hidden);
    for (g, name) in GATE_NAMES.iter().enumerate() {
        for (prefix, dst, per_gate) in [
            ("W", &mut cell.w, hidden * input),
            ("U", &mut cell.u, hidden * hidden),
            ("b", &mut cell.b, hidden),
        ] {
            let key = format!("{prefix}_{name}");
            let src = blocks
                .get(&key)
                .ok_or_else(|| SurrogateError::ModelMalformed(format!("{which}.{key} missing")))?;
            if src.len() != per_gate {
                return Err(SurrogateError::ModelMalformed(format!(
                    "{which}.{key} has {} values, expected {per_gate}",
                    src.len()
                )));
            }
            dst[g * per_gate..(g + 1) * per_gate].copy_from_slice(src);
        }
    }
    if blocks.len() != 3 * GATES {
        return Err(SurrogateError::ModelMalformed(format!("{which} has unexpected blocks")));
    }
    Ok(cell)
}

pub fn save_model(model: &Seq2SeqModel) -> Result<String, SurrogateError> {
    model.validate()?;
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        dims: model.dims,
        norm: model.norm.clone(),
        encoder: cell_to_blocks(&model.params.encoder),
        decoder: cell_to_blocks(&model.params.decoder),
        out: OutLayer {
            w: model.params.out_w.clone(),
            b: model.params.out_b.clone(),
        },
    };
    serde_json::to_string_pretty(&file).map_err(|e| SurrogateError::ModelMalformed(e.to_string()))
}

pub fn load_model(text: &str) -> Result<Seq2SeqModel, SurrogateError> {
    let malformed = |e: serde_json::Error| SurrogateError::ModelMalformed(e.to_string());
    let raw: serde_json::Value = serde_json::from_str(text).map_err(malformed)?;
    match raw.get("format").and_then(|v| v.as_str()) {
        Some(MODEL_FORMAT) => {}
        other => return Err(SurrogateError::ModelMalformed(format!("format {other:?}"))),
    }
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(MODEL_VERSION) => {}
        _ => {
            return Err(SurrogateError::ModelMalformed(format!(
                "unsupported version {}",
                raw.get("version").map_or("(missing)".to_string(), |v| v.to_string())
            )))
        }
    }
    let file: ModelFile = serde_json::from_value(raw).map_err(malformed)?;
    let d = file.dims;
    let params = Seq2SeqParams {
        encoder: cell_from_blocks("encoder", &file.encoder, d.enc_features, d.hidden)?,
        decoder: cell_from_blocks("decoder", &file.decoder, d.dec_features, d.hidden)?,
        out_w: file.out.w,
        out_b: file.out.b,
    };
    Seq2SeqModel::new(d, params, file.norm).map_err(|e| SurrogateError::ModelMalformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::SignalStats;

    fn random_model() -> Seq2SeqModel {
        let d = Dims {
            enc_features: 3,
            dec_features: 3,
            hidden: 4,
            enc_len: 6,
            dec_len: 2,
        };
        let s = |t: &str, m: f64| SignalStats {
            tag: t.into(),
            mean: m,
            std: 0.1 + m.abs(),
        };
        Seq2SeqModel::new(
            d,
            Seq2SeqParams::init(&d, 77),
            NormStats {
                features: vec![s("a", 1.0 / 3.0), s("b", -2.5e-7), s("c", 1e20)],
                label: s("y", 45.123456789),
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = random_model();
        let text = save_model(&m).unwrap();
        assert_eq!(load_model(&text).unwrap(), m);
        assert!(text.contains("\"format\": \"hytwin-lstm\""));
        assert!(text.contains("\"W_g\""));
    }

    #[test]
    fn gate_blocks_are_row_major_slices() {
        let m = random_model();
        let v: serde_json::Value = serde_json::from_str(&save_model(&m).unwrap()).unwrap();
        let wf: Vec<f64> = serde_json::from_value(v["encoder"]["W_f"].clone()).unwrap();
        assert_eq!(wf.len(), 12);
        // Row 2, column 1 of W_f.
        assert_eq!(wf[2 * 3 + 1], m.params.encoder.w[(4 + 2) * 3 + 1]);
    }

    #[test]
    fn truncated_and_bad_versions_rejected() {
        let text = save_model(&random_model()).unwrap();
        let e = load_model(&text[..text.len() / 2]).unwrap_err();
        assert_eq!(e.code(), "MODEL_MALFORMED");

        let v2 = text.replacen("\"version\": 1", "\"version\": 2", 1);
        let e = load_model(&v2).unwrap_err();
        assert_eq!(e.code(), "MODEL_MALFORMED");
        assert!(e.to_string().contains("version 2"));

        let bad_format = text.replacen("hytwin-lstm", "other", 1);
        assert_eq!(load_model(&bad_format).unwrap_err().code(), "MODEL_MALFORMED");
    }

    #[test]
    fn shape_errors_rejected() {
        let m = random_model();
        let mut v: serde_json::Value = serde_json::from_str(&save_model(&m).unwrap()).unwrap();
        v["decoder"]["U_o"].as_array_mut().unwrap().pop();
        let e = load_model(&v.to_string()).unwrap_err();
        assert_eq!(e.code(), "MODEL_MALFORMED");
        assert!(e.to_string().contains("U_o"));

        let mut v: serde_json::Value = serde_json::from_str(&save_model(&m).unwrap()).unwrap();
        v["dims"]["hidden"] = 5.into();
        assert_eq!(load_model(&v.to_string()).unwrap_err().code(), "MODEL_MALFORMED");

        let mut v: serde_json::Value = serde_json::from_str(&save_model(&m).unwrap()).unwrap();
        v["norm"]["label"]["std"] = 0.0.into();
        assert_eq!(load_model(&v.to_string()).unwrap_err().code(), "MODEL_MALFORMED");
    }
}
