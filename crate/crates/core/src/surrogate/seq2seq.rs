//! Encoder/decoder LSTM with a linear read-out, its loss and its gradients.

use serde::{Deserialize, Serialize};

use super::lstm::{dot, CellTrace, LstmCellParams};
use super::norm::NormStats;
use super::{SurrogateError, SurrogateSpec};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub enc_features: usize,
    pub dec_features: usize,
    pub hidden: usize,
    pub enc_len: usize,
    pub dec_len: usize,
}

/// Trainable parameters. Gradients and optimizer accumulators share the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqParams {
    pub encoder: LstmCellParams,
    pub decoder: LstmCellParams,
    /// `1 x H` read-out weights.
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

impl Seq2SeqParams {
    pub fn zeros(dims: &Dims) -> Self {
        Self {
            encoder: LstmCellParams::zeros(dims.enc_features, dims.hidden),
            decoder: LstmCellParams::zeros(dims.dec_features, dims.hidden),
            out_w: vec![0.0; dims.hidden],
            out_b: vec![0.0],
        }
    }

    /// Uniform in `±1/sqrt(H)`, forget-gate biases shifted by +1. Draw order:
    /// encoder W, U, b, decoder W, U, b, read-out W, b.
    pub fn init(dims: &Dims, seed: u64) -> Self {
        let mut p = Self::zeros(dims);
        let k = 1.0 / (dims.hidden as f64).sqrt();
        let mut rng = SplitMix64::new(seed);
        for s in p.slices_mut() {
            for v in s.iter_mut() {
                *v = rng.uniform(-k, k);
            }
        }
        let h = dims.hidden;
        for cell in [&mut p.encoder, &mut p.decoder] {
            for v in &mut cell.b[h..2 * h] {
                *v += 1.0;
            }
        }
        p
    }

    pub fn slices(&self) -> [&[f64]; 8] {
        [
            &self.encoder.w,
            &self.encoder.u,
            &self.encoder.b,
            &self.decoder.w,
            &self.decoder.u,
            &self.decoder.b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.encoder.w,
            &mut self.encoder.u,
            &mut self.encoder.b,
            &mut self.decoder.w,
            &mut self.decoder.u,
            &mut self.decoder.b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill(&mut self, v: f64) {
        for s in self.slices_mut() {
            s.fill(v);
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= alpha);
        }
    }

    pub fn norm(&self) -> f64 {
        self.slices().iter().flat_map(|s| s.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.slices().iter().zip(other.slices()).all(|(a, b)| a.len() == b.len())
    }

    pub fn check(&self, dims: &Dims) -> Result<(), SurrogateError> {
        self.encoder.check()?;
        self.decoder.check()?;
        let ok = self.encoder.input == dims.enc_features
            && self.decoder.input == dims.dec_features
            && self.encoder.hidden == dims.hidden
            && self.decoder.hidden == dims.hidden
            && self.out_w.len() == dims.hidden
            && self.out_b.len() == 1;
        if !ok {
            return Err(SurrogateError::ShapeMismatch(format!("parameters do not match {dims:?}")));
        }
        Ok(())
    }
}

/// One training or inference example, values already normalized. Matrices are
/// row-major with one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub enc: Vec<f64>,
    pub dec: Vec<f64>,
    pub labels: Vec<f64>,
}

/// Activations from [`Seq2SeqModel::forward`] needed by [`Seq2SeqModel::backward`].
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    enc: Vec<CellTrace>,
    dec: Vec<CellTrace>,
    pub predictions: Vec<f64>,
}

/// Mean squared error over a horizon.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64, SurrogateError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(SurrogateError::ShapeMismatch(format!(
            "prediction length {} vs target length {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub dims: Dims,
    pub params: Seq2SeqParams,
    pub norm: NormStats,
}

impl Seq2SeqModel {
    pub fn new(dims: Dims, params: Seq2SeqParams, norm: NormStats) -> Result<Self, SurrogateError> {
        let m = Self { dims, params, norm };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        self.params.check(&self.dims)?;
        if self.dims.enc_features != self.dims.dec_features || self.norm.features.len() != self.dims.enc_features {
            return Err(SurrogateError::ShapeMismatch(format!(
                "{} normalized features for F_enc={}, F_dec={}",
                self.norm.features.len(),
                self.dims.enc_features,
                self.dims.dec_features
            )));
        }
        if self.dims.enc_len == 0 || self.dims.dec_len == 0 || self.dims.hidden == 0 {
            return Err(SurrogateError::ShapeMismatch(format!("degenerate dims {:?}", self.dims)));
        }
        if !self.params.is_finite() {
            return Err(SurrogateError::ShapeMismatch("non-finite parameter".into()));
        }
        self.norm.validate()
    }

    pub fn spec(&self) -> SurrogateSpec {
        SurrogateSpec {
            features: self.norm.features.iter().map(|s| s.tag.clone()).collect(),
            label: self.norm.label.tag.clone(),
            enc_len: self.dims.enc_len,
            dec_len: self.dims.dec_len,
        }
    }

    fn check_window(&self, enc: &[f64], dec: &[f64]) -> Result<(), SurrogateError> {
        let d = &self.dims;
        if enc.len() != d.enc_len * d.enc_features || dec.len() != d.dec_len * d.dec_features {
            return Err(SurrogateError::ShapeMismatch(format!(
                "window enc {} / dec {} values, model expects {}x{} / {}x{}",
                enc.len(),
                dec.len(),
                d.enc_len,
                d.enc_features,
                d.dec_len,
                d.dec_features
            )));
        }
        Ok(())
    }

    /// Normalized predictions for one window plus the activations for BPTT.
    pub fn forward(&self, enc: &[f64], dec: &[f64]) -> Result<ForwardCache, SurrogateError> {
        self.check_window(enc, dec)?;
        let mut cache = ForwardCache::default();
        self.forward_into(enc, dec, &mut cache);
        Ok(cache)
    }

    pub(crate) fn forward_into(&self, enc: &[f64], dec: &[f64], cache: &mut ForwardCache) {
        let d = &self.dims;
        let p = &self.params;
        let zeros = vec![0.0; d.hidden];
        cache.enc.resize_with(d.enc_len, CellTrace::default);
        cache.dec.resize_with(d.dec_len, CellTrace::default);
        cache.predictions.clear();
        for t in 0..d.enc_len {
            let x = &enc[t * d.enc_features..(t + 1) * d.enc_features];
            let (done, rest) = cache.enc.split_at_mut(t);
            let (h, c) = done.last().map_or((&zeros, &zeros), |tr| (&tr.h, &tr.c));
            p.encoder.step_into(x, h, c, &mut rest[0]);
        }
        for t in 0..d.dec_len {
            let x = &dec[t * d.dec_features..(t + 1) * d.dec_features];
            let (done, rest) = cache.dec.split_at_mut(t);
            let prev = done.last().or(cache.enc.last());
            let (h, c) = prev.map_or((&zeros, &zeros), |tr| (&tr.h, &tr.c));
            p.decoder.step_into(x, h, c, &mut rest[0]);
            cache.predictions.push(dot(&p.out_w, &rest[0].h) + p.out_b[0]);
        }
    }

    /// Normalized predictions only.
    pub fn predict(&self, enc: &[f64], dec: &[f64]) -> Result<Vec<f64>, SurrogateError> {
        Ok(self.forward(enc, dec)?.predictions)
    }

    /// Exact gradient of the window MSE w.r.t. every parameter, accumulated
    /// into `grad`. Returns the loss.
    pub fn backward(
        &self,
        enc: &[f64],
        dec: &[f64],
        labels: &[f64],
        cache: &ForwardCache,
        grad: &mut Seq2SeqParams,
    ) -> Result<f64, SurrogateError> {
        self.check_window(enc, dec)?;
        if labels.len() != self.dims.dec_len || cache.predictions.len() != self.dims.dec_len {
            return Err(SurrogateError::ShapeMismatch("labels or cache do not match the decoder length".into()));
        }
        if !grad.same_shape(&self.params) {
            return Err(SurrogateError::ShapeMismatch("gradient buffer shape".into()));
        }
        Ok(self.backward_unchecked(enc, dec, labels, cache, grad))
    }

    pub(crate) fn backward_unchecked(
        &self,
        enc: &[f64],
        dec: &[f64],
        labels: &[f64],
        cache: &ForwardCache,
        grad: &mut Seq2SeqParams,
    ) -> f64 {
        let d = &self.dims;
        let p = &self.params;
        let h = d.hidden;
        let zeros = vec![0.0; h];
        let mut dh = vec![0.0; h];
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let scale = 2.0 / d.dec_len as f64;
        let mut loss = 0.0;

        for t in (0..d.dec_len).rev() {
            let tr = &cache.dec[t];
            let err = cache.predictions[t] - labels[t];
            loss += err * err;
            let dy = scale * err;
            grad.out_b[0] += dy;
            for j in 0..h {
                grad.out_w[j] += dy * tr.h[j];
                dh[j] += dy * p.out_w[j];
            }
            let prev = if t > 0 { Some(&cache.dec[t - 1]) } else { cache.enc.last() };
            let (hp, cp) = prev.map_or((&zeros, &zeros), |tr| (&tr.h, &tr.c));
            let x = &dec[t * d.dec_features..(t + 1) * d.dec_features];
            p.decoder.backward_step(x, hp, cp, tr, &mut dh, &mut dc, &mut dz, &mut grad.decoder);
        }
        for t in (0..d.enc_len).rev() {
            let tr = &cache.enc[t];
            let prev = if t > 0 { Some(&cache.enc[t - 1]) } else { None };
            let (hp, cp) = prev.map_or((&zeros, &zeros), |tr| (&tr.h, &tr.c));
            let x = &enc[t * d.enc_features..(t + 1) * d.enc_features];
            p.encoder.backward_step(x, hp, cp, tr, &mut dh, &mut dc, &mut dz, &mut grad.encoder);
        }
        loss / d.dec_len as f64
    }

    /// Forward, loss and gradient for one window.
    pub fn loss_and_gradient(&self, window: &Window) -> Result<(f64, Seq2SeqParams), SurrogateError> {
        let cache = self.forward(&window.enc, &window.dec)?;
        let mut grad = Seq2SeqParams::zeros(&self.dims);
        let loss = self.backward(&window.enc, &window.dec, &window.labels, &cache, &mut grad)?;
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::norm::SignalStats;

    fn norm(f: usize) -> NormStats {
        NormStats {
            features: (0..f)
                .map(|i| SignalStats {
                    tag: format!("f{i}"),
                    mean: 0.0,
                    std: 1.0,
                })
                .collect(),
            label: SignalStats {
                tag: "y".into(),
                mean: 0.0,
                std: 1.0,
            },
        }
    }

    fn dims(f: usize, h: usize, te: usize, td: usize) -> Dims {
        Dims {
            enc_features: f,
            dec_features: f,
            hidden: h,
            enc_len: te,
            dec_len: td,
        }
    }

    #[test]
    fn dead_network_emits_output_bias() {
        let d = dims(2, 3, 4, 3);
        let mut m = Seq2SeqModel::new(d, Seq2SeqParams::zeros(&d), norm(2)).unwrap();
        let enc = vec![0.7; 8];
        let dec = vec![-1.3; 6];
        assert_eq!(m.predict(&enc, &dec).unwrap(), vec![0.0; 3]);
        m.params.out_b[0] = 0.7;
        assert_eq!(m.predict(&enc, &dec).unwrap(), vec![0.7; 3]);
    }

    #[test]
    fn scalar_model_matches_composed_cells() {
        let d = dims(1, 1, 2, 2);
        let mut p = Seq2SeqParams::zeros(&d);
        p.encoder.w = vec![0.5, -0.3, 0.2, 0.4];
        p.encoder.u = vec![0.1, 0.2, -0.2, 0.3];
        p.encoder.b = vec![0.0, 1.0, 0.1, -0.1];
        p.decoder.w = vec![-0.4, 0.3, 0.6, 0.2];
        p.decoder.u = vec![0.25, -0.5, 0.3, 0.7];
        p.decoder.b = vec![0.2, 0.9, 0.0, 0.05];
        p.out_w = vec![1.5];
        p.out_b = vec![-0.2];
        let m = Seq2SeqModel::new(d, p.clone(), norm(1)).unwrap();
        let enc = [0.3, -0.8];
        let dec = [1.1, 0.4];

        // Scalar oracle written out gate by gate.
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let cell = |w: &[f64], u: &[f64], b: &[f64], x: f64, h: f64, c: f64| {
            let i = sig(w[0] * x + u[0] * h + b[0]);
            let f = sig(w[1] * x + u[1] * h + b[1]);
            let o = sig(w[2] * x + u[2] * h + b[2]);
            let g = (w[3] * x + u[3] * h + b[3]).tanh();
            let c2 = f * c + i * g;
            (o * c2.tanh(), c2)
        };
        let (mut h, mut c) = (0.0, 0.0);
        for x in enc {
            (h, c) = cell(&p.encoder.w, &p.encoder.u, &p.encoder.b, x, h, c);
        }
        let mut expected = vec![];
        for x in dec {
            (h, c) = cell(&p.decoder.w, &p.decoder.u, &p.decoder.b, x, h, c);
            expected.push(1.5 * h - 0.2);
        }
        let got = m.predict(&enc, &dec).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(mse_loss(&[0.0, 0.0], &[6.0, 8.0]).unwrap(), 50.0);
        assert_eq!(mse_loss(&[0.0], &[1.0, 2.0]).unwrap_err().code(), "SHAPE_MISMATCH");
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let d = dims(2, 3, 3, 2);
        let m = Seq2SeqModel::new(d, Seq2SeqParams::init(&d, 9), norm(2)).unwrap();
        let enc = vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6];
        let dec = vec![0.9, -0.1, 0.3, 0.3];
        let labels = m.predict(&enc, &dec).unwrap();
        let w = Window { enc, dec, labels };
        let (loss, g) = m.loss_and_gradient(&w).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn output_bias_gradient_by_hand() {
        let d = dims(2, 3, 3, 3);
        let m = Seq2SeqModel::new(d, Seq2SeqParams::init(&d, 4), norm(2)).unwrap();
        let w = Window {
            enc: vec![0.3; 6],
            dec: vec![-0.2; 6],
            labels: vec![1.0, -1.0, 0.5],
        };
        let pred = m.predict(&w.enc, &w.dec).unwrap();
        let expected: f64 = 2.0 / 3.0 * pred.iter().zip(&w.labels).map(|(p, y)| p - y).sum::<f64>();
        let (_, g) = m.loss_and_gradient(&w).unwrap();
        assert!((g.out_b[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn gates_stay_in_range() {
        let d = dims(3, 4, 5, 3);
        let m = Seq2SeqModel::new(d, Seq2SeqParams::init(&d, 1), norm(3)).unwrap();
        let enc: Vec<f64> = (0..15).map(|i| (i as f64 - 7.0) * 0.5).collect();
        let dec: Vec<f64> = (0..9).map(|i| (i as f64) * -0.6).collect();
        let cache = m.forward(&enc, &dec).unwrap();
        for tr in cache.enc.iter().chain(&cache.dec) {
            let (ifo, g) = tr.gates.split_at(12);
            assert!(ifo.iter().all(|v| *v > 0.0 && *v < 1.0));
            assert!(g.iter().all(|v| *v > -1.0 && *v < 1.0));
        }
    }

    #[test]
    fn window_shape_checked() {
        let d = dims(2, 3, 3, 2);
        let m = Seq2SeqModel::new(d, Seq2SeqParams::zeros(&d), norm(2)).unwrap();
        assert_eq!(m.predict(&[0.0; 5], &[0.0; 4]).unwrap_err().code(), "SHAPE_MISMATCH");
    }

    fn random_window(d: &Dims, rng: &mut SplitMix64) -> Window {
        let mut v = |n: usize| (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect::<Vec<_>>();
        Window {
            enc: v(d.enc_len * d.enc_features),
            dec: v(d.dec_len * d.dec_features),
            labels: v(d.dec_len),
        }
    }

    #[test]
    fn bptt_matches_central_differences() {
        let mut rng = SplitMix64::new(2024);
        for case in 0..4 {
            let d = dims(1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(5), 1 + rng.below(3));
            let mut m = Seq2SeqModel::new(d, Seq2SeqParams::init(&d, rng.next_u64()), norm(d.enc_features)).unwrap();
            let w = random_window(&d, &mut rng);
            let (_, g) = m.loss_and_gradient(&w).unwrap();
            let loss = |m: &Seq2SeqModel| mse_loss(&m.predict(&w.enc, &w.dec).unwrap(), &w.labels).unwrap();
            let h = 1e-5;
            for (slot, gs) in g.slices().iter().enumerate() {
                for k in 0..gs.len() {
                    let orig = m.params.slices()[slot][k];
                    m.params.slices_mut()[slot][k] = orig + h;
                    let up = loss(&m);
                    m.params.slices_mut()[slot][k] = orig - h;
                    let down = loss(&m);
                    m.params.slices_mut()[slot][k] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let rel = (fd - gs[k]).abs() / fd.abs().max(gs[k].abs()).max(1e-6);
                    assert!(rel < 1e-4, "case {case} slot {slot} index {k}: bptt {} fd {fd}", gs[k]);
                }
            }
        }
    }
}
