//! RMSprop.

use super::seq2seq::Seq2SeqParams;
use super::SurrogateError;

#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    /// Running mean of squared gradients, shaped like the parameters.
    pub v: Seq2SeqParams,
}

impl RmsProp {
    pub fn new(lr: f64, rho: f64, eps: f64, like: &Seq2SeqParams) -> Result<Self, SurrogateError> {
        if !(lr >= 0.0 && lr.is_finite() && (0.0..1.0).contains(&rho) && eps >= 0.0 && eps.is_finite()) {
            return Err(SurrogateError::InvalidConfig(format!("lr={lr} rho={rho} eps={eps}")));
        }
        let mut v = like.clone();
        v.fill(0.0);
        Ok(Self { lr, rho, eps, v })
    }

    pub fn step(&mut self, params: &mut Seq2SeqParams, grads: &Seq2SeqParams) -> Result<(), SurrogateError> {
        if !params.same_shape(grads) || !params.same_shape(&self.v) {
            return Err(SurrogateError::ShapeMismatch("optimizer, parameter and gradient shapes differ".into()));
        }
        for ((p, g), v) in params.slices_mut().into_iter().zip(grads.slices()).zip(self.v.slices_mut()) {
            rmsprop_update(p, g, v, self.lr, self.rho, self.eps);
        }
        Ok(())
    }
}

/// `v <- rho*v + (1-rho)*g^2; p <- p - lr*g/(sqrt(v)+eps)`, elementwise.
pub(crate) fn rmsprop_update(p: &mut [f64], g: &[f64], v: &mut [f64], lr: f64, rho: f64, eps: f64) {
    for ((p, g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
        *v = rho * *v + (1.0 - rho) * g * g;
        if *g != 0.0 {
            *p -= lr * g / (v.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let mut p = [1.0, 1.0];
        let mut v = [0.0, 0.0];
        rmsprop_update(&mut p, &[2.0, 2.0], &mut v, 0.01, 0.9, 0.0);
        assert!((v[0] - 0.4).abs() < 1e-15);
        assert!((p[0] - 1.0 + 0.0316228).abs() < 1e-7);
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn zero_gradient_decays_only() {
        let mut p = [3.0];
        let mut v = [0.5];
        rmsprop_update(&mut p, &[0.0], &mut v, 0.01, 0.9, 1e-7);
        assert_eq!(p[0], 3.0);
        assert!((v[0] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn shape_and_config_checked() {
        use crate::surrogate::Dims;
        let d = Dims {
            enc_features: 2,
            dec_features: 2,
            hidden: 3,
            enc_len: 2,
            dec_len: 1,
        };
        let mut p = Seq2SeqParams::zeros(&d);
        let mut opt = RmsProp::new(1e-3, 0.9, 1e-7, &p).unwrap();
        let other = Seq2SeqParams::zeros(&Dims { hidden: 2, ..d });
        assert_eq!(opt.step(&mut p, &other).unwrap_err().code(), "SHAPE_MISMATCH");
        assert_eq!(RmsProp::new(1e-3, 1.0, 1e-7, &p).unwrap_err().code(), "INVALID_CONFIG");
    }
}
