//! Single LSTM cell with gates stacked in the order input, forget, output,
//! candidate.

use serde::{Deserialize, Serialize};

use super::SurrogateError;

pub(crate) const GATES: usize = 4;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate weights for one cell. `w` is `4H x F`, `u` is `4H x H`, `b` is `4H`,
/// all row-major with gate blocks stacked as i, f, o, g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub input: usize,
    pub hidden: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct CellTrace {
    /// Post-activation gates, `[i | f | o | g]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w: vec![0.0; GATES * hidden * input],
            u: vec![0.0; GATES * hidden * hidden],
            b: vec![0.0; GATES * hidden],
        }
    }

    pub fn check(&self) -> Result<(), SurrogateError> {
        let (f, h) = (self.input, self.hidden);
        if self.w.len() != GATES * h * f || self.u.len() != GATES * h * h || self.b.len() != GATES * h {
            return Err(SurrogateError::ShapeMismatch(format!(
                "cell F={f} H={h} has W {}, U {}, b {}",
                self.w.len(),
                self.u.len(),
                self.b.len()
            )));
        }
        Ok(())
    }

    /// Rows of gate `gate` (0..4) in `w`.
    pub fn w_block(&self, gate: usize) -> &[f64] {
        let n = self.hidden * self.input;
        &self.w[gate * n..(gate + 1) * n]
    }

    pub fn u_block(&self, gate: usize) -> &[f64] {
        let n = self.hidden * self.hidden;
        &self.u[gate * n..(gate + 1) * n]
    }

    pub fn b_block(&self, gate: usize) -> &[f64] {
        &self.b[gate * self.hidden..(gate + 1) * self.hidden]
    }

    /// Forward step without shape checks; `out` receives the trace.
    pub(crate) fn step_into(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64], out: &mut CellTrace) {
        let (f, h) = (self.input, self.hidden);
        out.gates.clear();
        out.gates.extend_from_slice(&self.b);
        for (r, z) in out.gates.iter_mut().enumerate() {
            let wr = &self.w[r * f..(r + 1) * f];
            let ur = &self.u[r * h..(r + 1) * h];
            *z += dot(wr, x) + dot(ur, h_prev);
        }
        let (ifo, g) = out.gates.split_at_mut(3 * h);
        for z in ifo.iter_mut() {
            *z = sigmoid(*z);
        }
        for z in g.iter_mut() {
            *z = z.tanh();
        }
        out.c.clear();
        out.tanh_c.clear();
        out.h.clear();
        for j in 0..h {
            let (i, fg, o, gg) = (out.gates[j], out.gates[h + j], out.gates[2 * h + j], out.gates[3 * h + j]);
            let c = fg * c_prev[j] + i * gg;
            let tc = c.tanh();
            out.c.push(c);
            out.tanh_c.push(tc);
            out.h.push(o * tc);
        }
    }

    /// `(h, c)` after one step from `(h_prev, c_prev)` with input `x`.
    pub fn forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SurrogateError> {
        self.check()?;
        if x.len() != self.input || h_prev.len() != self.hidden || c_prev.len() != self.hidden {
            return Err(SurrogateError::ShapeMismatch(format!(
                "step inputs x={}, h={}, c={} for F={}, H={}",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                self.input,
                self.hidden
            )));
        }
        let mut trace = CellTrace::default();
        self.step_into(x, h_prev, c_prev, &mut trace);
        Ok((trace.h, trace.c))
    }

    /// Backward through one step. `dh`/`dc` are the loss gradients w.r.t. this
    /// step's `h` and `c`; on return they hold the gradients w.r.t. `h_prev`
    /// and `c_prev`. Parameter gradients accumulate into `grad`.
    pub(crate) fn backward_step(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        trace: &CellTrace,
        dh: &mut [f64],
        dc: &mut [f64],
        dz: &mut [f64],
        grad: &mut LstmCellParams,
    ) {
        let (f, h) = (self.input, self.hidden);
        let g = &trace.gates;
        for j in 0..h {
            let (i, fg, o, gg) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = trace.tanh_c[j];
            let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz[j] = dct * gg * i * (1.0 - i);
            dz[h + j] = dct * c_prev[j] * fg * (1.0 - fg);
            dz[2 * h + j] = dh[j] * tc * o * (1.0 - o);
            dz[3 * h + j] = dct * i * (1.0 - gg * gg);
            dc[j] = dct * fg;
        }
        dh.iter_mut().for_each(|v| *v = 0.0);
        for (r, &d) in dz.iter().enumerate() {
            grad.b[r] += d;
            axpy(d, x, &mut grad.w[r * f..(r + 1) * f]);
            axpy(d, h_prev, &mut grad.u[r * h..(r + 1) * h]);
            axpy(d, &self.u[r * h..(r + 1) * h], dh);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dead_cell_is_half_open() {
        let p = LstmCellParams::zeros(3, 2);
        let mut t = CellTrace::default();
        p.step_into(&[1.0, -2.0, 3.0], &[0.0; 2], &[0.0; 2], &mut t);
        assert_eq!(&t.gates[..6], &[0.5; 6]);
        assert_eq!(&t.gates[6..], &[0.0; 2]);
        assert_eq!(t.c, vec![0.0; 2]);
        assert_eq!(t.h, vec![0.0; 2]);
    }

    #[test]
    fn saturated_gates_by_hand() {
        let mut p = LstmCellParams::zeros(2, 1);
        p.b = vec![100.0, 100.0, 100.0, 1.0];
        let (h, c) = p.forward(&[0.3, -0.1], &[0.0], &[0.0]).unwrap();
        assert!((c[0] - 0.761594).abs() < 1e-6);
        assert!((h[0] - 0.642015).abs() < 1e-6);
    }

    #[test]
    fn scalar_cell_matches_scalar_arithmetic() {
        let mut p = LstmCellParams::zeros(1, 1);
        p.w = vec![0.5; 4];
        p.u = vec![0.5; 4];
        p.b = vec![0.5; 4];
        let (h, c) = p.forward(&[1.0], &[0.0], &[0.0]).unwrap();
        // Every pre-activation is 0.5 * 1 + 0.5 * 0 + 0.5 = 1.
        let s = 1.0 / (1.0 + (-1.0f64).exp());
        let c_ref = s * 1.0f64.tanh();
        assert!((c[0] - c_ref).abs() < 1e-15);
        assert!((h[0] - s * c_ref.tanh()).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let p = LstmCellParams::zeros(2, 3);
        assert!(p.forward(&[1.0], &[0.0; 3], &[0.0; 3]).is_err());
        let mut bad = p.clone();
        bad.b.pop();
        assert_eq!(bad.forward(&[1.0, 2.0], &[0.0; 3], &[0.0; 3]).unwrap_err().code(), "SHAPE_MISMATCH");
    }
}
