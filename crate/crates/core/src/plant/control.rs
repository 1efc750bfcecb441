use super::PiLoopSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiOutput {
    pub command: f64,
    pub integral: f64,
}

/// One PI evaluation with conditional-integration anti-windup: the integral
/// only advances when the unclamped output lies inside the clamp range.
pub fn pi_update(spec: &PiLoopSpec, integral: f64, setpoint: f64, measurement: f64, dt: f64) -> PiOutput {
    let e = setpoint - measurement;
    let candidate = integral + e * dt;
    let raw = spec.kp * e + spec.ki * candidate;
    if raw >= spec.out_lo && raw <= spec.out_hi {
        PiOutput { command: raw, integral: candidate }
    } else {
        PiOutput {
            command: raw.clamp(spec.out_lo, spec.out_hi),
            integral,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kp: f64, ki: f64, lo: f64, hi: f64) -> PiLoopSpec {
        PiLoopSpec {
            name: "L".into(),
            measured: "x".into(),
            setpoint: "x".into(),
            actuated: "u".into(),
            kp,
            ki,
            out_lo: lo,
            out_hi: hi,
        }
    }

    #[test]
    fn zero_error_gives_clamped_zero() {
        let out = pi_update(&spec(1.0, 1.0, 0.2, 1.0), 0.0, 5.0, 5.0, 1.0);
        assert_eq!(out.command, 0.2);
        let out = pi_update(&spec(1.0, 1.0, -1.0, 1.0), 0.0, 5.0, 5.0, 1.0);
        assert_eq!(out.command, 0.0);
        assert_eq!(out.integral, 0.0);
    }

    #[test]
    fn hand_calculated_update() {
        let out = pi_update(&spec(2.0, 0.1, -10.0, 10.0), 0.0, 1.0, 0.0, 1.0);
        assert!((out.command - 2.1).abs() < 1e-15);
        assert_eq!(out.integral, 1.0);
    }

    #[test]
    fn saturation_freezes_integral() {
        let out = pi_update(&spec(100.0, 0.1, 0.0, 1.0), 3.5, 1.0, 0.0, 1.0);
        assert_eq!(out.command, 1.0);
        assert_eq!(out.integral, 3.5);
        let out = pi_update(&spec(100.0, 0.1, 0.0, 1.0), 3.5, 0.0, 1.0, 1.0);
        assert_eq!(out.command, 0.0);
        assert_eq!(out.integral, 3.5);
    }
}
