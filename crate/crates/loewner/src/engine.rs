//! Integration of `dw/dt = G(w, t)` for evolution-family values
//! `phi_{s,t}(z)`, optionally jointly with the variational equation
//! `dv/dt = G_z(w, t) v` for the spatial derivative `phi'_{s,t}(z)`.
//!
//! The stepper is a Dormand-Prince 5(4) embedded pair with PI step-size
//! control. Integration is split at every declared driver breakpoint so
//! piecewise data keeps full order.

use crate::driver::{DriverError, HerglotzDriver};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Copy)]
pub struct EvolutionConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub boundary_guard: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            boundary_guard: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// `phi_{s,t}(z)`.
    pub w: Complex64,
    /// `phi'_{s,t}(z)` when requested.
    pub v: Option<Complex64>,
    pub steps: usize,
    pub max_abs_w: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("trajectory reached |w| = {modulus} at t = {t}; driver may violate the Herglotz conditions")]
    BoundaryEscape { t: f64, modulus: f64 },
    #[error("adaptive step underflow (h = {h:e}) at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error(transparent)]
    Driver(#[from] DriverError),
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// 5th-order minus embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MIN_STEP: f64 = 1e-14;

struct Dopri5<'a, const N: usize, F> {
    f: F,
    cfg: &'a EvolutionConfig,
    steps: usize,
    max_abs_w: f64,
}

impl<'a, const N: usize, F> Dopri5<'a, N, F>
where
    F: FnMut(f64, &[Complex64; N]) -> Result<[Complex64; N], EngineError>,
{
    fn new(f: F, cfg: &'a EvolutionConfig) -> Self {
        Self {
            f,
            cfg,
            steps: 0,
            max_abs_w: 0.0,
        }
    }

    /// Integrate `y` from `t0` to `t1` in place.
    fn integrate(
        &mut self,
        y: &mut [Complex64; N],
        t0: f64,
        t1: f64,
    ) -> Result<(), EngineError> {
        if t1 <= t0 {
            return Ok(());
        }
        let mut t = t0;
        let mut k1 = (self.f)(t, y)?;
        let fnorm = k1.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut h = self
            .cfg
            .max_step
            .min(t1 - t0)
            .min(1e-2 / (1.0 + fnorm))
            .max(MIN_STEP);
        let mut facold: f64 = 1e-4;
        const SAFE: f64 = 0.9;
        const BETA: f64 = 0.04;
        const EXPO1: f64 = 0.2 - BETA * 0.75;

        loop {
            if t >= t1 {
                break;
            }
            if h < MIN_STEP {
                return Err(EngineError::StepUnderflow { t, h });
            }
            let h_cur = h.min(t1 - t);
            let last = h_cur >= t1 - t;

            let mut ks: [[Complex64; N]; 7] = [[Complex64::new(0.0, 0.0); N]; 7];
            ks[0] = k1;
            let stages: [(&[f64], f64); 6] = [
                (&A2, C[0]),
                (&A3, C[1]),
                (&A4, C[2]),
                (&A5, C[3]),
                (&A6, C[4]),
                (&A7, C[5]),
            ];
            for (i, (row, c)) in stages.iter().enumerate() {
                let mut yi = *y;
                for (j, &a) in row.iter().enumerate() {
                    for n in 0..N {
                        yi[n] += h_cur * a * ks[j][n];
                    }
                }
                ks[i + 1] = (self.f)(t + c * h_cur, &yi)?;
            }

            // 5th-order solution (A7 row doubles as the b weights, FSAL).
            let mut y_new = *y;
            for (j, &b) in A7.iter().enumerate() {
                for n in 0..N {
                    y_new[n] += h_cur * b * ks[j][n];
                }
            }

            let mut err_sq = 0.0;
            for n in 0..N {
                let mut e = Complex64::new(0.0, 0.0);
                for (j, &w) in E.iter().enumerate() {
                    e += w * ks[j][n];
                }
                e *= h_cur;
                let sc =
                    self.cfg.abs_tol + self.cfg.rel_tol * y[n].norm().max(y_new[n].norm());
                err_sq += (e.norm() / sc).powi(2);
            }
            let err = (err_sq / N as f64).sqrt();

            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                // Accept.
                t = if last { t1 } else { t + h_cur };
                *y = y_new;
                k1 = ks[6];
                self.steps += 1;
                let m = y[0].norm();
                self.max_abs_w = self.max_abs_w.max(m);
                if m >= 1.0 - self.cfg.boundary_guard {
                    return Err(EngineError::BoundaryEscape { t, modulus: m });
                }
                let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(0.2, 10.0);
                h = (h_cur / fac).min(self.cfg.max_step);
                facold = err.max(1e-4);
            } else {
                // Reject and shrink.
                h = h_cur / (fac11 / SAFE).min(5.0);
            }
        }
        Ok(())
    }
}

fn check_start(z: Complex64, s: f64, t: f64, cfg: &EvolutionConfig) -> Result<(), EngineError> {
    if !(s >= 0.0 && t >= s) {
        return Err(EngineError::InvalidInput(format!(
            "need 0 <= s <= t, got s = {s}, t = {t}"
        )));
    }
    if z.norm() >= 1.0 - cfg.boundary_guard {
        return Err(EngineError::InvalidInput(format!(
            "starting point {z} too close to the unit circle"
        )));
    }
    Ok(())
}

/// The largest float strictly below a positive `x`.
fn before(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

fn segments(d: &HerglotzDriver, s: f64, t: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![s];
    cuts.extend(d.breakpoints_in(s, t));
    cuts.push(t);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// `phi_{s,t}(z)`.
pub fn evolve_point(
    d: &HerglotzDriver,
    z: Complex64,
    s: f64,
    t: f64,
    cfg: &EvolutionConfig,
) -> Result<EvolutionResult, EngineError> {
    check_start(z, s, t, cfg)?;
    if s == t {
        return Ok(EvolutionResult {
            w: z,
            v: None,
            steps: 0,
            max_abs_w: z.norm(),
        });
    }
    // Stage times are clamped just below the current segment end so a
    // stage landing exactly on a breakpoint samples the field on the side
    // being integrated (piecewise data is right-open at its knots).
    let seg_end = std::cell::Cell::new(t);
    let f = |tau: f64, y: &[Complex64; 1]| -> Result<[Complex64; 1], EngineError> {
        Ok([d.vector_field(y[0], tau.min(seg_end.get()))?])
    };
    let mut solver = Dopri5::new(f, cfg);
    let mut y = [z];
    for (a, b) in segments(d, s, t) {
        seg_end.set(before(b));
        solver.integrate(&mut y, a, b)?;
    }
    Ok(EvolutionResult {
        w: y[0],
        v: None,
        steps: solver.steps,
        max_abs_w: solver.max_abs_w.max(z.norm()),
    })
}

/// `phi_{s,t}(z)` together with `phi'_{s,t}(z)` from the variational
/// equation, integrated jointly so both share step control.
pub fn evolve_with_derivative(
    d: &HerglotzDriver,
    z: Complex64,
    s: f64,
    t: f64,
    cfg: &EvolutionConfig,
) -> Result<EvolutionResult, EngineError> {
    check_start(z, s, t, cfg)?;
    if s == t {
        return Ok(EvolutionResult {
            w: z,
            v: Some(Complex64::new(1.0, 0.0)),
            steps: 0,
            max_abs_w: z.norm(),
        });
    }
    let seg_end = std::cell::Cell::new(t);
    let f = |tau: f64, y: &[Complex64; 2]| -> Result<[Complex64; 2], EngineError> {
        let te = tau.min(seg_end.get());
        Ok([
            d.vector_field(y[0], te)?,
            d.vector_field_dz(y[0], te)? * y[1],
        ])
    };
    let mut solver = Dopri5::new(f, cfg);
    let mut y = [z, Complex64::new(1.0, 0.0)];
    for (a, b) in segments(d, s, t) {
        seg_end.set(before(b));
        solver.integrate(&mut y, a, b)?;
    }
    Ok(EvolutionResult {
        w: y[0],
        v: Some(y[1]),
        steps: solver.steps,
        max_abs_w: solver.max_abs_w.max(z.norm()),
    })
}

/// Element-wise evolution of a batch; per-point failures do not abort the
/// batch.
pub fn evolve_grid(
    d: &HerglotzDriver,
    points: &[Complex64],
    s: f64,
    t: f64,
    cfg: &EvolutionConfig,
    with_derivative: bool,
) -> Vec<Result<EvolutionResult, EngineError>> {
    points
        .iter()
        .map(|&z| {
            if with_derivative {
                evolve_with_derivative(d, z, s, t, cfg)
            } else {
                evolve_point(d, z, s, t, cfg)
            }
        })
        .collect()
}

/// `n >= 2` uniform samples of `tau -> phi_{s,tau}(z)` on `[s, t]`.
pub fn trajectory(
    d: &HerglotzDriver,
    z: Complex64,
    s: f64,
    t: f64,
    n: usize,
    cfg: &EvolutionConfig,
) -> Result<Vec<(f64, Complex64)>, EngineError> {
    if n < 2 {
        return Err(EngineError::InvalidInput(format!(
            "trajectory needs n >= 2 samples, got {n}"
        )));
    }
    check_start(z, s, t, cfg)?;
    let mut out = Vec::with_capacity(n);
    out.push((s, z));
    let mut w = z;
    for k in 1..n {
        let t_prev = s + (k - 1) as f64 * (t - s) / (n - 1) as f64;
        let t_k = s + k as f64 * (t - s) / (n - 1) as f64;
        w = evolve_point(d, w, t_prev, t_k, cfg)?.w;
        out.push((t_k, w));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::RealPath;
    use crate::geometry::pseudo_hyperbolic;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const ONE: Complex64 = Complex64::new(1.0, 0.0);
    const ZERO: Complex64 = Complex64::new(0.0, 0.0);

    #[test]
    fn linear_flow_closed_form() {
        let d = HerglotzDriver::constant(ONE, ZERO).unwrap();
        let cfg = EvolutionConfig::default();
        let r = evolve_point(&d, c(0.5, 0.0), 0.0, 1.0, &cfg).unwrap();
        let expect = 0.5 * (-1.0f64).exp();
        assert!((r.w - c(expect, 0.0)).norm() < 1e-10, "got {}", r.w);
    }

    #[test]
    fn identity_at_equal_times() {
        let d = HerglotzDriver::radial(RealPath::Constant(0.0));
        let cfg = EvolutionConfig::default();
        let r = evolve_point(&d, c(0.0, 0.2), 0.7, 0.7, &cfg).unwrap();
        assert_eq!(r.w, c(0.0, 0.2));
        let rd = evolve_with_derivative(&d, c(0.0, 0.2), 0.7, 0.7, &cfg).unwrap();
        assert_eq!(rd.v, Some(ONE));
    }

    #[test]
    fn radial_slit_implicit_relation() {
        // Separation of variables: w / (1+w)^2 = e^{-(t-s)} z / (1+z)^2.
        let d = HerglotzDriver::radial(RealPath::Constant(0.0));
        let cfg = EvolutionConfig::default();
        let z = c(0.3, 0.0);
        let w = evolve_point(&d, z, 0.0, 0.5, &cfg).unwrap().w;
        let lhs = w / ((ONE + w) * (ONE + w));
        let rhs = (-0.5f64).exp() * z / ((ONE + z) * (ONE + z));
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn derivative_of_linear_flow_is_constant() {
        let d = HerglotzDriver::constant(ONE, ZERO).unwrap();
        let cfg = EvolutionConfig::default();
        let r = evolve_with_derivative(&d, c(0.3, 0.4), 0.0, 1.0, &cfg).unwrap();
        let expect = (-1.0f64).exp();
        assert!((r.v.unwrap() - c(expect, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn derivative_of_parabolic_family() {
        // phi_t(z) = 1 - (1-z)/(1 + t(1-z)); phi'_t(0) = 1/(1+t)^2.
        let d = HerglotzDriver::constant(ONE, ONE).unwrap();
        let cfg = EvolutionConfig::default();
        let r = evolve_with_derivative(&d, ZERO, 0.0, 2.0, &cfg).unwrap();
        assert!((r.w - c(2.0 / 3.0, 0.0)).norm() < 1e-10);
        assert!((r.v.unwrap() - c(1.0 / 9.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let d = HerglotzDriver::radial(RealPath::Constant(0.0));
        let cfg = EvolutionConfig::default();
        let z = c(0.2, 0.3);
        let h = 1e-5;
        let v = evolve_with_derivative(&d, z, 0.0, 1.0, &cfg).unwrap().v.unwrap();
        let wp = evolve_point(&d, z + c(h, 0.0), 0.0, 1.0, &cfg).unwrap().w;
        let wm = evolve_point(&d, z - c(h, 0.0), 0.0, 1.0, &cfg).unwrap().w;
        let fd = (wp - wm) / c(2.0 * h, 0.0);
        assert!((v - fd).norm() < 1e-6);
    }

    #[test]
    fn grid_and_trajectory() {
        let d = HerglotzDriver::constant(ONE, ZERO).unwrap();
        let cfg = EvolutionConfig::default();
        let pts = [c(0.1, 0.0), c(0.0, 0.2), c(-0.3, 0.1)];
        let out = evolve_grid(&d, &pts, 0.0, 1.0, &cfg, false);
        let e1 = (-1.0f64).exp();
        for (r, &z) in out.iter().zip(&pts) {
            let w = r.as_ref().unwrap().w;
            assert!((w - z * c(e1, 0.0)).norm() < 1e-10);
        }
        assert!(evolve_grid(&d, &[], 0.0, 1.0, &cfg, false).is_empty());

        let traj = trajectory(&d, c(0.5, 0.0), 0.0, 1.0, 3, &cfg).unwrap();
        assert_eq!(traj[0], (0.0, c(0.5, 0.0)));
        assert!((traj[1].1.norm() - 0.5 * (-0.5f64).exp()).abs() < 1e-10);
        assert!((traj[2].1.norm() - 0.5 * e1).abs() < 1e-10);
    }

    #[test]
    fn composition_property() {
        let d = HerglotzDriver::radial(RealPath::Constant(0.3));
        let cfg = EvolutionConfig::default();
        let z = c(0.4, -0.2);
        let (s, u, t) = (0.2, 0.9, 1.7);
        let direct = evolve_point(&d, z, s, t, &cfg).unwrap().w;
        let mid = evolve_point(&d, z, s, u, &cfg).unwrap().w;
        let composed = evolve_point(&d, mid, u, t, &cfg).unwrap().w;
        assert!((direct - composed).norm() < 1e-9);
    }

    #[test]
    fn schwarz_pick_contraction() {
        let d = HerglotzDriver::radial(RealPath::Constant(0.0));
        let cfg = EvolutionConfig::default();
        let z = c(0.4, 0.1);
        let w = c(-0.2, 0.5);
        let fz = evolve_point(&d, z, 0.0, 1.3, &cfg).unwrap().w;
        let fw = evolve_point(&d, w, 0.0, 1.3, &cfg).unwrap().w;
        assert!(pseudo_hyperbolic(fz, fw) <= pseudo_hyperbolic(z, w) + 1e-9);
    }

    #[test]
    fn rejects_boundary_start() {
        let d = HerglotzDriver::constant(ONE, ZERO).unwrap();
        let cfg = EvolutionConfig::default();
        assert!(matches!(
            evolve_point(&d, c(1.0 - 1e-12, 0.0), 0.0, 1.0, &cfg),
            Err(EngineError::InvalidInput(_))
        ));
        assert!(matches!(
            evolve_point(&d, c(0.1, 0.0), 1.0, 0.5, &cfg),
            Err(EngineError::InvalidInput(_))
        ));
    }
}
