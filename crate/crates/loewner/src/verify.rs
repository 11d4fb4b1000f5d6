//! Numerical certification of the identities the construction must satisfy:
//! evolution-family axioms, the chain equation, the Loewner-Kufarev PDE,
//! monotonicity of the beta invariant, the growth bound, univalence via the
//! argument principle, and a contour-integral inversion oracle.
//!
//! Checks fold evaluation errors into failing reports with a witness, so a
//! batch of checks always produces a full set of reports.

use crate::chain::{classify, ChainError, ChainEvaluator, StandardChain, Verdict};
use crate::driver::HerglotzDriver;
use crate::engine::{evolve_point, EvolutionConfig};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("image curve passes within {distance:e} of a probe; winding number ambiguous")]
    WindingAmbiguous { distance: f64 },
    #[error("integrand pole within {distance:e} of the contour")]
    PoleNearContour { distance: f64 },
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Witness {
    pub s: f64,
    pub t: f64,
    pub z_re: f64,
    pub z_im: f64,
}

impl Witness {
    fn at(s: f64, t: f64, z: Complex64) -> Self {
        Self {
            s,
            t,
            z_re: z.re,
            z_im: z.im,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub max_residual: f64,
    pub threshold: f64,
    pub witness: Witness,
    /// Set when the check's hypothesis fails and nothing was measured
    /// (reported as passing).
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
    #[serde(skip)]
    pub grid: String,
}

impl CheckReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }
}

/// Running maximum with its witness; evaluation errors force a failure.
struct Worst {
    max: f64,
    witness: Witness,
    error: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Self {
            max: 0.0,
            witness: Witness::default(),
            error: None,
        }
    }

    fn update(&mut self, residual: f64, witness: Witness) {
        if residual > self.max || !residual.is_finite() {
            self.max = residual;
            self.witness = witness;
        }
    }

    fn record_error(&mut self, err: impl std::fmt::Display, witness: Witness) {
        self.max = f64::INFINITY;
        self.witness = witness;
        if self.error.is_none() {
            self.error = Some(err.to_string());
        }
    }

    fn report(self, check: &str, grid: String, threshold: f64) -> CheckReport {
        CheckReport {
            check: check.into(),
            pass: self.error.is_none() && self.max <= threshold,
            max_residual: self.max,
            threshold,
            witness: self.witness,
            skipped: false,
            grid,
        }
    }
}

/// EF1 (identity at `s = t`) and EF2 (composition over `s <= u <= t`).
pub fn check_ef_axioms(
    d: &HerglotzDriver,
    times: &[f64],
    points: &[Complex64],
    tol: f64,
    cfg: &EvolutionConfig,
) -> CheckReport {
    let mut worst = Worst::new();
    for &z in points {
        for (i, &s) in times.iter().enumerate() {
            // EF1 is exact in the engine; still assert it.
            match evolve_point(d, z, s, s, cfg) {
                Ok(r) => worst.update((r.w - z).norm(), Witness::at(s, s, z)),
                Err(e) => worst.record_error(e, Witness::at(s, s, z)),
            }
            for (j, &u) in times.iter().enumerate().skip(i) {
                for &t in times.iter().skip(j) {
                    let direct = evolve_point(d, z, s, t, cfg);
                    let via_u =
                        evolve_point(d, z, s, u, cfg).and_then(|r| evolve_point(d, r.w, u, t, cfg));
                    match (direct, via_u) {
                        (Ok(a), Ok(b)) => {
                            worst.update((a.w - b.w).norm(), Witness::at(s, t, z));
                        }
                        (Err(e), _) | (_, Err(e)) => worst.record_error(e, Witness::at(s, t, z)),
                    }
                }
            }
        }
    }
    worst.report(
        "ef_axioms",
        format!("{} times x {} points", times.len(), points.len()),
        tol,
    )
}

/// Chain equation `f_t(phi_{s,t}(z)) = f_s(z)` over all `s <= t` pairs.
pub fn check_chain_equation<C: ChainEvaluator>(
    d: &HerglotzDriver,
    chain: &C,
    times: &[f64],
    points: &[Complex64],
    tol: f64,
    cfg: &EvolutionConfig,
) -> CheckReport {
    let mut worst = Worst::new();
    for &z in points {
        for (i, &s) in times.iter().enumerate() {
            let fs = match chain.chain_value(s, z) {
                Ok(v) => v,
                Err(e) => {
                    worst.record_error(e, Witness::at(s, s, z));
                    continue;
                }
            };
            for &t in times.iter().skip(i) {
                let res = evolve_point(d, z, s, t, cfg)
                    .map_err(ChainError::from)
                    .and_then(|r| chain.chain_value(t, r.w));
                match res {
                    Ok(ft) => worst.update((ft - fs).norm(), Witness::at(s, t, z)),
                    Err(e) => worst.record_error(e, Witness::at(s, t, z)),
                }
            }
        }
    }
    worst.report(
        "chain_equation",
        format!("{} times x {} points", times.len(), points.len()),
        tol,
    )
}

/// Loewner-Kufarev PDE `d f_s(z)/ds = -G(z,s) f_s'(z)`, with a central
/// difference in `s` (step 1e-4) and a 4th-order central difference in `z`.
/// The `s` values must avoid driver breakpoints (the PDE holds a.e.).
pub fn check_lk_pde<C: ChainEvaluator>(
    d: &HerglotzDriver,
    chain: &C,
    s_values: &[f64],
    points: &[Complex64],
    tol: f64,
) -> CheckReport {
    const DS: f64 = 1e-4;
    const DZ: f64 = 1e-3;
    let mut worst = Worst::new();
    for &z in points {
        for &s in s_values {
            let res = (|| -> Result<f64, ChainError> {
                let ds = (chain.chain_value(s + DS, z)? - chain.chain_value(s - DS, z)?)
                    / Complex64::new(2.0 * DS, 0.0);
                let h = Complex64::new(DZ, 0.0);
                let fp = (chain.chain_value(s, z - 2.0 * h)?
                    - 8.0 * chain.chain_value(s, z - h)?
                    + 8.0 * chain.chain_value(s, z + h)?
                    - chain.chain_value(s, z + 2.0 * h)?)
                    / (12.0 * h);
                let g = d.vector_field(z, s).map_err(crate::engine::EngineError::from)?;
                Ok((ds + g * fp).norm())
            })();
            match res {
                Ok(r) => worst.update(r, Witness::at(s, s, z)),
                Err(e) => worst.record_error(e, Witness::at(s, s, z)),
            }
        }
    }
    worst.report(
        "lk_pde",
        format!("{} s-values x {} points", s_values.len(), points.len()),
        tol,
    )
}

/// `beta_z(t)` never increases along the time grid (slack 1e-9).
pub fn check_beta_monotone(
    d: &HerglotzDriver,
    times: &[f64],
    points: &[Complex64],
    cfg: &EvolutionConfig,
) -> CheckReport {
    let threshold = 1e-9;
    let mut worst = Worst::new();
    for &z in points {
        let mut prev: Option<(f64, f64)> = None;
        for &t in times {
            match crate::chain::beta_z(d, z, t, cfg) {
                Ok(b) => {
                    if let Some((t_prev, b_prev)) = prev {
                        worst.update(b - b_prev, Witness::at(t_prev, t, z));
                    }
                    prev = Some((t, b));
                }
                Err(e) => worst.record_error(e, Witness::at(t, t, z)),
            }
        }
    }
    // Negative increments are fine; clamp the reported residual at 0.
    worst.max = worst.max.max(0.0);
    worst.report(
        "beta_monotone",
        format!("{} times x {} points", times.len(), points.len()),
        threshold,
    )
}

/// Growth bound `|f_s(h_s(z))| <= (1/beta(s)) |z| / (1-|z|)^2`, which the
/// theory guarantees when the chain is unique. Skipped (reported passing)
/// when classification says otherwise.
pub fn check_growth_bound(
    chain: &StandardChain,
    s_values: &[f64],
    radii: &[f64],
    tol: f64,
) -> CheckReport {
    let cfg = *chain.config();
    let grid = format!("{} s-values x {} radii x 16 angles", s_values.len(), radii.len());
    match classify(chain.driver(), 1e-8, 1024.0, &cfg) {
        Ok(cl) if cl.verdict == Verdict::UniqueChain => {}
        Ok(_) => {
            return CheckReport {
                check: "growth_bound".into(),
                pass: true,
                max_residual: 0.0,
                threshold: 10.0 * tol,
                witness: Witness::default(),
                skipped: true,
                grid,
            }
        }
        Err(e) => {
            let mut worst = Worst::new();
            worst.record_error(e, Witness::default());
            return worst.report("growth_bound", grid, 10.0 * tol);
        }
    }
    let mut worst = Worst::new();
    for &s in s_values {
        let frame = match chain.frame(s) {
            Ok(f) => f,
            Err(e) => {
                worst.record_error(e, Witness::at(s, s, Complex64::default()));
                continue;
            }
        };
        let h_s = frame.automorphism();
        for &r in radii {
            for k in 0..16 {
                let z = Complex64::from_polar(r, k as f64 * TAU / 16.0);
                let bound = (1.0 / frame.beta) * r / (1.0 - r).powi(2);
                match chain.chain_value(s, h_s.apply(z)) {
                    Ok(f) => worst.update(f.norm() - bound, Witness::at(s, s, z)),
                    Err(e) => worst.record_error(e, Witness::at(s, s, z)),
                }
            }
        }
    }
    worst.max = worst.max.max(0.0);
    worst.report("growth_bound", grid, 10.0 * tol)
}

/// Univalence of `F` on `|z| <= r`: pairwise injectivity on `n` circle
/// samples, plus winding number 1 of the image curve around the images of
/// interior probes (argument principle).
pub fn check_univalence<F>(
    map: F,
    r: f64,
    n: usize,
) -> Result<CheckReport, VerifyError>
where
    F: Fn(Complex64) -> Result<Complex64, ChainError>,
{
    let grid = format!("circle r={r}, {n} samples");
    let mut worst = Worst::new();
    let nodes: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(r, k as f64 * TAU / n as f64))
        .collect();
    let mut images = Vec::with_capacity(n);
    for &xi in &nodes {
        match map(xi) {
            Ok(v) => images.push(v),
            Err(e) => {
                worst.record_error(e, Witness::at(0.0, 0.0, xi));
                return Ok(worst.report("univalence", grid, 0.5));
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (images[i] - images[j]).norm() == 0.0 {
                worst.record_error(
                    format!("samples {i} and {j} collide in the image"),
                    Witness::at(0.0, 0.0, nodes[i]),
                );
                return Ok(worst.report("univalence", grid, 0.5));
            }
        }
    }
    let probes = [
        Complex64::default(),
        Complex64::from_polar(0.3 * r, 0.7),
        Complex64::from_polar(0.5 * r, 2.9),
    ];
    for probe in probes {
        let w0 = map(probe)?;
        let winding = winding_number(&images, w0)?;
        worst.update((winding - 1.0).abs(), Witness::at(0.0, 0.0, probe));
    }
    Ok(worst.report("univalence", grid, 0.5))
}

/// Winding number of the closed polygon `curve` around `w0` by summed
/// argument increments.
fn winding_number(curve: &[Complex64], w0: Complex64) -> Result<f64, VerifyError> {
    let min_dist = curve.iter().map(|p| (p - w0).norm()).fold(f64::INFINITY, f64::min);
    if min_dist < 1e-9 {
        return Err(VerifyError::WindingAmbiguous { distance: min_dist });
    }
    let mut total = 0.0;
    for k in 0..curve.len() {
        let a = curve[k] - w0;
        let b = curve[(k + 1) % curve.len()] - w0;
        total += (b / a).arg();
    }
    Ok(total / TAU)
}

/// `F^{-1}(w)` by the argument-principle contour integral
/// `(1/2 pi i) oint xi F'(xi) / (F(xi) - w) d xi` over `|xi| = radius`,
/// using the trapezoidal rule on 2048 nodes (spectrally accurate for
/// analytic periodic integrands).
pub fn contour_inverse_oracle<F, DF>(
    map: F,
    map_dz: DF,
    w: Complex64,
    radius: f64,
) -> Result<Complex64, VerifyError>
where
    F: Fn(Complex64) -> Result<Complex64, ChainError>,
    DF: Fn(Complex64) -> Result<Complex64, ChainError>,
{
    const N: usize = 2048;
    let mut sum = Complex64::default();
    let mut min_dist = f64::INFINITY;
    for k in 0..N {
        let xi = Complex64::from_polar(radius, k as f64 * TAU / N as f64);
        let denom = map(xi)? - w;
        min_dist = min_dist.min(denom.norm());
        sum += xi * xi * map_dz(xi)? / denom;
    }
    if min_dist < 1e-6 {
        return Err(VerifyError::PoleNearContour { distance: min_dist });
    }
    // d xi = i xi d theta cancels the 1/(2 pi i) prefactor into a plain mean.
    Ok(sum / N as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::StandardChain;
    use crate::driver::ScalarField;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cfg() -> EvolutionConfig {
        EvolutionConfig::default()
    }

    fn disk_grid(r: f64, n: usize) -> Vec<Complex64> {
        let mut pts = vec![Complex64::default()];
        for k in 0..n {
            pts.push(Complex64::from_polar(r, k as f64 * TAU / n as f64));
            pts.push(Complex64::from_polar(0.5 * r, (k as f64 + 0.5) * TAU / n as f64));
        }
        pts
    }

    #[test]
    fn ef_axioms_constant_driver() {
        let d = HerglotzDriver::constant(ONE, Complex64::default()).unwrap();
        let report = check_ef_axioms(&d, &[0.0, 0.5, 1.0, 2.0], &disk_grid(0.7, 6), 1e-9, &cfg());
        assert!(report.pass, "residual {}", report.max_residual);
    }

    #[test]
    fn ef_axioms_degenerate_grid() {
        let d = HerglotzDriver::constant(ONE, Complex64::default()).unwrap();
        let report = check_ef_axioms(&d, &[0.0], &[c(0.3, 0.2)], 1e-9, &cfg());
        assert!(report.pass);
        assert_eq!(report.max_residual, 0.0);
    }

    /// A Herglotz function with a violent integrable spike on
    /// [0.5, 0.5 + 1e-6]. With the breakpoints declared the integrator
    /// splits there and resolves it; with them hidden the composition check
    /// must catch the inconsistency.
    fn spike_field() -> ScalarField {
        ScalarField::piecewise_constant(
            vec![0.5, 0.5 + 1e-6],
            vec![ONE, c(1e6, 0.0), ONE],
        )
        .unwrap()
    }

    #[test]
    fn ef_axioms_negative_control() {
        let honest = HerglotzDriver::berkson_porta(
            spike_field(),
            crate::driver::ComplexPath::Constant(Complex64::default()),
        );
        let corrupted = honest.clone().with_breakpoints(Vec::new());
        let times = [0.0, 0.25, 0.5, 1.0];
        let points = [c(0.5, 0.0), c(0.0, 0.4)];
        let good = check_ef_axioms(&honest, &times, &points, 1e-8, &cfg());
        assert!(good.pass, "declared breakpoints: residual {}", good.max_residual);
        let bad = check_ef_axioms(&corrupted, &times, &points, 1e-8, &cfg());
        assert!(!bad.pass, "hidden breakpoints must fail");
    }

    #[test]
    fn chain_equation_constant_driver() {
        let d = HerglotzDriver::constant(ONE, Complex64::default()).unwrap();
        let chain = StandardChain::new(&d, cfg(), 1e-8, 1024.0);
        let report = check_chain_equation(
            &d,
            &chain,
            &[0.0, 0.5, 1.0, 2.0],
            &disk_grid(0.7, 4),
            1e-6,
            &cfg(),
        );
        assert!(report.pass, "residual {}", report.max_residual);
    }

    #[test]
    fn lk_pde_constant_driver() {
        let d = HerglotzDriver::constant(ONE, Complex64::default()).unwrap();
        let chain = StandardChain::new(&d, cfg(), 1e-9, 1024.0);
        let frozen = chain.frozen(64.0);
        let report = check_lk_pde(&d, &frozen, &[0.5, 1.0], &disk_grid(0.5, 3), 1e-5);
        assert!(report.pass, "residual {}", report.max_residual);
    }

    #[test]
    fn beta_monotone_radial_slit() {
        let d = HerglotzDriver::radial(crate::driver::RealPath::Constant(0.0));
        let times: Vec<f64> = (0..16).map(|k| k as f64 * 0.25).collect();
        let report = check_beta_monotone(&d, &times, &disk_grid(0.6, 4), &cfg());
        assert!(report.pass, "residual {}", report.max_residual);
    }

    #[test]
    fn growth_bound_unique_and_skipped() {
        let d = HerglotzDriver::constant(ONE, Complex64::default()).unwrap();
        let chain = StandardChain::new(&d, cfg(), 1e-8, 1024.0);
        let report = check_growth_bound(&chain, &[0.0, 0.5, 1.0], &[0.5, 0.9], 1e-6);
        assert!(report.pass && !report.skipped, "residual {}", report.max_residual);

        let rot = HerglotzDriver::constant(Complex64::i(), Complex64::default()).unwrap();
        let chain = StandardChain::new(&rot, cfg(), 1e-8, 1024.0);
        let report = check_growth_bound(&chain, &[0.0, 0.5], &[0.5], 1e-6);
        assert!(report.skipped && report.pass);
    }

    #[test]
    fn univalence_identity_and_square() {
        let id = check_univalence(|z| Ok(z), 0.9, 256).unwrap();
        assert!(id.pass);
        assert!(id.max_residual < 1e-12);
        let sq = check_univalence(|z| Ok(z * z), 0.9, 256).unwrap();
        assert!(!sq.pass, "z^2 winds twice around 0");
    }

    #[test]
    fn contour_inverse_examples() {
        let id = contour_inverse_oracle(|z| Ok(z), |_| Ok(ONE), c(0.3, 0.0), 0.9).unwrap();
        assert!((id - c(0.3, 0.0)).norm() < 1e-12);

        let e = std::f64::consts::E;
        let lin = contour_inverse_oracle(
            |z| Ok(e * z),
            |_| Ok(c(e, 0.0)),
            c(0.5, 0.0),
            0.9,
        )
        .unwrap();
        assert!((lin - c(0.5 / e, 0.0)).norm() < 1e-12, "got {lin}");

        let koebe_like = contour_inverse_oracle(
            |z| Ok(z / (ONE - z)),
            |z| Ok(ONE / ((ONE - z) * (ONE - z))),
            ONE,
            0.9,
        )
        .unwrap();
        assert!((koebe_like - c(0.5, 0.0)).norm() < 1e-9, "got {koebe_like}");
    }

    #[test]
    fn report_json_schema() {
        let report = CheckReport {
            check: "demo".into(),
            pass: true,
            max_residual: 1e-12,
            threshold: 1e-9,
            witness: Witness::at(0.5, 1.0, c(0.25, -0.5)),
            skipped: false,
            grid: "none".into(),
        };
        let json = report.to_json();
        assert!(json.contains("\"check\":\"demo\""));
        assert!(json.contains("\"witness\":{\"s\":0.5,\"t\":1.0,\"z_re\":0.25,\"z_im\":-0.5}"));
        assert!(!json.contains("skipped"));
        assert!(!json.contains("grid"));
    }
}
