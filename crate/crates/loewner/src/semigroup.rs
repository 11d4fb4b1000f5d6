//! One-parameter semigroups of holomorphic self-maps: the autonomous case
//! of the evolution engine. Provides Denjoy-Wolff classification, the
//! hyperbolic-step dichotomy, and Koenigs linearizing functions, all
//! validated against closed-form flows.

use crate::chain::{frame_at, ChainError, ChainEvaluator, StandardChain};
use crate::driver::{ComplexPath, DriverError, HerglotzDriver, ScalarField};
use crate::engine::{evolve_point, EngineError, EvolutionConfig};
use crate::geometry::hyperbolic_distance;
use num_complex::Complex64;
use thiserror::Error;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error)]
pub enum SemigroupError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("driving data is not autonomous")]
    NonAutonomous,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("angular-derivative extrapolation unstable: estimates {first} and {second} disagree")]
    ExtrapolationUnstable { first: f64, second: f64 },
    #[error("Koenigs limit did not converge: {0}")]
    NotConverged(String),
    #[error("time-1 Koenigs increment {increment:e} too small to calibrate")]
    CalibrationDegenerate { increment: f64 },
}

impl From<DriverError> for SemigroupError {
    fn from(e: DriverError) -> Self {
        SemigroupError::Engine(EngineError::from(e))
    }
}

/// An autonomous model: Denjoy-Wolff point `tau` and Herglotz function `p`,
/// generating the flow `dphi_t/dt = G(phi_t)` with
/// `G(z) = (z - tau)(conj(tau) z - 1) p(z)`.
#[derive(Debug, Clone)]
pub struct SemigroupModel {
    tau: Complex64,
    driver: HerglotzDriver,
}

impl SemigroupModel {
    pub fn new(p: ScalarField, tau: Complex64) -> Result<Self, SemigroupError> {
        let driver = HerglotzDriver::berkson_porta(p, ComplexPath::constant(tau)?);
        if !driver.is_autonomous() {
            return Err(SemigroupError::NonAutonomous);
        }
        Ok(Self { tau, driver })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn driver(&self) -> &HerglotzDriver {
        &self.driver
    }

    /// `phi_t(z)`.
    pub fn phi(&self, z: Complex64, t: f64, cfg: &EvolutionConfig) -> Result<Complex64, SemigroupError> {
        Ok(evolve_point(&self.driver, z, 0.0, t, cfg)?.w)
    }

    /// Conjugate an interior Denjoy-Wolff point to the origin by the Moebius
    /// map `M(z) = (z - tau)/(1 - conj(tau) z)`: the conjugated flow is
    /// `M o phi_t o M^{-1}` with Herglotz function
    /// `(1 - |tau|^2) p(M^{-1}(w))` and fixed point 0.
    pub fn conjugate_to_origin(&self) -> Result<Self, SemigroupError> {
        if self.tau.norm() >= 1.0 - 1e-9 {
            return Err(SemigroupError::InvalidInput(
                "only interior Denjoy-Wolff points can be moved to the origin".into(),
            ));
        }
        if self.tau == ZERO {
            return Ok(self.clone());
        }
        let p_field = self.driver.herglotz_field().cloned().ok_or_else(|| {
            SemigroupError::InvalidInput("model lacks Berkson-Porta form".into())
        })?;
        SemigroupModel::new(ScalarField::origin_conjugate(p_field, self.tau), ZERO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DWKind {
    Elliptic,
    Hyperbolic,
    Parabolic,
}

#[derive(Debug, Clone, Copy)]
pub struct DWClass {
    pub kind: DWKind,
    pub dw_point: Complex64,
    /// Angular derivative of `phi_1` at the Denjoy-Wolff point (boundary
    /// cases only).
    pub derivative_estimate: Option<f64>,
}

/// Denjoy-Wolff classification. Interior `tau` is elliptic; boundary `tau`
/// is classified by the angular derivative of `phi_1` at `tau`, estimated
/// from the Julia-Wolff radial quotient `(1 - |phi_1(r tau)|)/(1 - r)` at
/// `r in {0.9, 0.99, 0.999}` with Richardson extrapolation.
pub fn classify_dw(
    model: &SemigroupModel,
    tol: f64,
    cfg: &EvolutionConfig,
) -> Result<DWClass, SemigroupError> {
    if !(tol > 0.0 && tol < 0.1) {
        return Err(SemigroupError::InvalidInput(format!(
            "tolerance must lie in (0, 0.1), got {tol}"
        )));
    }
    let tau = model.tau();
    if tau.norm() < 1.0 - 1e-9 {
        return Ok(DWClass {
            kind: DWKind::Elliptic,
            dw_point: tau,
            derivative_estimate: None,
        });
    }
    let quotient = |r: f64| -> Result<f64, SemigroupError> {
        let w = model.phi(r * tau, 1.0, cfg)?;
        Ok((1.0 - w.norm()) / (1.0 - r))
    };
    let q = [quotient(0.9)?, quotient(0.99)?, quotient(0.999)?];
    // Leading error is O(1 - r); successive radii shrink it by 10.
    let first = (10.0 * q[1] - q[0]) / 9.0;
    let second = (10.0 * q[2] - q[1]) / 9.0;
    if (first - second).abs() > 0.1 {
        return Err(SemigroupError::ExtrapolationUnstable { first, second });
    }
    let kind = if second < 1.0 - tol {
        DWKind::Hyperbolic
    } else {
        DWKind::Parabolic
    };
    Ok(DWClass {
        kind,
        dw_point: tau,
        derivative_estimate: Some(second),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepVerdict {
    ZeroStep,
    PositiveStep,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct HyperbolicStepResult {
    pub verdict: StepVerdict,
    /// `rho(z_k, z_{k+1})` for the orbit `z_k = phi_{k t0}(z0)`.
    pub distances: Vec<f64>,
}

/// Hyperbolic-step dichotomy of the orbit `z_k = phi_{k t0}(z0)`.
/// ZeroStep: the last distance is below 1e-4 and the final quarter is
/// non-increasing. PositiveStep: the final-quarter minimum exceeds 1e-2.
/// The two-order-of-magnitude gap makes the verdict insensitive to the
/// exact thresholds on the oracle models.
pub fn hyperbolic_step(
    model: &SemigroupModel,
    z0: Complex64,
    t0: f64,
    n: usize,
    cfg: &EvolutionConfig,
) -> Result<HyperbolicStepResult, SemigroupError> {
    if n < 8 {
        return Err(SemigroupError::InvalidInput(format!(
            "need at least 8 iterations, got {n}"
        )));
    }
    if !(t0 > 0.0) {
        return Err(SemigroupError::InvalidInput(format!(
            "time step must be positive, got {t0}"
        )));
    }
    let mut distances = Vec::with_capacity(n);
    let mut z = z0;
    for _ in 0..n {
        let next = model.phi(z, t0, cfg)?;
        distances.push(hyperbolic_distance(z, next));
        z = next;
    }
    let tail = &distances[3 * n / 4..];
    let non_increasing = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let verdict = if *distances.last().unwrap() < 1e-4 && non_increasing {
        StepVerdict::ZeroStep
    } else if tail.iter().copied().fold(f64::INFINITY, f64::min) > 1e-2 {
        StepVerdict::PositiveStep
    } else {
        StepVerdict::Inconclusive
    };
    Ok(HyperbolicStepResult { verdict, distances })
}

/// Koenigs function of an elliptic semigroup fixing the origin:
/// `h(z) = lim_t e^{ct} phi_t(z)` with `c = p(0)`, satisfying
/// `h o phi_t = e^{-ct} h`, `h(0) = 0`, `h'(0) = 1`.
pub struct KoenigsElliptic {
    model: SemigroupModel,
    cfg: EvolutionConfig,
    pub c: Complex64,
    pub horizon: f64,
}

impl KoenigsElliptic {
    pub fn eval(&self, z: Complex64) -> Result<Complex64, SemigroupError> {
        let w = self.model.phi(z, self.horizon, &self.cfg)?;
        Ok((self.c * self.horizon).exp() * w)
    }
}

pub fn koenigs_elliptic(
    model: &SemigroupModel,
    tol: f64,
    cfg: &EvolutionConfig,
) -> Result<KoenigsElliptic, SemigroupError> {
    koenigs_elliptic_with_schedule(model, tol, cfg, 1.0)
}

/// As [`koenigs_elliptic`] but with a custom initial horizon, so
/// independent runs can take disjoint horizon schedules.
pub fn koenigs_elliptic_with_schedule(
    model: &SemigroupModel,
    tol: f64,
    cfg: &EvolutionConfig,
    initial_horizon: f64,
) -> Result<KoenigsElliptic, SemigroupError> {
    if model.tau() != ZERO {
        return Err(SemigroupError::InvalidInput(
            "Koenigs extraction needs tau = 0; conjugate interior fixed points first".into(),
        ));
    }
    let c = model
        .driver
        .herglotz_p(ZERO, 0.0)
        .expect("Berkson-Porta form by construction")?;
    if c.re < 1e-9 {
        return Err(SemigroupError::NotConverged(format!(
            "Re p(0) = {} gives no strict contraction",
            c.re
        )));
    }
    // The rescaling e^{ct} amplifies any absolute integration error by
    // e^{Re c * t}; drop to pure relative step control so the amplified
    // error stays proportional to |h| instead of exploding.
    let cfg = EvolutionConfig {
        abs_tol: f64::MIN_POSITIVE,
        ..*cfg
    };
    let cfg = &cfg;
    let probes = [
        Complex64::new(0.3, 0.0),
        Complex64::new(-0.2, 0.3),
        Complex64::new(0.0, 0.5),
    ];
    let value = |z: Complex64, t: f64| -> Result<Complex64, SemigroupError> {
        Ok((c * t).exp() * model.phi(z, t, cfg)?)
    };
    let mut horizon = initial_horizon;
    let mut prev: Vec<Complex64> = probes
        .iter()
        .map(|&z| value(z, horizon))
        .collect::<Result<_, _>>()?;
    loop {
        let next_t = 2.0 * horizon;
        if c.re * next_t > 300.0 {
            return Err(SemigroupError::NotConverged(format!(
                "no Cauchy convergence before the overflow horizon (t = {horizon})"
            )));
        }
        let cur: Vec<Complex64> = probes
            .iter()
            .map(|&z| value(z, next_t))
            .collect::<Result<_, _>>()?;
        let delta = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if delta < tol {
            return Ok(KoenigsElliptic {
                model: model.clone(),
                cfg: *cfg,
                c,
                horizon: next_t,
            });
        }
        prev = cur;
        horizon = next_t;
    }
}

/// Koenigs function of a boundary (hyperbolic or parabolic) semigroup,
/// normalized by `h(0) = 0` and a unit time-1 increment:
/// `h o phi_t = h + t`.
pub struct BoundaryKoenigs<'a> {
    model: &'a SemigroupModel,
    route: BoundaryRoute<'a>,
}

enum BoundaryRoute<'a> {
    /// `h(z) = int_0^z d zeta / G(zeta)` — exact for the functional
    /// equation since `h'(w) G(w) = 1`; used when the family consists of
    /// automorphisms (the chain route degenerates there).
    Quadrature,
    /// `h = mu (f_0 - f_0(0))` with the standard chain `f_0` and `mu`
    /// calibrated so the time-1 increment at the origin equals 1.
    Chain {
        chain: StandardChain<'a>,
        mu: Complex64,
        offset: Complex64,
    },
}

impl BoundaryKoenigs<'_> {
    pub fn eval(&self, z: Complex64) -> Result<Complex64, SemigroupError> {
        match &self.route {
            BoundaryRoute::Quadrature => {
                // Integrate 1/G along the segment [0, z].
                let integrand = |s: f64| -> Result<Complex64, SemigroupError> {
                    let zeta = s * z;
                    Ok(z / self.model.driver.vector_field(zeta, 0.0)?)
                };
                adaptive_simpson_complex(&integrand, 0.0, 1.0, 1e-12, 30)
            }
            BoundaryRoute::Chain { chain, mu, offset } => {
                Ok(mu * (chain.chain_value(0.0, z)? - offset))
            }
        }
    }
}

pub fn koenigs_boundary<'a>(
    model: &'a SemigroupModel,
    tol: f64,
    cfg: &EvolutionConfig,
) -> Result<BoundaryKoenigs<'a>, SemigroupError> {
    if model.tau().norm() < 1.0 - 1e-9 {
        return Err(SemigroupError::InvalidInput(
            "boundary Koenigs extraction needs |tau| = 1".into(),
        ));
    }
    let beta = frame_at(&model.driver, 16.0, cfg)?.beta;
    let route = if beta > 0.5 {
        BoundaryRoute::Quadrature
    } else {
        let chain = StandardChain::new(&model.driver, *cfg, tol, 4096.0);
        let offset = chain.chain_value(0.0, ZERO)?;
        let w1 = model.phi(ZERO, 1.0, cfg)?;
        let increment = chain.chain_value(0.0, w1)? - offset;
        if increment.norm() < 1e-12 {
            return Err(SemigroupError::CalibrationDegenerate {
                increment: increment.norm(),
            });
        }
        BoundaryRoute::Chain {
            chain,
            mu: ONE / increment,
            offset,
        }
    };
    let h = BoundaryKoenigs { model, route };
    // Certify the functional equation before handing the evaluator out.
    let mut worst = 0.0f64;
    for &z in &[ZERO, Complex64::new(0.3, 0.0), Complex64::new(-0.2, 0.25)] {
        let hz = h.eval(z)?;
        for &t in &[0.5, 1.0, 2.0] {
            let w = model.phi(z, t, cfg)?;
            worst = worst.max((h.eval(w)? - hz - t).norm());
        }
    }
    if worst > 10.0 * tol {
        return Err(SemigroupError::NotConverged(format!(
            "functional-equation residual {worst:e} exceeds {:e}",
            10.0 * tol
        )));
    }
    Ok(h)
}

fn adaptive_simpson_complex<F>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
) -> Result<Complex64, SemigroupError>
where
    F: Fn(f64) -> Result<Complex64, SemigroupError>,
{
    fn simpson(fa: Complex64, fm: Complex64, fb: Complex64, h: f64) -> Complex64 {
        (fa + 4.0 * fm + fb) * (h / 6.0)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F>(
        f: &F,
        a: f64,
        b: f64,
        fa: Complex64,
        fm: Complex64,
        fb: Complex64,
        whole: Complex64,
        tol: f64,
        depth: usize,
    ) -> Result<Complex64, SemigroupError>
    where
        F: Fn(f64) -> Result<Complex64, SemigroupError>,
    {
        let m = 0.5 * (a + b);
        let flm = f(0.5 * (a + m))?;
        let frm = f(0.5 * (m + b))?;
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.norm() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    let m = 0.5 * (a + b);
    let fa = f(a)?;
    let fm = f(m)?;
    let fb = f(b)?;
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cfg() -> EvolutionConfig {
        EvolutionConfig::default()
    }

    fn elliptic_model() -> SemigroupModel {
        SemigroupModel::new(ScalarField::constant(ONE), ZERO).unwrap()
    }

    fn parabolic_lft() -> SemigroupModel {
        SemigroupModel::new(ScalarField::constant(ONE), ONE).unwrap()
    }

    fn parabolic_automorphism() -> SemigroupModel {
        SemigroupModel::new(ScalarField::constant(Complex64::i()), ONE).unwrap()
    }

    fn hyperbolic_dilation() -> SemigroupModel {
        let p = Expr::parse("(1+z)/(2*(1-z))").unwrap();
        SemigroupModel::new(ScalarField::expression(p), ONE).unwrap()
    }

    #[test]
    fn phi_oracles() {
        let m = elliptic_model();
        let w = m.phi(c(0.4, 0.0), 1.0, &cfg()).unwrap();
        assert!((w - c(0.4 * (-1.0f64).exp(), 0.0)).norm() < 1e-10);
        let m = parabolic_lft();
        let w = m.phi(ZERO, 2.0, &cfg()).unwrap();
        assert!((w - c(2.0 / 3.0, 0.0)).norm() < 1e-9);
        assert_eq!(m.phi(c(0.2, 0.1), 0.0, &cfg()).unwrap(), c(0.2, 0.1));
    }

    #[test]
    fn semigroup_law() {
        let m = hyperbolic_dilation();
        let cfg = cfg();
        for &z in &[ZERO, c(0.3, 0.2), c(-0.5, 0.1)] {
            for &(s, t) in &[(0.25, 0.5), (0.5, 1.0), (1.0, 0.25)] {
                let a = m.phi(z, s + t, &cfg).unwrap();
                let b = m.phi(m.phi(z, s, &cfg).unwrap(), t, &cfg).unwrap();
                assert!((a - b).norm() < 1e-8, "law violated at z={z}, s={s}, t={t}");
            }
        }
    }

    #[test]
    fn dw_classification_oracles() {
        let cfg = cfg();
        let e = classify_dw(&elliptic_model(), 0.02, &cfg).unwrap();
        assert_eq!(e.kind, DWKind::Elliptic);
        assert_eq!(e.dw_point, ZERO);

        let h = classify_dw(&hyperbolic_dilation(), 0.02, &cfg).unwrap();
        assert_eq!(h.kind, DWKind::Hyperbolic);
        let est = h.derivative_estimate.unwrap();
        assert!((est - (-1.0f64).exp()).abs() < 1e-2, "estimate {est}");

        let p = classify_dw(&parabolic_lft(), 0.02, &cfg).unwrap();
        assert_eq!(p.kind, DWKind::Parabolic);
        let est = p.derivative_estimate.unwrap();
        assert!((est - 1.0).abs() < 1e-2, "estimate {est}");

        // Verdicts are stable under halving the tolerance.
        assert_eq!(
            classify_dw(&hyperbolic_dilation(), 0.01, &cfg).unwrap().kind,
            DWKind::Hyperbolic
        );
        assert_eq!(
            classify_dw(&parabolic_lft(), 0.01, &cfg).unwrap().kind,
            DWKind::Parabolic
        );
    }

    #[test]
    fn dw_membership_radial_approach() {
        let m = parabolic_lft();
        let cfg = cfg();
        let mut prev = f64::INFINITY;
        for &r in &[0.9, 0.99, 0.999] {
            let gap = (m.phi(c(r, 0.0), 1.0, &cfg).unwrap() - ONE).norm();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 2e-3);
    }

    #[test]
    fn hyperbolic_step_elliptic_contraction() {
        let r = hyperbolic_step(&elliptic_model(), c(0.5, 0.0), 1.0, 32, &cfg()).unwrap();
        assert_eq!(r.verdict, StepVerdict::ZeroStep);
    }

    #[test]
    fn hyperbolic_step_parabolic_lft() {
        // Consecutive-orbit distances decay like 1/k, so the 1e-4 floor
        // needs on the order of 1e4 iterations regardless of the time step.
        let r = hyperbolic_step(&parabolic_lft(), ZERO, 1.0, 16384, &cfg()).unwrap();
        assert_eq!(r.verdict, StepVerdict::ZeroStep);
    }

    #[test]
    fn hyperbolic_step_parabolic_automorphism() {
        let r = hyperbolic_step(&parabolic_automorphism(), ZERO, 1.0, 64, &cfg()).unwrap();
        assert_eq!(r.verdict, StepVerdict::PositiveStep);
        // Orbit distances of an automorphism flow are constant.
        let first = r.distances[0];
        assert!(r.distances.iter().all(|d| (d - first).abs() < 1e-7));
    }

    #[test]
    fn koenigs_elliptic_identity_case() {
        let k = koenigs_elliptic(&elliptic_model(), 1e-9, &cfg()).unwrap();
        assert_eq!(k.c, ONE);
        let h = k.eval(c(0.4, 0.0)).unwrap();
        assert!((h - c(0.4, 0.0)).norm() < 1e-9, "got {h}");
    }

    #[test]
    fn koenigs_elliptic_functional_equation() {
        let p = Expr::parse("1+z").unwrap();
        let m = SemigroupModel::new(ScalarField::expression(p), ZERO).unwrap();
        let cfg = cfg();
        let k = koenigs_elliptic(&m, 1e-9, &cfg).unwrap();
        assert_eq!(k.c, ONE);
        for &z in &[c(0.3, 0.0), c(-0.2, 0.4), c(0.0, -0.5)] {
            let hz = k.eval(z).unwrap();
            for &t in &[0.5, 1.0, 2.0] {
                let w = m.phi(z, t, &cfg).unwrap();
                let lhs = k.eval(w).unwrap();
                let rhs = (-k.c * t).exp() * hz;
                assert!((lhs - rhs).norm() < 1e-6, "residual at z={z}, t={t}");
            }
        }
        // Normalization h(0) = 0, h'(0) = 1 by finite difference.
        assert!(k.eval(ZERO).unwrap().norm() < 1e-12);
        let d = (k.eval(c(1e-6, 0.0)).unwrap() - k.eval(c(-1e-6, 0.0)).unwrap()) / c(2e-6, 0.0);
        assert!((d - ONE).norm() < 1e-5);
    }

    #[test]
    fn koenigs_elliptic_unique_across_schedules() {
        let p = Expr::parse("1+z").unwrap();
        let m = SemigroupModel::new(ScalarField::expression(p), ZERO).unwrap();
        let cfg = cfg();
        let k1 = koenigs_elliptic_with_schedule(&m, 1e-8, &cfg, 1.0).unwrap();
        let k2 = koenigs_elliptic_with_schedule(&m, 1e-8, &cfg, 1.7).unwrap();
        for &z in &[c(0.3, 0.0), c(-0.4, 0.2)] {
            let a = k1.eval(z).unwrap();
            let b = k2.eval(z).unwrap();
            assert!((a - b).norm() < 1e-7, "schedules disagree at {z}");
        }
    }

    #[test]
    fn koenigs_elliptic_rejects_rotation() {
        let m = SemigroupModel::new(ScalarField::constant(Complex64::i()), ZERO).unwrap();
        assert!(matches!(
            koenigs_elliptic(&m, 1e-9, &cfg()),
            Err(SemigroupError::NotConverged(_))
        ));
    }

    #[test]
    fn conjugate_interior_fixed_point() {
        let tau = c(0.5, 0.0);
        let m = SemigroupModel::new(ScalarField::constant(ONE), tau).unwrap();
        let conj = m.conjugate_to_origin().unwrap();
        let cfg = cfg();
        // The conjugated flow fixes the origin.
        assert!(conj.phi(ZERO, 1.0, &cfg).unwrap().norm() < 1e-10);
        // And agrees with M o phi_t o M^{-1}.
        let moebius = |z: Complex64| (z - tau) / (ONE - tau.conj() * z);
        let moebius_inv = |w: Complex64| (w + tau) / (ONE + tau.conj() * w);
        let z = c(0.2, 0.3);
        let lhs = conj.phi(z, 0.8, &cfg).unwrap();
        let rhs = moebius(m.phi(moebius_inv(z), 0.8, &cfg).unwrap());
        assert!((lhs - rhs).norm() < 1e-9, "lhs {lhs}, rhs {rhs}");
    }

    #[test]
    fn koenigs_boundary_lft() {
        let m = parabolic_lft();
        let h = koenigs_boundary(&m, 1e-6, &cfg()).unwrap();
        let v = h.eval(c(0.5, 0.0)).unwrap();
        assert!((v - ONE).norm() < 1e-6, "h(0.5) = {v}");
        // Additivity probe: h(phi_2(0)) - h(phi_1(0)) = 1.
        let cfg = cfg();
        let w1 = m.phi(ZERO, 1.0, &cfg).unwrap();
        let w2 = m.phi(ZERO, 2.0, &cfg).unwrap();
        let inc = h.eval(w2).unwrap() - h.eval(w1).unwrap();
        assert!((inc - ONE).norm() < 1e-6, "increment {inc}");
    }

    #[test]
    fn koenigs_boundary_dilation() {
        let m = hyperbolic_dilation();
        let h = koenigs_boundary(&m, 1e-7, &cfg()).unwrap();
        let v = h.eval(c(0.5, 0.0)).unwrap();
        let expect = 3.0f64.ln();
        assert!((v - c(expect, 0.0)).norm() < 1e-5, "h(0.5) = {v}");
    }

    #[test]
    fn koenigs_boundary_rejects_interior() {
        let m = elliptic_model();
        assert!(matches!(
            koenigs_boundary(&m, 1e-7, &cfg()),
            Err(SemigroupError::InvalidInput(_))
        ));
    }
}
