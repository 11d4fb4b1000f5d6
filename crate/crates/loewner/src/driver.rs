//! Berkson-Porta driving data and weak holomorphic vector fields.
//!
//! A driver either carries Berkson-Porta data `(p, tau)` and evaluates
//! `G(z,t) = (z - tau(t)) (conj(tau(t)) z - 1) p(z,t)`, or carries a raw
//! vector field `G` directly. Built-ins cover the constant, radial-slit,
//! chordal-slit, and sampled-path cases.

use crate::expr::{EvalError, Expr};
use crate::geometry::cayley_to_halfplane;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("expression error at z={z}, t={t}: {source}")]
    Expr {
        z: Complex64,
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error("invalid driver data: {0}")]
    InvalidData(String),
}

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A real-valued function of time: constant, expression in `t`, or
/// piecewise-linear samples.
#[derive(Debug, Clone)]
pub enum RealPath {
    Constant(f64),
    Expr(Expr),
    Samples { times: Vec<f64>, values: Vec<f64> },
}

impl RealPath {
    pub fn samples(times: Vec<f64>, values: Vec<f64>) -> Result<Self, DriverError> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(DriverError::InvalidData(
                "sampled path needs matching times/values with at least two knots".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DriverError::InvalidData(
                "sample times must be strictly ascending".into(),
            ));
        }
        Ok(RealPath::Samples { times, values })
    }

    pub fn at(&self, t: f64) -> Result<f64, DriverError> {
        match self {
            RealPath::Constant(v) => Ok(*v),
            RealPath::Expr(e) => {
                let v = e
                    .evaluate(ZERO, t)
                    .map_err(|source| DriverError::Expr { z: ZERO, t, source })?;
                Ok(v.re)
            }
            RealPath::Samples { times, values } => Ok(interp_linear(times, values, t)),
        }
    }

    fn knots(&self) -> Vec<f64> {
        match self {
            RealPath::Samples { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }
}

fn interp_linear<V>(times: &[f64], values: &[V], t: f64) -> V
where
    V: Copy + std::ops::Sub<Output = V> + std::ops::Add<Output = V> + std::ops::Mul<f64, Output = V>,
{
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let k = times.partition_point(|&x| x <= t) - 1;
    let frac = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] + (values[k + 1] - values[k]) * frac
}

/// The Denjoy-Wolff trajectory `tau(t)` with values in the closed disk.
#[derive(Debug, Clone)]
pub enum ComplexPath {
    Constant(Complex64),
    Samples {
        times: Vec<f64>,
        values: Vec<Complex64>,
    },
}

impl ComplexPath {
    pub fn constant(value: Complex64) -> Result<Self, DriverError> {
        check_in_closed_disk(value)?;
        Ok(ComplexPath::Constant(value))
    }

    pub fn samples(times: Vec<f64>, values: Vec<Complex64>) -> Result<Self, DriverError> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(DriverError::InvalidData(
                "sampled trajectory needs matching times/values with at least two knots".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DriverError::InvalidData(
                "sample times must be strictly ascending".into(),
            ));
        }
        for &v in &values {
            check_in_closed_disk(v)?;
        }
        Ok(ComplexPath::Samples { times, values })
    }

    pub fn at(&self, t: f64) -> Complex64 {
        match self {
            ComplexPath::Constant(v) => *v,
            ComplexPath::Samples { times, values } => interp_linear(times, values, t),
        }
    }

    fn knots(&self) -> Vec<f64> {
        match self {
            ComplexPath::Samples { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }
}

fn check_in_closed_disk(v: Complex64) -> Result<(), DriverError> {
    if v.norm() > 1.0 + 1e-12 {
        return Err(DriverError::InvalidData(format!(
            "trajectory value {v} lies outside the closed unit disk"
        )));
    }
    Ok(())
}

/// A holomorphic-in-`z` scalar field `(z, t) -> C`, used both for Herglotz
/// functions `p` and for raw vector fields `G`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    kind: FieldKind,
}

#[derive(Debug, Clone)]
enum FieldKind {
    Constant(Complex64),
    Expr { expr: Expr, dz: Expr },
    PiecewiseConstant { knots: Vec<f64>, values: Vec<Complex64> },
    /// `p(z,t) = (kappa + z) / (kappa - z)` with `kappa = exp(i theta(t))`.
    RadialKernel(RealPath),
    /// Raw chordal field `G(z,t) = -i (1-z)^2 / (xi(t) - C(z))`, the Cayley
    /// pullback of `2 / (xi - w)` on the upper half-plane.
    ChordalField(RealPath),
    /// The Herglotz function of a semigroup conjugated so its interior
    /// Denjoy-Wolff point moves to the origin:
    /// `p~(w,t) = (1 - |tau|^2) p(M^{-1}(w), t)` with `M(z) = (z-tau)/(1-conj(tau) z)`.
    OriginConjugate { p: Box<ScalarField>, tau: Complex64 },
}

impl ScalarField {
    pub fn constant(value: Complex64) -> Self {
        Self {
            kind: FieldKind::Constant(value),
        }
    }

    pub fn expression(expr: Expr) -> Self {
        let dz = expr.differentiate_z();
        Self {
            kind: FieldKind::Expr { expr, dz },
        }
    }

    /// Value `values[k]` on `[knots[k], knots[k+1])`; `values` has one more
    /// entry than `knots` (first value applies before the first knot).
    pub fn piecewise_constant(
        knots: Vec<f64>,
        values: Vec<Complex64>,
    ) -> Result<Self, DriverError> {
        if values.len() != knots.len() + 1 {
            return Err(DriverError::InvalidData(
                "piecewise-constant field needs one more value than knots".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DriverError::InvalidData(
                "knots must be strictly ascending".into(),
            ));
        }
        Ok(Self {
            kind: FieldKind::PiecewiseConstant { knots, values },
        })
    }

    pub fn radial_kernel(theta: RealPath) -> Self {
        Self {
            kind: FieldKind::RadialKernel(theta),
        }
    }

    pub fn chordal_field(xi: RealPath) -> Self {
        Self {
            kind: FieldKind::ChordalField(xi),
        }
    }

    pub fn origin_conjugate(p: ScalarField, tau: Complex64) -> Self {
        Self {
            kind: FieldKind::OriginConjugate { p: Box::new(p), tau },
        }
    }

    pub fn eval(&self, z: Complex64, t: f64) -> Result<Complex64, DriverError> {
        match &self.kind {
            FieldKind::Constant(c) => Ok(*c),
            FieldKind::Expr { expr, .. } => expr
                .evaluate(z, t)
                .map_err(|source| DriverError::Expr { z, t, source }),
            FieldKind::PiecewiseConstant { knots, values } => {
                Ok(values[knots.partition_point(|&k| k <= t)])
            }
            FieldKind::RadialKernel(theta) => {
                let kappa = Complex64::from_polar(1.0, theta.at(t)?);
                Ok((kappa + z) / (kappa - z))
            }
            FieldKind::ChordalField(xi) => {
                let xi_t = Complex64::new(xi.at(t)?, 0.0);
                let d = ONE - z;
                Ok(-Complex64::i() * d * d / (xi_t - cayley_to_halfplane(z)))
            }
            FieldKind::OriginConjugate { p, tau } => {
                let scale = 1.0 - tau.norm_sqr();
                p.eval(moebius_inv(*tau, z), t).map(|v| scale * v)
            }
        }
    }

    /// Analytic z-derivative when one is available.
    pub fn eval_dz(&self, z: Complex64, t: f64) -> Result<Option<Complex64>, DriverError> {
        match &self.kind {
            FieldKind::Constant(_) | FieldKind::PiecewiseConstant { .. } => Ok(Some(ZERO)),
            FieldKind::Expr { dz, .. } => dz
                .evaluate(z, t)
                .map(Some)
                .map_err(|source| DriverError::Expr { z, t, source }),
            FieldKind::RadialKernel(theta) => {
                let kappa = Complex64::from_polar(1.0, theta.at(t)?);
                let d = kappa - z;
                Ok(Some(2.0 * kappa / (d * d)))
            }
            FieldKind::ChordalField(xi) => {
                let xi_t = Complex64::new(xi.at(t)?, 0.0);
                let d = xi_t - cayley_to_halfplane(z);
                let num = Complex64::new(0.0, 2.0) * (ONE - z) * d + Complex64::new(2.0, 0.0);
                Ok(Some(num / (d * d)))
            }
            FieldKind::OriginConjugate { p, tau } => {
                let scale = 1.0 - tau.norm_sqr();
                let w = moebius_inv(*tau, z);
                let den = ONE + tau.conj() * z;
                let dw = Complex64::new(scale, 0.0) / (den * den);
                Ok(p.eval_dz(w, t)?.map(|v| scale * v * dw))
            }
        }
    }

    fn knots(&self) -> Vec<f64> {
        match &self.kind {
            FieldKind::PiecewiseConstant { knots, .. } => knots.clone(),
            FieldKind::RadialKernel(p) | FieldKind::ChordalField(p) => p.knots(),
            FieldKind::OriginConjugate { p, .. } => p.knots(),
            _ => Vec::new(),
        }
    }
}

/// `M^{-1}(w) = (w + tau) / (1 + conj(tau) w)` for `M(z) = (z - tau)/(1 - conj(tau) z)`.
fn moebius_inv(tau: Complex64, w: Complex64) -> Complex64 {
    (w + tau) / (ONE + tau.conj() * w)
}

#[derive(Debug, Clone)]
enum DriverForm {
    BerksonPorta { p: ScalarField, tau: ComplexPath },
    Raw { g: ScalarField },
}

/// Driving data for an evolution family.
#[derive(Debug, Clone)]
pub struct HerglotzDriver {
    form: DriverForm,
    breakpoints: Vec<f64>,
    use_analytic_dz: bool,
}

impl HerglotzDriver {
    /// `p = c`, `tau = tau0`; requires `Re c >= 0` up to tolerance.
    pub fn constant(c: Complex64, tau0: Complex64) -> Result<Self, DriverError> {
        if c.re < -1e-9 {
            return Err(DriverError::InvalidData(format!(
                "constant Herglotz data must have Re c >= 0, got {c}"
            )));
        }
        Ok(Self::berkson_porta(
            ScalarField::constant(c),
            ComplexPath::constant(tau0)?,
        ))
    }

    /// Radial slit driver: `tau = 0`, `p = (kappa + z)/(kappa - z)`,
    /// `kappa(t) = exp(i theta(t))`.
    pub fn radial(theta: RealPath) -> Self {
        Self::berkson_porta(
            ScalarField::radial_kernel(theta),
            ComplexPath::Constant(ZERO),
        )
    }

    /// Chordal slit driver stored in raw form via the Cayley pullback.
    pub fn chordal(xi: RealPath) -> Self {
        Self::raw(ScalarField::chordal_field(xi))
    }

    pub fn berkson_porta(p: ScalarField, tau: ComplexPath) -> Self {
        let mut breakpoints = p.knots();
        breakpoints.extend(tau.knots());
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Self {
            form: DriverForm::BerksonPorta { p, tau },
            breakpoints,
            use_analytic_dz: true,
        }
    }

    pub fn raw(g: ScalarField) -> Self {
        let breakpoints = g.knots();
        Self {
            form: DriverForm::Raw { g },
            breakpoints,
            use_analytic_dz: true,
        }
    }

    /// Replace the auto-derived breakpoint list.
    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self.breakpoints.sort_by(f64::total_cmp);
        self.breakpoints.dedup();
        self
    }

    /// Force the finite-difference fallback for `vector_field_dz`.
    pub fn suppress_analytic_derivative(mut self) -> Self {
        self.use_analytic_dz = false;
        self
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Breakpoints strictly inside `(s, t)`, ascending.
    pub fn breakpoints_in(&self, s: f64, t: f64) -> Vec<f64> {
        self.breakpoints
            .iter()
            .copied()
            .filter(|&b| b > s && b < t)
            .collect()
    }

    pub fn is_berkson_porta(&self) -> bool {
        matches!(self.form, DriverForm::BerksonPorta { .. })
    }

    pub fn tau(&self, t: f64) -> Option<Complex64> {
        match &self.form {
            DriverForm::BerksonPorta { tau, .. } => Some(tau.at(t)),
            DriverForm::Raw { .. } => None,
        }
    }

    /// The Herglotz function `p` itself, for Berkson-Porta drivers.
    pub fn herglotz_field(&self) -> Option<&ScalarField> {
        match &self.form {
            DriverForm::BerksonPorta { p, .. } => Some(p),
            DriverForm::Raw { .. } => None,
        }
    }

    /// `p(z, t)` for Berkson-Porta drivers.
    pub fn herglotz_p(&self, z: Complex64, t: f64) -> Option<Result<Complex64, DriverError>> {
        match &self.form {
            DriverForm::BerksonPorta { p, .. } => Some(p.eval(z, t)),
            DriverForm::Raw { .. } => None,
        }
    }

    /// True when the driver has Berkson-Porta form with `tau` identically 0.
    pub fn has_origin_dw(&self) -> bool {
        match &self.form {
            DriverForm::BerksonPorta { tau, .. } => match tau {
                ComplexPath::Constant(v) => *v == ZERO,
                ComplexPath::Samples { values, .. } => values.iter().all(|v| *v == ZERO),
            },
            DriverForm::Raw { .. } => false,
        }
    }

    /// True when the field has no explicit time dependence.
    pub fn is_autonomous(&self) -> bool {
        fn field_autonomous(f: &ScalarField) -> bool {
            match &f.kind {
                FieldKind::Constant(_) => true,
                FieldKind::Expr { expr, .. } => !expr.uses_t(),
                FieldKind::PiecewiseConstant { knots, .. } => knots.is_empty(),
                FieldKind::RadialKernel(p) | FieldKind::ChordalField(p) => {
                    matches!(p, RealPath::Constant(_))
                        || matches!(p, RealPath::Expr(e) if !e.uses_t())
                }
                FieldKind::OriginConjugate { p, .. } => field_autonomous(p),
            }
        }
        match &self.form {
            DriverForm::BerksonPorta { p, tau } => {
                field_autonomous(p) && matches!(tau, ComplexPath::Constant(_))
            }
            DriverForm::Raw { g } => field_autonomous(g),
        }
    }

    /// `G(z, t)`.
    pub fn vector_field(&self, z: Complex64, t: f64) -> Result<Complex64, DriverError> {
        match &self.form {
            DriverForm::BerksonPorta { p, tau } => {
                let tau_t = tau.at(t);
                Ok((z - tau_t) * (tau_t.conj() * z - ONE) * p.eval(z, t)?)
            }
            DriverForm::Raw { g } => g.eval(z, t),
        }
    }

    /// `dG/dz (z, t)`: analytic when available, otherwise a 4th-order
    /// central difference with step 1e-6.
    pub fn vector_field_dz(&self, z: Complex64, t: f64) -> Result<Complex64, DriverError> {
        if self.use_analytic_dz {
            if let Some(v) = self.analytic_dz(z, t)? {
                return Ok(v);
            }
        }
        self.finite_difference_dz(z, t, 1e-6)
    }

    fn analytic_dz(&self, z: Complex64, t: f64) -> Result<Option<Complex64>, DriverError> {
        match &self.form {
            DriverForm::BerksonPorta { p, tau } => {
                let p_dz = match p.eval_dz(z, t)? {
                    Some(v) => v,
                    None => return Ok(None),
                };
                let tau_t = tau.at(t);
                let quad = (z - tau_t) * (tau_t.conj() * z - ONE);
                let quad_dz = (tau_t.conj() * z - ONE) + tau_t.conj() * (z - tau_t);
                Ok(Some(quad_dz * p.eval(z, t)? + quad * p_dz))
            }
            DriverForm::Raw { g } => g.eval_dz(z, t),
        }
    }

    pub(crate) fn finite_difference_dz(
        &self,
        z: Complex64,
        t: f64,
        h: f64,
    ) -> Result<Complex64, DriverError> {
        let f = |x: Complex64| self.vector_field(x, t);
        let hh = Complex64::new(h, 0.0);
        let two = Complex64::new(2.0, 0.0);
        let num = f(z - two * hh)? - 8.0 * f(z - hh)? + 8.0 * f(z + hh)? - f(z + two * hh)?;
        Ok(num / Complex64::new(12.0 * h, 0.0))
    }

    pub fn validate(&self, grid: &ValidationGrid) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut failures = Vec::new();
        let mut per_radius: Vec<(f64, f64)> = Vec::new();
        for &r in &grid.radii {
            let mut max_g = 0.0f64;
            for &th in &grid.angles {
                let z = Complex64::from_polar(r, th);
                for &t in &grid.times {
                    match self.vector_field(z, t) {
                        Ok(g) => max_g = max_g.max(g.norm()),
                        Err(e) => failures.push(format!("G({z}, {t}): {e}")),
                    }
                    if let Some(pv) = self.herglotz_p(z, t) {
                        match pv {
                            Ok(p) => {
                                report.min_re_p =
                                    Some(report.min_re_p.map_or(p.re, |m: f64| m.min(p.re)));
                            }
                            Err(e) => failures.push(format!("p({z}, {t}): {e}")),
                        }
                    }
                    // Derivative cross-check: 4th-order differences at two
                    // steps must agree.
                    if let (Ok(d1), Ok(d2)) = (
                        self.finite_difference_dz(z, t, 1e-6),
                        self.finite_difference_dz(z, t, 2e-6),
                    ) {
                        let rel = (d1 - d2).norm() / (1.0 + d1.norm());
                        if rel > 1e-5 && report.derivative_warning.is_none() {
                            report.derivative_warning = Some(format!(
                                "finite-difference derivative disagrees at z={z}, t={t} (rel {rel:.2e})"
                            ));
                        }
                    }
                }
            }
            per_radius.push((r, max_g));
        }
        for &t in &grid.times {
            if let Some(tau) = self.tau(t) {
                let m = tau.norm();
                report.max_abs_tau = Some(report.max_abs_tau.map_or(m, |x: f64| x.max(m)));
            }
        }
        report.max_abs_g_per_radius = per_radius;
        report.hf3_pass = report.min_re_p.map_or(true, |m| m >= -1e-9);
        report.tau_pass = report.max_abs_tau.map_or(true, |m| m <= 1.0 + 1e-12);
        report.pass = report.hf3_pass && report.tau_pass && failures.is_empty();
        report.failures = failures;
        report
    }
}

#[derive(Debug, Clone)]
pub struct ValidationGrid {
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    pub times: Vec<f64>,
}

impl ValidationGrid {
    /// Radii up to `r_max`, uniform angles, uniform times on `[0, t_max]`.
    pub fn standard(r_max: f64, t_max: f64) -> Self {
        let radii = vec![0.1, 0.3, 0.5, 0.7, r_max];
        let angles = (0..16)
            .map(|k| k as f64 * std::f64::consts::TAU / 16.0)
            .collect();
        let times = (0..9).map(|k| k as f64 * t_max / 8.0).collect();
        Self {
            radii,
            angles,
            times,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub min_re_p: Option<f64>,
    pub max_abs_tau: Option<f64>,
    /// Empirical bound `max |G|` per compact radius.
    pub max_abs_g_per_radius: Vec<(f64, f64)>,
    pub derivative_warning: Option<String>,
    pub hf3_pass: bool,
    pub tau_pass: bool,
    pub pass: bool,
    pub failures: Vec<String>,
}
