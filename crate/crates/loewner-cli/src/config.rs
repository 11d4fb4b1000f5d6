//! Run configuration: a TOML file with one table per concern
//! (`driver`, `tolerances`, `grids`, `output`).

use loewner::{
    ComplexPath, Expr, HerglotzDriver, RealPath, ScalarField, SemigroupModel,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub driver: DriverConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DriverConfig {
    pub kind: String,
    // kind = "constant"
    pub c_re: Option<f64>,
    pub c_im: Option<f64>,
    // kind = "constant" | "bp" | "sampled"
    pub tau_re: Option<f64>,
    pub tau_im: Option<f64>,
    // kind = "radial": theta(t) as an expression or as samples
    pub theta: Option<String>,
    pub theta_times: Option<Vec<f64>>,
    pub theta_values: Option<Vec<f64>>,
    // kind = "chordal": xi(t) as an expression or as samples
    pub xi: Option<String>,
    pub xi_times: Option<Vec<f64>>,
    pub xi_values: Option<Vec<f64>>,
    // kind = "bp": Herglotz function p(z, t)
    pub p: Option<String>,
    // kind = "sampled": piecewise-constant p with knots at `times`
    // (`values_*` has one entry more than `times`)
    pub times: Option<Vec<f64>>,
    pub values_re: Option<Vec<f64>>,
    pub values_im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub chain_tol: f64,
    pub t_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            chain_tol: 1e-7,
            t_max: 8192.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    /// Radii of the evaluation points.
    pub radii: Vec<f64>,
    /// Number of uniformly spaced angles per radius.
    pub angles: usize,
    /// Time grid: `t` values for `evolve`/`beta`/`plot`, `s` values for `chain`.
    pub times: Vec<f64>,
    /// Start time for `evolve` and trajectory plots.
    pub s: f64,
    /// `plot` curve family: "trajectory" or "circles".
    pub plot_kind: String,
    /// Circle radius for "circles" plots.
    pub plot_radius: f64,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            radii: vec![0.3, 0.5],
            angles: 4,
            times: vec![0.0, 0.5, 1.0],
            s: 0.0,
            plot_kind: "trajectory".into(),
            plot_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    /// "csv" (default) or "json"; structured commands always emit JSON.
    pub format: Option<String>,
    /// Output file; stdout when absent.
    pub path: Option<String>,
    /// SVG target for the `plot` command.
    pub plot: Option<String>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("rel_tol", t.rel_tol),
            ("abs_tol", t.abs_tol),
            ("max_step", t.max_step),
            ("chain_tol", t.chain_tol),
            ("t_max", t.t_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!(
                    "tolerances.{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.grids.radii.is_empty() || self.grids.times.is_empty() || self.grids.angles == 0 {
            return Err(CliError::Config(
                "grids.radii, grids.times and grids.angles must be non-empty".into(),
            ));
        }
        Ok(())
    }

    pub fn evolution_config(&self) -> loewner::EvolutionConfig {
        loewner::EvolutionConfig {
            rel_tol: self.tolerances.rel_tol,
            abs_tol: self.tolerances.abs_tol,
            max_step: self.tolerances.max_step,
            ..loewner::EvolutionConfig::default()
        }
    }

    /// Evaluation points: `radii x angles`, uniformly spaced angles.
    pub fn points(&self) -> Vec<Complex64> {
        let mut pts = Vec::new();
        for &r in &self.grids.radii {
            for k in 0..self.grids.angles {
                let theta = k as f64 * std::f64::consts::TAU / self.grids.angles as f64;
                pts.push(Complex64::from_polar(r, theta));
            }
        }
        pts
    }

    pub fn build_driver(&self) -> Result<HerglotzDriver, CliError> {
        let d = &self.driver;
        let get = |name: &str, v: &Option<f64>| -> Result<f64, CliError> {
            v.ok_or_else(|| CliError::Config(format!("driver.{name} is required for kind `{}`", d.kind)))
        };
        let tau = Complex64::new(d.tau_re.unwrap_or(0.0), d.tau_im.unwrap_or(0.0));
        match d.kind.as_str() {
            "constant" => {
                let c = Complex64::new(get("c_re", &d.c_re)?, d.c_im.unwrap_or(0.0));
                HerglotzDriver::constant(c, tau)
                    .map_err(|e| CliError::Validation(e.to_string()))
            }
            "radial" => Ok(HerglotzDriver::radial(real_path(
                "theta", &d.theta, &d.theta_times, &d.theta_values,
            )?)),
            "chordal" => Ok(HerglotzDriver::chordal(real_path(
                "xi", &d.xi, &d.xi_times, &d.xi_values,
            )?)),
            "bp" | "sampled" => {
                let (p, tau_path) = self.berkson_porta_data()?;
                Ok(HerglotzDriver::berkson_porta(p, tau_path))
            }
            other => Err(CliError::Config(format!(
                "unknown driver.kind `{other}` (expected constant|radial|chordal|bp|sampled)"
            ))),
        }
    }

    /// Herglotz data `(p, tau)` for kinds that expose it (`constant`, `bp`,
    /// `sampled`); used by `build_driver` and the semigroup command.
    pub fn berkson_porta_data(&self) -> Result<(ScalarField, ComplexPath), CliError> {
        let d = &self.driver;
        let tau = Complex64::new(d.tau_re.unwrap_or(0.0), d.tau_im.unwrap_or(0.0));
        let tau_path = ComplexPath::constant(tau)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let p = match d.kind.as_str() {
            "constant" => {
                let c = Complex64::new(
                    d.c_re.ok_or_else(|| CliError::Config("driver.c_re is required".into()))?,
                    d.c_im.unwrap_or(0.0),
                );
                ScalarField::constant(c)
            }
            "bp" => {
                let src = d
                    .p
                    .as_deref()
                    .ok_or_else(|| CliError::Config("driver.p is required for kind `bp`".into()))?;
                let expr = Expr::parse(src)
                    .map_err(|e| CliError::Config(format!("driver.p: {e}")))?;
                ScalarField::expression(expr)
            }
            "sampled" => {
                let times = d
                    .times
                    .clone()
                    .ok_or_else(|| CliError::Config("driver.times is required for kind `sampled`".into()))?;
                let re = d
                    .values_re
                    .clone()
                    .ok_or_else(|| CliError::Config("driver.values_re is required for kind `sampled`".into()))?;
                let im = d.values_im.clone().unwrap_or_else(|| vec![0.0; re.len()]);
                if im.len() != re.len() {
                    return Err(CliError::Config(
                        "driver.values_re and driver.values_im must have equal length".into(),
                    ));
                }
                let values: Vec<Complex64> = re
                    .iter()
                    .zip(&im)
                    .map(|(&a, &b)| Complex64::new(a, b))
                    .collect();
                ScalarField::piecewise_constant(times, values)
                    .map_err(|e| CliError::Config(e.to_string()))?
            }
            other => {
                return Err(CliError::Config(format!(
                    "driver.kind `{other}` carries no Herglotz data (p, tau)"
                )))
            }
        };
        Ok((p, tau_path))
    }

    pub fn build_semigroup(&self) -> Result<SemigroupModel, CliError> {
        let (p, tau_path) = self.berkson_porta_data()?;
        let tau = match tau_path {
            ComplexPath::Constant(tau) => tau,
            _ => {
                return Err(CliError::Config(
                    "semigroup models need a constant Denjoy-Wolff point".into(),
                ))
            }
        };
        SemigroupModel::new(p, tau).map_err(|e| CliError::Validation(e.to_string()))
    }

    /// Stable fingerprint of everything the frame cache depends on.
    pub fn cache_key(&self) -> String {
        let canon = format!("{:?}|{:?}", self.driver, (
            self.tolerances.rel_tol,
            self.tolerances.abs_tol,
            self.tolerances.max_step,
        ));
        // FNV-1a; std hashers are randomized per process and unusable for
        // on-disk keys.
        let mut h: u64 = 0xcbf29ce484222325;
        for b in canon.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

fn real_path(
    name: &str,
    expr: &Option<String>,
    times: &Option<Vec<f64>>,
    values: &Option<Vec<f64>>,
) -> Result<RealPath, CliError> {
    match (expr, times, values) {
        (Some(src), None, None) => {
            let e = Expr::parse(src).map_err(|e| CliError::Config(format!("driver.{name}: {e}")))?;
            if let Ok(v) = e.evaluate(Complex64::new(0.0, 0.0), 0.0) {
                // A constant expression is representable exactly.
                if !e.uses_t() && v.im == 0.0 {
                    return Ok(RealPath::Constant(v.re));
                }
            }
            Ok(RealPath::Expr(e))
        }
        (None, Some(t), Some(v)) => RealPath::samples(t.clone(), v.clone())
            .map_err(|e| CliError::Config(e.to_string())),
        _ => Err(CliError::Config(format!(
            "driver.{name} needs either an expression or matching {name}_times/{name}_values"
        ))),
    }
}
