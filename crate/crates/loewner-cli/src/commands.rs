//! Command implementations. All tabular output is printed at 17 significant
//! digits with LF line endings and a mandatory header, so reruns with the
//! same config are byte-identical.

use loewner::*;
use num_complex::Complex64;
use serde_json::json;
use std::path::PathBuf;

use crate::config::RunConfig;
use crate::{svg, CliError, CmdOutput, Format};

fn computation(e: impl std::fmt::Display) -> CliError {
    CliError::Computation(e.to_string())
}

pub fn cmd_validate(cfg: &RunConfig, _format: Format) -> Result<CmdOutput, CliError> {
    let driver = cfg.build_driver()?;
    let grid = ValidationGrid::standard(0.95, cfg.grids.times.iter().fold(1.0, |a, &b| b.max(a)));
    let report = driver.validate(&grid);
    let body = serde_json::to_string_pretty(&json!({
        "pass": report.pass,
        "hf3_pass": report.hf3_pass,
        "tau_pass": report.tau_pass,
        "min_re_p": report.min_re_p,
        "max_abs_tau": report.max_abs_tau,
        "max_abs_g_per_radius": report.max_abs_g_per_radius,
        "derivative_warning": report.derivative_warning,
        "failures": report.failures,
    }))
    .expect("report serialization is infallible")
        + "\n";
    let verdict = if report.pass {
        Ok(())
    } else {
        let mut reasons = Vec::new();
        if !report.hf3_pass {
            reasons.push(format!(
                "Re p dips to {:?} (Herglotz condition violated)",
                report.min_re_p
            ));
        }
        if !report.tau_pass {
            reasons.push(format!("|tau| reaches {:?}", report.max_abs_tau));
        }
        reasons.extend(report.failures.iter().cloned());
        Err(CliError::Validation(format!(
            "driver failed validation: {}",
            reasons.join("; ")
        )))
    };
    Ok(CmdOutput { body, verdict })
}

pub fn cmd_evolve(cfg: &RunConfig, format: Format) -> Result<CmdOutput, CliError> {
    let driver = cfg.build_driver()?;
    let ecfg = cfg.evolution_config();
    let s = cfg.grids.s;
    let mut rows = Vec::new();
    for &t in &cfg.grids.times {
        if t < s {
            return Err(CliError::Config(format!(
                "grids.times contains t = {t} < grids.s = {s}"
            )));
        }
        for z in cfg.points() {
            let r = evolve_with_derivative(&driver, z, s, t, &ecfg).map_err(computation)?;
            let v = r.v.expect("derivative requested");
            rows.push((s, t, z, r.w, v));
        }
    }
    let body = match format {
        Format::Csv => {
            let mut out = String::from("s,t,z_re,z_im,w_re,w_im,dw_re,dw_im\n");
            for (s, t, z, w, v) in rows {
                out.push_str(&format!(
                    "{s:.16e},{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    z.re, z.im, w.re, w.im, v.re, v.im
                ));
            }
            out
        }
        Format::Json => {
            let items: Vec<_> = rows
                .iter()
                .map(|(s, t, z, w, v)| {
                    json!({
                        "s": s, "t": t,
                        "z_re": z.re, "z_im": z.im,
                        "w_re": w.re, "w_im": w.im,
                        "dw_re": v.re, "dw_im": v.im,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&items).expect("serialization is infallible") + "\n"
        }
    };
    Ok(CmdOutput::ok(body))
}

/// Frame-cache location for this run, if LOEWNER_CACHE_DIR is set.
fn cache_path(cfg: &RunConfig) -> Option<PathBuf> {
    std::env::var_os("LOEWNER_CACHE_DIR")
        .map(|dir| PathBuf::from(dir).join(format!("frames-{}.csv", cfg.cache_key())))
}

fn load_cached_frames(chain: &StandardChain, path: &PathBuf) {
    if let Ok(file) = std::fs::File::open(path) {
        if let Ok(frames) = read_frames_csv(std::io::BufReader::new(file)) {
            chain.preload_frames(&frames);
        }
        // An unreadable or stale cache is ignored, never fatal.
    }
}

fn store_frames(chain: &StandardChain, path: &PathBuf) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Computation(format!("cannot create cache dir: {e}")))?;
    }
    let mut buf = Vec::new();
    write_frames_csv(&chain.frames_snapshot(), &mut buf)
        .map_err(|e| CliError::Computation(format!("cannot serialize frames: {e}")))?;
    // Atomic publish: write a temporary file in the same directory, then
    // rename over the target.
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, &buf)
        .map_err(|e| CliError::Computation(format!("cannot write cache: {e}")))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Computation(format!("cannot publish cache: {e}")))?;
    Ok(())
}

pub fn cmd_chain(cfg: &RunConfig, format: Format) -> Result<CmdOutput, CliError> {
    let driver = cfg.build_driver()?;
    let ecfg = cfg.evolution_config();
    let chain = StandardChain::new(&driver, ecfg, cfg.tolerances.chain_tol, cfg.tolerances.t_max);
    let cache = cache_path(cfg);
    if let Some(path) = &cache {
        load_cached_frames(&chain, path);
    }
    let mut rows = Vec::new();
    for &s in &cfg.grids.times {
        for z in cfg.points() {
            let v = chain.value(s, z).map_err(computation)?;
            rows.push(v);
        }
    }
    if let Some(path) = &cache {
        store_frames(&chain, path)?;
    }
    let body = match format {
        Format::Csv => {
            let mut out = String::from("s,z_re,z_im,f_re,f_im,horizon,tail_est\n");
            for v in rows {
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    v.s, v.z.re, v.z.im, v.f.re, v.f.im, v.horizon, v.tail_estimate
                ));
            }
            out
        }
        Format::Json => {
            let items: Vec<_> = rows
                .iter()
                .map(|v| {
                    json!({
                        "s": v.s,
                        "z_re": v.z.re, "z_im": v.z.im,
                        "f_re": v.f.re, "f_im": v.f.im,
                        "horizon": v.horizon, "tail_est": v.tail_estimate,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&items).expect("serialization is infallible") + "\n"
        }
    };
    Ok(CmdOutput::ok(body))
}

pub fn cmd_beta(cfg: &RunConfig, format: Format) -> Result<CmdOutput, CliError> {
    let driver = cfg.build_driver()?;
    let ecfg = cfg.evolution_config();
    let chain = StandardChain::new(&driver, ecfg, cfg.tolerances.chain_tol, cfg.tolerances.t_max);
    let cache = cache_path(cfg);
    if let Some(path) = &cache {
        load_cached_frames(&chain, path);
    }
    let mut rows = Vec::new();
    for &t in &cfg.grids.times {
        let frame = chain.frame(t).map_err(computation)?;
        rows.push((t, frame.beta));
    }
    if let Some(path) = &cache {
        store_frames(&chain, path)?;
    }
    let body = match format {
        Format::Csv => {
            let mut out = String::from("t,beta\n");
            for (t, beta) in rows {
                out.push_str(&format!("{t:.16e},{beta:.16e}\n"));
            }
            out
        }
        Format::Json => {
            let limit = beta_limit(&driver, cfg.tolerances.chain_tol, cfg.tolerances.t_max, &ecfg)
                .map_err(computation)?;
            serde_json::to_string_pretty(&json!({
                "samples": rows.iter().map(|(t, b)| json!({"t": t, "beta": b})).collect::<Vec<_>>(),
                "limit": {
                    "beta": limit.beta,
                    "converged": limit.converged,
                    "horizon": limit.horizon,
                },
            }))
            .expect("serialization is infallible")
                + "\n"
        }
    };
    Ok(CmdOutput::ok(body))
}

pub fn cmd_classify(cfg: &RunConfig, _format: Format) -> Result<CmdOutput, CliError> {
    let driver = cfg.build_driver()?;
    let ecfg = cfg.evolution_config();
    let cl = classify(&driver, cfg.tolerances.chain_tol, cfg.tolerances.t_max, &ecfg)
        .map_err(computation)?;
    let verdict = match cl.verdict {
        Verdict::UniqueChain => "UniqueChain",
        Verdict::NonUnique => "NonUnique",
        Verdict::Unknown => "Unknown",
    };
    let omega_radius = match cl.omega {
        Some(Omega::DiskOfRadius(r)) => Some(r),
        _ => None,
    };
    let body = serde_json::to_string_pretty(&json!({
        "verdict": verdict,
        "beta_limit": cl.beta_limit,
        "omega": match cl.omega {
            Some(Omega::Plane) => Some("Plane"),
            Some(Omega::DiskOfRadius(_)) => Some("DiskOfRadius"),
            None => None,
        },
        "omega_radius": omega_radius,
        "automorphism_threshold": cl.automorphism_threshold,
        "diagnostics": cl.diagnostics,
    }))
    .expect("serialization is infallible")
        + "\n";
    Ok(CmdOutput::ok(body))
}

pub fn cmd_semigroup(cfg: &RunConfig, _format: Format) -> Result<CmdOutput, CliError> {
    let model = cfg.build_semigroup()?;
    let ecfg = cfg.evolution_config();
    let dw = classify_dw(&model, 0.02, &ecfg).map_err(computation)?;
    let body = serde_json::to_string_pretty(&json!({
        "kind": format!("{:?}", dw.kind),
        "dw_re": dw.dw_point.re,
        "dw_im": dw.dw_point.im,
        "derivative_estimate": dw.derivative_estimate,
    }))
    .expect("serialization is infallible")
        + "\n";
    Ok(CmdOutput::ok(body))
}

pub fn cmd_verify(cfg: &RunConfig, _format: Format) -> Result<CmdOutput, CliError> {
    let driver = cfg.build_driver()?;
    let ecfg = cfg.evolution_config();
    let times = &cfg.grids.times;
    let points = cfg.points();
    let chain = StandardChain::new(&driver, ecfg, cfg.tolerances.chain_tol, cfg.tolerances.t_max);
    let frozen = chain.frozen(16.0);

    let mut reports = vec![
        check_ef_axioms(&driver, times, &points, 1e-8, &ecfg),
        check_chain_equation(&driver, &chain, times, &points, 1e-6, &ecfg),
        check_lk_pde(&driver, &frozen, &[0.3, 0.7, 1.1], &points, 1e-5),
        check_beta_monotone(&driver, times, &points, &ecfg),
        check_growth_bound(&chain, times, &cfg.grids.radii, 1e-6),
    ];
    let t_last = times.last().copied().unwrap_or(1.0);
    match check_univalence(|z| frozen.chain_value(t_last, z), 0.9, 256) {
        Ok(r) => reports.push(r),
        Err(e) => return Err(computation(e)),
    }

    let all_pass = reports.iter().all(|r| r.pass);
    let values: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| serde_json::from_str(&r.to_json()).expect("reports round-trip"))
        .collect();
    let body = serde_json::to_string_pretty(&json!({
        "pass": all_pass,
        "checks": values,
    }))
    .expect("serialization is infallible")
        + "\n";
    let verdict = if all_pass {
        Ok(())
    } else {
        Err(CliError::Validation("verification checks failed".into()))
    };
    Ok(CmdOutput { body, verdict })
}

pub fn cmd_plot(cfg: &RunConfig, _format: Format) -> Result<CmdOutput, CliError> {
    let driver = cfg.build_driver()?;
    let ecfg = cfg.evolution_config();
    const SAMPLES: usize = 512;
    let mut curves: Vec<Vec<Complex64>> = Vec::new();
    match cfg.grids.plot_kind.as_str() {
        "trajectory" => {
            let t_end = cfg.grids.times.iter().fold(cfg.grids.s, |a, &b| b.max(a));
            for z in cfg.points() {
                let samples = trajectory(&driver, z, cfg.grids.s, t_end, SAMPLES, &ecfg)
                    .map_err(computation)?;
                curves.push(samples.into_iter().map(|(_, w)| w).collect());
            }
        }
        "circles" => {
            let chain = StandardChain::new(
                &driver,
                ecfg,
                cfg.tolerances.chain_tol,
                cfg.tolerances.t_max,
            );
            let r = cfg.grids.plot_radius;
            for &t in &cfg.grids.times {
                let mut curve = Vec::with_capacity(SAMPLES);
                for k in 0..SAMPLES {
                    let theta = k as f64 * std::f64::consts::TAU / (SAMPLES - 1) as f64;
                    let z = Complex64::from_polar(r, theta);
                    curve.push(chain.value(t, z).map_err(computation)?.f);
                }
                curves.push(curve);
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "grids.plot_kind must be trajectory or circles, got `{other}`"
            )))
        }
    }
    let body = svg::render(&curves);
    // The plot target may come from output.plot; --out still wins in main.
    if let Some(path) = &cfg.output.plot {
        std::fs::write(path, &body)
            .map_err(|e| CliError::Computation(format!("cannot write {path}: {e}")))?;
        return Ok(CmdOutput::ok(String::new()));
    }
    Ok(CmdOutput::ok(body))
}
