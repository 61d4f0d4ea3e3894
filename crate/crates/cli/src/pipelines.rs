//! The `run` pipelines: generate the configured ensemble, execute the
//! selected analyses, collect assertions and emit artifacts.

use crate::config::{ExperimentConfig, NormConfig, PipelineKind};
use crate::report::{Assertion, ReportHeader, RunReport, Status};
use anyhow::Context;
use factorable::bounds::{entropy_bound_table, kr_factor_bound};
use factorable::factorize::{build_factorization, heavy_tail_factorization, rectangle_factorization, FactorizationResult};
use factorable::fields::{format_float, p_moment_blowup, Coords, FieldEnsemble};
use factorable::metric::{natural_distance, DiscreteMeasure, DiscreteMetricSpace, SymMatrix};
use factorable::modulus::{NormSpec, PairSweep, RectGrid};
use factorable::orlicz::PsiFunction;
use factorable::Error;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Tolerances pinned for the run-report assertions (the same values the
/// acceptance suite uses).
pub const PATHWISE_REL_TOL: f64 = 1e-12;
pub const TAU_NORM_CAP: f64 = 1.02;
pub const TAU0_WINDOW: (f64, f64) = (0.98, 1.02);
pub const V_CAP: f64 = 1.05;
pub const Z_MEAN_CAP: f64 = 1.05;

pub struct RunOutput {
    pub report: RunReport,
    pub files: Vec<PathBuf>,
}

fn line_space(ensemble: &FieldEnsemble) -> Option<DiscreteMetricSpace> {
    match ensemble.coords() {
        Coords::Line(c) => DiscreteMetricSpace::from_line(c).ok(),
        _ => None,
    }
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let start = Instant::now();
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut files = Vec::new();
    let mut assertions: Vec<Assertion> = Vec::new();
    let mut results = serde_json::Map::new();

    let ensemble = cfg.generator.generate(cfg.seed)?;
    let norm = cfg.norm.to_norm_spec()?;
    let plan = cfg.plan.to_plan()?;

    for pipeline in &cfg.pipelines {
        match pipeline {
            PipelineKind::Factorize => {
                let Some(space) = line_space(&ensemble) else {
                    assertions.push(Assertion::skipped("factorize", "needs a line-grid generator"));
                    continue;
                };
                match build_factorization(&ensemble, &space, &plan, &norm, &cfg.delta_grid) {
                    Ok(res) => {
                        emit_factorization(&res, &out_dir, &mut files)?;
                        push_factorization_assertions("factorize", &res, &norm, &mut assertions);
                        results.insert("factorize".into(), res.to_json());
                    }
                    Err(Error::DegenerateField(msg)) => {
                        assertions.push(Assertion::fail("factorize", format!("degenerate field: {msg}")));
                    }
                    Err(e) => return Err(e).context("factorize pipeline"),
                }
            }
            PipelineKind::EntropyBound => {
                let out = entropy_pipeline(cfg, &ensemble, &out_dir, &mut files, &mut assertions)?;
                if let Some(v) = out {
                    results.insert("entropy_bound".into(), v);
                }
            }
            PipelineKind::KrBound => {
                let out = kr_pipeline(cfg, &ensemble, &mut assertions)?;
                if let Some(v) = out {
                    results.insert("kr_bound".into(), v);
                }
            }
            PipelineKind::HeavyTail => {
                let out = heavy_tail_pipeline(cfg, &ensemble, &out_dir, &mut files, &mut assertions)?;
                if let Some(v) = out {
                    results.insert("heavy_tail".into(), v);
                }
            }
            PipelineKind::Rectangle => {
                let out = rectangle_pipeline(cfg, &ensemble, &mut assertions)?;
                if let Some(v) = out {
                    results.insert("rectangle".into(), v);
                }
            }
        }
    }

    let report = RunReport {
        header: ReportHeader {
            generated_at: crate::report::timestamp_now(),
            wall_clock_s: start.elapsed().as_secs_f64(),
        },
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg)?,
        results: serde_json::Value::Object(results),
        assertions,
    };
    let report_path = out_dir.join("report.json");
    crate::report::write_json(&report_path, &report)?;
    files.push(report_path);
    Ok(RunOutput { report, files })
}

fn emit_factorization(res: &FactorizationResult, out_dir: &Path, files: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    let mut g_csv = String::from("delta,g\n");
    for &(d, g) in &res.g_knots {
        g_csv.push_str(&format!("{},{}\n", format_float(d), format_float(g)));
    }
    let g_path = out_dir.join("g_knots.csv");
    crate::report::atomic_write(&g_path, g_csv.as_bytes())?;
    files.push(g_path);

    let mut tau_csv = Vec::new();
    res.write_tau_csv(&mut tau_csv)?;
    let tau_path = out_dir.join("tau_samples.csv");
    crate::report::atomic_write(&tau_path, &tau_csv)?;
    files.push(tau_path);
    Ok(())
}

fn push_factorization_assertions(
    prefix: &str,
    res: &FactorizationResult,
    norm: &NormSpec,
    assertions: &mut Vec<Assertion>,
) {
    let violations = res.pathwise_violations(PATHWISE_REL_TOL);
    assertions.push(Assertion::check(
        format!("{prefix}/pathwise-knots"),
        violations == 0,
        format!("{violations} violations at relative tolerance {PATHWISE_REL_TOL:e}"),
    ));
    assertions.push(Assertion::check(
        format!("{prefix}/tau-norm"),
        res.tau_norm <= TAU_NORM_CAP,
        format!("||tau|| = {:.6} (cap {TAU_NORM_CAP})", res.tau_norm),
    ));
    let tau0_norm = norm.norm(&res.tau0).unwrap_or(f64::NAN);
    assertions.push(Assertion::check(
        format!("{prefix}/tau0-normalized"),
        tau0_norm >= TAU0_WINDOW.0 && tau0_norm <= TAU0_WINDOW.1,
        format!("||tau0|| = {tau0_norm:.6} (window [{}, {}])", TAU0_WINDOW.0, TAU0_WINDOW.1),
    ));
}

fn entropy_pipeline(
    cfg: &ExperimentConfig,
    ensemble: &FieldEnsemble,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
    assertions: &mut Vec<Assertion>,
) -> anyhow::Result<Option<serde_json::Value>> {
    if line_space(ensemble).is_none() {
        assertions.push(Assertion::skipped("entropy-bound", "needs a line-grid generator"));
        return Ok(None);
    }
    // GLS norm from the config when given, else the degenerate psi_(2)
    let (psi, p_grid) = match &cfg.norm {
        NormConfig::Gls { psi, p_grid } => (psi.to_psi()?, p_grid.clone()),
        _ => (PsiFunction::degenerate(2.0)?, vec![2.0]),
    };
    let d_space = match natural_distance(ensemble, &psi, &p_grid) {
        Ok(s) => s,
        Err(Error::DegenerateField(msg)) => {
            assertions.push(Assertion::fail("entropy-bound", format!("degenerate field: {msg}")));
            return Ok(None);
        }
        Err(e) => return Err(e).context("entropy-bound pipeline"),
    };
    let diam = d_space.diam();
    if !(diam > 0.0) {
        assertions.push(Assertion::fail("entropy-bound", "natural distance collapsed to a point"));
        return Ok(None);
    }
    let d_min = d_space.min_positive_distance().unwrap_or(diam);
    let deltas: Vec<f64> = (0..20)
        .map(|k| {
            let t = k as f64 / 19.0;
            (d_min.ln() * (1.0 - t) + (diam / 2.0).ln() * t).exp()
        })
        .collect();
    let table = entropy_bound_table(&d_space, &psi, diam / 2.0, factorable::bounds::ENTROPY_QUAD_NODES)?;
    let sweep = PairSweep::new(&d_space);
    let matrix = sweep.moduli_matrix(ensemble, &deltas);
    let m = ensemble.realizations();
    let norm = NormSpec::Gls { psi: psi.clone(), p_grid };
    let mut rows = Vec::new();
    let mut dominated = true;
    let mut col = vec![0.0; m];
    for (k, &delta) in deltas.iter().enumerate() {
        for r in 0..m {
            col[r] = matrix[r * deltas.len() + k];
        }
        let empirical = norm.norm(&col)?;
        let bound = table.bound(delta)?;
        dominated &= bound >= empirical;
        rows.push((delta, empirical, bound));
    }
    let mut csv = String::from("delta,empirical,bound\n");
    for (d, e, b) in &rows {
        csv.push_str(&format!("{},{},{}\n", format_float(*d), format_float(*e), format_float(*b)));
    }
    let path = out_dir.join("bounds.csv");
    crate::report::atomic_write(&path, csv.as_bytes())?;
    files.push(path);
    assertions.push(Assertion::check(
        "entropy-bound/dominates",
        dominated,
        "entropy integral bound >= empirical GLS modulus norm at every grid delta",
    ));
    Ok(Some(json!({
        "deltas": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
        "empirical": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
        "bound": rows.iter().map(|r| r.2).collect::<Vec<_>>(),
    })))
}

/// Calibrated Kwapień–Rosiński run: d(s, t) = c·√|t − s| with c fitted so
/// the p-moment audit holds, θ = 3 < p = 4, uniform measure.
fn kr_pipeline(
    _cfg: &ExperimentConfig,
    ensemble: &FieldEnsemble,
    assertions: &mut Vec<Assertion>,
) -> anyhow::Result<Option<serde_json::Value>> {
    let Coords::Line(coords) = ensemble.coords() else {
        assertions.push(Assertion::skipped("kr-bound", "needs a line-grid generator"));
        return Ok(None);
    };
    let coords = coords.clone();
    let n = coords.len();
    let m = ensemble.realizations();
    let (p, theta_reg) = (4.0, 3.0);
    // calibrate c = max over pairs of |increment|_p / sqrt(gap)
    let mut c = 0.0_f64;
    let mut inc = vec![0.0; m];
    for i in 0..n {
        for j in (i + 1)..n {
            for (r, row) in ensemble.rows().enumerate() {
                inc[r] = row[i] - row[j];
            }
            let moment = factorable::orlicz::p_moment(&inc, p)?;
            let gap = (coords[j] - coords[i]).abs();
            if gap > 0.0 {
                c = c.max(moment / gap.sqrt());
            }
        }
    }
    if !(c > 0.0) {
        assertions.push(Assertion::fail("kr-bound", "degenerate field: calibration found no increments"));
        return Ok(None);
    }
    c *= 1.0 + 1e-9;
    let mut dist = SymMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            dist.set_sym(i, j, c * (coords[j] - coords[i]).abs().sqrt());
        }
    }
    let space = DiscreteMetricSpace::new(
        (0..n).map(|i| i.to_string()).collect(),
        Some(coords.iter().map(|&x| vec![x]).collect()),
        dist,
    )?;
    let measure = DiscreteMeasure::uniform(n);
    let r_grid: Vec<f64> = (1..=200).map(|k| k as f64 / 200.0).collect();
    match kr_factor_bound(ensemble, &space, &measure, p, theta_reg, None, &r_grid) {
        Ok(rep) => {
            assertions.push(Assertion::check(
                "kr-bound/z-mean",
                rep.z_mean <= Z_MEAN_CAP,
                format!("empirical mean of Z-hat = {:.3e} (cap {Z_MEAN_CAP})", rep.z_mean),
            ));
            Ok(Some(json!({
                "p": p, "theta_reg": theta_reg, "c_calibrated": c,
                "c_theta": rep.c_theta, "z_mean": rep.z_mean,
            })))
        }
        Err(Error::Precondition(msg)) => {
            assertions.push(Assertion::fail("kr-bound", format!("precondition audit: {msg}")));
            Ok(None)
        }
        Err(e) => Err(e).context("kr-bound pipeline"),
    }
}

fn heavy_tail_pipeline(
    cfg: &ExperimentConfig,
    ensemble: &FieldEnsemble,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
    assertions: &mut Vec<Assertion>,
) -> anyhow::Result<Option<serde_json::Value>> {
    let Some(space) = line_space(ensemble) else {
        assertions.push(Assertion::skipped("heavy-tail", "needs a line-grid generator"));
        return Ok(None);
    };
    let m = ensemble.realizations();
    let prefixes: Vec<usize> = [m / 100, m / 10, m].into_iter().filter(|&k| k >= 1).collect();
    let diag = p_moment_blowup(ensemble, cfg.heavy_tail.p, &prefixes)?;
    assertions.push(Assertion::check(
        "heavy-tail/blow-up-diagnostic",
        diag.fires,
        format!(
            "|eta|_{} prefix estimates {:?} (fires = strictly increasing with 10x rise)",
            cfg.heavy_tail.p, diag.estimates
        ),
    ));
    let norm = cfg.norm.to_norm_spec()?;
    let plan = cfg.plan.to_plan()?;
    match heavy_tail_factorization(ensemble, &space, cfg.heavy_tail.m, &plan, &norm, &cfg.delta_grid) {
        Ok(res) => {
            emit_factorization(&res, out_dir, files)?;
            push_factorization_assertions("heavy-tail", &res, &norm, assertions);
            Ok(Some(res.to_json()))
        }
        Err(Error::DegenerateField(msg)) => {
            assertions.push(Assertion::fail("heavy-tail", format!("degenerate field: {msg}")));
            Ok(None)
        }
        Err(e) => Err(e).context("heavy-tail pipeline"),
    }
}

fn rectangle_pipeline(
    cfg: &ExperimentConfig,
    ensemble: &FieldEnsemble,
    assertions: &mut Vec<Assertion>,
) -> anyhow::Result<Option<serde_json::Value>> {
    let Coords::Rect(_) = ensemble.coords() else {
        assertions.push(Assertion::skipped("rectangle", "needs the sheet generator"));
        return Ok(None);
    };
    let grid = RectGrid::from_coords(ensemble.coords())?;
    let NormSpec::Luxemburg(phi) = cfg.norm.to_norm_spec()? else {
        assertions.push(Assertion::skipped("rectangle", "rectangle norms are Luxemburg-only"));
        return Ok(None);
    };
    let plan = cfg.plan.to_plan()?;
    let direction = vec![1.0; grid.dims()];
    match rectangle_factorization(ensemble, &grid, &direction, &plan, &phi, 256) {
        Ok(res) => {
            let violations = res.pathwise_violations(PATHWISE_REL_TOL);
            assertions.push(Assertion::check(
                "rectangle/pathwise-knots",
                violations == 0,
                format!("{violations} violations along the diagonal path"),
            ));
            Ok(Some(res.to_json()))
        }
        Err(Error::DegenerateField(msg)) => {
            assertions.push(Assertion::fail("rectangle", format!("degenerate field: {msg}")));
            Ok(None)
        }
        Err(e) => Err(e).context("rectangle pipeline"),
    }
}

/// `simulate` subcommand: persist the configured ensemble.
pub fn simulate(cfg: &ExperimentConfig, csv: bool) -> anyhow::Result<Vec<PathBuf>> {
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)?;
    let ensemble = cfg.generator.generate(cfg.seed)?;
    let bin = out_dir.join("ensemble.bin");
    let meta = out_dir.join("ensemble.meta.json");
    // the matrix payload itself is written through a temp file as well
    let tmp_bin = out_dir.join("ensemble.bin.tmp");
    let tmp_meta = out_dir.join("ensemble.meta.json.tmp");
    ensemble.write_bin(&tmp_bin, &tmp_meta)?;
    std::fs::rename(&tmp_bin, &bin)?;
    std::fs::rename(&tmp_meta, &meta)?;
    let mut files = vec![bin, meta];
    if csv {
        let mut buf = Vec::new();
        ensemble.write_csv(&mut buf)?;
        let path = out_dir.join("ensemble.csv");
        crate::report::atomic_write(&path, &buf)?;
        files.push(path);
    }
    Ok(files)
}

/// `export` subcommand: binary ensemble container to CSV.
pub fn export(bin: &Path, meta: &Path, out: &Path) -> anyhow::Result<()> {
    let ensemble = FieldEnsemble::read_bin(bin, meta)?;
    let mut buf = Vec::new();
    ensemble.write_csv(&mut buf)?;
    crate::report::atomic_write(out, &buf)?;
    Ok(())
}

pub fn exit_code(report: &RunReport) -> i32 {
    if report.assertions.iter().any(|a| a.status == Status::Fail) {
        1
    } else {
        0
    }
}
