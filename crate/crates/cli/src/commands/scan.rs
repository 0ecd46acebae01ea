use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use edgephase::solvers::{power_iterate, vumps, PowerOptions, VumpsOptions};
use edgephase::{build_bulk_mpo, build_lower_boundary_imps, diagnostics, MeasurementAngle, SolverKind};
use serde::{Deserialize, Serialize};

use super::{strict_check, Ctx, Failure};
use crate::config::{Config, SolverChoice};
use crate::output::{
    header_lines, header_value, read_scan, write_json, write_table, PointKey, ScanRecord, ScanWriter, FORMAT_VERSION,
};
use crate::plot;
use crate::pool::run_ordered;

/// Per-point JSON document.
#[derive(Clone, Debug, Serialize)]
pub struct PointDoc {
    pub format_version: String,
    pub seed: u64,
    pub config: Config,
    pub record: ScanRecord,
    /// Solver did not converge; the diagnostics are not final.
    pub provisional: bool,
    pub residual: f64,
    /// `[re, im]` of the per-site eigenvalue of the rescaled row operator.
    pub per_site_eigenvalue: [f64; 2],
    /// Same for the unrescaled contraction (times `2^{-1/2}`).
    pub physical_eigenvalue: [f64; 2],
    pub norm_growth: f64,
    /// Schmidt values `λ`, descending, `Σλ² = 1`.
    pub schmidt_values: Vec<f64>,
    /// `λ²`.
    pub schmidt_probabilities: Vec<f64>,
    /// Leading transfer eigenvalues `[re, im]`, scaled so the first has modulus 1.
    pub transfer_eigenvalues: Vec<[f64; 2]>,
    /// `null` when infinite.
    pub xi_x: Option<f64>,
    pub two_fold: bool,
    pub ee_history: Vec<f64>,
}

pub fn solver_kinds(choice: SolverChoice) -> Vec<SolverKind> {
    match choice {
        SolverChoice::Power => vec![SolverKind::Power],
        SolverChoice::Vumps => vec![SolverKind::Vumps],
        SolverChoice::Both => vec![SolverKind::Power, SolverKind::Vumps],
    }
}

/// Solver settings that must not change between a run and its resumption.
fn solver_settings(cfg: &Config) -> String {
    serde_json::json!({
        "seed": cfg.seed,
        "power": cfg.power,
        "vumps": cfg.vumps,
        "diagnostics": cfg.diagnostics,
    })
    .to_string()
}

pub fn compute_point(cfg: &Config, theta: f64, chi: usize, solver: SolverKind) -> Result<PointDoc, Failure> {
    let start = Instant::now();
    let angle = MeasurementAngle::new(theta)?;
    let h = build_bulk_mpo(angle);
    let fp = match solver {
        SolverKind::Power => power_iterate(
            &h,
            &build_lower_boundary_imps(angle),
            &PowerOptions { chi, tol: cfg.power.tol, max_layers: cfg.power.max_layers },
        )?,
        SolverKind::Vumps => vumps(
            &h,
            &VumpsOptions { tol: cfg.vumps.tol, max_iter: cfg.vumps.max_iter, seed: cfg.seed, ..VumpsOptions::new(chi) },
        )?,
    };
    let d = diagnostics(&fp, cfg.diagnostics.transfer_k)?;
    let wall = if cfg.record_wall_time { start.elapsed().as_secs_f64() } else { 0.0 };
    let record = ScanRecord {
        theta,
        chi,
        ee: fp.spectrum.ee,
        gap_ratio: fp.spectrum.gap_ratio,
        pair_degeneracy: fp.spectrum.pair_degeneracy,
        paired: d.transfer.paired,
        xi_x: d.transfer.xi_x,
        cx_inf: d.cx_inf,
        cz_inf: d.cz_inf,
        per_site_eigenvalue: fp.per_site_eigenvalue.re,
        converged: fp.converged,
        iterations: fp.iterations,
        solver: solver.as_str().to_string(),
        seed: cfg.seed,
        wall_time_s: wall,
    };
    let phys = fp.physical_eigenvalue();
    Ok(PointDoc {
        format_version: FORMAT_VERSION.into(),
        seed: cfg.seed,
        config: cfg.clone(),
        provisional: !fp.converged,
        residual: fp.residual,
        per_site_eigenvalue: [fp.per_site_eigenvalue.re, fp.per_site_eigenvalue.im],
        physical_eigenvalue: [phys.re, phys.im],
        norm_growth: fp.norm_growth,
        schmidt_probabilities: fp.spectrum.probabilities(),
        schmidt_values: fp.spectrum.values.clone(),
        transfer_eigenvalues: d.transfer.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
        xi_x: d.transfer.xi_x.is_finite().then_some(d.transfer.xi_x),
        two_fold: fp.spectrum.is_two_fold(cfg.diagnostics.degeneracy_threshold),
        ee_history: fp.ee_history.clone(),
        record,
    })
}

fn grid_keys(cfg: &Config) -> Result<Vec<PointKey>, Failure> {
    let thetas = cfg.grid.theta.values()?;
    let mut keys = Vec::new();
    for &chi in &cfg.grid.chi {
        for &t in &thetas {
            for s in solver_kinds(cfg.grid.solver) {
                keys.push(PointKey::new(t, chi, s.as_str()));
            }
        }
    }
    Ok(keys)
}

fn solver_of(name: &str) -> SolverKind {
    name.parse().expect("keys are built from SolverKind names")
}

pub fn run(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let out = ctx.out_dir()?;
    let points_dir = out.join("points");
    std::fs::create_dir_all(&points_dir)?;
    let csv_path = out.join("scan.csv");
    let settings = solver_settings(cfg);
    let header = header_lines("scan", cfg, &[("solver_settings", settings.clone())]);
    let keys = grid_keys(cfg)?;

    let (mut writer, done) = if csv_path.exists() {
        if !ctx.resume {
            return Err(Failure::Config(format!(
                "{} already exists; pass --resume to continue it or choose another --out",
                csv_path.display()
            )));
        }
        let existing = read_scan(&csv_path)?;
        if header_value(&existing.header, "solver_settings") != Some(settings.as_str()) {
            return Err(Failure::Config(format!(
                "{} was written with different solver settings; resume needs the same seed, power, vumps and diagnostics keys",
                csv_path.display()
            )));
        }
        let done: HashSet<PointKey> = existing.records.iter().map(ScanRecord::key).collect();
        (ScanWriter::reopen(&csv_path, &header, &existing.records)?, done)
    } else {
        (ScanWriter::create(&csv_path, &header)?, HashSet::new())
    };

    let todo: Vec<PointKey> = keys.iter().filter(|k| !done.contains(k)).cloned().collect();
    log::info!("scan: {} grid points, {} already done", keys.len(), keys.len() - todo.len());
    let mut failure: Option<Failure> = None;
    run_ordered(
        &todo,
        cfg.jobs,
        |k| compute_point(cfg, k.theta(), k.chi, solver_of(&k.solver)),
        |i, res| match res.and_then(|doc| {
            write_json(&points_dir.join(format!("{}.json", todo[i].stem())), &doc)?;
            writer.append(&doc.record)?;
            Ok(doc)
        }) {
            Ok(doc) => {
                eprintln!(
                    "θ={:<8} χ={:<3} {:<5} ee={:.6} pd={:.2e} paired={} converged={}",
                    doc.record.theta,
                    doc.record.chi,
                    doc.record.solver,
                    doc.record.ee,
                    doc.record.pair_degeneracy,
                    doc.record.paired,
                    doc.record.converged
                );
                true
            }
            Err(e) => {
                failure = Some(e);
                false
            }
        },
    );
    drop(writer);
    write_plot_bundle(&out, &points_dir, &keys, cfg)?;
    if let Some(f) = failure {
        return Err(f);
    }
    let all = read_scan(&csv_path)?;
    let wanted: HashSet<&PointKey> = keys.iter().collect();
    let unconverged = all.records.iter().filter(|r| wanted.contains(&r.key()) && !r.converged).count();
    eprintln!("wrote {}", csv_path.display());
    strict_check(ctx.strict, unconverged, "grid points")
}

/// The parts of a point document the plot bundle needs (`xi_x` in the
/// embedded record may be `null`, which `ScanRecord` cannot read back).
#[derive(Deserialize)]
struct PlotView {
    record: PlotKey,
    schmidt_values: Vec<f64>,
    schmidt_probabilities: Vec<f64>,
    transfer_eigenvalues: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct PlotKey {
    theta: f64,
    chi: usize,
    solver: String,
}

#[derive(Serialize)]
struct SpectrumRow<'a> {
    theta: f64,
    chi: usize,
    solver: &'a str,
    index: usize,
    schmidt_value: f64,
    probability: f64,
}

#[derive(Serialize)]
struct TransferRow<'a> {
    theta: f64,
    chi: usize,
    solver: &'a str,
    index: usize,
    re: f64,
    im: f64,
    modulus: f64,
}

/// Long-format spectrum tables for every finished grid point, plus a
/// plotting script template.
fn write_plot_bundle(out: &Path, points_dir: &Path, keys: &[PointKey], cfg: &Config) -> Result<(), Failure> {
    let plot_dir = out.join("plot");
    std::fs::create_dir_all(&plot_dir)?;
    let mut docs = Vec::new();
    for k in keys {
        let path = points_dir.join(format!("{}.json", k.stem()));
        if let Ok(text) = std::fs::read_to_string(&path) {
            match serde_json::from_str::<PlotView>(&text) {
                Ok(doc) => docs.push(doc),
                Err(e) => log::warn!("{}: unreadable point document ({e})", path.display()),
            }
        }
    }
    let mut spectrum = Vec::new();
    let mut transfer = Vec::new();
    for d in &docs {
        let r = &d.record;
        for (i, (&v, &p)) in d.schmidt_values.iter().zip(&d.schmidt_probabilities).enumerate() {
            spectrum.push(SpectrumRow { theta: r.theta, chi: r.chi, solver: &r.solver, index: i, schmidt_value: v, probability: p });
        }
        for (i, z) in d.transfer_eigenvalues.iter().enumerate() {
            transfer.push(TransferRow {
                theta: r.theta,
                chi: r.chi,
                solver: &r.solver,
                index: i,
                re: z[0],
                im: z[1],
                modulus: z[0].hypot(z[1]),
            });
        }
    }
    let header = header_lines("scan plot data", cfg, &[]);
    write_table(&plot_dir.join("spectrum.csv"), &header, &spectrum)?;
    write_table(&plot_dir.join("transfer.csv"), &header, &transfer)?;
    std::fs::write(plot_dir.join("plot_scan.py"), plot::SCAN_SCRIPT)?;
    Ok(())
}
