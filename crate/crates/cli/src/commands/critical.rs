use edgephase::solvers::{find_theta_c_with, CriticalOptions, Probe};
use edgephase::{CriticalPointResult, Error};
use serde::Serialize;

use super::{Ctx, Failure};
use crate::output::{header_lines, write_json, write_table};
use crate::pool::run_ordered;

#[derive(Serialize)]
struct CriticalRow {
    chi: usize,
    theta_c: f64,
    bracket_lo: f64,
    bracket_hi: f64,
    indicator: String,
    cx_inf_jump: f64,
    cz_inf_jump: f64,
    probes: usize,
}

#[derive(Serialize)]
struct ProbeRow {
    theta: f64,
    paired: bool,
    pair_degeneracy: f64,
    gap_ratio: f64,
    cx_inf: f64,
    cz_inf: f64,
    ee: f64,
    lambda: f64,
    branch: String,
    vumps_converged: bool,
    power_paired: String,
}

impl From<&Probe> for ProbeRow {
    fn from(p: &Probe) -> Self {
        ProbeRow {
            theta: p.theta,
            paired: p.paired,
            pair_degeneracy: p.pair_degeneracy,
            gap_ratio: p.gap_ratio,
            cx_inf: p.cx_inf,
            cz_inf: p.cz_inf,
            ee: p.ee,
            lambda: p.lambda,
            branch: p.branch.clone(),
            vumps_converged: p.vumps_converged,
            power_paired: p.power_paired.map(|b| b.to_string()).unwrap_or_default(),
        }
    }
}

fn print_probes(chi: usize, probes: &[Probe]) {
    eprintln!("probe table for χ={chi}:");
    eprintln!("  {:>10} {:>7} {:>10} {:>10} {:>10} {:>14}", "theta", "paired", "pair_deg", "cx_inf", "cz_inf", "|Λ|");
    for p in probes {
        eprintln!(
            "  {:>10.6} {:>7} {:>10.3e} {:>10.4} {:>10.4} {:>14.10}",
            p.theta, p.paired, p.pair_degeneracy, p.cx_inf, p.cz_inf, p.lambda
        );
    }
}

pub fn run(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let out = ctx.out_dir()?;
    let c = &cfg.critical;
    let opts = CriticalOptions {
        vumps_tol: c.vumps_tol,
        vumps_max_iter: c.vumps_max_iter,
        power_check_layers: c.power_check_layers,
        coarse_points: c.coarse_points,
    };
    let bracket = (c.bracket[0], c.bracket[1]);
    let header = header_lines("critical", cfg, &[]);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut io_error: Option<Failure> = None;
    run_ordered(
        &c.chi,
        cfg.jobs,
        |&chi| find_theta_c_with(chi, bracket, c.resolution, &opts),
        |i, res: Result<CriticalPointResult, Error>| {
            let chi = c.chi[i];
            let probes_path = out.join(format!("critical_probes_chi_{chi}.csv"));
            let written = match res {
                Ok(r) => {
                    println!(
                        "χ={chi}: θc = {:.6}  bracket [{:.6}, {:.6}]  |ΔC_X(∞)| = {:.4}  |ΔC_Z(∞)| = {:.4}",
                        r.theta_c, r.bracket.0, r.bracket.1, r.cx_inf_jump, r.cz_inf_jump
                    );
                    rows.push(CriticalRow {
                        chi,
                        theta_c: r.theta_c,
                        bracket_lo: r.bracket.0,
                        bracket_hi: r.bracket.1,
                        indicator: r.indicator.clone(),
                        cx_inf_jump: r.cx_inf_jump,
                        cz_inf_jump: r.cz_inf_jump,
                        probes: r.probes.len(),
                    });
                    let table: Vec<ProbeRow> = r.probes.iter().map(ProbeRow::from).collect();
                    write_table(&probes_path, &header, &table)
                        .and_then(|_| write_json(&out.join(format!("critical_chi_{chi}.json")), &r))
                }
                Err(Error::Critical { reason, probes }) => {
                    eprintln!("χ={chi}: critical search failed: {reason}");
                    print_probes(chi, &probes);
                    failures.push(format!("χ={chi}: {reason}"));
                    let table: Vec<ProbeRow> = probes.iter().map(ProbeRow::from).collect();
                    write_table(&probes_path, &header, &table)
                }
                Err(e) => {
                    eprintln!("χ={chi}: {e}");
                    failures.push(format!("χ={chi}: {e}"));
                    Ok(())
                }
            };
            if let Err(e) = written {
                io_error = Some(e.into());
                return false;
            }
            true
        },
    );
    if let Some(e) = io_error {
        return Err(e);
    }
    let path = out.join("critical.csv");
    write_table(&path, &header, &rows)?;
    eprintln!("wrote {}", path.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("critical search failed for {}", failures.join("; "))))
    }
}
