use edgephase::finite::{gap_scan_with, SweepOptions};
use edgephase::{locate_crossing, Branch, SpectrumPair};
use serde::Serialize;

use super::{strict_check, Ctx, Failure};
use crate::output::{header_lines, write_table};
use crate::plot;
use crate::pool::run_ordered;

#[derive(Serialize)]
struct FiniteRow {
    theta: f64,
    n: usize,
    bc: String,
    chi: usize,
    e0_re: f64,
    e0_im: f64,
    e1_re: f64,
    e1_im: f64,
    gap: f64,
    /// `|e_trivial| − |e_two-fold|`; empty when both states carry one label.
    signed_gap: Option<f64>,
    branch0: Branch,
    branch1: Branch,
    pair_degeneracy0: f64,
    pair_degeneracy1: f64,
    ee0: f64,
    ee1: f64,
    overlap: f64,
    converged: bool,
}

#[derive(Serialize)]
struct CrossingRow {
    n: usize,
    /// Grid interval over which the dominant state changes branch.
    crossing_lo: Option<f64>,
    crossing_hi: Option<f64>,
    /// Angle of the smallest `|e0| − |e1|` on the grid.
    gap_min_theta: f64,
    gap_min: f64,
}

fn row(p: &SpectrumPair) -> FiniteRow {
    FiniteRow {
        theta: p.theta,
        n: p.n,
        bc: format!("{:?}", p.bc).to_lowercase(),
        chi: p.chi,
        e0_re: p.e0.re,
        e0_im: p.e0.im,
        e1_re: p.e1.re,
        e1_im: p.e1.im,
        gap: p.gap,
        signed_gap: p.signed_gap,
        branch0: p.branch0,
        branch1: p.branch1,
        pair_degeneracy0: p.spectrum0.pair_degeneracy,
        pair_degeneracy1: p.spectrum1.pair_degeneracy,
        ee0: p.spectrum0.ee,
        ee1: p.spectrum1.ee,
        overlap: p.overlap,
        converged: p.converged,
    }
}

pub fn run(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let f = &cfg.finite;
    let out = ctx.out_dir()?;
    let thetas = f.theta.values()?;
    let opts = SweepOptions { tol: f.tol, max_sweeps: f.max_sweeps, seed: cfg.seed, ..SweepOptions::new(f.chi) };
    let mut rows = Vec::new();
    let mut crossings = Vec::new();
    let mut failure = None;
    run_ordered(
        &f.n,
        cfg.jobs,
        |&n| gap_scan_with(&thetas, &[n], f.bc, &opts),
        |i, res| match res {
            Ok(pairs) => {
                let n = f.n[i];
                let cross = locate_crossing(&pairs);
                let min = pairs.iter().min_by(|a, b| a.gap.total_cmp(&b.gap)).expect("non-empty grid");
                match cross {
                    Some((a, b)) => eprintln!("n={n}: dominant branch changes in [{a}, {b}]"),
                    None => eprintln!("n={n}: no branch change on the grid"),
                }
                crossings.push(CrossingRow {
                    n,
                    crossing_lo: cross.map(|c| c.0),
                    crossing_hi: cross.map(|c| c.1),
                    gap_min_theta: min.theta,
                    gap_min: min.gap,
                });
                rows.extend(pairs.iter().map(row));
                true
            }
            Err(e) => {
                failure = Some(Failure::from(e));
                false
            }
        },
    );
    let header = header_lines("finite", cfg, &[]);
    write_table(&out.join("finite.csv"), &header, &rows)?;
    write_table(&out.join("finite_crossing.csv"), &header, &crossings)?;
    std::fs::write(out.join("plot_finite.py"), plot::FINITE_SCRIPT)?;
    if let Some(e) = failure {
        return Err(e);
    }
    eprintln!("wrote {}", out.join("finite.csv").display());
    strict_check(ctx.strict, rows.iter().filter(|r| !r.converged).count(), "finite-chain points")
}
