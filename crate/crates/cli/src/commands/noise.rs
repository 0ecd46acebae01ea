use edgephase::{noisy_trajectory, NoiseSpec, TrajectoryRecord};
use serde::Serialize;

use super::{Ctx, Failure};
use crate::output::{header_lines, write_table};
use crate::pool::run_ordered;

#[derive(Clone, Copy)]
enum Run {
    Seed(u64),
    Reference,
}

#[derive(Serialize)]
struct SummaryRow {
    run: String,
    seed: u64,
    epsilon: f64,
    final_pair_degeneracy: f64,
    two_fold: bool,
    final_cx_100: f64,
    final_cz_100: f64,
    /// Mean over the second half of the rows.
    tail_mean_cx_100: f64,
    tail_mean_cz_100: f64,
    clamped_rows: usize,
}

fn tail_mean(records: &[TrajectoryRecord], f: impl Fn(&TrajectoryRecord) -> f64) -> f64 {
    let tail = &records[records.len() / 2..];
    tail.iter().map(f).sum::<f64>() / tail.len() as f64
}

pub fn run(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let nc = &cfg.noise;
    let out = ctx.out_dir()?;
    let mut runs: Vec<Run> = nc.seeds.iter().map(|&s| Run::Seed(s)).collect();
    if nc.reference && nc.epsilon > 0.0 {
        runs.push(Run::Reference);
    }
    let header = header_lines("noise", cfg, &[]);
    let mut summary = Vec::new();
    let mut failure = None;
    run_ordered(
        &runs,
        cfg.jobs,
        |run| {
            let (seed, epsilon) = match *run {
                Run::Seed(s) => (s, nc.epsilon),
                Run::Reference => (0, 0.0),
            };
            let spec = NoiseSpec { theta_mean: nc.theta, epsilon, seed, layers: nc.layers };
            noisy_trajectory(&spec, nc.chi).map(|r| (seed, epsilon, r))
        },
        |i, res| {
            let outcome = res.map_err(Failure::from).and_then(|(seed, epsilon, records)| {
                let name = match runs[i] {
                    Run::Seed(s) => format!("seed_{s}"),
                    Run::Reference => "reference".to_string(),
                };
                write_table(&out.join(format!("noise_{name}.csv")), &header, &records)?;
                let last = records.last().expect("at least one row");
                let row = SummaryRow {
                    run: name,
                    seed,
                    epsilon,
                    final_pair_degeneracy: last.pair_degeneracy,
                    two_fold: last.pair_degeneracy <= cfg.diagnostics.degeneracy_threshold,
                    final_cx_100: last.cx_100,
                    final_cz_100: last.cz_100,
                    tail_mean_cx_100: tail_mean(&records, |r| r.cx_100),
                    tail_mean_cz_100: tail_mean(&records, |r| r.cz_100),
                    clamped_rows: records.iter().filter(|r| r.clamped).count(),
                };
                eprintln!(
                    "{}: two_fold={} pd={:.2e} C_X(100)={:.5} C_Z(100)={:.5}",
                    row.run, row.two_fold, row.final_pair_degeneracy, row.final_cx_100, row.final_cz_100
                );
                summary.push(row);
                Ok(())
            });
            match outcome {
                Ok(()) => true,
                Err(e) => {
                    failure = Some(e);
                    false
                }
            }
        },
    );
    write_table(&out.join("noise_summary.csv"), &header, &summary)?;
    match failure {
        Some(e) => Err(e),
        None => {
            eprintln!("wrote {}", out.join("noise_summary.csv").display());
            Ok(())
        }
    }
}
