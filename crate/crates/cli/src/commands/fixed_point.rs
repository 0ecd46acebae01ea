use super::scan::{compute_point, solver_kinds};
use super::{strict_check, Ctx, Failure};
use crate::output::write_json;

/// One angle, one bond dimension; the point documents go to stdout (and to
/// `--out` when given).
pub fn run(ctx: &Ctx) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let thetas = cfg.grid.theta.values()?;
    let (theta, chi) = match (thetas.as_slice(), cfg.grid.chi.as_slice()) {
        ([t], [c]) => (*t, *c),
        _ => {
            return Err(Failure::Config(format!(
                "fixed-point needs exactly one angle and one bond dimension, got {} and {}",
                thetas.len(),
                cfg.grid.chi.len()
            )))
        }
    };
    let mut docs = Vec::new();
    for solver in solver_kinds(cfg.grid.solver) {
        docs.push(compute_point(cfg, theta, chi, solver)?);
    }
    if ctx.out.is_some() {
        let dir = ctx.out_dir()?;
        for d in &docs {
            let key = d.record.key();
            write_json(&dir.join(format!("fixed_point_{}.json", key.stem())), d)?;
        }
    }
    let text = serde_json::to_string_pretty(&docs).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{text}");
    strict_check(ctx.strict, docs.iter().filter(|d| d.provisional).count(), "fixed points")
}
