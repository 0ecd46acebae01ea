use edgephase::model::build_site_tensor;
use edgephase::oracle::run_suite_with;
use edgephase::C64;
use serde::Serialize;

use super::{Ctx, Failure};
use crate::output::write_json;

#[derive(Serialize)]
struct Report<'a> {
    version: &'a str,
    seed: u64,
    passed: bool,
    checks: &'a [edgephase::OracleCheck],
}

pub fn run(ctx: &Ctx, inject_fault: bool) -> Result<(), Failure> {
    let out = ctx.out_dir()?;
    let mut site = build_site_tensor();
    if inject_fault {
        let v = site.tensor.get(&[0, 0, 0, 0, 0]);
        site.tensor.set(&[0, 0, 0, 0, 0], v * C64::new(0.5, 0.0));
    }
    let checks = run_suite_with(&site)?;
    let mut text = String::new();
    for c in &checks {
        let line = format!(
            "{} {:<32} residual {:.3e} (threshold {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.threshold
        );
        println!("{line}");
        text.push_str(&line);
        text.push('\n');
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let report = Report { version: env!("CARGO_PKG_VERSION"), seed: ctx.cfg.seed, passed: failed == 0, checks: &checks };
    write_json(&out.join("validate.json"), &report)?;
    std::fs::write(out.join("validate.txt"), text)?;
    if failed > 0 {
        Err(Failure::Validation(format!("{failed} of {} checks failed", checks.len())))
    } else {
        eprintln!("all {} checks passed", checks.len());
        Ok(())
    }
}
