//! Bisection for the angle where the fixed point becomes two-fold degenerate.
//!
//! The transition is first order, so near it both the injective and the cat
//! branch are fixed points of the variational solver. Every probe relaxes
//! both, seeded from the nearest known state on each side, and keeps the one
//! with the larger per-site eigenvalue. The kept state is then run through a
//! number of power-method rows; its indicator has to survive that. When the
//! variational solver does not converge (it stalls within about 0.01 of the
//! transition at χ = 16), a ten times longer power run replaces it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_bulk_mpo, MeasurementAngle};
use crate::solvers::vumps::power_polish;
use crate::solvers::{diagnostics, vumps, FixedPointResult, VumpsOptions};
use crate::umps::{transfer_spectrum, UniformMPS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub theta: f64,
    /// Transfer-matrix eigenvalues come in `(λ, −λ)` pairs.
    pub paired: bool,
    pub pair_degeneracy: f64,
    pub gap_ratio: f64,
    pub cx_inf: f64,
    pub cz_inf: f64,
    pub ee: f64,
    /// `|Λ|` of the kept branch.
    pub lambda: f64,
    /// Which seed produced the kept branch: "trivial", "cat" or "direct",
    /// suffixed "+power" when the power relaxation replaced the result.
    pub branch: String,
    pub vumps_converged: bool,
    /// Indicator after the power-method check; `None` if it was skipped.
    pub power_paired: Option<bool>,
}

impl Probe {
    pub fn indicator(&self) -> bool {
        self.paired
    }

    pub fn solvers_agree(&self) -> bool {
        self.power_paired.is_none_or(|p| p == self.paired)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointResult {
    pub theta_c: f64,
    pub chi: usize,
    pub bracket: (f64, f64),
    /// Name of the diagnostic that flips.
    pub indicator: String,
    /// Every probe evaluated, sorted by angle.
    pub probes: Vec<Probe>,
    /// `|C_X(∞)|` on the two sides of the final bracket.
    pub cx_inf_jump: f64,
    pub cz_inf_jump: f64,
}

#[derive(Clone, Debug)]
pub struct CriticalOptions {
    pub vumps_tol: f64,
    pub vumps_max_iter: usize,
    /// Power rows applied to each kept branch; 0 disables the check.
    pub power_check_layers: usize,
    /// Interior points of the initial monotonicity scan.
    pub coarse_points: usize,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions { vumps_tol: 1e-9, vumps_max_iter: 600, power_check_layers: 40, coarse_points: 3 }
    }
}

/// Power rows (in units of `power_check_layers`) used in place of an
/// unconverged VUMPS result.
const UNCONVERGED_RELAX: usize = 10;

struct Evaluated {
    probe: Probe,
    psi: UniformMPS,
}

fn diagnose(fp: &FixedPointResult, branch: &str) -> Result<Probe> {
    let d = diagnostics(fp, 8)?;
    Ok(Probe {
        theta: fp.theta,
        paired: d.transfer.paired,
        pair_degeneracy: fp.spectrum.pair_degeneracy,
        gap_ratio: fp.spectrum.gap_ratio,
        cx_inf: d.cx_inf,
        cz_inf: d.cz_inf,
        ee: fp.spectrum.ee,
        lambda: fp.per_site_eigenvalue.norm(),
        branch: branch.to_string(),
        vumps_converged: fp.converged,
        power_paired: None,
    })
}

fn evaluate(theta: f64, chi: usize, seeds: &[(&str, Option<&UniformMPS>)], opts: &CriticalOptions) -> Result<Evaluated> {
    let h = build_bulk_mpo(MeasurementAngle::new(theta)?);
    let mut best: Option<(FixedPointResult, &str)> = None;
    for &(name, seed) in seeds {
        let vopts = VumpsOptions {
            tol: opts.vumps_tol,
            max_iter: opts.vumps_max_iter,
            init: seed.cloned(),
            ..VumpsOptions::new(chi)
        };
        let fp = vumps(&h, &vopts)?;
        let better = match &best {
            None => true,
            Some((b, _)) => fp.per_site_eigenvalue.norm() > b.per_site_eigenvalue.norm() + 1e-12,
        };
        if better {
            best = Some((fp, name));
        }
    }
    let (fp, name) = best.ok_or_else(|| Error::InvalidArgument("no seeds".into()))?;
    let mut probe = diagnose(&fp, name)?;
    let mut psi = fp.psi.clone();
    if opts.power_check_layers > 0 {
        if fp.converged {
            let polished = power_polish(&h, &fp, opts.power_check_layers)?;
            let k = (polished.psi.chi() * polished.psi.chi()).min(8);
            probe.power_paired = Some(transfer_spectrum(&polished.psi, k)?.paired);
        } else {
            // An unconverged variational state cannot vote; the branch is
            // whatever a long power relaxation from it settles into.
            let relaxed = power_polish(&h, &fp, UNCONVERGED_RELAX * opts.power_check_layers)?;
            probe = diagnose(&relaxed, &format!("{name}+power"))?;
            probe.vumps_converged = false;
            probe.power_paired = Some(probe.paired);
            psi = relaxed.psi;
        }
    }
    log::info!(
        "probe θ={theta:.5} χ={chi}: paired={} branch={} |Λ|={:.10} pd={:.2e}",
        probe.paired,
        probe.branch,
        probe.lambda,
        probe.pair_degeneracy
    );
    Ok(Evaluated { probe, psi })
}

fn fail(reason: impl Into<String>, mut probes: Vec<Probe>) -> Error {
    probes.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Error::Critical { reason: reason.into(), probes }
}

pub fn find_theta_c(chi: usize, bracket: (f64, f64), resolution: f64) -> Result<CriticalPointResult> {
    find_theta_c_with(chi, bracket, resolution, &CriticalOptions::default())
}

pub fn find_theta_c_with(
    chi: usize,
    bracket: (f64, f64),
    resolution: f64,
    opts: &CriticalOptions,
) -> Result<CriticalPointResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || resolution <= 0.0 {
        return Err(Error::InvalidArgument(format!("bad bracket {bracket:?} or resolution {resolution}")));
    }
    let mut probes = Vec::new();
    let a = evaluate(lo, chi, &[("direct", None)], opts)?;
    let b = evaluate(hi, chi, &[("direct", None)], opts)?;
    probes.push(a.probe.clone());
    probes.push(b.probe.clone());
    if a.probe.indicator() == b.probe.indicator() {
        return Err(fail("diagnostics agree at both bracket endpoints", probes));
    }
    if a.probe.indicator() {
        return Err(fail("two-fold indicator set below the bracket and cleared above it", probes));
    }
    let mut lo_state = a;
    let mut hi_state = b;

    // Coarse scan: the indicator must switch exactly once.
    let n = opts.coarse_points;
    let mut scan = Vec::new();
    for i in 1..=n {
        let t = lo + (hi - lo) * i as f64 / (n + 1) as f64;
        let e = evaluate(t, chi, &[("trivial", Some(&lo_state.psi)), ("cat", Some(&hi_state.psi))], opts)?;
        probes.push(e.probe.clone());
        if !e.probe.solvers_agree() {
            return Err(fail(format!("power-method check disagrees at θ = {t:.6}"), probes));
        }
        scan.push(e);
    }
    let flags: Vec<bool> = scan.iter().map(|e| e.probe.indicator()).collect();
    if flags.windows(2).any(|w| w[0] && !w[1]) {
        return Err(fail("indicator is not monotone across the bracket", probes));
    }
    for e in scan {
        if e.probe.indicator() {
            if e.probe.theta < hi {
                hi = e.probe.theta;
                hi_state = e;
            }
        } else if e.probe.theta > lo {
            lo = e.probe.theta;
            lo_state = e;
        }
    }

    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        let e = evaluate(mid, chi, &[("trivial", Some(&lo_state.psi)), ("cat", Some(&hi_state.psi))], opts)?;
        probes.push(e.probe.clone());
        if !e.probe.solvers_agree() {
            return Err(fail(format!("power-method check disagrees at θ = {mid:.6}"), probes));
        }
        if e.probe.indicator() {
            hi = mid;
            hi_state = e;
        } else {
            lo = mid;
            lo_state = e;
        }
    }
    probes.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let monotone = probes.iter().all(|p| if p.theta <= lo { !p.indicator() } else { p.indicator() });
    if !monotone {
        return Err(fail("probe table is not monotone around the final bracket", probes));
    }
    Ok(CriticalPointResult {
        theta_c: 0.5 * (lo + hi),
        chi,
        bracket: (lo, hi),
        indicator: "transfer_pairing".into(),
        cx_inf_jump: (hi_state.probe.cx_inf - lo_state.probe.cx_inf).abs(),
        cz_inf_jump: (hi_state.probe.cz_inf - lo_state.probe.cz_inf).abs(),
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_phase_bracket_is_rejected() {
        let opts = CriticalOptions { power_check_layers: 0, coarse_points: 0, ..Default::default() };
        let err = find_theta_c_with(4, (0.6, 0.9), 0.01, &opts).unwrap_err();
        match err {
            Error::Critical { probes, .. } => assert_eq!(probes.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
