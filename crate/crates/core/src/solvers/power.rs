use crate::error::Result;
use crate::linalg::TruncationReport;
use crate::model::{build_bulk_mpo, build_lower_boundary_imps, MeasurementAngle, RowOperator};
use crate::solvers::{FixedPointResult, SolverKind};
use crate::umps::{canonicalize, canonicalize_full, entanglement_spectrum, mpo_expectation, CanonicalForm, UniformMPS};

/// Singular values below this fraction of the largest are dropped even when
/// the bond has room.
pub const DROP_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct PowerOptions {
    pub chi: usize,
    pub tol: f64,
    pub max_layers: usize,
}

impl PowerOptions {
    pub fn new(chi: usize) -> Self {
        PowerOptions { chi, tol: 1e-10, max_layers: 5000 }
    }
}

#[derive(Clone, Debug)]
pub struct PowerStep {
    pub psi: UniformMPS,
    pub form: CanonicalForm,
    pub report: TruncationReport,
    /// `‖Ĥψ‖` per site before truncation.
    pub growth: f64,
}

/// One row: apply `Ĥ`, recanonicalize, truncate to `chi`, renormalize.
pub fn power_step(psi: &UniformMPS, h: &RowOperator, chi: usize) -> Result<PowerStep> {
    let grown = h.apply(psi);
    let (form, report, perron) = canonicalize_full(&grown, chi, DROP_TOL)?;
    Ok(PowerStep { psi: form.to_mps(), form, report, growth: perron.sqrt() })
}

fn spectrum_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Repeated row application from `init` until successive Schmidt spectra
/// differ by less than `tol`. At `θ = π/2` the operator is unitary and the
/// iteration is never declared converged.
pub fn power_iterate(h: &RowOperator, init: &UniformMPS, opts: &PowerOptions) -> Result<FixedPointResult> {
    let mut form = canonicalize(init)?;
    let mut psi = form.to_mps();
    let mut prev = entanglement_spectrum(&form).values;
    let mut growth = f64::NAN;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut history = Vec::new();
    let mut iterations = 0;
    let never = h.theta().is_x_limit();
    while iterations < opts.max_layers {
        let step = power_step(&psi, h, opts.chi)?;
        iterations += 1;
        let spec = entanglement_spectrum(&step.form);
        residual = spectrum_distance(&spec.values, &prev);
        history.push(spec.ee);
        prev = spec.values;
        psi = step.psi;
        form = step.form;
        growth = step.growth;
        if !never && residual < opts.tol {
            converged = true;
            break;
        }
    }
    let (lambda, _) = mpo_expectation(&psi, &h.local_complex(), None)?;
    log::debug!("power θ={:.4} χ={} layers={} residual={:.2e}", h.theta().value(), opts.chi, iterations, residual);
    Ok(FixedPointResult {
        theta: h.theta().value(),
        chi: opts.chi,
        solver: SolverKind::Power,
        spectrum: entanglement_spectrum(&form),
        psi,
        form,
        per_site_eigenvalue: lambda,
        norm_growth: growth,
        iterations,
        converged,
        residual,
        ee_history: history,
    })
}

/// Power iteration from the measured lower boundary.
pub fn power_fixed_point(theta: MeasurementAngle, chi: usize, tol: f64, max_layers: usize) -> Result<FixedPointResult> {
    let h = build_bulk_mpo(theta);
    let init = build_lower_boundary_imps(theta);
    power_iterate(&h, &init, &PowerOptions { chi, tol, max_layers })
}
