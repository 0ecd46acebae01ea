//! Fixed points of the row operator, the critical-angle search, and noisy
//! row-by-row evolution.

mod critical;
mod noise;
mod power;
mod vumps;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::C64;
use crate::umps::{
    canonicalize, correlator_canonical, transfer_spectrum, CanonicalForm, Pauli, SchmidtSpectrum, TransferSpectrum,
    UniformMPS,
};

pub use critical::{find_theta_c, find_theta_c_with, CriticalOptions, CriticalPointResult, Probe};
pub use noise::{noisy_trajectory, NoiseSpec, TrajectoryRecord};
pub use power::{power_fixed_point, power_iterate, power_step, PowerOptions, PowerStep};
pub use vumps::{vumps, vumps_fixed_point, VumpsOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Power,
    Vumps,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Power => "power",
            SolverKind::Vumps => "vumps",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "power" => Ok(SolverKind::Power),
            "vumps" => Ok(SolverKind::Vumps),
            other => Err(format!("unknown solver '{other}' (expected power or vumps)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointResult {
    pub theta: f64,
    pub chi: usize,
    pub solver: SolverKind,
    /// Left-canonical, normalized.
    pub psi: UniformMPS,
    pub form: CanonicalForm,
    pub spectrum: SchmidtSpectrum,
    /// `⟨ψ|Ĥ|ψ⟩` per site for the rescaled row operator.
    pub per_site_eigenvalue: C64,
    /// `‖Ĥψ‖` per site.
    pub norm_growth: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    /// Entanglement entropy after every iteration.
    pub ee_history: Vec<f64>,
}

impl FixedPointResult {
    /// Eigenvalue per site of the unrescaled measured-row contraction.
    pub fn physical_eigenvalue(&self) -> C64 {
        self.per_site_eigenvalue * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// Transfer-matrix spectrum and asymptotic correlator amplitudes of a fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub transfer: TransferSpectrum,
    /// `|C_X(∞)|`.
    pub cx_inf: f64,
    pub cz_inf: f64,
}

/// `k` leading transfer eigenvalues (capped at `χ²`) plus `|C(∞)|` for X and Z.
pub fn diagnostics(fp: &FixedPointResult, k: usize) -> Result<Diagnostics> {
    let k = k.clamp(1, fp.psi.chi() * fp.psi.chi());
    let transfer = transfer_spectrum(&fp.psi, k)?;
    let cf = canonicalize(&fp.psi)?;
    let cx = correlator_canonical(&cf, Pauli::X, 1, &[1], true)?;
    let cz = correlator_canonical(&cf, Pauli::Z, 1, &[1], true)?;
    Ok(Diagnostics { transfer, cx_inf: cx.inf_magnitude, cz_inf: cz.inf_magnitude })
}
