use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_bulk_mpo, build_lower_boundary_imps, MeasurementAngle};
use crate::solvers::power_step;
use crate::umps::{correlator_at, entanglement_spectrum, Pauli};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub theta_mean: f64,
    /// Standard deviation of the per-row angle.
    pub epsilon: f64,
    pub seed: u64,
    pub layers: usize,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        MeasurementAngle::new(self.theta_mean)?;
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if self.layers == 0 {
            return Err(Error::InvalidArgument("layers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// 1-based row index.
    pub layer: usize,
    pub theta_used: f64,
    /// The sampled angle fell outside `[0, π/2]` and was clamped.
    pub clamped: bool,
    pub cx_100: f64,
    pub cz_100: f64,
    pub ee: f64,
    pub pair_degeneracy: f64,
}

const DISTANCE: usize = 100;

/// Rows with a fresh angle `θ_k ~ N(θ_mean, ε²)` each, uniform within the
/// row. The lower boundary is measured at `θ_mean`.
pub fn noisy_trajectory(spec: &NoiseSpec, chi: usize) -> Result<Vec<TrajectoryRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(spec.theta_mean, spec.epsilon).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut psi = build_lower_boundary_imps(MeasurementAngle::new(spec.theta_mean)?);
    let mut records = Vec::with_capacity(spec.layers);
    for layer in 1..=spec.layers {
        let raw = if spec.epsilon == 0.0 { spec.theta_mean } else { normal.sample(&mut rng) };
        let (theta, clamped) = MeasurementAngle::clamped(raw);
        if clamped {
            log::warn!("layer {layer}: sampled angle {raw} clamped to {}", theta.value());
        }
        let step = power_step(&psi, &build_bulk_mpo(theta), chi)?;
        let spectrum = entanglement_spectrum(&step.form);
        records.push(TrajectoryRecord {
            layer,
            theta_used: theta.value(),
            clamped,
            cx_100: correlator_at(&step.form, Pauli::X, DISTANCE)?,
            cz_100: correlator_at(&step.form, Pauli::Z, DISTANCE)?,
            ee: spectrum.ee,
            pair_degeneracy: spectrum.pair_degeneracy,
        });
        psi = step.psi;
    }
    Ok(records)
}
