//! Cluster-state PEPS tensors, the measurement projector, and the operators
//! that one measured row induces on the virtual boundary state.
//!
//! Gauge: every site broadcasts its physical value `s` on its right and up
//! legs and picks up a CZ phase `(-1)^{s(l+d)}` against the values arriving on
//! its left and down legs,
//!
//! ```text
//! T^s_{l r u d} = δ_{s r} δ_{s u} (-1)^{s(l+d)} / √2
//! ```
//!
//! On a finite patch the receiving legs (left, down) on the edge are pinned to
//! 0 and the broadcasting legs (right, up) are summed, which reproduces
//! `∏ CZ |+⟩^{⊗N}` exactly.
//!
//! The boundary state's "physical" index is the value broadcast upward by the
//! row below. A measured bulk row acts on it as
//! `Ĥ = diag(√2 m)^{⊗n} · ∏ CZ · Had^{⊗n}`: the row operator carries the
//! measured tensor rescaled by √2 per site, which makes `Ĥ` unitary at
//! `θ = π/2`. The stripped factor is kept in [`RowOperator::site_scale`].

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tensor, C64};
use crate::umps::UniformMPS;

const ANGLE_SLACK: f64 = 1e-12;

/// Measurement angle in `[0, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MeasurementAngle(f64);

impl MeasurementAngle {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta < -ANGLE_SLACK || theta > FRAC_PI_2 + ANGLE_SLACK {
            return Err(Error::AngleOutOfRange(theta));
        }
        Ok(MeasurementAngle(theta.clamp(0.0, FRAC_PI_2)))
    }

    /// Clamps into range; the flag reports whether clamping happened.
    pub fn clamped(theta: f64) -> (Self, bool) {
        let c = theta.clamp(0.0, FRAC_PI_2);
        (MeasurementAngle(c), c != theta)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `+1` eigenvector of `cos θ Z + sin θ X`.
    pub fn direction(self) -> [f64; 2] {
        [(self.0 / 2.0).cos(), (self.0 / 2.0).sin()]
    }

    pub fn is_x_limit(self) -> bool {
        (self.0 - FRAC_PI_2).abs() < 1e-15
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    pub theta: MeasurementAngle,
    /// `P = (I + Z cos θ + X sin θ) / 2`.
    pub matrix: Array2<f64>,
    pub direction: [f64; 2],
}

pub fn build_projector(theta: MeasurementAngle) -> Projector {
    let (c, s) = (theta.0.cos(), theta.0.sin());
    let matrix = ndarray::array![[0.5 * (1.0 + c), 0.5 * s], [0.5 * s, 0.5 * (1.0 - c)]];
    Projector { theta, matrix, direction: theta.direction() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteRole {
    /// Legs (left, right, up, down, physical).
    BulkUnmeasured,
    /// Legs (left, right, up, down).
    BulkMeasured,
    /// Legs (left, right, up).
    LowerBoundaryMeasured,
    /// Legs (left, right, down, physical).
    UpperBoundaryUnmeasured,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    pub role: SiteRole,
    pub tensor: Tensor,
}

fn sign(bit: usize) -> f64 {
    if bit % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn build_site_tensor() -> SiteTensor {
    let tensor = Tensor::from_fn(&[2, 2, 2, 2, 2], |i| {
        let (l, r, u, d, s) = (i[0], i[1], i[2], i[3], i[4]);
        if r == s && u == s {
            re(sign(s * (l + d)) * FRAC_1_SQRT_2)
        } else {
            re(0.0)
        }
    });
    SiteTensor { role: SiteRole::BulkUnmeasured, tensor }
}

/// Bulk tensor with `⟨m|` contracted on the physical leg:
/// `B_{l r u d} = m_u δ_{u r} (-1)^{u(l+d)} / √2`.
pub fn build_bulk_measured_tensor(theta: MeasurementAngle) -> SiteTensor {
    let m = theta.direction();
    let tensor = Tensor::from_fn(&[2, 2, 2, 2], |i| {
        let (l, r, u, d) = (i[0], i[1], i[2], i[3]);
        if u == r {
            re(m[u] * sign(u * (l + d)) * FRAC_1_SQRT_2)
        } else {
            re(0.0)
        }
    });
    SiteTensor { role: SiteRole::BulkMeasured, tensor }
}

/// Lower-boundary tensor (no down leg) with the measurement applied.
pub fn build_lower_boundary_tensor(theta: MeasurementAngle) -> SiteTensor {
    let m = theta.direction();
    let tensor = Tensor::from_fn(&[2, 2, 2], |i| {
        let (l, r, u) = (i[0], i[1], i[2]);
        if u == r {
            re(m[u] * sign(u * l) * FRAC_1_SQRT_2)
        } else {
            re(0.0)
        }
    });
    SiteTensor { role: SiteRole::LowerBoundaryMeasured, tensor }
}

/// Upper-boundary tensor (no up leg), physical leg kept.
pub fn build_upper_boundary_tensor() -> SiteTensor {
    let tensor = Tensor::from_fn(&[2, 2, 2, 2], |i| {
        let (l, r, d, s) = (i[0], i[1], i[2], i[3]);
        if r == s {
            re(sign(s * (l + d)) * FRAC_1_SQRT_2)
        } else {
            re(0.0)
        }
    });
    SiteTensor { role: SiteRole::UpperBoundaryUnmeasured, tensor }
}

/// The infinite row operator `Ĥ` as a uniform MPO.
#[derive(Clone, Debug, PartialEq)]
pub struct RowOperator {
    theta: MeasurementAngle,
    /// Legs (left, right, out = up, in = down).
    w: Array4<f64>,
}

impl RowOperator {
    pub fn theta(&self) -> MeasurementAngle {
        self.theta
    }

    /// Local MPO tensor, legs (left, right, out, in).
    pub fn local(&self) -> &Array4<f64> {
        &self.w
    }

    pub fn local_complex(&self) -> Array4<C64> {
        self.w.mapv(re)
    }

    pub fn local_tensor(&self) -> Tensor {
        Tensor::from_array(self.local_complex().into_dyn()).expect("finite MPO entries")
    }

    /// Per-site factor between the measured PEPS tensor and the operator
    /// stored here: `B = site_scale · W`.
    pub fn site_scale(&self) -> f64 {
        FRAC_1_SQRT_2
    }

    pub fn bond_dim(&self) -> usize {
        self.w.shape()[0]
    }

    /// `Ĥ |ψ⟩`; the bond dimension doubles.
    pub fn apply(&self, psi: &UniformMPS) -> UniformMPS {
        crate::umps::apply_mpo(psi, &self.local_complex())
    }
}

pub fn build_bulk_mpo(theta: MeasurementAngle) -> RowOperator {
    let b = build_bulk_measured_tensor(theta).tensor;
    let scale = std::f64::consts::SQRT_2;
    let w = Array4::from_shape_fn((2, 2, 2, 2), |(l, r, u, d)| b.get(&[l, r, u, d]).re * scale);
    RowOperator { theta, w }
}

/// `|ψ_init⟩`: the measured lower boundary row as a normalized uniform MPS
/// with bond dimension 2. Physical index = value broadcast upward.
pub fn build_lower_boundary_imps(theta: MeasurementAngle) -> UniformMPS {
    let t = build_lower_boundary_tensor(theta).tensor;
    // MPS legs (left, physical, right) from tensor legs (l, r, u).
    let a = Array3::from_shape_fn((2, 2, 2), |(l, u, r)| t.get(&[l, r, u]));
    UniformMPS::new(a).expect("valid boundary tensor").normalized().expect("normalizable boundary state")
}

/// The map from the virtual fixed-point state to the physical upper boundary
/// state: a per-site unitary followed by CZ on every neighbouring pair.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMap {
    pub site_unitary: Array2<C64>,
    pub cz_chain: bool,
}

pub fn build_upper_boundary_map() -> BoundaryMap {
    let h = FRAC_1_SQRT_2;
    BoundaryMap { site_unitary: ndarray::array![[re(h), re(h)], [re(h), re(-h)]], cz_chain: true }
}

impl BoundaryMap {
    pub fn unitarity_residual(&self) -> f64 {
        let u = &self.site_unitary;
        let uu = crate::linalg::dagger(u.view()).dot(u);
        (&uu - &Array2::<C64>::eye(2)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Ô as an MPO with legs (left, right, out, in); bond dimension 2 with the
    /// CZ chain, 1 without.
    pub fn mpo(&self) -> Array4<C64> {
        if !self.cz_chain {
            return Array4::from_shape_fn((1, 1, 2, 2), |(_, _, o, i)| self.site_unitary[[o, i]]);
        }
        // CZ chain: the site passes its output bit to the right and picks up a
        // phase against the bit from the left.
        Array4::from_shape_fn((2, 2, 2, 2), |(l, r, o, i)| {
            if r == o {
                self.site_unitary[[o, i]] * sign(l * o)
            } else {
                re(0.0)
            }
        })
    }

    pub fn apply(&self, psi: &UniformMPS) -> UniformMPS {
        crate::umps::apply_mpo(psi, &self.mpo())
    }

    /// Applies only the per-site unitary (bond dimension unchanged).
    pub fn apply_site_unitary(&self, psi: &UniformMPS) -> UniformMPS {
        let a = psi.tensor();
        let (chi, d, _) = a.dim();
        let out = Array3::from_shape_fn((chi, d, chi), |(x, o, y)| (0..d).map(|i| self.site_unitary[[o, i]] * a[[x, i, y]]).sum());
        UniformMPS::new(out).expect("unitary preserves finiteness")
    }
}

/// Dense `2^n × 2^n` matrix of the row operator on `n` sites (row index = out
/// configuration, column = in configuration, site 0 the most significant bit).
pub fn finite_row_matrix(theta: MeasurementAngle, n: usize, bc: crate::finite::BoundaryCondition) -> Result<Tensor> {
    const CAP: usize = 11;
    if n > CAP {
        return Err(Error::SizeCap { what: "n", value: n, cap: CAP });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let h = build_bulk_mpo(theta);
    let dense = crate::finite::mpo_to_dense(&h.local_complex(), n, bc);
    Tensor::from_matrix(dense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::BoundaryCondition;

    fn angle(t: f64) -> MeasurementAngle {
        MeasurementAngle::new(t).unwrap()
    }

    #[test]
    fn angle_range_is_enforced() {
        assert!(MeasurementAngle::new(-0.1).is_err());
        assert!(MeasurementAngle::new(1.6).is_err());
        assert!(MeasurementAngle::new(f64::NAN).is_err());
        assert!(MeasurementAngle::new(FRAC_PI_2).is_ok());
        let (a, flagged) = MeasurementAngle::clamped(1.7);
        assert!(flagged && a.value() == FRAC_PI_2);
    }

    #[test]
    fn projector_special_angles() {
        let p = build_projector(angle(0.0));
        assert_eq!(p.matrix, ndarray::array![[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(p.direction, [1.0, 0.0]);

        let p = build_projector(angle(FRAC_PI_2));
        for v in p.matrix.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
        assert!((p.direction[0] - FRAC_1_SQRT_2).abs() < 1e-15 && (p.direction[1] - FRAC_1_SQRT_2).abs() < 1e-15);

        let p = build_projector(angle(std::f64::consts::FRAC_PI_3));
        let q = 3f64.sqrt() / 4.0;
        let expect = ndarray::array![[0.75, q], [q, 0.25]];
        assert!((&p.matrix - &expect).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn site_tensor_components() {
        let t = build_site_tensor().tensor;
        let h = FRAC_1_SQRT_2;
        for l in 0..2 {
            for d in 0..2 {
                assert!((t.get(&[l, 0, 0, d, 0]).re - h).abs() < 1e-15);
            }
        }
        assert!((t.get(&[1, 1, 1, 1, 1]).re - h).abs() < 1e-15);
        assert!((t.get(&[1, 1, 1, 0, 1]).re + h).abs() < 1e-15);
        assert_eq!(t.get(&[0, 1, 0, 0, 1]).norm(), 0.0);
    }

    #[test]
    fn z_measurement_gives_rank_one_row() {
        let h = build_bulk_mpo(angle(0.0));
        for ((l, r, u, d), v) in h.local().indexed_iter() {
            if u == 0 && r == 0 {
                assert!((v - 1.0).abs() < 1e-15, "{l}{r}{u}{d}");
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        let m = finite_row_matrix(angle(0.0), 3, BoundaryCondition::Open).unwrap().to_matrix().unwrap();
        let (_, s, _) = crate::linalg::svd_thin(m.view()).unwrap();
        assert!(s[1] < 1e-12 * s[0]);
    }

    #[test]
    fn x_measurement_ring_is_unitary() {
        let m = finite_row_matrix(angle(FRAC_PI_2), 4, BoundaryCondition::Periodic).unwrap().to_matrix().unwrap();
        let mm = crate::linalg::dagger(m.view()).dot(&m);
        let dev = (&mm - &Array2::<C64>::eye(16)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }

    #[test]
    fn row_operator_is_real_and_rescaled() {
        for t in [0.0, 0.4, 1.0, 1.4, FRAC_PI_2] {
            let h = build_bulk_mpo(angle(t));
            let b = build_bulk_measured_tensor(angle(t)).tensor;
            for ((l, r, u, d), w) in h.local().indexed_iter() {
                let bv = b.get(&[l, r, u, d]);
                assert_eq!(bv.im, 0.0);
                assert!((bv.re - h.site_scale() * w).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn finite_row_matrix_size_cap() {
        assert!(matches!(
            finite_row_matrix(angle(1.0), 12, BoundaryCondition::Open),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn boundary_map_is_hadamard_then_cz() {
        let o = build_upper_boundary_map();
        assert!(o.unitarity_residual() < 1e-12);
        let dense = crate::finite::mpo_to_dense(&o.mpo(), 3, BoundaryCondition::Open);
        // Ô |000⟩ = ∏CZ |+++⟩: amplitudes (-1)^{s0 s1 + s1 s2} / 2^{3/2}.
        for s in 0..8usize {
            let bits = [(s >> 2) & 1, (s >> 1) & 1, s & 1];
            let expect = sign(bits[0] * bits[1] + bits[1] * bits[2]) / 8f64.sqrt();
            assert!((dense[[s, 0]].re - expect).abs() < 1e-14 && dense[[s, 0]].im.abs() < 1e-15);
        }
    }
}
