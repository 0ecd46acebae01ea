//! Brute-force state vectors on small lattices: the cluster state built from
//! its circuit, post-selected measurements, and checks of every tensor
//! construction against them.
//!
//! Qubit `i = x + lx·y` sits at column `x`, row `y` (row 0 at the bottom) and
//! is bit `n − 1 − i` of the amplitude index, so qubit 0 is the most
//! significant bit, as in [`crate::finite`].

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite::{mpo_to_dense, BoundaryCondition, FiniteMPS};
use crate::linalg::{dagger, eig_dense, svd_thin};
use crate::model::{
    build_bulk_mpo, build_lower_boundary_tensor, build_projector, build_site_tensor, build_upper_boundary_map,
    MeasurementAngle, SiteTensor,
};
use crate::tensor::C64;
use crate::umps::SchmidtSpectrum;

pub const MAX_QUBITS: usize = 24;
pub const MAX_PEPS_QUBITS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    pub n_qubits: usize,
    pub amplitudes: Array1<C64>,
}

impl PureState {
    pub fn new(n_qubits: usize, amplitudes: Array1<C64>) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::SizeCap { what: "qubits", value: n_qubits, cap: MAX_QUBITS });
        }
        if amplitudes.len() != 1 << n_qubits {
            return Err(Error::Shape(format!("{} amplitudes for {n_qubits} qubits", amplitudes.len())));
        }
        Ok(PureState { n_qubits, amplitudes })
    }

    /// `|+⟩^{⊗n}`.
    pub fn plus(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::SizeCap { what: "qubits", value: n_qubits, cap: MAX_QUBITS });
        }
        let dim = 1usize << n_qubits;
        let a = C64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(PureState { n_qubits, amplitudes: Array1::from_elem(dim, a) })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroProbability);
        }
        self.amplitudes.mapv_inplace(|z| z / n);
        Ok(n)
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) {
        let (ma, mb) = (self.mask(a), self.mask(b));
        for (i, z) in self.amplitudes.iter_mut().enumerate() {
            if i & ma != 0 && i & mb != 0 {
                *z = -*z;
            }
        }
    }

    /// Applies a single-qubit matrix to qubit `q`.
    pub fn apply_single(&mut self, q: usize, u: &Array2<C64>) {
        let m = self.mask(q);
        for i in 0..self.amplitudes.len() {
            if i & m == 0 {
                let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | m]);
                self.amplitudes[i] = u[[0, 0]] * a0 + u[[0, 1]] * a1;
                self.amplitudes[i | m] = u[[1, 0]] * a0 + u[[1, 1]] * a1;
            }
        }
    }

    pub fn expectation_pauli_string(&self, x_sites: &[usize], z_sites: &[usize]) -> C64 {
        let xm: usize = x_sites.iter().map(|&q| self.mask(q)).sum();
        let zm: usize = z_sites.iter().map(|&q| self.mask(q)).sum();
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, &amp)| {
                let j = i ^ xm;
                let sign = if (j & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                amp.conj() * self.amplitudes[j] * sign
            })
            .sum()
    }

    /// Schmidt spectrum across the cut after the first `k` qubits.
    pub fn schmidt(&self, k: usize) -> Result<SchmidtSpectrum> {
        if k == 0 || k >= self.n_qubits {
            return Err(Error::InvalidArgument(format!("cut {k} outside 1..{}", self.n_qubits)));
        }
        let m = Array2::from_shape_vec((1 << k, 1 << (self.n_qubits - k)), self.amplitudes.to_vec()).expect("length");
        let (_, s, _) = svd_thin(m.view())?;
        Ok(SchmidtSpectrum::from_values(&s))
    }

    pub fn fidelity(&self, other: &PureState) -> f64 {
        let o: C64 = self.amplitudes.iter().zip(other.amplitudes.iter()).map(|(a, b)| a.conj() * b).sum();
        o.norm_sqr() / (self.norm() * other.norm()).powi(2)
    }
}

fn check_lattice(lx: usize, ly: usize, cap: usize) -> Result<()> {
    if lx == 0 || ly == 0 {
        return Err(Error::InvalidArgument("empty lattice".into()));
    }
    if lx * ly > cap {
        return Err(Error::SizeCap { what: "qubits", value: lx * ly, cap });
    }
    Ok(())
}

/// Nearest-neighbour links of an open `lx × ly` patch, each once.
pub fn lattice_links(lx: usize, ly: usize) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    for y in 0..ly {
        for x in 0..lx {
            let i = x + lx * y;
            if x + 1 < lx {
                links.push((i, i + 1));
            }
            if y + 1 < ly {
                links.push((i, i + lx));
            }
        }
    }
    links
}

/// `∏ CZ |+⟩^{⊗N}` on an open `lx × ly` patch.
pub fn exact_cluster_state(lx: usize, ly: usize) -> Result<PureState> {
    check_lattice(lx, ly, MAX_QUBITS)?;
    let mut psi = PureState::plus(lx * ly)?;
    for (a, b) in lattice_links(lx, ly) {
        psi.apply_cz(a, b);
    }
    Ok(psi)
}

/// `⟨X_i ∏_{j ∼ i} Z_j⟩` for every site.
pub fn stabilizer_expectations(psi: &PureState, lx: usize, ly: usize) -> Result<Vec<C64>> {
    if psi.n_qubits != lx * ly {
        return Err(Error::Shape("lattice does not match the state".into()));
    }
    let links = lattice_links(lx, ly);
    Ok((0..lx * ly)
        .map(|i| {
            let nbrs: Vec<usize> =
                links.iter().filter_map(|&(a, b)| if a == i { Some(b) } else if b == i { Some(a) } else { None }).collect();
            psi.expectation_pauli_string(&[i], &nbrs)
        })
        .collect())
}

/// Post-selects `⟨m_θ|` on each listed qubit; returns the normalized state on
/// the remaining qubits (original order) and the selection probability.
pub fn apply_measurements(state: &PureState, theta: MeasurementAngle, sites: &[usize]) -> Result<(PureState, f64)> {
    let n = state.n_qubits;
    let mut sorted = sites.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != sites.len() || sorted.iter().any(|&q| q >= n) {
        return Err(Error::InvalidArgument("measured sites must be distinct and inside the lattice".into()));
    }
    let m = theta.direction();
    let remaining: Vec<usize> = (0..n).filter(|q| !sorted.contains(q)).collect();
    let k = remaining.len();
    let mut out = Array1::<C64>::zeros(1 << k);
    for (i, &amp) in state.amplitudes.iter().enumerate() {
        let bit = |q: usize| (i >> (n - 1 - q)) & 1;
        let weight: f64 = sorted.iter().map(|&q| m[bit(q)]).product();
        if weight == 0.0 {
            continue;
        }
        let j = remaining.iter().fold(0usize, |acc, &q| (acc << 1) | bit(q));
        out[j] += amp * weight;
    }
    let prob = out.iter().map(|z| z.norm_sqr()).sum::<f64>() / state.norm().powi(2);
    if !(prob > 1e-300) {
        return Err(Error::ZeroProbability);
    }
    let mut residual = PureState { n_qubits: k, amplitudes: out };
    residual.normalize()?;
    Ok((residual, prob))
}

/// `⟨ψ|P_q|ψ⟩` with the projector matrix applied to one qubit.
pub fn single_site_probability(state: &PureState, theta: MeasurementAngle, q: usize) -> f64 {
    let p = build_projector(theta).matrix.mapv(|x| C64::new(x, 0.0));
    let mut projected = state.clone();
    projected.apply_single(q, &p);
    let o: C64 = state.amplitudes.iter().zip(projected.amplitudes.iter()).map(|(a, b)| a.conj() * b).sum();
    o.re / state.norm().powi(2)
}

/// Contracts a patch of site tensors (legs l, r, u, d, s) with the edge rule:
/// receiving legs pinned to 0, broadcasting legs summed.
pub fn contract_peps(lx: usize, ly: usize, site: &SiteTensor) -> Result<PureState> {
    check_lattice(lx, ly, MAX_PEPS_QUBITS)?;
    if site.tensor.shape() != [2, 2, 2, 2, 2] {
        return Err(Error::Shape("site tensor must have five legs of dimension 2".into()));
    }
    let t = &site.tensor;
    // state[phys] lists the nonzero (legs, amplitude) entries; legs = vertical
    // legs v_0..v_{lx-1} then horizontal h. Only a few leg patterns survive
    // per physical configuration, so this stays linear in 2^n.
    let vbit = |x: usize| 1usize << (lx - x);
    let hbit = 1usize;
    let zero = C64::new(0.0, 0.0);
    let mut state: Vec<Vec<(usize, C64)>> = vec![vec![(0, C64::new(1.0, 0.0))]];
    for y in 0..ly {
        // New row: the left edge receives 0 on the horizontal leg.
        for x in 0..lx {
            let mut next: Vec<Vec<(usize, C64)>> = vec![Vec::new(); state.len() * 2];
            for (p, entries) in state.iter().enumerate() {
                for &(leg, amp) in entries {
                    let l = if x == 0 { if leg & hbit != 0 { continue } else { 0 } } else { leg & hbit };
                    let d = if y == 0 { if leg & vbit(x) != 0 { continue } else { 0 } } else { usize::from(leg & vbit(x) != 0) };
                    let base = leg & !(hbit | vbit(x));
                    for s in 0..2 {
                        let slot = &mut next[p * 2 + s];
                        for r in 0..2 {
                            for u in 0..2 {
                                let c = t.get(&[l, r, u, d, s]);
                                if c == zero {
                                    continue;
                                }
                                let r_out = if x + 1 == lx { 0 } else { r };
                                let u_out = if y + 1 == ly { 0 } else { u };
                                let new_leg = base | (if r_out == 1 { hbit } else { 0 }) | (if u_out == 1 { vbit(x) } else { 0 });
                                match slot.iter_mut().find(|(k, _)| *k == new_leg) {
                                    Some((_, v)) => *v += amp * c,
                                    None => slot.push((new_leg, amp * c)),
                                }
                            }
                        }
                    }
                }
            }
            state = next;
        }
    }
    let amplitudes = state.iter().map(|e| e.iter().filter(|(k, _)| *k == 0).map(|(_, v)| *v).sum()).collect();
    PureState::new(lx * ly, amplitudes)
}

/// `|⟨exact|peps⟩|²` for an arbitrary site tensor (used to test corrupted
/// tensors as well).
pub fn validate_peps_with(lx: usize, ly: usize, site: &SiteTensor) -> Result<f64> {
    let exact = exact_cluster_state(lx, ly)?;
    let peps = contract_peps(lx, ly, site)?;
    if peps.norm() == 0.0 {
        return Ok(0.0);
    }
    Ok(exact.fidelity(&peps))
}

pub fn validate_peps(lx: usize, ly: usize) -> Result<f64> {
    validate_peps_with(lx, ly, &build_site_tensor())
}

/// Top-row state of an `lx × (ly + 1)` patch after post-selecting rows
/// `0..ly`.
pub fn exact_boundary_state(lx: usize, ly: usize, theta: MeasurementAngle) -> Result<PureState> {
    let psi = exact_cluster_state(lx, ly + 1)?;
    let measured: Vec<usize> = (0..lx * ly).collect();
    Ok(apply_measurements(&psi, theta, &measured)?.0)
}

/// Lower boundary row as an open finite MPS (left edge pinned, right summed).
pub fn lower_boundary_mps(lx: usize, theta: MeasurementAngle) -> Result<FiniteMPS> {
    if lx < 2 {
        return Err(Error::InvalidArgument("need at least two columns".into()));
    }
    let t = build_lower_boundary_tensor(theta).tensor;
    let tensors = (0..lx)
        .map(|i| {
            let (lb, rb) = (if i == 0 { 1 } else { 2 }, if i + 1 == lx { 1 } else { 2 });
            ndarray::Array3::from_shape_fn((lb, 2, rb), |(l, u, r)| {
                if i + 1 == lx {
                    (0..2).map(|rr| t.get(&[l, rr, u])).sum()
                } else {
                    t.get(&[l, r, u])
                }
            })
        })
        .collect();
    FiniteMPS::new(tensors, BoundaryCondition::Open)
}

fn open_edges(dw: usize) -> (Vec<C64>, Vec<C64>) {
    let mut left = vec![C64::new(0.0, 0.0); dw];
    left[0] = C64::new(1.0, 0.0);
    (left, vec![C64::new(1.0, 0.0); dw])
}

/// Boundary MPS after `rows` bulk rows, compressed to `chi` after each.
pub fn evolve_boundary_mps(lx: usize, rows: usize, theta: MeasurementAngle, chi: usize) -> Result<FiniteMPS> {
    let w = build_bulk_mpo(theta).local_complex();
    let (left, right) = open_edges(w.dim().0);
    let mut psi = lower_boundary_mps(lx, theta)?;
    for _ in 0..rows {
        psi = psi.apply_mpo(&w, &left, &right)?;
        psi.compress(chi)?;
    }
    Ok(psi)
}

/// Fidelity between the MPS pipeline (lower boundary, `ly − 1` bulk rows,
/// upper boundary map) and the exact post-selected top row of an
/// `lx × (ly + 1)` patch.
pub fn validate_mpo_evolution(lx: usize, ly: usize, theta: MeasurementAngle, chi: usize) -> Result<f64> {
    if lx > 10 || ly == 0 {
        return Err(Error::InvalidArgument(format!("need lx ≤ 10 and ly ≥ 1, got {lx}, {ly}")));
    }
    let exact = exact_boundary_state(lx, ly, theta)?;
    let psi = evolve_boundary_mps(lx, ly - 1, theta, chi)?;
    let o = build_upper_boundary_map().mpo();
    let (left, right) = open_edges(o.dim().0);
    let top = psi.apply_mpo(&o, &left, &right)?;
    let v = PureState::new(lx, top.to_dense()?)?;
    Ok(exact.fidelity(&v))
}

/// Dense eigenvalues of the row operator, sorted by real part (descending).
pub fn dense_spectrum(theta: MeasurementAngle, n: usize, bc: BoundaryCondition) -> Result<Vec<C64>> {
    let m = crate::model::finite_row_matrix(theta, n, bc)?.to_matrix()?;
    let (w, _) = eig_dense(m.view())?;
    let mut v = w.to_vec();
    v.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(v)
}

/// `max |(Ĥ†Ĥ − I)_{ij}|` for the dense row operator.
pub fn unitarity_residual(theta: MeasurementAngle, n: usize, bc: BoundaryCondition) -> Result<f64> {
    let m = crate::model::finite_row_matrix(theta, n, bc)?.to_matrix()?;
    let hh = dagger(m.view()).dot(&m);
    let eye = Array2::<C64>::eye(hh.nrows());
    Ok((&hh - &eye).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Mid-chain entropy of the exact boundary state after each of `rows` rows
/// (entry 0 is the lower boundary itself), open chain of `lx` sites.
pub fn exact_layer_entropies(lx: usize, rows: usize, theta: MeasurementAngle) -> Result<Vec<f64>> {
    let w = build_bulk_mpo(theta).local_complex();
    let (left, right) = open_edges(w.dim().0);
    let lossless = 1usize << (lx / 2);
    let mut psi = lower_boundary_mps(lx, theta)?;
    let mut out = vec![psi.mid_spectrum()?.ee];
    for _ in 0..rows {
        psi = psi.apply_mpo(&w, &left, &right)?;
        psi.compress(lossless)?;
        out.push(psi.mid_spectrum()?.ee);
    }
    Ok(out)
}

/// Dense open-chain row operator, checked against the MPO contraction on the
/// state vector of a lower boundary row.
pub fn dense_row_consistency(lx: usize, theta: MeasurementAngle) -> Result<f64> {
    let w = build_bulk_mpo(theta).local_complex();
    let (left, right) = open_edges(w.dim().0);
    let psi = lower_boundary_mps(lx, theta)?;
    let via_mpo = psi.apply_mpo(&w, &left, &right)?.to_dense()?;
    let dense = mpo_to_dense(&w, lx, BoundaryCondition::Open).dot(&psi.to_dense()?);
    Ok((&via_mpo - &dense).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    /// Deviation from the ideal value (`1 − fidelity`, a max-norm, ...).
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn new(name: String, residual: f64, threshold: f64) -> Self {
        OracleCheck { name, passed: residual.is_finite() && residual <= threshold, residual, threshold }
    }
}

/// The validation suite run by the command line `validate` subcommand.
pub fn run_suite() -> Result<Vec<OracleCheck>> {
    run_suite_with(&build_site_tensor())
}

pub fn run_suite_with(site: &SiteTensor) -> Result<Vec<OracleCheck>> {
    let mut checks = Vec::new();
    for (lx, ly) in [(1, 2), (2, 2), (3, 2), (3, 3), (4, 3), (4, 4), (5, 4), (4, 5)] {
        let f = validate_peps_with(lx, ly, site)?;
        checks.push(OracleCheck::new(format!("peps {lx}x{ly}"), 1.0 - f, 1e-12));
    }
    for (lx, ly) in [(2, 2), (3, 3), (4, 5)] {
        let psi = exact_cluster_state(lx, ly)?;
        let worst =
            stabilizer_expectations(&psi, lx, ly)?.iter().map(|e| (e - C64::new(1.0, 0.0)).norm()).fold(0.0, f64::max);
        checks.push(OracleCheck::new(format!("stabilizers {lx}x{ly}"), worst, 1e-12));
    }
    for theta in [0.0, 0.5, 1.0, 1.3, 1.45, std::f64::consts::FRAC_PI_2] {
        let a = MeasurementAngle::new(theta)?;
        let f = validate_mpo_evolution(4, 3, a, 16)?;
        checks.push(OracleCheck::new(format!("mpo evolution 4x3 θ={theta:.4}"), 1.0 - f, 1e-10));
    }
    for n in 2..=6 {
        let r = unitarity_residual(MeasurementAngle::new(std::f64::consts::FRAC_PI_2)?, n, BoundaryCondition::Periodic)?;
        checks.push(OracleCheck::new(format!("unitarity n={n} periodic"), r, 1e-10));
    }
    let r = build_upper_boundary_map().unitarity_residual();
    checks.push(OracleCheck::new("upper boundary unitary".into(), r, 1e-12));
    Ok(checks)
}
