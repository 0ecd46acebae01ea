//! Dominant and first-excited eigenpairs of the row operator on finite
//! chains, for open and periodic boundaries.
//!
//! Open chains use two-site sweeps in mixed canonical form. Periodic chains
//! use single-site sweeps where every local problem is a generalized
//! eigenproblem `H_eff a = μ N_eff a`; the ring environments are stored as
//! dense products of transfer matrices, with right products precomputed per
//! sweep and left products accumulated on the fly.
//!
//! The excited state is the dominant eigenvector of `Q Ĥ Q` with
//! `Q = 1 − |ψ0⟩⟨ψ0|`. Because `Ĥψ0 = e0 ψ0`, this operator is block
//! triangular with respect to `ψ0`, so its spectrum on the complement is that
//! of `Ĥ` without `e0` and its eigenvectors are orthogonal to `ψ0`. Local
//! problems are additionally constrained to the complement of the projected
//! `ψ0`.
//!
//! Eigenpairs are ordered by real part: for the paired spectra met in the
//! two-fold phase the largest-modulus partner of the dominant eigenvalue is
//! its negative, which is not a separate branch.

use ndarray::{s, Array1, Array2, Array3, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigs::{eigs, EigsOptions, Which};
use crate::error::{Error, Result};
use crate::linalg::{dagger, eigh, frobenius, lq_positive, qr_positive, svd_thin, svd_truncate_matrix};
use crate::model::{build_bulk_mpo, MeasurementAngle, RowOperator};
use crate::tensor::Reshaped;
use crate::tensor::C64;
use crate::umps::{mixed_left, mixed_right, SchmidtSpectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Open,
    Periodic,
}

impl std::str::FromStr for BoundaryCondition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "open" | "obc" => Ok(BoundaryCondition::Open),
            "periodic" | "pbc" => Ok(BoundaryCondition::Periodic),
            other => Err(format!("unknown boundary condition '{other}'")),
        }
    }
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Dense matrix of an `n`-site MPO (row = out configuration, site 0 most
/// significant). Open chains pin the left bond to 0 and sum the right bond.
pub fn mpo_to_dense(w: &Array4<C64>, n: usize, bc: BoundaryCondition) -> Array2<C64> {
    let (dw, _, dout, din) = w.dim();
    // m[l0, cur, out, in]
    let mut m = Array4::<C64>::zeros((dw, dw, 1, 1));
    for l in 0..dw {
        m[[l, l, 0, 0]] = one();
    }
    for _ in 0..n {
        let (_, _, ro, ri) = m.dim();
        let mut next = Array4::<C64>::zeros((dw, dw, ro * dout, ri * din));
        for l0 in 0..dw {
            for l in 0..dw {
                for r in 0..dw {
                    for o in 0..dout {
                        for i in 0..din {
                            let c = w[[l, r, o, i]];
                            if c == zero() {
                                continue;
                            }
                            let src = m.slice(s![l0, l, .., ..]);
                            let mut dst = next.slice_mut(s![l0, r, o..;dout, i..;din]);
                            dst.scaled_add(c, &src);
                        }
                    }
                }
            }
        }
        m = next;
    }
    let (_, _, ro, ri) = m.dim();
    let mut out = Array2::<C64>::zeros((ro, ri));
    match bc {
        BoundaryCondition::Open => {
            for r in 0..dw {
                out += &m.slice(s![0, r, .., ..]);
            }
        }
        BoundaryCondition::Periodic => {
            for l in 0..dw {
                out += &m.slice(s![l, l, .., ..]);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMPS {
    pub n: usize,
    /// Legs (left, physical, right). Open chains have unit outer bonds.
    pub tensors: Vec<Array3<C64>>,
    pub bc: BoundaryCondition,
    pub chi: usize,
}

fn mat(a: &Array3<C64>, rows: usize, cols: usize) -> Array2<C64> {
    a.view().reshaped((rows, cols))
}

fn ten(m: Array2<C64>, shape: (usize, usize, usize)) -> Array3<C64> {
    m.reshaped(shape)
}

impl FiniteMPS {
    pub fn new(tensors: Vec<Array3<C64>>, bc: BoundaryCondition) -> Result<Self> {
        let n = tensors.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty chain".into()));
        }
        for i in 0..n {
            let next = &tensors[(i + 1) % n];
            if i + 1 < n || bc == BoundaryCondition::Periodic {
                if tensors[i].dim().2 != next.dim().0 {
                    return Err(Error::Shape(format!("bond {i} mismatch")));
                }
            }
        }
        if bc == BoundaryCondition::Open && (tensors[0].dim().0 != 1 || tensors[n - 1].dim().2 != 1) {
            return Err(Error::Shape("open chain needs unit outer bonds".into()));
        }
        let chi = tensors.iter().map(|t| t.dim().0.max(t.dim().2)).max().unwrap_or(1);
        Ok(FiniteMPS { n, tensors, bc, chi })
    }

    /// Random real tensors; open chains get the largest useful bond on each cut.
    pub fn random(n: usize, chi: usize, bc: BoundaryCondition, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bond = |i: usize| -> usize {
            match bc {
                BoundaryCondition::Periodic => chi,
                BoundaryCondition::Open => {
                    let k = i.min(n - i).min(30) as u32;
                    (1usize << k).min(chi)
                }
            }
        };
        let tensors = (0..n)
            .map(|i| {
                let (l, r) = (bond(i), bond((i + 1) % n).max(if bc == BoundaryCondition::Open && i + 1 == n { 1 } else { 0 }));
                let r = if bc == BoundaryCondition::Open && i + 1 == n { 1 } else { r };
                Array3::from_shape_fn((l, 2, r), |_| C64::new(rng.random_range(-1.0..1.0), 0.0))
            })
            .collect();
        let mut psi = FiniteMPS { n, tensors, bc, chi };
        psi.normalize();
        psi
    }

    /// `⊗ |v⟩` with unit bonds.
    pub fn product(n: usize, v: &[C64], bc: BoundaryCondition) -> Self {
        let t = Array3::from_shape_fn((1, v.len(), 1), |(_, s, _)| v[s]);
        let mut psi = FiniteMPS { n, tensors: vec![t; n], bc, chi: 1 };
        psi.normalize();
        psi
    }

    /// `⟨self|other⟩` as (mantissa, log-scale): value = mantissa · e^{scale}.
    fn overlap_scaled(&self, other: &FiniteMPS) -> (C64, f64) {
        match self.bc {
            BoundaryCondition::Open => {
                let mut x = Array2::<C64>::eye(1);
                let mut log = 0.0;
                for (a, b) in self.tensors.iter().zip(&other.tensors) {
                    x = crate::umps::transfer_left(a, b, &x);
                    let nrm = frobenius(x.view());
                    if nrm > 0.0 {
                        x.mapv_inplace(|z| z / nrm);
                        log += nrm.ln();
                    }
                }
                (x[[0, 0]], log)
            }
            BoundaryCondition::Periodic => {
                // Transfer product on (bra ⊗ ket) bond space, traced at the end.
                let (cb, ck) = (self.tensors[0].dim().0, other.tensors[0].dim().0);
                let m = cb * ck;
                let mut cols = Array2::<C64>::eye(m);
                let mut log = 0.0;
                for (a, b) in self.tensors.iter().zip(&other.tensors) {
                    let mut next = Array2::<C64>::zeros((m, a.dim().2 * b.dim().2));
                    for (j, col) in cols.axis_iter(Axis(0)).enumerate() {
                        let x = Array2::from_shape_vec((a.dim().0, b.dim().0), col.to_vec()).expect("len");
                        let y = crate::umps::transfer_left(a, b, &x);
                        next.row_mut(j).assign(&Array1::from_iter(y.iter().copied()));
                    }
                    let nrm = frobenius(next.view());
                    next.mapv_inplace(|z| z / nrm);
                    log += nrm.ln();
                    cols = next;
                }
                // cols[j, k] = image of basis vector j; trace = Σ_j cols[j, j].
                let tr: C64 = (0..m).map(|j| cols[[j, j]]).sum();
                (tr, log)
            }
        }
    }

    pub fn overlap(&self, other: &FiniteMPS) -> C64 {
        let (m, log) = self.overlap_scaled(other);
        m * log.exp()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.overlap(self).re
    }

    /// Scales every tensor equally so that `⟨ψ|ψ⟩ = 1`.
    pub fn normalize(&mut self) {
        let (m, log) = self.overlap_scaled(self);
        let log_norm = 0.5 * (m.re.abs().ln() + log);
        let f = C64::new((-log_norm / self.n as f64).exp(), 0.0);
        for t in &mut self.tensors {
            t.mapv_inplace(|z| z * f);
        }
    }

    /// Full state vector (site 0 most significant); `n ≤ 20`.
    pub fn to_dense(&self) -> Result<Array1<C64>> {
        const CAP: usize = 20;
        if self.n > CAP {
            return Err(Error::SizeCap { what: "n", value: self.n, cap: CAP });
        }
        let d = self.tensors[0].dim().1;
        let chi0 = self.tensors[0].dim().0;
        // m[l0, config, cur]
        let mut m = Array3::<C64>::zeros((chi0, 1, chi0));
        for l in 0..chi0 {
            m[[l, 0, l]] = one();
        }
        for t in &self.tensors {
            let (l0, cfg, cur) = m.dim();
            let r = t.dim().2;
            let mm = m.reshaped((l0 * cfg, cur));
            let prod = mm.dot(&mat(t, cur, d * r));
            m = prod.reshaped((l0, cfg * d, r));
        }
        let (l0, cfg, r) = m.dim();
        let mut out = Array1::<C64>::zeros(cfg);
        match self.bc {
            BoundaryCondition::Open => out.assign(&m.slice(s![0, .., 0])),
            BoundaryCondition::Periodic => {
                for l in 0..l0.min(r) {
                    out += &m.slice(s![l, .., l]);
                }
            }
        }
        Ok(out)
    }

    fn check_open(&self) -> Result<()> {
        if self.bc != BoundaryCondition::Open {
            return Err(Error::InvalidArgument("operation needs open boundaries".into()));
        }
        Ok(())
    }

    /// Makes sites `1..n` right-isometric; site 0 carries the norm.
    fn right_canonicalize(&mut self) -> Result<()> {
        for i in (1..self.n).rev() {
            let (l, d, r) = self.tensors[i].dim();
            let (lm, q) = lq_positive(mat(&self.tensors[i], l, d * r).view())?;
            let k = q.nrows();
            self.tensors[i] = ten(q, (k, d, r));
            let (pl, pd, pr) = self.tensors[i - 1].dim();
            let prev = mat(&self.tensors[i - 1], pl * pd, pr).dot(&lm);
            self.tensors[i - 1] = ten(prev, (pl, pd, k));
        }
        Ok(())
    }

    /// Schmidt spectrum across the cut after `bond` sites.
    pub fn bond_spectrum(&self, bond: usize) -> Result<SchmidtSpectrum> {
        if bond == 0 || bond >= self.n {
            return Err(Error::InvalidArgument(format!("bond {bond} outside 1..{}", self.n)));
        }
        match self.bc {
            BoundaryCondition::Open => {
                let mut psi = self.clone();
                psi.right_canonicalize()?;
                let mut last = Array2::<C64>::eye(1);
                for i in 0..bond {
                    let (l, d, r) = psi.tensors[i].dim();
                    let (q, rm) = qr_positive(mat(&psi.tensors[i], l * d, r).view())?;
                    let k = q.ncols();
                    psi.tensors[i] = ten(q, (l, d, k));
                    let (_, nd, nr) = psi.tensors[i + 1].dim();
                    let next = rm.dot(&mat(&psi.tensors[i + 1], r, nd * nr));
                    psi.tensors[i + 1] = ten(next, (k, nd, nr));
                    last = rm;
                }
                let (_, s, _) = svd_thin(last.view())?;
                Ok(SchmidtSpectrum::from_values(&s))
            }
            BoundaryCondition::Periodic => ring_cut_spectrum(self, bond),
        }
    }

    pub fn mid_spectrum(&self) -> Result<SchmidtSpectrum> {
        self.bond_spectrum(self.n / 2)
    }

    /// Applies an MPO with legs (left, right, out, in), contracting the outer
    /// MPO bonds of an open chain with the given boundary vectors.
    pub fn apply_mpo(&self, w: &Array4<C64>, left: &[C64], right: &[C64]) -> Result<FiniteMPS> {
        self.check_open()?;
        let (dw, _, dout, din) = w.dim();
        let n = self.n;
        let mut out = Vec::with_capacity(n);
        for (i, a) in self.tensors.iter().enumerate() {
            let (l, d, r) = a.dim();
            if d != din {
                return Err(Error::Shape("MPO input dimension mismatch".into()));
            }
            let (wl, wr) = (if i == 0 { 1 } else { dw }, if i + 1 == n { 1 } else { dw });
            let t = Array3::from_shape_fn((l * wl, dout, r * wr), |(x, o, y)| {
                let (ai, li) = (x / wl, x % wl);
                let (bi, ri) = (y / wr, y % wr);
                let mut acc = zero();
                for lw in 0..dw {
                    let lc = if i == 0 { left[lw] } else if lw == li { one() } else { continue };
                    for rw in 0..dw {
                        let rc = if i + 1 == n { right[rw] } else if rw == ri { one() } else { continue };
                        for s in 0..d {
                            acc += lc * rc * w[[lw, rw, o, s]] * a[[ai, s, bi]];
                        }
                    }
                }
                acc
            });
            out.push(t);
        }
        FiniteMPS::new(out, BoundaryCondition::Open)
    }

    /// SVD compression of an open chain to bond dimension `chi`; returns the
    /// total discarded weight.
    pub fn compress(&mut self, chi: usize) -> Result<f64> {
        self.check_open()?;
        self.right_canonicalize()?;
        let norm = frobenius(self.tensors[0].view().reshaped((1, self.tensors[0].len())).view());
        if norm > 0.0 {
            self.tensors[0].mapv_inplace(|z| z / norm);
        }
        let mut discarded = 0.0;
        for i in 0..self.n - 1 {
            let (l, d, r) = self.tensors[i].dim();
            let tr = svd_truncate_matrix(mat(&self.tensors[i], l * d, r).view(), chi, 1e-14)?;
            discarded += tr.report.discarded_weight;
            let k = tr.s.len();
            self.tensors[i] = ten(tr.u, (l, d, k));
            let sv = Array2::from_diag(&Array1::from_iter(tr.s.iter().map(|&x| C64::new(x, 0.0)))).dot(&tr.vt);
            let (_, nd, nr) = self.tensors[i + 1].dim();
            self.tensors[i + 1] = ten(sv.dot(&mat(&self.tensors[i + 1], r, nd * nr)), (k, nd, nr));
        }
        let last = self.n - 1;
        let nrm = frobenius(mat(&self.tensors[last], self.tensors[last].dim().0, self.tensors[last].dim().1).view());
        if nrm > 0.0 {
            self.tensors[last].mapv_inplace(|z| z / nrm);
        }
        self.chi = self.tensors.iter().map(|t| t.dim().0.max(t.dim().2)).max().unwrap_or(1);
        Ok(discarded)
    }
}

/// Half-ring spectrum from the Gram matrices of the two arcs.
fn ring_cut_spectrum(psi: &FiniteMPS, bond: usize) -> Result<SchmidtSpectrum> {
    let chi0 = psi.tensors[0].dim().0;
    let chib = psi.tensors[bond].dim().0;
    // Arc states |u_{(a,b)}⟩ = (A_0 … A_{bond−1})_{ab}; Gram over (a,b).
    let gram = |range: std::ops::Range<usize>, left: usize, right: usize| -> Array2<C64> {
        // G[(a,b),(a',b')] = ⟨u_ab|u_a'b'⟩, built by transfer over the arc.
        let m = left * left;
        let mut cols = Array2::<C64>::zeros((m, right * right));
        for j in 0..m {
            let mut x = Array2::<C64>::zeros((left, left));
            x[[j / left, j % left]] = one();
            for i in range.clone() {
                x = crate::umps::transfer_left(&psi.tensors[i], &psi.tensors[i], &x);
            }
            cols.row_mut(j).assign(&Array1::from_iter(x.iter().copied()));
        }
        // cols[(a,a'), (b,b')] → G[(a,b),(a',b')]
        let t = cols.reshaped((left, left, right, right));
        t.permuted_axes([0, 2, 1, 3]).reshaped((left * right, left * right))
    };
    let ga = gram(0..bond, chi0, chib);
    let gb = gram(bond..psi.n, chib, chi0);
    // ψ = Σ_{a,b} |u_ab⟩|v_ba⟩; ρ_A ≅ G_A^{1/2} M G_A^{1/2} with M[(a,b),(a',b')] = ⟨v_{b'a'}|v_{ba}⟩.
    let mut mgb = Array2::<C64>::zeros((chi0 * chib, chi0 * chib));
    for a in 0..chi0 {
        for b in 0..chib {
            for a2 in 0..chi0 {
                for b2 in 0..chib {
                    mgb[[a * chib + b, a2 * chib + b2]] = gb[[b2 * chi0 + a2, b * chi0 + a]];
                }
            }
        }
    }
    let x = crate::linalg::psd_sqrt_factor(ga.view(), 1e-14)?;
    let rho = x.dot(&mgb).dot(&dagger(x.view()));
    let (w, _) = eigh(rho.view())?;
    let vals: Vec<f64> = w.iter().filter(|&&v| v > 0.0).map(|v| v.sqrt()).collect();
    Ok(SchmidtSpectrum::from_values(&vals))
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub chi: usize,
    /// Relative change of the eigenvalue between sweeps.
    pub tol: f64,
    pub max_sweeps: usize,
    pub min_sweeps: usize,
    pub seed: u64,
}

impl SweepOptions {
    pub fn new(chi: usize) -> Self {
        SweepOptions { chi, tol: 1e-10, max_sweeps: 30, min_sweeps: 2, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub eigenvalue: C64,
    pub psi: FiniteMPS,
    pub sweeps: usize,
    pub converged: bool,
    /// Relative eigenvalue change in the last sweep.
    pub residual: f64,
    /// `|⟨ψ|ψ0⟩|` for deflated solves.
    pub overlap: f64,
}

/// Environments for the Schur deflation of a reference state.
struct Reference<'a> {
    psi0: &'a FiniteMPS,
    norm: f64,
}

fn identity_mpo(d: usize) -> Array4<C64> {
    Array4::from_shape_fn((1, 1, d, d), |(_, _, o, i)| if o == i { one() } else { zero() })
}

/// `out[a,o,b] = Σ lh[a,l,a'] W[l,r,o,i] x[a',i,b'] rh[b,r,b']`.
fn apply_eff(lh: &Array3<C64>, w: &Array4<C64>, rh: &Array3<C64>, x: &Array3<C64>) -> Array3<C64> {
    let (bl, dw, kl) = lh.dim();
    let (br, dw2, kr) = rh.dim();
    let (_, _, dout, din) = w.dim();
    let t1 = lh.view().reshaped((bl * dw, kl)).dot(&mat(x, kl, din * kr));
    let t1 = t1.reshaped((bl, dw, din, kr));
    let t1 = t1.permuted_axes([0, 3, 1, 2]).reshaped((bl * kr, dw * din));
    let wm = w.view().permuted_axes([0, 3, 1, 2]).reshaped((dw * din, dw2 * dout));
    let t2 = t1.dot(&wm).reshaped((bl, kr, dw2, dout));
    let t2 = t2.permuted_axes([0, 3, 1, 2]).reshaped((bl * dout, kr * dw2));
    let rm = rh.view().permuted_axes([2, 1, 0]).reshaped((kr * dw2, br));
    t2.dot(&rm).reshaped((bl, dout, br))
}

fn merge_two_site_mpo(w: &Array4<C64>) -> Array4<C64> {
    let (dw, _, d, _) = w.dim();
    Array4::from_shape_fn((dw, dw, d * d, d * d), |(l, r, oo, ii)| {
        let (o1, o2, i1, i2) = (oo / d, oo % d, ii / d, ii % d);
        (0..dw).map(|m| w[[l, m, o1, i1]] * w[[m, r, o2, i2]]).sum()
    })
}

fn inner(a: &Array3<C64>, b: &Array3<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn vec3(x: &Array3<C64>) -> Array1<C64> {
    Array1::from_iter(x.iter().copied())
}

fn arr3(v: &Array1<C64>, shape: (usize, usize, usize)) -> Array3<C64> {
    Array3::from_shape_vec(shape, v.to_vec()).expect("length")
}

fn two_site(a: &Array3<C64>, b: &Array3<C64>) -> Array3<C64> {
    let (l, d, m) = a.dim();
    let (_, d2, r) = b.dim();
    ten(mat(a, l * d, m).dot(&mat(b, m, d2 * r)), (l, d * d2, r))
}

fn obc_boundaries(dw: usize) -> (Array3<C64>, Array3<C64>) {
    let mut lh = Array3::<C64>::zeros((1, dw, 1));
    lh[[0, 0, 0]] = one();
    let rh = Array3::from_elem((1, dw, 1), one());
    (lh, rh)
}

fn obc_solve(w: &Array4<C64>, init: FiniteMPS, opts: &SweepOptions, reference: Option<&Reference>) -> Result<SweepOutcome> {
    let n = init.n;
    let mut psi = init;
    psi.right_canonicalize()?;
    let nrm = frobenius(mat(&psi.tensors[0], 1, psi.tensors[0].len()).view());
    psi.tensors[0].mapv_inplace(|z| z / nrm);
    let dw = w.dim().0;
    let w2 = merge_two_site_mpo(w);
    let d = psi.tensors[0].dim().1;
    let idm = identity_mpo(d);
    let idm2 = merge_two_site_mpo(&idm);
    let (lh0, rhn) = obc_boundaries(dw);
    let (lo0, ron) = (Array3::from_elem((1, 1, 1), one()), Array3::from_elem((1, 1, 1), one()));

    let mut lh: Vec<Array3<C64>> = vec![lh0.clone(); n];
    let mut rh: Vec<Array3<C64>> = vec![rhn.clone(); n];
    let mut lo: Vec<Array3<C64>> = vec![lo0.clone(); n];
    let mut ro: Vec<Array3<C64>> = vec![ron.clone(); n];
    let mut lg: Vec<Array3<C64>> = vec![lh0.clone(); n];
    let mut rg: Vec<Array3<C64>> = vec![rhn.clone(); n];
    let env_r = |bra: &Array3<C64>, op: &Array4<C64>, ket: &Array3<C64>, y: &Array3<C64>| -> Array3<C64> {
        let out = mixed_right(bra, op, ket, &vec3(y));
        arr3(&out, (bra.dim().0, op.dim().0, ket.dim().0))
    };
    let env_l = |bra: &Array3<C64>, op: &Array4<C64>, ket: &Array3<C64>, x: &Array3<C64>| -> Array3<C64> {
        let out = mixed_left(bra, op, ket, &vec3(x));
        arr3(&out, (bra.dim().2, op.dim().1, ket.dim().2))
    };
    for i in (1..n).rev() {
        rh[i - 1] = env_r(&psi.tensors[i], w, &psi.tensors[i], &rh[i]);
        if let Some(r) = reference {
            ro[i - 1] = env_r(&r.psi0.tensors[i], &idm, &psi.tensors[i], &ro[i]);
            rg[i - 1] = env_r(&r.psi0.tensors[i], w, &psi.tensors[i], &rg[i]);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let mut solve = |i: usize, theta: &Array3<C64>, lh: &[Array3<C64>], rh: &[Array3<C64>], lo: &[Array3<C64>], ro: &[Array3<C64>], lg: &[Array3<C64>], rg: &[Array3<C64>]| -> Result<(C64, Array3<C64>)> {
        let shape = theta.dim();
        let (l_env, r_env) = (&lh[i], &rh[i + 1]);
        let defl = reference.map(|r| {
            let bb = two_site(&r.psi0.tensors[i], &r.psi0.tensors[i + 1]);
            // o = P†ψ0 (local coordinates of the reference)
            let o = apply_eff_adjoint_overlap(&lo[i], &idm2, &ro[i + 1], &bb);
            (bb, o, r.norm)
        });
        let project = |x: &Array3<C64>| -> Array3<C64> {
            match &defl {
                Some((_, o, _)) => {
                    let oo = inner(o, o).re;
                    if oo < 1e-28 {
                        return x.clone();
                    }
                    let c = inner(o, x) / oo;
                    x - &o.mapv(|z| z * c)
                }
                None => x.clone(),
            }
        };
        let apply = |v: &Array1<C64>| -> Array1<C64> {
            let x = project(&arr3(v, shape));
            let mut y = apply_eff(l_env, &w2, r_env, &x);
            if let Some((bb, o, n0)) = &defl {
                let hx = apply_eff(&lg[i], &w2, &rg[i + 1], &x);
                let c = inner(bb, &hx) / *n0;
                y = y - o.mapv(|z| z * c);
            }
            vec3(&project(&y))
        };
        let mut start = project(theta);
        if frobenius(start.view().reshaped((1, start.len())).view()) < 1e-8 {
            start = project(&Array3::from_shape_fn(shape, |_| C64::new(rng.random_range(-1.0..1.0), 0.0)));
        }
        let dim = theta.len();
        let eopts = EigsOptions::new(1, Which::LargestReal).tol(1e-12).seed(opts.seed);
        let res = eigs(apply, dim, &eopts, Some(&vec3(&start)))?;
        let p = res.pairs.into_iter().next().ok_or_else(|| Error::Linalg("empty local solve".into()))?;
        Ok((p.value, arr3(&p.vector, shape)))
    };

    let mut energy = C64::new(f64::NAN, 0.0);
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        let mut last = energy;
        // Left to right.
        for i in 0..n - 1 {
            let theta = two_site(&psi.tensors[i], &psi.tensors[i + 1]);
            let (e, t) = solve(i, &theta, &lh, &rh, &lo, &ro, &lg, &rg)?;
            last = e;
            let (l, dd, r) = t.dim();
            let tr = svd_truncate_matrix(mat(&t, l * d, (dd / d) * r).view(), opts.chi, 1e-13)?;
            let k = tr.s.len();
            let nrm = tr.s.iter().map(|x| x * x).sum::<f64>().sqrt();
            psi.tensors[i] = ten(tr.u, (l, d, k));
            let sv = Array2::from_diag(&Array1::from_iter(tr.s.iter().map(|&x| C64::new(x / nrm, 0.0)))).dot(&tr.vt);
            psi.tensors[i + 1] = ten(sv, (k, d, r));
            lh[i + 1] = env_l(&psi.tensors[i], w, &psi.tensors[i], &lh[i]);
            if let Some(rf) = reference {
                lo[i + 1] = env_l(&rf.psi0.tensors[i], &idm, &psi.tensors[i], &lo[i]);
                lg[i + 1] = env_l(&rf.psi0.tensors[i], w, &psi.tensors[i], &lg[i]);
            }
        }
        // Right to left.
        for i in (0..n - 1).rev() {
            let theta = two_site(&psi.tensors[i], &psi.tensors[i + 1]);
            let (e, t) = solve(i, &theta, &lh, &rh, &lo, &ro, &lg, &rg)?;
            last = e;
            let (l, dd, r) = t.dim();
            let tr = svd_truncate_matrix(mat(&t, l * d, (dd / d) * r).view(), opts.chi, 1e-13)?;
            let k = tr.s.len();
            let nrm = tr.s.iter().map(|x| x * x).sum::<f64>().sqrt();
            psi.tensors[i + 1] = ten(tr.vt, (k, d, r));
            let us = tr.u.dot(&Array2::from_diag(&Array1::from_iter(tr.s.iter().map(|&x| C64::new(x / nrm, 0.0)))));
            psi.tensors[i] = ten(us, (l, d, k));
            rh[i] = env_r(&psi.tensors[i + 1], w, &psi.tensors[i + 1], &rh[i + 1]);
            if let Some(rf) = reference {
                ro[i] = env_r(&rf.psi0.tensors[i + 1], &idm, &psi.tensors[i + 1], &ro[i + 1]);
                rg[i] = env_r(&rf.psi0.tensors[i + 1], w, &psi.tensors[i + 1], &rg[i + 1]);
            }
        }
        sweeps += 1;
        residual = ((last - energy).norm() / last.norm().max(1e-300)).min(f64::MAX);
        energy = last;
        log::debug!("obc sweep {sweeps}: e = {energy:.12} (Δ {residual:.2e})");
        if sweeps >= opts.min_sweeps && residual < opts.tol {
            converged = true;
            break;
        }
    }
    psi.chi = psi.tensors.iter().map(|t| t.dim().0.max(t.dim().2)).max().unwrap_or(1);
    let overlap = reference.map(|r| psi.overlap(r.psi0).norm() / r.norm.sqrt()).unwrap_or(0.0);
    Ok(SweepOutcome { eigenvalue: energy, psi, sweeps, converged, residual, overlap })
}

/// `P†|ψ0⟩` in local two-site coordinates: `o[a',s,b'] = Σ conj(lo[a0,·,a']) bb[a0,s,b0] conj(ro[b0,·,b'])`.
fn apply_eff_adjoint_overlap(lo: &Array3<C64>, _id: &Array4<C64>, ro: &Array3<C64>, bb: &Array3<C64>) -> Array3<C64> {
    let (a0n, _, an) = lo.dim();
    let (b0n, _, bn) = ro.dim();
    let (_, dd, _) = bb.dim();
    let lom = lo.view().reshaped((a0n, an));
    let rom = ro.view().reshaped((b0n, bn));
    let t = dagger(lom.view()).dot(&mat(bb, a0n, dd * b0n));
    let t = t.reshaped((an * dd, b0n));
    ten(t.dot(&rom.mapv(|z| z.conj())), (an, dd, bn))
}

// ---------------------------------------------------------------------------
// Periodic chains.

/// Dense transfer-matrix products over a ring, with log scales.
struct RingProducts {
    /// `right[i]` maps the right bond of site `i` to the left bond of site 0.
    right: Vec<Array2<C64>>,
    right_log: Vec<f64>,
}

/// Rows of `y` pushed through the transpose of the site channel.
fn right_step(rows: &Array2<C64>, bra: &Array3<C64>, op: &Array4<C64>, ket: &Array3<C64>) -> Array2<C64> {
    let m_out = bra.dim().0 * op.dim().0 * ket.dim().0;
    let mut out = Array2::<C64>::zeros((rows.nrows(), m_out));
    for (j, row) in rows.axis_iter(Axis(0)).enumerate() {
        out.row_mut(j).assign(&mixed_right(bra, op, ket, &row.to_owned()));
    }
    out
}

/// Columns of `x` (stored as rows) pushed through the site channel.
fn left_step(cols_t: &Array2<C64>, bra: &Array3<C64>, op: &Array4<C64>, ket: &Array3<C64>) -> Array2<C64> {
    let m_out = bra.dim().2 * op.dim().1 * ket.dim().2;
    let mut out = Array2::<C64>::zeros((cols_t.nrows(), m_out));
    for (j, col) in cols_t.axis_iter(Axis(0)).enumerate() {
        out.row_mut(j).assign(&mixed_left(bra, op, ket, &col.to_owned()));
    }
    out
}

fn normalize_log(m: &mut Array2<C64>) -> f64 {
    let n = frobenius(m.view());
    if n > 0.0 {
        m.mapv_inplace(|z| z / n);
        n.ln()
    } else {
        0.0
    }
}

fn ring_right_products(bra: &[Array3<C64>], op: &Array4<C64>, ket: &[Array3<C64>]) -> RingProducts {
    let n = ket.len();
    let m_end = bra[n - 1].dim().2 * op.dim().1 * ket[n - 1].dim().2;
    let mut right = vec![Array2::<C64>::zeros((0, 0)); n];
    let mut right_log = vec![0.0; n];
    right[n - 1] = Array2::eye(m_end);
    for i in (0..n - 1).rev() {
        let mut next = right_step(&right[i + 1], &bra[i + 1], op, &ket[i + 1]);
        right_log[i] = right_log[i + 1] + normalize_log(&mut next);
        right[i] = next;
    }
    RingProducts { right, right_log }
}

/// `H_eff[(a,o,b),(a',i,b')] = Σ_{l,r} E[(a,l,a'),(b,r,b')] W[l,r,o,i]`.
fn ring_heff(e: &Array2<C64>, w: &Array4<C64>, chi_b: (usize, usize), chi_k: (usize, usize)) -> Array2<C64> {
    let (dw, dw2, dout, din) = w.dim();
    let (ab, bb) = chi_b;
    let (ak, bk) = chi_k;
    let e4 = e.view().reshaped((ab, dw, ak, bb, dw2, bk));
    let mut h = Array2::<C64>::zeros((ab * dout * bb, ak * din * bk));
    for l in 0..dw {
        for r in 0..dw2 {
            // block[a, a', b, b'] = E[a,l,a',b,r,b']
            let block = e4.slice(s![.., l, .., .., r, ..]);
            for o in 0..dout {
                for i in 0..din {
                    let c = w[[l, r, o, i]];
                    if c == zero() {
                        continue;
                    }
                    for a in 0..ab {
                        for b in 0..bb {
                            let row = (a * dout + o) * bb + b;
                            for ap in 0..ak {
                                for bp in 0..bk {
                                    let col = (ap * din + i) * bk + bp;
                                    h[[row, col]] += c * block[[a, ap, b, bp]];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    h
}

/// Coordinates `g` with `g · a = Σ conj(bra[a0,o,b0]) E[(a0,l,a'),(b0,r,b')] W[l,r,o,i] a[a',i,b']`,
/// where `E = left · right` is never formed.
fn ring_gradient(left: &Array2<C64>, right: &Array2<C64>, bra: &Array3<C64>, w: &Array4<C64>, ket_shape: (usize, usize, usize)) -> Array3<C64> {
    let (a0n, dout, b0n) = bra.dim();
    let (dw, dw2, _, din) = w.dim();
    let (an, _, bn) = ket_shape;
    let m = right.nrows();
    // y[a0,b0,l,r,i] = Σ_o conj(bra[a0,o,b0]) W[l,r,o,i]
    let mut y = ndarray::Array5::<C64>::zeros((a0n, b0n, dw, dw2, din));
    for a0 in 0..a0n {
        for b0 in 0..b0n {
            for l in 0..dw {
                for r in 0..dw2 {
                    for i in 0..din {
                        y[[a0, b0, l, r, i]] = (0..dout).map(|o| bra[[a0, o, b0]].conj() * w[[l, r, o, i]]).sum();
                    }
                }
            }
        }
    }
    // right[z, (b0, r, b')] → (z, b', b0, r)
    let r4 = right.view().reshaped((m, b0n, dw2, bn));
    let rm = r4.permuted_axes([0, 3, 1, 2]).reshaped((m * bn, b0n * dw2));
    let ym = y.permuted_axes([1, 3, 0, 2, 4]).reshaped((b0n * dw2, a0n * dw * din));
    // u[z, b', a0, l, i]
    let u = rm.dot(&ym).reshaped((m, bn, a0n, dw, din));
    let um = u.permuted_axes([2, 3, 0, 1, 4]).reshaped((a0n * dw * m, bn * din));
    // left[(a0, l, a'), z] → (a', a0, l, z)
    let l4 = left.view().reshaped((a0n, dw, an, m));
    let lm = l4.permuted_axes([2, 0, 1, 3]).reshaped((an, a0n * dw * m));
    let g = lm.dot(&um).reshaped((an, bn, din));
    g.permuted_axes([0, 2, 1]).as_standard_layout().into_owned()
}

fn ring_trace_log(bra: &[Array3<C64>], op: &Array4<C64>, ket: &[Array3<C64>]) -> (C64, f64) {
    let prods = ring_right_products(bra, op, ket);
    // right[0] maps right bond of site 0 → left bond of 0; close with site 0.
    let m0 = bra[0].dim().0 * op.dim().0 * ket[0].dim().0;
    let mut cols = Array2::<C64>::eye(m0);
    cols = left_step(&cols, &bra[0], op, &ket[0]); // rows: images of basis vectors
    // Tr(R0 · T0) = Σ_j (R0 · T0 e_j)_j
    let t = prods.right[0].dot(&cols.t());
    let tr: C64 = t.diag().sum();
    (tr, prods.right_log[0])
}

fn ring_solve(w: &Array4<C64>, init: FiniteMPS, opts: &SweepOptions, reference: Option<&Reference>) -> Result<SweepOutcome> {
    let n = init.n;
    let mut psi = init;
    let d = psi.tensors[0].dim().1;
    let idm = identity_mpo(d);
    let mut energy = C64::new(f64::NAN, 0.0);
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut sweeps = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x41ed);
    let (n0_log, ref_norm) = match reference {
        Some(r) => {
            let (t, l) = ring_trace_log(&r.psi0.tensors, &idm, &r.psi0.tensors);
            (l, t.re)
        }
        None => (0.0, 1.0),
    };
    while sweeps < opts.max_sweeps {
        let hp = ring_right_products(&psi.tensors, w, &psi.tensors);
        let np = ring_right_products(&psi.tensors, &idm, &psi.tensors);
        let (op, gp) = match reference {
            Some(r) => (
                Some(ring_right_products(&r.psi0.tensors, &idm, &psi.tensors)),
                Some(ring_right_products(&r.psi0.tensors, w, &psi.tensors)),
            ),
            None => (None, None),
        };
        let start_dim = |bra: &Array3<C64>, opm: &Array4<C64>, ket: &Array3<C64>| bra.dim().0 * opm.dim().0 * ket.dim().0;
        let mut lh = Array2::<C64>::eye(start_dim(&psi.tensors[0], w, &psi.tensors[0]));
        let mut ln = Array2::<C64>::eye(start_dim(&psi.tensors[0], &idm, &psi.tensors[0]));
        let (mut lh_log, mut ln_log) = (0.0, 0.0);
        let mut lo = reference.map(|r| Array2::<C64>::eye(start_dim(&r.psi0.tensors[0], &idm, &psi.tensors[0])));
        let mut lg = reference.map(|r| Array2::<C64>::eye(start_dim(&r.psi0.tensors[0], w, &psi.tensors[0])));
        let (mut lo_log, mut lg_log) = (0.0, 0.0);
        let mut last = energy;
        for i in 0..n {
            let a = psi.tensors[i].clone();
            let shape = a.dim();
            let (al, _, ar) = shape;
            // Left products are stored transposed (rows = images of basis vectors).
            let e_h = lh.t().dot(&hp.right[i]);
            let e_n = ln.t().dot(&np.right[i]);
            let s_h = lh_log + hp.right_log[i];
            let s_n = ln_log + np.right_log[i];
            let heff = ring_heff(&e_h, w, (al, ar), (al, ar));
            let neff = ring_heff(&e_n, &idm, (al, ar), (al, ar));
            let (wn, vn) = eigh(neff.view())?;
            let wmax = wn.iter().copied().fold(0.0, f64::max);
            let keep: Vec<usize> = (0..wn.len()).filter(|&k| wn[k] > 1e-11 * wmax).collect();
            if keep.is_empty() {
                return Err(Error::Linalg("vanishing norm environment".into()));
            }
            let dim = a.len();
            let k = keep.len();
            // x = V_k W_k^{-1/2}: a = x b.
            let mut x = Array2::<C64>::zeros((dim, k));
            for (c, &kk) in keep.iter().enumerate() {
                let f = wn[kk].sqrt().recip();
                x.column_mut(c).assign(&vn.column(kk).mapv(|z| z * f));
            }
            let xh = dagger(x.view());
            let hx = heff.dot(&x);
            // Deflation terms in whitened coordinates.
            let defl = match (reference, &op, &gp, &lo, &lg) {
                (Some(r), Some(op), Some(gp), Some(lo), Some(lg)) => {
                    let b = &r.psi0.tensors[i];
                    let oc = ring_gradient(&lo.t().to_owned(), &op.right[i], b, &idm, shape);
                    let gc = ring_gradient(&lg.t().to_owned(), &gp.right[i], b, w, shape);
                    let s_o = lo_log + op.right_log[i];
                    let s_g = lg_log + gp.right_log[i];
                    // ⟨ψ0|P a⟩ = oc·a, ⟨ψ0|Ĥ P a⟩ = gc·a; P†ψ0 = conj(oc).
                    let ocv = vec3(&oc);
                    let gcv = vec3(&gc);
                    let factor = (s_o + s_g - n0_log - s_h).exp() / ref_norm;
                    let o_w = xh.dot(&ocv.mapv(|z| z.conj())); // X† P†ψ0
                    let g_w = x.t().dot(&gcv); // (gc · X b)
                    Some((o_w, g_w, factor))
                }
                _ => None,
            };
            let project = |v: &Array1<C64>| -> Array1<C64> {
                match &defl {
                    Some((o, _, _)) => {
                        let oo: f64 = o.iter().map(|z| z.norm_sqr()).sum();
                        if oo < 1e-300 {
                            return v.clone();
                        }
                        let c: C64 = o.iter().zip(v.iter()).map(|(p, q)| p.conj() * q).sum::<C64>() / oo;
                        v - &o.mapv(|z| z * c)
                    }
                    None => v.clone(),
                }
            };
            let apply = |v: &Array1<C64>| -> Array1<C64> {
                let vb = project(v);
                let mut y = xh.dot(&hx.dot(&vb));
                if let Some((o, g, f)) = &defl {
                    let c: C64 = g.iter().zip(vb.iter()).map(|(p, q)| p * q).sum::<C64>() * *f;
                    y = y - o.mapv(|z| z * c);
                }
                project(&y)
            };
            // Whitened start: b = W^{1/2} V† a.
            let mut b0 = Array1::<C64>::zeros(k);
            let av = vec3(&a);
            for (c, &kk) in keep.iter().enumerate() {
                let dotp: C64 = vn.column(kk).iter().zip(av.iter()).map(|(p, q)| p.conj() * q).sum();
                b0[c] = dotp * wn[kk].sqrt();
            }
            let mut b0 = project(&b0);
            if b0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() < 1e-8 {
                b0 = project(&Array1::from_shape_fn(k, |_| C64::new(rng.random_range(-1.0..1.0), 0.0)));
            }
            let eopts = EigsOptions::new(1, Which::LargestReal).tol(1e-12).seed(opts.seed);
            let res = eigs(apply, k, &eopts, Some(&b0))?;
            let p = res.pairs.into_iter().next().ok_or_else(|| Error::Linalg("empty local solve".into()))?;
            last = p.value * (s_h - s_n).exp();
            let anew = arr3(&x.dot(&p.vector), shape);

            // Gauge move: keep the left factor isometric, push the rest right.
            if i + 1 < n {
                let (q, mut r) = qr_positive(mat(&anew, al * d, ar).view())?;
                let kq = q.ncols();
                let rn = frobenius(r.view());
                r.mapv_inplace(|z| z / rn);
                if kq == ar {
                    psi.tensors[i] = ten(q, (al, d, ar));
                    let (_, nd, nr) = psi.tensors[i + 1].dim();
                    let next = r.dot(&mat(&psi.tensors[i + 1], ar, nd * nr));
                    psi.tensors[i + 1] = ten(next, (ar, nd, nr));
                } else {
                    psi.tensors[i] = anew;
                }
            } else {
                let nrm = frobenius(mat(&anew, al, d * ar).view());
                psi.tensors[i] = anew.mapv(|z| z / nrm);
            }
            if i + 1 < n {
                let t = &psi.tensors[i];
                lh = left_step(&lh, t, w, t);
                lh_log += normalize_log(&mut lh);
                ln = left_step(&ln, t, &idm, t);
                ln_log += normalize_log(&mut ln);
                if let (Some(r), Some(lo_m), Some(lg_m)) = (reference, lo.as_mut(), lg.as_mut()) {
                    *lo_m = left_step(lo_m, &r.psi0.tensors[i], &idm, t);
                    lo_log += normalize_log(lo_m);
                    *lg_m = left_step(lg_m, &r.psi0.tensors[i], w, t);
                    lg_log += normalize_log(lg_m);
                }
            }
        }
        sweeps += 1;
        residual = (last - energy).norm() / last.norm().max(1e-300);
        energy = last;
        log::debug!("pbc sweep {sweeps}: e = {energy:.12} (Δ {residual:.2e})");
        if sweeps >= opts.min_sweeps && residual < opts.tol {
            converged = true;
            break;
        }
    }
    psi.normalize();
    let overlap = reference.map(|r| psi.overlap(r.psi0).norm() / r.norm.sqrt()).unwrap_or(0.0);
    Ok(SweepOutcome { eigenvalue: energy, psi, sweeps, converged, residual, overlap })
}

fn check_size(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("finite chains need n ≥ 4, got {n}")));
    }
    Ok(())
}

fn initial_state(n: usize, bc: BoundaryCondition, opts: &SweepOptions) -> FiniteMPS {
    let chi = match bc {
        BoundaryCondition::Open => opts.chi,
        BoundaryCondition::Periodic => opts.chi.min(1usize << (n / 2).min(20)),
    };
    FiniteMPS::random(n, chi, bc, opts.seed)
}

/// Dominant (largest real part) eigenpair of the row operator on `n` sites.
pub fn ground_state_with(h: &RowOperator, n: usize, bc: BoundaryCondition, opts: &SweepOptions, init: Option<FiniteMPS>) -> Result<SweepOutcome> {
    check_size(n)?;
    let init = init.unwrap_or_else(|| initial_state(n, bc, opts));
    let w = h.local_complex();
    match bc {
        BoundaryCondition::Open => obc_solve(&w, init, opts, None),
        BoundaryCondition::Periodic => ring_solve(&w, init, opts, None),
    }
}

/// Dominant eigenpair of `Q Ĥ Q` with `Q = 1 − |ψ0⟩⟨ψ0|`.
pub fn excited_state_with(
    h: &RowOperator,
    psi0: &FiniteMPS,
    opts: &SweepOptions,
    init: Option<FiniteMPS>,
) -> Result<SweepOutcome> {
    let n = psi0.n;
    check_size(n)?;
    let bc = psi0.bc;
    let reference = Reference { psi0, norm: psi0.norm_sqr() };
    let alt = SweepOptions { seed: opts.seed.wrapping_add(1), ..opts.clone() };
    let init = init.unwrap_or_else(|| initial_state(n, bc, &alt));
    let w = h.local_complex();
    let out = match bc {
        BoundaryCondition::Open => obc_solve(&w, init, &alt, Some(&reference))?,
        BoundaryCondition::Periodic => ring_solve(&w, init, &alt, Some(&reference))?,
    };
    if out.overlap > 1e-6 {
        log::warn!("deflated state overlaps the reference by {:.2e}", out.overlap);
    }
    Ok(out)
}

pub fn ground_state(theta: MeasurementAngle, n: usize, bc: BoundaryCondition, chi: usize) -> Result<(C64, FiniteMPS)> {
    let out = ground_state_with(&build_bulk_mpo(theta), n, bc, &SweepOptions::new(chi), None)?;
    Ok((out.eigenvalue, out.psi))
}

pub fn excited_state(
    theta: MeasurementAngle,
    bc: BoundaryCondition,
    chi: usize,
    psi0: &FiniteMPS,
    e0: C64,
) -> Result<(C64, FiniteMPS)> {
    let _ = e0;
    if psi0.bc != bc {
        return Err(Error::InvalidArgument("boundary condition differs from the reference state".into()));
    }
    let out = excited_state_with(&build_bulk_mpo(theta), psi0, &SweepOptions::new(chi), None)?;
    Ok((out.eigenvalue, out.psi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Trivial,
    TwoFold,
}

/// Pair-degeneracy threshold separating the two branches in finite chains.
pub const BRANCH_THRESHOLD: f64 = 0.05;

pub fn classify(spec: &SchmidtSpectrum) -> Branch {
    if spec.is_two_fold(BRANCH_THRESHOLD) {
        Branch::TwoFold
    } else {
        Branch::Trivial
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumPair {
    pub theta: f64,
    pub n: usize,
    pub bc: BoundaryCondition,
    pub chi: usize,
    pub e0: C64,
    pub e1: C64,
    /// `|e0| − |e1|`.
    pub gap: f64,
    /// `|e_trivial| − |e_two-fold|` when the two states carry different labels.
    pub signed_gap: Option<f64>,
    pub branch0: Branch,
    pub branch1: Branch,
    pub spectrum0: SchmidtSpectrum,
    pub spectrum1: SchmidtSpectrum,
    pub overlap: f64,
    pub converged: bool,
    pub psi0: FiniteMPS,
    pub psi1: FiniteMPS,
}

/// Both eigenpairs at one angle; states are swapped if the deflated solve
/// finds the larger eigenvalue.
pub fn spectrum_pair(
    theta: MeasurementAngle,
    n: usize,
    bc: BoundaryCondition,
    opts: &SweepOptions,
    init: Option<(FiniteMPS, FiniteMPS)>,
) -> Result<SpectrumPair> {
    let h = build_bulk_mpo(theta);
    let (i0, i1) = match init {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let g = ground_state_with(&h, n, bc, opts, i0)?;
    let x = excited_state_with(&h, &g.psi, opts, i1)?;
    let (mut s0, mut s1) = (g, x);
    if s1.eigenvalue.re > s0.eigenvalue.re {
        log::info!("θ={:.4}: deflated solve found the larger eigenvalue; swapping", theta.value());
        std::mem::swap(&mut s0, &mut s1);
    }
    let spectrum0 = s0.psi.mid_spectrum()?;
    let spectrum1 = s1.psi.mid_spectrum()?;
    let (branch0, branch1) = (classify(&spectrum0), classify(&spectrum1));
    let signed_gap = match (branch0, branch1) {
        (Branch::Trivial, Branch::TwoFold) => Some(s0.eigenvalue.norm() - s1.eigenvalue.norm()),
        (Branch::TwoFold, Branch::Trivial) => Some(s1.eigenvalue.norm() - s0.eigenvalue.norm()),
        _ => None,
    };
    let overlap = {
        let o = s0.psi.overlap(&s1.psi).norm();
        o / (s0.psi.norm_sqr() * s1.psi.norm_sqr()).sqrt()
    };
    Ok(SpectrumPair {
        theta: theta.value(),
        n,
        bc,
        chi: opts.chi,
        e0: s0.eigenvalue,
        e1: s1.eigenvalue,
        gap: s0.eigenvalue.norm() - s1.eigenvalue.norm(),
        signed_gap,
        branch0,
        branch1,
        spectrum0,
        spectrum1,
        overlap,
        converged: s0.converged && s1.converged,
        psi0: s0.psi,
        psi1: s1.psi,
    })
}

/// Spectrum pairs over a θ grid for each `n`; each point is seeded with the
/// previous point's states.
pub fn gap_scan(theta_grid: &[f64], n_list: &[usize], bc: BoundaryCondition, chi: usize) -> Result<Vec<SpectrumPair>> {
    gap_scan_with(theta_grid, n_list, bc, &SweepOptions::new(chi))
}

pub fn gap_scan_with(theta_grid: &[f64], n_list: &[usize], bc: BoundaryCondition, opts: &SweepOptions) -> Result<Vec<SpectrumPair>> {
    if theta_grid.is_empty() || n_list.is_empty() {
        return Err(Error::InvalidArgument("empty θ grid or size list".into()));
    }
    let mut out = Vec::new();
    for &n in n_list {
        let mut seed: Option<(FiniteMPS, FiniteMPS)> = None;
        for &t in theta_grid {
            let pair = spectrum_pair(MeasurementAngle::new(t)?, n, bc, opts, seed.take())?;
            log::info!(
                "gap θ={t:.4} n={n}: e0={:.8} e1={:.8} {:?}/{:?}",
                pair.e0,
                pair.e1,
                pair.branch0,
                pair.branch1
            );
            seed = Some((pair.psi0.clone(), pair.psi1.clone()));
            out.push(pair);
        }
    }
    Ok(out)
}

/// First adjacent pair of grid points (for one `n`, ascending θ) across
/// which the dominant state changes branch.
pub fn locate_crossing(pairs: &[SpectrumPair]) -> Option<(f64, f64)> {
    pairs.windows(2).find(|w| w[0].n == w[1].n && w[0].branch0 != w[1].branch0).map(|w| (w[0].theta, w[1].theta))
}
