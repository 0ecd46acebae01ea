//! Translation-invariant MPS: canonical forms, entanglement and transfer
//! diagnostics, correlators, and the two-product-state decomposition of
//! non-injective fixed points.
//!
//! Site tensors have legs (left, physical, right). Matrices acting on the
//! bond space are stored row-major and flattened when handed to the Krylov
//! solver.

use ndarray::{s, Array1, Array2, Array3, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigs::{eigs, EigenPair, EigsOptions, Which};
use crate::error::{Error, Result};
use crate::linalg::{dagger, eig_dense, eigh, fix_phase, frobenius, lq_positive, qr_positive, svd_thin, TruncationReport};
use crate::tensor::Reshaped;
use crate::tensor::C64;

/// Singular values of the centre matrix below this fraction of the largest
/// are treated as exact zeros (redundant bond directions).
const RANK_TOL: f64 = 1e-13;
const ORTH_TOL: f64 = 1e-14;
const ORTH_MAX_ITER: usize = 40;
const FIXED_POINT_TOL: f64 = 1e-13;
/// Eigenvalues within this distance (relative to |λ₁|) are paired / unit modulus.
pub const PAIR_TOL: f64 = 1e-3;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformMPS {
    a: Array3<C64>,
}

impl UniformMPS {
    pub fn new(a: Array3<C64>) -> Result<Self> {
        let (l, _, r) = a.dim();
        if l != r || l == 0 || a.dim().1 == 0 {
            return Err(Error::Shape(format!("uniform MPS tensor must be χ×d×χ, got {:?}", a.dim())));
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("uniform MPS tensor"));
        }
        let a = if a.is_standard_layout() { a } else { a.as_standard_layout().into_owned() };
        Ok(UniformMPS { a })
    }

    /// Product state `⊗ |v⟩` (bond dimension 1).
    pub fn product(v: &[C64]) -> Result<Self> {
        let a = Array3::from_shape_fn((1, v.len(), 1), |(_, s, _)| v[s]);
        UniformMPS::new(a)?.normalized()
    }

    pub fn random(chi: usize, d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array3::from_shape_fn((chi, d, chi), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        UniformMPS::new(a)?.normalized()
    }

    pub fn tensor(&self) -> &Array3<C64> {
        &self.a
    }

    pub fn chi(&self) -> usize {
        self.a.dim().0
    }

    pub fn d(&self) -> usize {
        self.a.dim().1
    }

    /// Rescales so the dominant transfer-matrix eigenvalue is 1.
    pub fn normalized(self) -> Result<Self> {
        let (eta, _) = left_fixed_point(&self.a)?;
        if eta <= 0.0 || !eta.is_finite() {
            return Err(Error::Linalg(format!("transfer matrix has non-positive Perron eigenvalue {eta}")));
        }
        let f = C64::new(eta.sqrt().recip(), 0.0);
        Ok(UniformMPS { a: self.a.mapv(|z| z * f) })
    }
}

fn as_matrix(a: &Array3<C64>, rows: usize, cols: usize) -> Array2<C64> {
    a.view().reshaped((rows, cols))
}

fn as_tensor(m: Array2<C64>, shape: (usize, usize, usize)) -> Array3<C64> {
    m.reshaped(shape)
}

fn vec_of(m: &Array2<C64>) -> Array1<C64> {
    Array1::from_iter(m.iter().copied())
}

fn mat_of(v: &Array1<C64>, n: usize, m: usize) -> Array2<C64> {
    Array2::from_shape_vec((n, m), v.to_vec()).expect("matching length")
}

/// `x ↦ Σ_s bra^s† x ket^s`.
pub(crate) fn transfer_left(bra: &Array3<C64>, ket: &Array3<C64>, x: &Array2<C64>) -> Array2<C64> {
    let (kb, d, ke) = ket.dim();
    let (ba, _, bc) = bra.dim();
    let t = x.dot(&as_matrix(ket, kb, d * ke));
    let t = as_tensor(t, (ba, d, ke)).reshaped((ba * d, ke));
    dagger(as_matrix(bra, ba * d, bc).view()).dot(&t)
}

/// `y ↦ Σ_s ket^s y bra^s†`.
pub(crate) fn transfer_right(ket: &Array3<C64>, bra: &Array3<C64>, y: &Array2<C64>) -> Array2<C64> {
    let (ka, d, kc) = ket.dim();
    let (bb, _, be) = bra.dim();
    let t = as_matrix(ket, ka * d, kc).dot(y);
    let t = as_tensor(t, (ka, d, be)).reshaped((ka, d * be));
    t.dot(&dagger(as_matrix(bra, bb, d * be).view()))
}

fn dominant_matrix<F>(n: usize, which: Which, start: Option<&Array2<C64>>, mut f: F) -> Result<(C64, Array2<C64>)>
where
    F: FnMut(&Array2<C64>) -> Array2<C64>,
{
    let opts = EigsOptions::new(1, which).tol(FIXED_POINT_TOL);
    let start = start.map(vec_of);
    let res = eigs(|v| vec_of(&f(&mat_of(v, n, n))), n * n, &opts, start.as_ref())?;
    let pair = res.into_pairs()?.remove(0);
    Ok((pair.value, mat_of(&pair.vector, n, n)))
}

fn hermitian_positive(m: Array2<C64>) -> Array2<C64> {
    let h = crate::linalg::hermitian_part(m.view());
    let tr: C64 = h.diag().sum();
    let f = if tr.re < 0.0 { -1.0 } else { 1.0 };
    h.mapv(|z| z * f)
}

/// Perron eigenvalue and left fixed point `l` (Hermitian, positive trace).
pub(crate) fn left_fixed_point(a: &Array3<C64>) -> Result<(f64, Array2<C64>)> {
    let chi = a.dim().0;
    let (eta, l) = dominant_matrix(chi, Which::LargestReal, None, |x| transfer_left(a, a, x))?;
    Ok((eta.re, hermitian_positive(l)))
}

pub(crate) fn right_fixed_point(a: &Array3<C64>) -> Result<(f64, Array2<C64>)> {
    let chi = a.dim().0;
    let (eta, r) = dominant_matrix(chi, Which::LargestReal, None, |y| transfer_right(a, a, y))?;
    Ok((eta.re, hermitian_positive(r)))
}

/// Applies an MPO with legs (left, right, out, in); bond dimension multiplies.
pub(crate) fn apply_mpo(psi: &UniformMPS, w: &Array4<C64>) -> UniformMPS {
    let a = psi.tensor();
    let (chi, d, _) = a.dim();
    let (dw, _, dout, din) = w.dim();
    assert_eq!(din, d, "MPO input dimension must match the physical dimension");
    let out = Array3::from_shape_fn((chi * dw, dout, chi * dw), |(x, o, y)| {
        let (ai, li) = (x / dw, x % dw);
        let (bi, ri) = (y / dw, y % dw);
        (0..d).map(|i| a[[ai, i, bi]] * w[[li, ri, o, i]]).sum()
    });
    UniformMPS::new(out).expect("finite inputs give finite outputs")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForm {
    pub al: Array3<C64>,
    pub ar: Array3<C64>,
    /// Diagonal, non-negative, unit Frobenius norm.
    pub c: Array2<C64>,
}

impl CanonicalForm {
    pub fn chi(&self) -> usize {
        self.c.nrows()
    }

    pub fn ac(&self) -> Array3<C64> {
        let (chi, d, _) = self.al.dim();
        as_tensor(as_matrix(&self.al, chi * d, chi).dot(&self.c), (chi, d, chi))
    }

    /// Deviations of `Σ al† al` and `Σ ar ar†` from the identity (max entry).
    pub fn isometry_residuals(&self) -> (f64, f64) {
        let chi = self.chi();
        let id = Array2::<C64>::eye(chi);
        let l = transfer_left(&self.al, &self.al, &id);
        let r = transfer_right(&self.ar, &self.ar, &id);
        let dev = |m: Array2<C64>| (&m - &id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        (dev(l), dev(r))
    }

    /// `max_s ‖al^s c − c ar^s‖`.
    pub fn gauge_residual(&self) -> f64 {
        let d = self.al.dim().1;
        (0..d)
            .map(|s| {
                let al = self.al.index_axis(Axis(1), s);
                let ar = self.ar.index_axis(Axis(1), s);
                frobenius((&al.dot(&self.c) - &self.c.dot(&ar)).view())
            })
            .fold(0.0, f64::max)
    }

    pub fn to_mps(&self) -> UniformMPS {
        UniformMPS::new(self.al.clone()).expect("canonical tensors are finite")
    }
}

fn left_orth(a: &Array3<C64>, l0: &Array2<C64>) -> Result<(Array3<C64>, Array2<C64>)> {
    let (chi, d, _) = a.dim();
    let (_, mut l) = qr_positive(l0.view())?;
    let n = frobenius(l.view());
    l.mapv_inplace(|z| z / n);
    let mut al = a.clone();
    let mut prev = f64::INFINITY;
    for _ in 0..ORTH_MAX_ITER {
        let la = as_tensor(l.dot(&as_matrix(a, chi, d * chi)), (chi, d, chi));
        let (q, mut r) = qr_positive(as_matrix(&la, chi * d, chi).view())?;
        let n = frobenius(r.view());
        r.mapv_inplace(|z| z / n);
        let delta = frobenius((&r - &l).view());
        al = as_tensor(q, (chi, d, chi));
        l = r;
        if delta < ORTH_TOL || (delta > 0.5 * prev && delta < 1e-9) {
            break;
        }
        prev = delta;
    }
    Ok((al, l))
}

fn right_orth(a: &Array3<C64>, r0: &Array2<C64>) -> Result<(Array3<C64>, Array2<C64>)> {
    let (chi, d, _) = a.dim();
    let (mut r, _) = lq_positive(r0.view())?;
    let n = frobenius(r.view());
    r.mapv_inplace(|z| z / n);
    let mut ar = a.clone();
    let mut prev = f64::INFINITY;
    for _ in 0..ORTH_MAX_ITER {
        let ra = as_tensor(as_matrix(a, chi * d, chi).dot(&r), (chi, d, chi));
        let (mut lm, q) = lq_positive(as_matrix(&ra, chi, d * chi).view())?;
        let n = frobenius(lm.view());
        lm.mapv_inplace(|z| z / n);
        let delta = frobenius((&lm - &r).view());
        ar = as_tensor(q, (chi, d, chi));
        r = lm;
        if delta < ORTH_TOL || (delta > 0.5 * prev && delta < 1e-9) {
            break;
        }
        prev = delta;
    }
    Ok((ar, r))
}

/// `x^† x = m` with all directions kept (square factor).
fn square_factor(m: &Array2<C64>) -> Result<Array2<C64>> {
    let (w, v) = eigh(m.view())?;
    let n = m.nrows();
    let mut x = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        let sq = w[i].max(0.0).sqrt();
        for j in 0..n {
            x[[i, j]] = v[[j, i]].conj() * sq;
        }
    }
    Ok(x)
}

/// `p^† a^s p` for every physical index.
fn project(a: &Array3<C64>, left: &Array2<C64>, right: &Array2<C64>) -> Array3<C64> {
    let (chi, d, _) = a.dim();
    let (k_out, _) = left.dim();
    let k_in = right.ncols();
    let t = as_matrix(a, chi * d, chi).dot(right);
    let t = as_tensor(t, (chi, d, k_in)).reshaped((chi, d * k_in));
    as_tensor(left.dot(&t), (k_out, d, k_in))
}

/// Mixed canonical form with optional truncation of the bond spectrum.
pub fn canonicalize_truncated(psi: &UniformMPS, chi_max: usize, drop_tol: f64) -> Result<(CanonicalForm, TruncationReport)> {
    let (cf, report, _) = canonicalize_full(psi, chi_max, drop_tol)?;
    Ok((cf, report))
}

/// As [`canonicalize_truncated`], also returning the Perron eigenvalue of the
/// input's transfer matrix (the squared norm growth per site).
pub(crate) fn canonicalize_full(
    psi: &UniformMPS,
    chi_max: usize,
    drop_tol: f64,
) -> Result<(CanonicalForm, TruncationReport, f64)> {
    if chi_max == 0 {
        return Err(Error::InvalidArgument("chi_max must be at least 1".into()));
    }
    let mut a = psi.tensor().clone();
    let mut report: Option<TruncationReport> = None;
    let mut perron = None;
    for _pass in 0..4 {
        let (eta, l) = left_fixed_point(&a)?;
        if eta <= 0.0 {
            return Err(Error::Linalg(format!("non-positive Perron eigenvalue {eta}")));
        }
        perron.get_or_insert(eta);
        let f = C64::new(eta.sqrt().recip(), 0.0);
        a.mapv_inplace(|z| z * f);
        let (_, r) = right_fixed_point(&a)?;
        let (al, lf) = left_orth(&a, &square_factor(&l)?)?;
        let (ar, rf) = right_orth(&a, &dagger(square_factor(&r)?.view()))?;
        let c = lf.dot(&rf);
        let (u, sv, vt) = svd_thin(c.view())?;
        let total: f64 = sv.iter().map(|x| x * x).sum();
        let smax = sv[0];
        let limit = if report.is_none() { chi_max } else { usize::MAX };
        let cut = if report.is_none() { drop_tol.max(RANK_TOL) } else { RANK_TOL };
        let k = sv.iter().take(limit).take_while(|&&x| x > cut * smax).count().max(1);
        let chi = sv.len();
        let norm: f64 = sv[..k].iter().map(|x| x * x).sum::<f64>().sqrt();
        if report.is_none() {
            let discarded: f64 = sv[k..].iter().map(|x| x * x).sum::<f64>() / total;
            report = Some(TruncationReport {
                kept: k,
                discarded_weight: discarded,
                spectrum: sv[..k].iter().map(|x| x / norm).collect(),
            });
        }
        let uk = u.slice(s![.., ..k]).to_owned();
        let vk = dagger(vt.slice(s![..k, ..]));
        let al_k = project(&al, &dagger(uk.view()), &uk);
        if k == chi {
            let ar_k = project(&ar, &dagger(vk.view()), &vk);
            let c = Array2::from_diag(&Array1::from_iter(sv.iter().map(|x| C64::new(x / norm, 0.0))));
            let mut report = report.expect("set on first pass");
            report.spectrum = sv.iter().map(|x| x / norm).collect();
            return Ok((CanonicalForm { al: al_k, ar: ar_k, c }, report, perron.expect("set on first pass")));
        }
        a = al_k;
    }
    Err(Error::Gauge("bond spectrum did not stabilize under repeated canonicalization".into()))
}

pub fn canonicalize(psi: &UniformMPS) -> Result<CanonicalForm> {
    Ok(canonicalize_truncated(psi, usize::MAX, RANK_TOL)?.0)
}

/// Keeps the `chi` largest Schmidt values; the result is left-canonical and
/// normalized.
pub fn truncate_to(psi: &UniformMPS, chi: usize) -> Result<UniformMPS> {
    Ok(canonicalize_truncated(psi, chi, RANK_TOL)?.0.to_mps())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    /// Schmidt values, descending, `Σ λ² = 1`.
    pub values: Vec<f64>,
    pub ee: f64,
    pub gap_ratio: f64,
    pub pair_degeneracy: f64,
}

impl SchmidtSpectrum {
    pub fn from_values(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().map(|x| x.abs()).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        let ee = -v.iter().map(|x| x * x).filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
        let gap_ratio = if v.len() > 1 { v[1] / v[0] } else { 0.0 };
        let pair_degeneracy = v
            .chunks(2)
            .map(|c| {
                let partner = c.get(1).copied().unwrap_or(0.0);
                if c[0] > 0.0 {
                    (partner / c[0] - 1.0).abs()
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        SchmidtSpectrum { values: v, ee: ee.max(0.0), gap_ratio, pair_degeneracy }
    }

    /// Squared Schmidt values (the stored/plotted convention).
    pub fn probabilities(&self) -> Vec<f64> {
        self.values.iter().map(|x| x * x).collect()
    }

    pub fn is_two_fold(&self, threshold: f64) -> bool {
        self.values.len() >= 2 && self.pair_degeneracy <= threshold
    }
}

pub fn entanglement_spectrum(cf: &CanonicalForm) -> SchmidtSpectrum {
    let values = match svd_thin(cf.c.view()) {
        Ok((_, s, _)) => s,
        Err(_) => cf.c.diag().iter().map(|z| z.norm()).collect(),
    };
    SchmidtSpectrum::from_values(&values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferSpectrum {
    /// Leading eigenvalues by modulus, scaled so `|λ₁| = 1`.
    pub eigenvalues: Vec<C64>,
    /// `+∞` when `|λ₂| = |λ₁|` within tolerance.
    pub xi_x: f64,
    pub paired: bool,
}

impl TransferSpectrum {
    /// Every eigenvalue above `tol` whose partner would lie in the computed
    /// window has a partner `−λ` within `tol`.
    pub fn is_paired(&self, tol: f64) -> bool {
        let ev = &self.eigenvalues;
        if ev.len() < 2 {
            return false;
        }
        let floor = ev.last().map(|z| z.norm()).unwrap_or(0.0) + tol;
        let mut any = false;
        for z in ev {
            if z.norm() <= tol.max(floor) {
                continue;
            }
            any = true;
            if !ev.iter().any(|w| (w + z).norm() <= tol) {
                return false;
            }
        }
        any
    }

    pub fn xi_infinite(&self) -> bool {
        self.xi_x.is_infinite()
    }
}

pub fn transfer_spectrum(psi: &UniformMPS, k: usize) -> Result<TransferSpectrum> {
    let a = psi.tensor();
    let chi = psi.chi();
    if k == 0 || k > chi * chi {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={}", chi * chi)));
    }
    let opts = EigsOptions::new(k, Which::LargestMagnitude).tol(1e-11);
    let res = eigs(|v| vec_of(&transfer_left(a, a, &mat_of(v, chi, chi))), chi * chi, &opts, None)?;
    let pairs = res.into_pairs()?;
    let top = pairs[0].value.norm();
    if top == 0.0 {
        return Err(Error::Linalg("transfer matrix is nilpotent".into()));
    }
    let eigenvalues: Vec<C64> = pairs.iter().map(|p| clean(p.value / top)).collect();
    let xi_x = match eigenvalues.get(1) {
        Some(l2) if l2.norm() >= 1.0 - PAIR_TOL => f64::INFINITY,
        Some(l2) if l2.norm() > 0.0 => -1.0 / l2.norm().ln(),
        _ => 0.0,
    };
    let mut spec = TransferSpectrum { eigenvalues, xi_x, paired: false };
    spec.paired = spec.is_paired(PAIR_TOL);
    Ok(spec)
}

fn clean(z: C64) -> C64 {
    let mut z = z;
    if z.im.abs() < 1e-12 * z.norm().max(1e-300) {
        z.im = 0.0;
    }
    z
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Array2<C64> {
        let (o, i, z) = (C64::new(1.0, 0.0), C64::new(0.0, 1.0), zero());
        match self {
            Pauli::X => ndarray::array![[z, o], [o, z]],
            Pauli::Y => ndarray::array![[z, -i], [i, z]],
            Pauli::Z => ndarray::array![[o, z], [z, -o]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub operator: Pauli,
    pub distances: Vec<usize>,
    pub values: Vec<f64>,
    /// Largest imaginary part encountered (should vanish for real tensors).
    pub max_imag: f64,
    pub inf_magnitude: f64,
}

/// Connected correlator at a single distance.
pub fn correlator_at(cf: &CanonicalForm, op: Pauli, l: usize) -> Result<f64> {
    let series = correlator_canonical(cf, op, l, &[l], false)?;
    Ok(series.values.first().copied().unwrap_or(0.0))
}

impl CorrelationSeries {
    pub fn at(&self, l: usize) -> Option<f64> {
        self.distances.iter().position(|&x| x == l).map(|i| self.values[i])
    }
}

/// `Σ conj(bra[a,s,b]) O[s,t] ket[a,t,b]` with open left leg pair left free:
/// returns the matrix indexed by the right legs (bra, ket), after contracting
/// the left legs with `x`.
fn operator_left(x: &Array2<C64>, bra: &Array3<C64>, ket: &Array3<C64>, op: &Array2<C64>) -> Array2<C64> {
    let (chi, d, chi_r) = ket.dim();
    let mut ok = Array3::<C64>::zeros((chi, d, chi_r));
    for s in 0..d {
        for t in 0..d {
            let o = op[[s, t]];
            if o != zero() {
                let src = ket.index_axis(Axis(1), t).mapv(|z| z * o);
                let mut dst = ok.index_axis_mut(Axis(1), s);
                dst += &src;
            }
        }
    }
    transfer_left(bra, &ok, x)
}

fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// Connected two-point function `⟨O_0 O_L⟩ − ⟨O⟩²` for `L = 1..=l_max`.
pub fn correlator(psi: &UniformMPS, op: Pauli, l_max: usize) -> Result<CorrelationSeries> {
    let cf = canonicalize(psi)?;
    correlator_canonical(&cf, op, l_max, &(1..=l_max).collect::<Vec<_>>(), true)
}

/// Correlator evaluated only at the requested distances (ascending).
/// Skips the asymptotic amplitude (reported as NaN) when `with_inf` is false.
pub fn correlator_canonical(
    cf: &CanonicalForm,
    op: Pauli,
    l_max: usize,
    keep: &[usize],
    with_inf: bool,
) -> Result<CorrelationSeries> {
    let o = op.matrix();
    let ac = cf.ac();
    let ar = &cf.ar;
    let chi = cf.chi();
    let vl0 = operator_left(&Array2::eye(chi), &ac, &ac, &o);
    let mean = trace(&vl0);
    let close = |x: &Array2<C64>| trace(&operator_left(x, ar, ar, &o));

    let mut distances = Vec::new();
    let mut values = Vec::new();
    let mut max_imag: f64 = 0.0;
    let mut vl = vl0.clone();
    for l in 1..=l_max {
        if l > 1 {
            vl = transfer_left(ar, ar, &vl);
        }
        if keep.binary_search(&l).is_ok() {
            let c = close(&vl) - mean * mean;
            max_imag = max_imag.max(c.im.abs());
            distances.push(l);
            values.push(c.re);
        }
    }
    let inf_magnitude = if with_inf { asymptotic_amplitude(ar, &vl0, &close)? } else { f64::NAN };
    Ok(CorrelationSeries { operator: op, distances, values, max_imag, inf_magnitude })
}

/// `Σ_j |f(x_j) ⟨y_j, v⟩ / ⟨y_j, x_j⟩|` over the unit-modulus eigenvalues
/// `μ_j ≠ 1` of the right-canonical transfer map.
fn asymptotic_amplitude<F>(ar: &Array3<C64>, v: &Array2<C64>, close: &F) -> Result<f64>
where
    F: Fn(&Array2<C64>) -> C64,
{
    let chi = ar.dim().0;
    let n = chi * chi;
    let k = n.min(4);
    let opts = EigsOptions::new(k, Which::LargestMagnitude).tol(1e-11);
    let right = eigs(|x| vec_of(&transfer_left(ar, ar, &mat_of(x, chi, chi))), n, &opts, None)?.into_pairs()?;
    let unit: Vec<&EigenPair> =
        right.iter().filter(|p| p.value.norm() >= 1.0 - PAIR_TOL && (p.value - 1.0).norm() > PAIR_TOL).collect();
    if unit.is_empty() {
        return Ok(0.0);
    }
    let left = eigs(|y| vec_of(&transfer_right(ar, ar, &mat_of(y, chi, chi))), n, &opts, None)?.into_pairs()?;
    let mut total = 0.0;
    for p in unit {
        let partner = left
            .iter()
            .min_by(|a, b| {
                (a.value.conj() - p.value).norm().partial_cmp(&(b.value.conj() - p.value).norm()).unwrap()
            })
            .ok_or_else(|| Error::Linalg("no left eigenvector".into()))?;
        let x = mat_of(&p.vector, chi, chi);
        let y = mat_of(&partner.vector, chi, chi);
        let inner = |a: &Array2<C64>, b: &Array2<C64>| a.iter().zip(b.iter()).map(|(p, q)| p.conj() * q).sum::<C64>();
        let norm = inner(&y, &x);
        if norm.norm() < 1e-12 {
            continue;
        }
        total += (close(&x) * inner(&y, v) / norm).norm();
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatDecomposition {
    pub alpha: Vec<C64>,
    pub beta: Vec<C64>,
    pub residual_t: f64,
    pub translation_related: bool,
    pub parity_related: bool,
    /// Fidelity per site between the rebuilt `ψ⁰ + ψ¹` and the χ=2 truncation.
    pub reconstruction_fidelity: f64,
    pub discarded_weight: f64,
}

const CAT_TOL: f64 = 0.05;

fn normalized_vec(v: Vec<C64>) -> Vec<C64> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut v: Vec<C64> = v.into_iter().map(|z| z / n).collect();
    fix_phase(&mut v);
    v
}

fn overlap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}

/// Fidelity per site `|⟨φ|ψ⟩|^{1/N}` in the thermodynamic limit.
pub fn fidelity_per_site(phi: &UniformMPS, psi: &UniformMPS) -> Result<f64> {
    let phi = phi.clone().normalized()?;
    let psi = psi.clone().normalized()?;
    let (a, b) = (phi.tensor(), psi.tensor());
    let (ca, cb) = (phi.chi(), psi.chi());
    let opts = EigsOptions::new(1, Which::LargestMagnitude).tol(1e-12);
    let res = eigs(|v| vec_of(&transfer_left(a, b, &mat_of(v, ca, cb))), ca * cb, &opts, None)?;
    Ok(res.into_pairs()?[0].value.norm())
}

pub fn cat_decompose(psi: &UniformMPS) -> Result<CatDecomposition> {
    let k = (psi.chi() * psi.chi()).min(6);
    if !transfer_spectrum(psi, k)?.paired {
        return Err(Error::Injective);
    }
    let (cf, report) = canonicalize_truncated(psi, 2, RANK_TOL)?;
    let a = cf.al.clone();
    if a.dim().0 != 2 {
        return Err(Error::Gauge(format!("truncation left bond dimension {}", a.dim().0)));
    }
    // Right transfer map on 2×2 matrices, densely.
    let mut e = Array2::<C64>::zeros((4, 4));
    for j in 0..4 {
        let mut y = Array2::<C64>::zeros((2, 2));
        y[[j / 2, j % 2]] = C64::new(1.0, 0.0);
        let col = vec_of(&transfer_right(&a, &a, &y));
        e.column_mut(j).assign(&col);
    }
    let (w, v) = eig_dense(e.view())?;
    let pick = |target: f64| -> Result<Array2<C64>> {
        let i = (0..4)
            .min_by(|&i, &j| (w[i] - target).norm().partial_cmp(&(w[j] - target).norm()).unwrap())
            .expect("four eigenvalues");
        if (w[i] - target).norm() > 0.1 {
            return Err(Error::Injective);
        }
        Ok(mat_of(&v.column(i).to_owned(), 2, 2))
    };
    let y_plus = pick(1.0)?;
    let y_minus = pick(-1.0)?;
    use ndarray_linalg::Inverse;
    let grading = y_minus.dot(&y_plus.inv().map_err(|e| Error::Gauge(e.to_string()))?);
    let (_, p) = eig_dense(grading.view())?;
    let pinv = p.inv().map_err(|e| Error::Gauge(format!("grading not diagonalizable: {e}")))?;
    let t = project(&a, &pinv, &p);

    let block = |i: usize, j: usize| -> Vec<C64> { (0..2).map(|s| t[[i, s, j]]).collect() };
    let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let (t01, t10) = (block(0, 1), block(1, 0));
    let (n01, n10) = (norm(&t01), norm(&t10));
    if n01 == 0.0 || n10 == 0.0 {
        return Err(Error::Gauge("off-diagonal block vanishes".into()));
    }
    // Balance the diagonal gauge so both off-diagonal blocks carry equal weight.
    let diag_w = norm(&block(0, 0)).powi(2) + norm(&block(1, 1)).powi(2);
    let off_w = 2.0 * n01 * n10;
    let residual_t = (diag_w / (diag_w + off_w)).clamp(0.0, 1.0);

    let mut alpha = normalized_vec(t01);
    let mut beta = normalized_vec(t10);
    let zpol = |v: &[C64]| v[0].norm_sqr() - v[1].norm_sqr();
    if zpol(&beta) > zpol(&alpha) {
        std::mem::swap(&mut alpha, &mut beta);
    }

    // ψ⁰ = …αβαβ…, ψ¹ = …βαβα…; compare two-site cells.
    let cell0 = [alpha.clone(), beta.clone()];
    let cell1 = [beta.clone(), alpha.clone()];
    let shifted = [cell0[1].clone(), cell0[0].clone()];
    let reversed = [cell0[1].clone(), cell0[0].clone()];
    let cell_fid = |x: &[Vec<C64>; 2], y: &[Vec<C64>; 2]| overlap(&x[0], &y[0]) * overlap(&x[1], &y[1]);
    let translation_related = residual_t <= CAT_TOL && cell_fid(&shifted, &cell1) >= 1.0 - 1e-10;
    let parity_related = residual_t <= CAT_TOL && cell_fid(&reversed, &cell1) >= 1.0 - 1e-10;

    let rebuilt = Array3::from_shape_fn((2, 2, 2), |(i, s, j)| match (i, j) {
        (0, 1) => alpha[s],
        (1, 0) => beta[s],
        _ => zero(),
    });
    let reconstruction_fidelity = fidelity_per_site(&UniformMPS::new(rebuilt)?, &cf.to_mps())?;

    Ok(CatDecomposition {
        alpha,
        beta,
        residual_t,
        translation_related,
        parity_related,
        reconstruction_fidelity,
        discarded_weight: report.discarded_weight,
    })
}

/// `⟨ψ|W|ψ⟩` per site for a normalized uniform MPS: the dominant (largest
/// real part) eigenvalue of the mixed channel with the MPO inserted.
pub(crate) fn mpo_expectation(psi: &UniformMPS, w: &Array4<C64>, start: Option<&Array1<C64>>) -> Result<(C64, Array1<C64>)> {
    let a = psi.tensor();
    let chi = psi.chi();
    let dw = w.dim().0;
    let n = chi * dw * chi;
    let opts = EigsOptions::new(1, Which::LargestReal).tol(1e-12);
    let res = eigs(|v| mixed_left(a, w, a, v), n, &opts, start)?;
    let p = res.into_pairs()?.remove(0);
    Ok((p.value, p.vector))
}

/// Left environment update `x[a,l,a'] ↦ Σ conj(bra[a,o,b]) x[a,l,a'] W[l,r,o,i] ket[a',i,b']`.
pub(crate) fn mixed_left(bra: &Array3<C64>, w: &Array4<C64>, ket: &Array3<C64>, v: &Array1<C64>) -> Array1<C64> {
    let (cb, d, cb2) = bra.dim();
    let (ck, _, ck2) = ket.dim();
    let (dw, dw2, dout, din) = w.dim();
    let x = Array2::from_shape_vec((cb * dw, ck), v.to_vec()).expect("length");
    // t1[a, l, i, b']
    let t1 = x.dot(&as_matrix(ket, ck, din * ck2));
    let t1 = t1.reshaped((cb, dw, din, ck2));
    // (a, b', l, i) × (l, i; r, o)
    let t1 = t1.permuted_axes([0, 3, 1, 2]).as_standard_layout().into_owned();
    let t1 = t1.reshaped((cb * ck2, dw * din));
    let wm = w.view().permuted_axes([0, 3, 1, 2]).as_standard_layout().into_owned();
    let wm = wm.reshaped((dw * din, dw2 * dout));
    let t2 = t1.dot(&wm).reshaped((cb, ck2, dw2, dout));
    // (a, o; r, b')
    let t2 = t2.permuted_axes([0, 3, 2, 1]).as_standard_layout().into_owned();
    let t2 = t2.reshaped((cb * dout, dw2 * ck2));
    let out = dagger(as_matrix(bra, cb * d, cb2).view()).dot(&t2);
    Array1::from_iter(out.iter().copied())
}

/// Right environment update `y[b,r,b'] ↦ Σ ket[a',i,b'] W[l,r,o,i] conj(bra[a,o,b]) y`,
/// returning the vector indexed by `(a, l, a')`.
pub(crate) fn mixed_right(bra: &Array3<C64>, w: &Array4<C64>, ket: &Array3<C64>, v: &Array1<C64>) -> Array1<C64> {
    let (cb, d, cb2) = bra.dim();
    let (ck, _, ck2) = ket.dim();
    let (dw, dw2, dout, din) = w.dim();
    // y[b, r, b'] ; contract ket over b': t1[a', i, b, r]
    let y = Array2::from_shape_vec((cb2 * dw2, ck2), v.to_vec()).expect("length");
    let t1 = as_matrix(ket, ck * din, ck2).dot(&y.t()); // (a' i, b r)
    let t1 = t1.reshaped((ck, din, cb2, dw2));
    // contract W over (r, i): t2[a', b, l, o]
    let t1 = t1.permuted_axes([0, 2, 3, 1]).as_standard_layout().into_owned(); // (a', b, r, i)
    let t1 = t1.reshaped((ck * cb2, dw2 * din));
    let wm = w.view().permuted_axes([1, 3, 0, 2]).as_standard_layout().into_owned(); // (r, i, l, o)
    let wm = wm.reshaped((dw2 * din, dw * dout));
    let t2 = t1.dot(&wm).reshaped((ck, cb2, dw, dout));
    // contract conj(bra[a, o, b]) over (o, b): out[a, l, a']
    let t2 = t2.permuted_axes([2, 0, 3, 1]).as_standard_layout().into_owned(); // (l, a', o, b)
    let t2 = t2.reshaped((dw * ck, dout * cb2));
    let bm = as_matrix(bra, cb, d * cb2).mapv(|z| z.conj()); // (a; o b)
    let out = bm.dot(&t2.t()); // (a, l a')
    Array1::from_iter(out.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bulk_mpo, build_lower_boundary_imps, MeasurementAngle};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn product_state_canonical_form() {
        let psi = UniformMPS::product(&[c(0.6), c(0.8)]).unwrap();
        let cf = canonicalize(&psi).unwrap();
        assert_eq!(cf.chi(), 1);
        let es = entanglement_spectrum(&cf);
        assert!((es.values[0] - 1.0).abs() < 1e-14);
        assert_eq!(es.ee, 0.0);
        let ts = transfer_spectrum(&psi, 1).unwrap();
        assert!((ts.eigenvalues[0] - 1.0).norm() < 1e-12);
        let cx = correlator(&psi, Pauli::X, 5).unwrap();
        assert!(cx.values.iter().all(|v| v.abs() < 1e-14));
        assert!(cx.inf_magnitude < 1e-14);
    }

    #[test]
    fn random_state_isometries() {
        for seed in 0..3 {
            let psi = UniformMPS::random(8, 2, seed).unwrap();
            let cf = canonicalize(&psi).unwrap();
            let (l, r) = cf.isometry_residuals();
            assert!(l < 1e-10 && r < 1e-10, "{l} {r}");
            assert!(cf.gauge_residual() < 1e-8, "{}", cf.gauge_residual());
            let es = entanglement_spectrum(&cf);
            assert!((es.values.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn canonical_form_represents_same_state() {
        let psi = UniformMPS::random(6, 2, 9).unwrap();
        let cf = canonicalize(&psi).unwrap();
        assert!((fidelity_per_site(&psi, &cf.to_mps()).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn initial_state_at_x_limit_has_flat_spectrum() {
        let psi = build_lower_boundary_imps(MeasurementAngle::new(FRAC_PI_2).unwrap());
        let es = entanglement_spectrum(&canonicalize(&psi).unwrap());
        assert_eq!(es.values.len(), 2);
        for v in &es.values {
            assert!((v - FRAC_1_SQRT_2).abs() < 1e-10);
        }
        assert!((es.ee - 2f64.ln()).abs() < 1e-10);
        assert!(es.pair_degeneracy < 1e-10);
    }

    #[test]
    fn schmidt_spectrum_diagnostics() {
        let s = SchmidtSpectrum::from_values(&[0.5, 0.5]);
        assert!((s.ee - 2f64.ln()).abs() < 1e-14);
        assert!(s.pair_degeneracy < 1e-14);
        let s = SchmidtSpectrum::from_values(&[1.0]);
        assert_eq!(s.gap_ratio, 0.0);
        assert_eq!(s.pair_degeneracy, 1.0);
        let s = SchmidtSpectrum::from_values(&[0.1, 0.9, 0.3]);
        assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn truncation_keeps_state_when_bond_is_large_enough() {
        let psi = UniformMPS::random(4, 2, 5).unwrap();
        let t = truncate_to(&psi, 10).unwrap();
        assert!((fidelity_per_site(&psi, &t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doubled_bond_from_mpo_is_reduced() {
        // θ = 0 row operator is rank one: any state maps to a product state.
        let h = build_bulk_mpo(MeasurementAngle::new(0.0).unwrap());
        let psi = UniformMPS::random(3, 2, 1).unwrap();
        let cf = canonicalize(&h.apply(&psi)).unwrap();
        assert_eq!(cf.chi(), 1);
    }

    #[test]
    fn mixed_channels_agree_with_dense_contraction() {
        let psi = UniformMPS::random(3, 2, 2).unwrap();
        let w = build_bulk_mpo(MeasurementAngle::new(0.7).unwrap()).local_complex();
        let a = psi.tensor();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = Array1::from_shape_fn(18, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let u = Array1::from_shape_fn(18, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        // ⟨u, L(v)⟩ computed both via mixed_left and mixed_right adjointness:
        // Σ u[b,r,b'] L(v)[b,r,b'] = Σ R(u)[a,l,a'] v[a,l,a'].
        let lv = mixed_left(a, &w, a, &v);
        let ru = mixed_right(a, &w, a, &u);
        let lhs: C64 = u.iter().zip(lv.iter()).map(|(x, y)| x * y).sum();
        let rhs: C64 = ru.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).norm() < 1e-12);
        // Brute force one entry of L(v).
        let idx = |a: usize, l: usize, b: usize| (a * 2 + l) * 3 + b;
        let mut expect = zero();
        for aa in 0..3 {
            for l in 0..2 {
                for ap in 0..3 {
                    for o in 0..2 {
                        for i in 0..2 {
                            expect += a[[aa, o, 1]].conj() * v[idx(aa, l, ap)] * w[[l, 1, o, i]] * a[[ap, i, 2]];
                        }
                    }
                }
            }
        }
        assert!((lv[idx(1, 1, 2)] - expect).norm() < 1e-12);
    }

    #[test]
    fn transfer_spectrum_conjugate_pairs() {
        let psi = UniformMPS::random(4, 2, 3).unwrap();
        let ts = transfer_spectrum(&psi, 8).unwrap();
        let floor = ts.eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        for z in &ts.eigenvalues {
            if z.im.abs() > 1e-8 && z.norm() > floor + 1e-6 {
                assert!(ts.eigenvalues.iter().any(|w| (w - z.conj()).norm() < 1e-7));
            }
        }
        assert!(!ts.paired);
        assert!(ts.xi_x.is_finite());
    }

    #[test]
    fn cat_state_decomposes() {
        // Exact cat: A^0 = [[0,1],[0,0]] ⊗ |0⟩ part, A = off-diagonal blocks.
        let alpha = [c(1.0), c(0.0)];
        let beta = [c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)];
        let a = Array3::from_shape_fn((2, 2, 2), |(i, s, j)| match (i, j) {
            (0, 1) => alpha[s],
            (1, 0) => beta[s],
            _ => zero(),
        });
        let psi = UniformMPS::new(a).unwrap().normalized().unwrap();
        let ts = transfer_spectrum(&psi, 4).unwrap();
        assert!(ts.paired && ts.xi_infinite());
        let cat = cat_decompose(&psi).unwrap();
        assert!(cat.residual_t < 1e-10);
        assert!(overlap(&cat.alpha, &alpha) > 1.0 - 1e-10);
        assert!(overlap(&cat.beta, &beta) > 1.0 - 1e-10);
        assert!(cat.translation_related && cat.parity_related);
        assert!(cat.reconstruction_fidelity > 1.0 - 1e-10);
        let cz = correlator(&psi, Pauli::Z, 4).unwrap();
        assert!(cz.values[0] < 0.0 && cz.values[1] > 0.0);
        assert!((cz.inf_magnitude - cz.values[3].abs()).abs() < 1e-10);
    }

    #[test]
    fn injective_state_is_rejected() {
        let psi = UniformMPS::random(3, 2, 8).unwrap();
        assert!(matches!(cat_decompose(&psi), Err(Error::Injective)));
    }
}
