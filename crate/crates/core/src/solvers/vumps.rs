//! Variational fixed point of a uniform MPO for a non-Hermitian operator.
//!
//! Left and right environments are the dominant eigenvectors of the mixed
//! channels `⟨AL|W|AL⟩` and `⟨AR|W|AR⟩`; the centre site `AC` and bond `C`
//! are dominant eigenvectors of the effective operators built from them, and
//! new isometries follow from polar decompositions.

use ndarray::{Array1, Array2, Array3, Array4};

use crate::eigs::{eigs, EigsOptions, Which};
use crate::error::{Error, Result};
use crate::linalg::{dagger, frobenius, polar};
use crate::model::{build_bulk_mpo, build_lower_boundary_imps, MeasurementAngle, RowOperator};
use crate::solvers::power::{power_step, PowerOptions};
use crate::solvers::{power_iterate, FixedPointResult, SolverKind};
use crate::tensor::Reshaped;
use crate::tensor::C64;
use crate::umps::{canonicalize, entanglement_spectrum, mixed_left, mixed_right, mpo_expectation, CanonicalForm, UniformMPS};

#[derive(Clone, Debug)]
pub struct VumpsOptions {
    pub chi: usize,
    /// Target for `‖AC − AL C‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Power-method rows used to build the starting state when `init` is absent.
    pub warmup_layers: Option<usize>,
    pub init: Option<UniformMPS>,
    pub seed: u64,
}

impl VumpsOptions {
    pub fn new(chi: usize) -> Self {
        VumpsOptions { chi, tol: 1e-9, max_iter: 1000, warmup_layers: None, init: None, seed: 0 }
    }
}

fn reshape3(v: &Array1<C64>, shape: (usize, usize, usize)) -> Array3<C64> {
    Array3::from_shape_vec(shape, v.to_vec()).expect("length")
}

fn flat<D: ndarray::Dimension>(a: &ndarray::Array<C64, D>) -> Array1<C64> {
    Array1::from_iter(a.iter().copied())
}

/// `AC ↦ Σ FL[a,l,a'] W[l,r,o,i] AC[a',i,b'] FR[b,r,b']`.
fn apply_hac(fl: &Array3<C64>, w: &Array4<C64>, fr: &Array3<C64>, ac: &Array3<C64>) -> Array3<C64> {
    let (chi, dw, _) = fl.dim();
    let (_, _, dout, din) = w.dim();
    let flm = fl.clone().reshaped((chi * dw, chi));
    let acm = ac.view().reshaped((chi, din * chi));
    let t1 = flm.dot(&acm).reshaped((chi, dw, din, chi));
    let t1 = t1.permuted_axes([0, 3, 1, 2]).as_standard_layout().into_owned();
    let t1 = t1.reshaped((chi * chi, dw * din));
    let wm = w.view().permuted_axes([0, 3, 1, 2]).as_standard_layout().into_owned();
    let wm = wm.reshaped((dw * din, dw * dout));
    let t2 = t1.dot(&wm).reshaped((chi, chi, dw, dout));
    let t2 = t2.permuted_axes([0, 3, 1, 2]).as_standard_layout().into_owned();
    let t2 = t2.reshaped((chi * dout, chi * dw));
    let frm = fr.view().permuted_axes([2, 1, 0]).as_standard_layout().into_owned();
    let frm = frm.reshaped((chi * dw, chi));
    t2.dot(&frm).reshaped((chi, dout, chi))
}

/// `C ↦ Σ FL[a,l,a'] C[a',b'] FR[b,l,b']`.
fn apply_hc(fl: &Array3<C64>, fr: &Array3<C64>, c: &Array2<C64>) -> Array2<C64> {
    let (chi, dw, _) = fl.dim();
    let flm = fl.clone().reshaped((chi * dw, chi));
    let t = flm.dot(c).reshaped((chi, dw * chi));
    let frm = fr.clone().reshaped((chi, dw * chi));
    t.dot(&frm.t())
}

struct Environments {
    fl: Array3<C64>,
    fr: Array3<C64>,
    #[cfg_attr(not(test), allow(dead_code))]
    lambda: C64,
}

fn environments(al: &Array3<C64>, ar: &Array3<C64>, w: &Array4<C64>, prev: Option<&Environments>, tol: f64) -> Result<Environments> {
    let chi = al.dim().0;
    let dw = w.dim().0;
    let n = chi * dw * chi;
    let opts = EigsOptions::new(1, Which::LargestReal).tol(tol);
    let start_l = prev.filter(|p| p.fl.dim() == (chi, dw, chi)).map(|p| flat(&p.fl));
    let start_r = prev.filter(|p| p.fr.dim() == (chi, dw, chi)).map(|p| flat(&p.fr));
    let left = eigs(|v| mixed_left(al, w, al, v), n, &opts, start_l.as_ref())?;
    let right = eigs(|v| mixed_right(ar, w, ar, v), n, &opts, start_r.as_ref())?;
    let lp = left.pairs.into_iter().next().ok_or_else(|| Error::Linalg("empty environment".into()))?;
    let rp = right.pairs.into_iter().next().ok_or_else(|| Error::Linalg("empty environment".into()))?;
    Ok(Environments { fl: reshape3(&lp.vector, (chi, dw, chi)), fr: reshape3(&rp.vector, (chi, dw, chi)), lambda: lp.value })
}

/// Isometries from `AC` and `C` minimizing `‖AC − AL C‖` and `‖AC − C AR‖`.
fn gauge_update(ac: &Array3<C64>, c: &Array2<C64>) -> Result<(Array3<C64>, Array3<C64>, f64)> {
    let (chi, d, _) = ac.dim();
    let acl = ac.view().reshaped((chi * d, chi));
    let acr = ac.view().reshaped((chi, d * chi));
    let uc = polar(c.view())?;
    let al = polar(acl.view())?.dot(&dagger(uc.view()));
    let ar = dagger(uc.view()).dot(&polar(acr.view())?);
    let el = frobenius((&acl - &al.dot(c)).view());
    let er = frobenius((&acr - &c.dot(&ar)).view());
    let al = al.reshaped((chi, d, chi));
    let ar = ar.reshaped((chi, d, chi));
    Ok((al, ar, el.max(er)))
}

fn warm_start(h: &RowOperator, opts: &VumpsOptions) -> Result<UniformMPS> {
    if let Some(init) = &opts.init {
        return Ok(init.clone());
    }
    let layers = opts.warmup_layers.unwrap_or_else(|| 8 + (opts.chi.max(2) as f64).log2().ceil() as usize);
    let mut psi = build_lower_boundary_imps(h.theta());
    for _ in 0..layers {
        psi = power_step(&psi, h, opts.chi)?.psi;
    }
    Ok(psi)
}

/// Variational fixed point of `h`; a plateau above `tol` returns
/// `converged = false` with the last residual.
pub fn vumps(h: &RowOperator, opts: &VumpsOptions) -> Result<FixedPointResult> {
    let w = h.local_complex();
    let start = warm_start(h, opts)?;
    let CanonicalForm { mut al, mut ar, mut c } = canonicalize(&start)?;
    let chi = c.nrows();
    let d = al.dim().1;
    let mut ac = {
        let m = al.view().reshaped((chi * d, chi));
        m.dot(&c).reshaped((chi, d, chi))
    };
    let mut err = f64::INFINITY;
    let mut env: Option<Environments> = None;
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    while iterations < opts.max_iter {
        let inner = (err * 1e-2).clamp(1e-14, 1e-6);
        let e = environments(&al, &ar, &w, env.as_ref(), inner)?;
        let eopts = EigsOptions::new(1, Which::LargestReal).tol(inner).seed(opts.seed);
        let (fl, fr) = (e.fl.clone(), e.fr.clone());
        let res_ac = eigs(|v| flat(&apply_hac(&fl, &w, &fr, &reshape3(v, (chi, d, chi)))), chi * d * chi, &eopts, Some(&flat(&ac)))?;
        let res_c = eigs(
            |v| flat(&apply_hc(&fl, &fr, &Array2::from_shape_vec((chi, chi), v.to_vec()).expect("length"))),
            chi * chi,
            &eopts,
            Some(&flat(&c)),
        )?;
        ac = reshape3(&res_ac.pairs[0].vector, (chi, d, chi));
        c = Array2::from_shape_vec((chi, chi), res_c.pairs[0].vector.to_vec()).expect("length");
        let (nal, nar, e_gauge) = gauge_update(&ac, &c)?;
        al = nal;
        ar = nar;
        err = e_gauge;
        env = Some(e);
        iterations += 1;
        let (_, s, _) = crate::linalg::svd_thin(c.view())?;
        history.push(crate::umps::SchmidtSpectrum::from_values(&s).ee);
        if err <= opts.tol {
            break;
        }
        if err < 0.999 * best {
            best = err;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 200 {
                log::warn!("vumps θ={:.4} χ={}: residual plateau at {:.2e}", h.theta().value(), chi, err);
                break;
            }
        }
    }
    let converged = err <= opts.tol;
    let psi = UniformMPS::new(al)?.normalized()?;
    let form = canonicalize(&psi)?;
    let psi = form.to_mps();
    let (lambda, _) = mpo_expectation(&psi, &w, None)?;
    let growth = crate::umps::canonicalize_full(&h.apply(&psi), usize::MAX, 1e-13)?.2.sqrt();
    Ok(FixedPointResult {
        theta: h.theta().value(),
        chi: opts.chi,
        solver: SolverKind::Vumps,
        spectrum: entanglement_spectrum(&form),
        psi,
        form,
        per_site_eigenvalue: lambda,
        norm_growth: growth,
        iterations,
        converged,
        residual: err,
        ee_history: history,
    })
}

pub fn vumps_fixed_point(theta: MeasurementAngle, chi: usize, tol: f64) -> Result<FixedPointResult> {
    let h = build_bulk_mpo(theta);
    vumps(&h, &VumpsOptions { tol, ..VumpsOptions::new(chi) })
}

/// Power iteration continued from a variational result; used to confirm that
/// a fixed point is stable under the row map.
pub(crate) fn power_polish(h: &RowOperator, fp: &FixedPointResult, layers: usize) -> Result<FixedPointResult> {
    power_iterate(h, &fp.psi, &PowerOptions { chi: fp.chi, tol: 0.0, max_layers: layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::power_fixed_point;

    fn angle(t: f64) -> MeasurementAngle {
        MeasurementAngle::new(t).unwrap()
    }

    #[test]
    fn effective_operators_match_expectation() {
        let psi = UniformMPS::random(3, 2, 1).unwrap();
        let cf = canonicalize(&psi).unwrap();
        let w = build_bulk_mpo(angle(0.9)).local_complex();
        let env = environments(&cf.al, &cf.ar, &w, None, 1e-12).unwrap();
        let ac = cf.ac();
        let hac = apply_hac(&env.fl, &w, &env.fr, &ac);
        let hc = apply_hc(&env.fl, &env.fr, &cf.c);
        // ⟨AC|H_AC|AC⟩ / ⟨C|H_C|C⟩ equals the per-site eigenvalue.
        let num: C64 = ac.iter().zip(hac.iter()).map(|(a, b)| a.conj() * b).sum();
        let den: C64 = cf.c.iter().zip(hc.iter()).map(|(a, b)| a.conj() * b).sum();
        let (lambda, _) = mpo_expectation(&cf.to_mps(), &w, None).unwrap();
        assert!((num / den - lambda).norm() < 1e-9, "{} vs {}", num / den, lambda);
        assert!((env.lambda - lambda).norm() < 1e-9);
    }

    #[test]
    fn z_limit_collapses_to_product() {
        let r = vumps_fixed_point(angle(0.0), 8, 1e-10).unwrap();
        assert_eq!(r.psi.chi(), 1);
        assert!(r.per_site_eigenvalue.re > 0.0 && r.per_site_eigenvalue.im.abs() < 1e-12);
    }

    #[test]
    fn agrees_with_power_method_in_trivial_phase() {
        let p = power_fixed_point(angle(0.8), 8, 1e-11, 2000).unwrap();
        let v = vumps_fixed_point(angle(0.8), 8, 1e-10).unwrap();
        assert!(v.converged, "residual {}", v.residual);
        assert!((p.spectrum.ee - v.spectrum.ee).abs() < 1e-4, "{} {}", p.spectrum.ee, v.spectrum.ee);
        assert!((p.per_site_eigenvalue - v.per_site_eigenvalue).norm() < 1e-8);
    }
}
