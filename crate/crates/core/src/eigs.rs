//! Restarted Krylov eigensolver for non-Hermitian linear maps given only as a
//! matrix-vector product.
//!
//! The basis `V` and its image `W = A V` are kept explicitly, so the projected
//! matrix `V^† W` and true residuals `‖W y − θ V y‖` are available at every
//! restart. Restarting keeps an orthonormal basis of the wanted Ritz vectors
//! (a thick restart) and continues from the residual direction, which keeps
//! the subspace a Krylov subspace in exact arithmetic.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{eig_dense, fix_phase, qr_positive};
use crate::tensor::C64;

/// Problems at or below this dimension are solved densely.
const DENSE_DIM: usize = 96;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    LargestMagnitude,
    LargestReal,
}

#[derive(Clone, Debug)]
pub struct EigsOptions {
    pub k: usize,
    pub which: Which,
    /// Residual tolerance relative to the largest Ritz value modulus.
    pub tol: f64,
    /// Krylov subspace size; defaults to `max(3k + 10, 20)`.
    pub krylov_dim: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigsOptions {
    fn default() -> Self {
        EigsOptions { k: 1, which: Which::LargestMagnitude, tol: 1e-10, krylov_dim: None, max_restarts: 500, seed: 0 }
    }
}

impl EigsOptions {
    pub fn new(k: usize, which: Which) -> Self {
        EigsOptions { k, which, ..Default::default() }
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn krylov_dim(mut self, m: usize) -> Self {
        self.krylov_dim = Some(m);
        self
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: C64,
    /// Unit norm; largest-modulus amplitude real positive.
    pub vector: Array1<C64>,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct EigsResult {
    pub pairs: Vec<EigenPair>,
    pub converged: bool,
    pub restarts: usize,
    pub applies: usize,
}

impl EigsResult {
    pub fn max_residual(&self) -> f64 {
        self.pairs.iter().map(|p| p.residual).fold(0.0, f64::max)
    }

    pub fn into_pairs(self) -> Result<Vec<EigenPair>> {
        if self.converged {
            Ok(self.pairs)
        } else {
            Err(Error::NoConvergence { restarts: self.restarts, residual: self.max_residual() })
        }
    }
}

/// The `k` eigenpairs of largest modulus, or an error if the iteration cap is
/// reached first.
pub fn dominant_eigs<F>(apply: F, dim: usize, k: usize, seed: u64) -> Result<Vec<EigenPair>>
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    eigs(apply, dim, &EigsOptions::new(k, Which::LargestMagnitude).seed(seed), None)?.into_pairs()
}

fn order(values: &[C64], which: Which) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let key = |z: &C64| match which {
        Which::LargestMagnitude => z.norm(),
        Which::LargestReal => z.re,
    };
    idx.sort_by(|&a, &b| {
        let (za, zb) = (values[a], values[b]);
        key(&zb)
            .partial_cmp(&key(&za))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(zb.re.partial_cmp(&za.re).unwrap_or(std::cmp::Ordering::Equal))
            .then(zb.im.partial_cmp(&za.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    idx
}

fn dotc(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &Array1<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Array1<C64> {
    Array1::from_shape_fn(dim, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Classical Gram-Schmidt applied twice.
fn orthogonalize(basis: &[Array1<C64>], v: &mut Array1<C64>) {
    for _ in 0..2 {
        for b in basis {
            let c = dotc(b, v);
            v.scaled_add(-c, b);
        }
    }
}

fn finish_vector(mut v: Array1<C64>) -> Array1<C64> {
    let n = norm(&v);
    if n > 0.0 {
        v.mapv_inplace(|z| z / n);
    }
    let mut raw = v.to_vec();
    fix_phase(&mut raw);
    Array1::from(raw)
}

fn eigs_dense<F>(mut apply: F, dim: usize, opts: &EigsOptions) -> Result<EigsResult>
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    let mut m = Array2::<C64>::zeros((dim, dim));
    for j in 0..dim {
        let mut e = Array1::<C64>::zeros(dim);
        e[j] = C64::new(1.0, 0.0);
        m.column_mut(j).assign(&apply(&e));
    }
    let (vals, vecs) = eig_dense(m.view())?;
    let vals = vals.to_vec();
    let idx = order(&vals, opts.which);
    let pairs = idx
        .into_iter()
        .take(opts.k)
        .map(|i| {
            let v = finish_vector(vecs.column(i).to_owned());
            let r = &m.dot(&v) - &v.mapv(|z| z * vals[i]);
            EigenPair { value: vals[i], residual: norm(&r), vector: v }
        })
        .collect();
    Ok(EigsResult { pairs, converged: true, restarts: 0, applies: dim })
}

/// General restarted Krylov eigensolver. `start` seeds the subspace; without
/// it a deterministic random vector from `opts.seed` is used.
pub fn eigs<F>(mut apply: F, dim: usize, opts: &EigsOptions, start: Option<&Array1<C64>>) -> Result<EigsResult>
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    if dim == 0 || opts.k == 0 || opts.k > dim {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= dim, got k = {}, dim = {dim}", opts.k)));
    }
    if let Some(s) = start {
        if s.len() != dim {
            return Err(Error::Shape(format!("start vector has length {}, expected {dim}", s.len())));
        }
    }
    let m = opts.krylov_dim.unwrap_or((3 * opts.k + 10).max(20)).min(dim);
    if dim <= DENSE_DIM || m >= dim {
        return eigs_dense(apply, dim, opts);
    }
    let keep = (opts.k + (m - opts.k) / 2).clamp(opts.k, m - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<Array1<C64>> = Vec::with_capacity(m);
    let mut image: Vec<Array1<C64>> = Vec::with_capacity(m);
    let mut cand = match start {
        Some(s) if norm(s) > 0.0 => s.clone(),
        _ => random_vector(dim, &mut rng),
    };
    let mut applies = 0usize;
    let mut scale = 0.0f64;
    let mut best: Vec<EigenPair> = Vec::new();

    for restart in 0..=opts.max_restarts {
        while basis.len() < m {
            orthogonalize(&basis, &mut cand);
            let mut nrm = norm(&cand);
            if nrm <= 1e-13 * scale.max(1e-300) || nrm == 0.0 {
                // Invariant subspace reached.
                if basis.len() >= opts.k {
                    break;
                }
                cand = random_vector(dim, &mut rng);
                orthogonalize(&basis, &mut cand);
                nrm = norm(&cand);
            }
            let v = cand.mapv(|z| z / nrm);
            let w = apply(&v);
            applies += 1;
            cand = w.clone();
            basis.push(v);
            image.push(w);
        }
        let nb = basis.len();
        let g = Array2::from_shape_fn((nb, nb), |(i, j)| dotc(&basis[i], &image[j]));
        let (theta, y) = eig_dense(g.view())?;
        let theta = theta.to_vec();
        let idx = order(&theta, opts.which);
        scale = theta.iter().map(|z| z.norm()).fold(0.0, f64::max);

        let mut pairs = Vec::with_capacity(opts.k);
        let mut worst = 0.0f64;
        for &i in idx.iter().take(opts.k) {
            let yi = y.column(i);
            let mut x = Array1::<C64>::zeros(dim);
            let mut ax = Array1::<C64>::zeros(dim);
            for (j, c) in yi.iter().enumerate() {
                x.scaled_add(*c, &basis[j]);
                ax.scaled_add(*c, &image[j]);
            }
            let xn = norm(&x);
            x.mapv_inplace(|z| z / xn);
            ax.mapv_inplace(|z| z / xn);
            let r = &ax - &x.mapv(|z| z * theta[i]);
            let res = norm(&r);
            worst = worst.max(res);
            pairs.push(EigenPair { value: theta[i], vector: x, residual: res });
        }
        let exhausted = nb < m || nb == dim;
        if worst <= opts.tol * scale.max(1e-300) || exhausted {
            let pairs = pairs.into_iter().map(|p| EigenPair { vector: finish_vector(p.vector), ..p }).collect();
            return Ok(EigsResult { pairs, converged: true, restarts: restart, applies });
        }
        best = pairs;
        if restart == opts.max_restarts {
            break;
        }

        // Thick restart on the leading Ritz vectors.
        let nkeep = keep.min(nb - 1);
        let mut yk = Array2::<C64>::zeros((nb, nkeep));
        for (c, &i) in idx.iter().take(nkeep).enumerate() {
            yk.column_mut(c).assign(&y.column(i));
        }
        let (q, _) = qr_positive(yk.view())?;
        let mut new_basis = Vec::with_capacity(m);
        let mut new_image = Vec::with_capacity(m);
        for c in 0..nkeep {
            let mut v = Array1::<C64>::zeros(dim);
            let mut w = Array1::<C64>::zeros(dim);
            for j in 0..nb {
                v.scaled_add(q[[j, c]], &basis[j]);
                w.scaled_add(q[[j, c]], &image[j]);
            }
            new_basis.push(v);
            new_image.push(w);
        }
        basis = new_basis;
        image = new_image;
        // Continue along the largest residual direction of the kept block.
        let mut best_dir = None;
        let mut best_norm = 0.0;
        for w in &image {
            let mut f = w.clone();
            orthogonalize(&basis, &mut f);
            let n = norm(&f);
            if n > best_norm {
                best_norm = n;
                best_dir = Some(f);
            }
        }
        cand = match best_dir {
            Some(f) if best_norm > 1e-13 * scale => f,
            _ => random_vector(dim, &mut rng),
        };
    }
    let pairs = best.into_iter().map(|p| EigenPair { vector: finish_vector(p.vector), ..p }).collect();
    Ok(EigsResult { pairs, converged: false, restarts: opts.max_restarts, applies })
}
