//! Dense and sparse complex linear algebra used throughout the crate.
//!
//! Dense products go through `ndarray`; Hermitian eigendecompositions through
//! `nalgebra`. Time stepping uses a CSR matrix and a Chebyshev expansion of the
//! exponential applied to a block of column vectors.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
pub use num_complex::Complex64 as C64;

use crate::error::{Result, SimError};
use crate::units::TWO_PI;

pub type CMat = Array2<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn eye(n: usize) -> CMat {
    let mut m = CMat::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = ONE;
    }
    m
}

pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().iter().sum()
}

pub fn frob_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let x = a[[i, j]];
            if x == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = x * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn kron_all(ms: &[&CMat]) -> CMat {
    let mut acc = eye(1);
    for m in ms {
        acc = kron(&acc, m);
    }
    acc
}

/// Single-qubit Pauli matrices `[I, X, Y, Z]`.
pub fn paulis() -> [CMat; 4] {
    let mk = |v: [C64; 4]| CMat::from_shape_vec((2, 2), v.to_vec()).unwrap();
    [
        mk([ONE, ZERO, ZERO, ONE]),
        mk([ZERO, ONE, ONE, ZERO]),
        mk([ZERO, -I, I, ZERO]),
        mk([ONE, ZERO, ZERO, -ONE]),
    ]
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    let (r, c) = a.dim();
    if r != c {
        return false;
    }
    for i in 0..r {
        for j in i..c {
            if (a[[i, j]] - a[[j, i]].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(a: &CMat) -> Result<Eigh> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(SimError::Numerical("eigh of a non-square matrix".into()));
    }
    let m = DMatrix::<C64>::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]].conj()));
    let se = m.symmetric_eigen();
    if se.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(SimError::Numerical("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, col]] = se.eigenvectors[(r, k)];
        }
    }
    Ok(Eigh { values, vectors })
}

impl Eigh {
    /// `V f(Λ) V†` for a scalar function of the eigenvalues.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> CMat {
        let mut vf = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            vf.column_mut(j).mapv_inplace(|z| z * s);
        }
        vf.dot(&dagger(&self.vectors))
    }

    /// `exp(-i 2π H t)`.
    pub fn propagator(&self, t: f64) -> CMat {
        self.apply_fn(|e| C64::from_polar(1.0, -TWO_PI * e * t))
    }
}

/// `exp(-i 2π H t)` for a Hermitian `H` in GHz and `t` in ns.
pub fn expm_herm(h: &CMat, t: f64) -> Result<CMat> {
    Ok(eigh(h)?.propagator(t))
}

/// `exp(-i A)` for Hermitian `A`.
pub fn expm_minus_i(a: &CMat) -> Result<CMat> {
    Ok(eigh(a)?.apply_fn(|x| C64::from_polar(1.0, -x)))
}

/// `A^{-1/2}` for Hermitian positive definite `A`.
pub fn inv_sqrt_psd(a: &CMat) -> Result<CMat> {
    let e = eigh(a)?;
    if e.values[0] <= 1e-12 {
        return Err(SimError::Numerical(format!(
            "overlap matrix is singular (smallest eigenvalue {:.3e})",
            e.values[0]
        )));
    }
    Ok(e.apply_fn(|x| C64::new(x.powf(-0.5), 0.0)))
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

impl Csr {
    pub fn from_dense(a: &CMat) -> Self {
        CsrFamily::from_dense_terms(&[a]).combine(&[1.0])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros((self.n, self.n));
        for i in 0..self.n {
            for p in self.indptr[i]..self.indptr[i + 1] {
                m[[i, self.indices[p]]] += self.values[p];
            }
        }
        m
    }

    /// Gershgorin enclosure of the (real) spectrum of a Hermitian matrix.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut centre = 0.0;
            let mut radius = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                if self.indices[p] == i {
                    centre += self.values[p].re;
                } else {
                    radius += self.values[p].norm();
                }
            }
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        (lo, hi)
    }

    /// `y = A x` for a row-major block `x` of shape `n × m`.
    pub fn apply_block(&self, x: ArrayView2<C64>, y: &mut CMat) {
        let m = x.ncols();
        let xs = x.as_slice().expect("row-major block");
        let ys = y.as_slice_mut().expect("row-major block");
        for i in 0..self.n {
            let yrow = &mut ys[i * m..(i + 1) * m];
            yrow.fill(ZERO);
            for p in self.indptr[i]..self.indptr[i + 1] {
                let a = self.values[p];
                let xrow = &xs[self.indices[p] * m..(self.indices[p] + 1) * m];
                for (yv, xv) in yrow.iter_mut().zip(xrow) {
                    *yv += a * xv;
                }
            }
        }
    }
}

/// Several matrices sharing one sparsity pattern, combined with real weights.
#[derive(Debug, Clone)]
pub struct CsrFamily {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub terms: Vec<Vec<C64>>,
}

impl CsrFamily {
    pub fn from_dense_terms(ms: &[&CMat]) -> Self {
        let n = ms[0].nrows();
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut terms = vec![Vec::new(); ms.len()];
        for i in 0..n {
            for j in 0..n {
                if ms.iter().any(|m| m[[i, j]] != ZERO) {
                    indices.push(j);
                    for (t, m) in terms.iter_mut().zip(ms) {
                        t.push(m[[i, j]]);
                    }
                }
            }
            indptr.push(indices.len());
        }
        CsrFamily { n, indptr, indices, terms }
    }

    pub fn combine(&self, coeffs: &[f64]) -> Csr {
        let mut out = Csr {
            n: self.n,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: vec![ZERO; self.indices.len()],
        };
        self.combine_into(coeffs, &mut out);
        out
    }

    pub fn combine_into(&self, coeffs: &[f64], out: &mut Csr) {
        assert_eq!(coeffs.len(), self.terms.len());
        out.values.copy_from_slice(&self.terms[0]);
        if coeffs[0] != 1.0 {
            out.values.iter_mut().for_each(|v| *v *= coeffs[0]);
        }
        for (c, t) in coeffs.iter().zip(&self.terms).skip(1) {
            if *c != 0.0 {
                for (v, x) in out.values.iter_mut().zip(t) {
                    *v += *c * x;
                }
            }
        }
    }
}

/// `J_k(x)` for `k = 0..=kmax` via Miller's backward recurrence.
pub fn bessel_j_seq(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let start = {
        let s = kmax.max(ax.ceil() as usize) + 20 + (ax.sqrt() * 10.0) as usize;
        s + (s % 2)
    };
    let mut jp1 = 0.0;
    let mut j = 1e-300;
    let mut vals = vec![0.0; start + 1];
    vals[start] = j;
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / ax * j - jp1;
        jp1 = j;
        j = jm1;
        vals[k - 1] = j;
        if j.abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            jp1 *= 1e-250;
            j *= 1e-250;
        }
    }
    let norm: f64 = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for k in 0..=kmax {
        let v = vals[k] / norm;
        // J_k(-x) = (-1)^k J_k(x)
        out[k] = if x < 0.0 && k % 2 == 1 { -v } else { v };
    }
    out
}

/// Scratch buffers for [`cheb_expm_apply`].
#[derive(Debug, Default)]
pub struct ChebWorkspace {
    prev: CMat,
    cur: CMat,
    acc: CMat,
}

/// Replace `block` with `exp(-i τ H) block` using a Chebyshev expansion.
///
/// `bounds` must enclose the spectrum of `h`. Terms are added until the Bessel
/// weights fall below `1e-16`.
pub fn cheb_expm_apply(h: &Csr, bounds: (f64, f64), tau: f64, block: &mut CMat, ws: &mut ChebWorkspace) {
    let (n, m) = block.dim();
    let centre = 0.5 * (bounds.0 + bounds.1);
    let half = (0.5 * (bounds.1 - bounds.0)).max(1e-12) * 1.0001;
    let z = tau * half;
    let kmax = (z + 20.0 + 6.0 * z.cbrt()) as usize + 10;
    let jk = bessel_j_seq(z, kmax);
    let mut nterms = kmax + 1;
    for k in (z.ceil() as usize).min(kmax)..=kmax {
        if jk[k].abs() < 1e-16 {
            nterms = k;
            break;
        }
    }
    for buf in [&mut ws.prev, &mut ws.cur, &mut ws.acc] {
        if buf.dim() != (n, m) {
            *buf = CMat::zeros((n, m));
        }
    }
    // (-i)^k cycles through 1, -i, -1, i
    let phase = [ONE, -I, -ONE, I];
    let inv_half = 1.0 / half;

    ws.prev.assign(block);
    ws.acc.assign(block);
    ws.acc.mapv_inplace(|v| v * jk[0]);
    if nterms > 1 {
        // cur = X prev, with X = (H - c)/half
        h.apply_block(ws.prev.view(), &mut ws.cur);
        ndarray::Zip::from(&mut ws.cur).and(&ws.prev).for_each(|c, &p| *c = (*c - centre * p) * inv_half);
        let w = phase[1] * (2.0 * jk[1]);
        ndarray::Zip::from(&mut ws.acc).and(&ws.cur).for_each(|a, &c| *a += w * c);
    }
    for k in 2..nterms {
        // prev <- 2 X cur - prev
        cheb_step(h, centre, inv_half, &ws.cur, &mut ws.prev);
        std::mem::swap(&mut ws.prev, &mut ws.cur);
        let w = phase[k % 4] * (2.0 * jk[k]);
        ndarray::Zip::from(&mut ws.acc).and(&ws.cur).for_each(|a, &c| *a += w * c);
    }
    let global = C64::from_polar(1.0, -tau * centre);
    ndarray::Zip::from(block).and(&ws.acc).for_each(|b, &a| *b = global * a);
}

fn cheb_step(h: &Csr, centre: f64, inv_half: f64, cur: &CMat, prev: &mut CMat) {
    let m = cur.ncols();
    let xs = cur.as_slice().expect("row-major block");
    let ps = prev.as_slice_mut().expect("row-major block");
    let two_inv = 2.0 * inv_half;
    let mut row = vec![ZERO; m];
    for i in 0..h.n {
        row.fill(ZERO);
        for p in h.indptr[i]..h.indptr[i + 1] {
            let a = h.values[p];
            let xrow = &xs[h.indices[p] * m..(h.indices[p] + 1) * m];
            for (r, x) in row.iter_mut().zip(xrow) {
                *r += a * x;
            }
        }
        let own = &xs[i * m..(i + 1) * m];
        let prow = &mut ps[i * m..(i + 1) * m];
        for ((pv, r), x) in prow.iter_mut().zip(&row).zip(own) {
            *pv = two_inv * (*r - centre * x) - *pv;
        }
    }
}
