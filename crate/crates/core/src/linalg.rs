//! Dense complex linear algebra shared by the solver, the kernel and the
//! simulator.
//!
//! Vectorization is column-major throughout, so that
//! `vec(L·X·R) = (Rᵀ ⊗ L)·vec(X)`.

use alloc::vec::Vec;

use nalgebra::{linalg::Schur, linalg::SVD, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Matrix unit `e_{ij}` of size `n`.
pub fn unit(n: usize, i: usize, j: usize) -> CMat {
    let mut e = CMat::zeros(n, n);
    e[(i, j)] = ONE;
    e
}

pub fn vectorize(x: &CMat) -> CVec {
    CVec::from_column_slice(x.as_slice())
}

pub fn unvectorize(v: &CVec, n: usize) -> CMat {
    CMat::from_column_slice(n, n, v.as_slice())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Imaginary part `(A − A*)/2i`, a Hermitian matrix.
pub fn imag_part(a: &CMat) -> CMat {
    (a - a.adjoint()) * Complex64::new(0.0, -0.5)
}

pub fn is_hermitian_exact(a: &CMat) -> bool {
    a.is_square() && *a == a.adjoint()
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    let inv = a.clone().lu().try_inverse()?;
    if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

pub fn solve(a: &CMat, b: &CVec) -> Option<CVec> {
    let x = a.clone().lu().solve(b)?;
    if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(x)
    } else {
        None
    }
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diagonal().iter().copied().sum()
}

pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    let svd = SVD::try_new(a.clone(), false, false, EIG_EPS, EIG_MAX_ITER).ok_or(Error::Eigensolver)?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Operator (spectral) norm.
pub fn spectral_norm(a: &CMat) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(singular_values(a)?.into_iter().fold(0.0, f64::max))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a general square complex matrix, read off its Schur form.
pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "eigenvalues of a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(alloc::vec![a[(0, 0)]]),
        _ => {}
    }
    let schur = Schur::try_new(a.clone(), EIG_EPS, EIG_MAX_ITER).ok_or(Error::Eigensolver)?;
    let (_, t) = schur.unpack();
    let scale = t.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].norm() > 1e-14 * scale.max(1.0) {
            let (l1, l2) = eig2x2(t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            out.push(l1);
            out.push(l2);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    if out.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Eigensolver);
    }
    Ok(out)
}

fn eig2x2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &CMat) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().fold(0.0, |m, z| m.max(z.norm())))
}

/// Hausdorff distance between two finite point sets in the complex plane.
pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    fn directed(from: &[Complex64], to: &[Complex64]) -> f64 {
        from.iter()
            .map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => directed(a, b).max(directed(b, a)),
    }
}

/// Single-linkage clusters of points closer than `tol`, as index lists in
/// order of first appearance.
fn cluster_indices(points: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (points[i] - points[j]).norm() <= tol {
                let (ri, rj) = (find(&mut label, i), find(&mut label, j));
                if ri != rj {
                    label[rj.max(ri)] = ri.min(rj);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = find(&mut label, i);
        match roots.iter().position(|&x| x == r) {
            Some(k) => clusters[k].push(i),
            None => {
                roots.push(r);
                clusters.push(alloc::vec![i]);
            }
        }
    }
    clusters
}

/// Eigenvalues resolved up to clusters: eigenvalues closer than
/// `cluster_tol·max(1, max|λ|)` are replaced by their mean, returned with
/// the cluster size.
///
/// An eigenvalue with a nontrivial Jordan block of size `k` is computed in
/// floating point as a ring of `k` values at distance `O(ε^{1/k})`, while
/// their mean is accurate to `O(ε)`; cluster means are therefore the
/// reliable description of a possibly defective spectrum.
pub fn eigenvalue_clusters(a: &CMat, cluster_tol: f64) -> Result<Vec<(Complex64, usize)>> {
    let evals = eigenvalues(a)?;
    let scale = evals.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    Ok(cluster_indices(&evals, cluster_tol * scale)
        .into_iter()
        .map(|members| {
            let k = members.len();
            (members.iter().map(|&i| evals[i]).sum::<Complex64>() / k as f64, k)
        })
        .collect())
}

/// A diagonalization `A = V·blockdiag(B_k)·V⁻¹` in which every block `B_k` is
/// numerically a multiple of the identity (one block per eigenvalue cluster).
pub struct ClusteredEigen {
    pub vectors: CMat,
    /// Column ranges of `vectors` belonging to each cluster, with the
    /// restriction of the operator to that cluster's invariant subspace.
    pub blocks: Vec<(core::ops::Range<usize>, CMat)>,
    pub inverse_vectors: CMat,
}

/// Diagonalizes `a` cluster by cluster. Eigenvalues closer than
/// `cluster_tol` are grouped and their common eigenspace is taken as the
/// numerical null space of `a − μI`. Returns `None` when some cluster has a
/// deficient eigenspace or the eigenvector basis has condition number above
/// `max_condition`.
pub fn clustered_eigen(a: &CMat, cluster_tol: f64, max_condition: f64) -> Result<Option<ClusteredEigen>> {
    let n = a.nrows();
    let evals = eigenvalues(a)?;
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);

    let clusters = cluster_indices(&evals, cluster_tol * scale);

    let null_tol = 1e-6 * scale;
    let mut vectors = CMat::zeros(n, n);
    let mut ranges = Vec::with_capacity(clusters.len());
    let mut col = 0;
    for members in &clusters {
        let k = members.len();
        let mu: Complex64 = members.iter().map(|&i| evals[i]).sum::<Complex64>() / k as f64;
        let shifted = a - CMat::identity(n, n) * mu;
        let svd = SVD::try_new(shifted, false, true, EIG_EPS, EIG_MAX_ITER).ok_or(Error::Eigensolver)?;
        let v_t = svd.v_t.ok_or(Error::Eigensolver)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| svd.singular_values[p].total_cmp(&svd.singular_values[q]));
        if svd.singular_values[order[k - 1]] > null_tol {
            return Ok(None);
        }
        for (c, &idx) in order.iter().take(k).enumerate() {
            let v = v_t.row(idx).adjoint();
            vectors.set_column(col + c, &v);
        }
        ranges.push(col..col + k);
        col += k;
    }

    let sv = singular_values(&vectors)?;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smin > 0.0) || smax / smin > max_condition {
        return Ok(None);
    }
    let inverse_vectors = match inverse(&vectors) {
        Some(v) => v,
        None => return Ok(None),
    };
    let projected = &inverse_vectors * a * &vectors;
    let blocks = ranges
        .into_iter()
        .map(|r| {
            let b = projected.view((r.start, r.start), (r.len(), r.len())).into_owned();
            (r, b)
        })
        .collect();
    Ok(Some(ClusteredEigen {
        vectors,
        blocks,
        inverse_vectors,
    }))
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let (sum, comp) = *acc;
    let t = sum + x;
    let c = if sum.abs() >= x.abs() {
        (sum - t) + x
    } else {
        (x - t) + sum
    };
    *acc = (t, comp + c);
}

impl CompensatedSum {
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}
