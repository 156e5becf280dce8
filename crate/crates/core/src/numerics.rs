//! Dense complex/real linear-algebra kernels shared by every analysis stage:
//! Hermitian eigendecomposition (cyclic Jacobi on the realified matrix),
//! Cholesky factorization, singular values, and the complex-to-real embedding
//! consumed by the SDP solver.

use num_complex::Complex64;

use crate::error::Error;

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        ComplexMatrix {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self, Error> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, entries })
    }

    /// Build from real entries, row-major.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self, Error> {
        Self::from_entries(
            rows,
            cols,
            entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn mul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j) + a * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn sub(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    /// Copy of the sub-block with the given row/column ranges.
    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> ComplexMatrix {
        assert!(row0 + rows <= self.rows && col0 + cols <= self.cols);
        let mut out = ComplexMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out.set(i, j, self.get(row0 + i, col0 + j));
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Solve A X = B by LU with partial pivoting; A must be square.
    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix, Error> {
        let n = self.rows;
        if self.cols != n {
            return Err(Error::Dimension("solve requires a square matrix".into()));
        }
        if b.rows != n {
            return Err(Error::Dimension("right-hand side row mismatch".into()));
        }
        let mut lu = self.clone();
        let mut x = b.clone();
        let scale = self.max_abs().max(1.0);
        for k in 0..n {
            let mut piv = k;
            let mut best = lu.get(k, k).norm();
            for i in (k + 1)..n {
                let v = lu.get(i, k).norm();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= 1e-300 * scale {
                return Err(Error::Singular(format!(
                    "pivot {} vanished during LU factorization",
                    k
                )));
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu.get(k, j);
                    lu.set(k, j, lu.get(piv, j));
                    lu.set(piv, j, tmp);
                }
                for j in 0..x.cols {
                    let tmp = x.get(k, j);
                    x.set(k, j, x.get(piv, j));
                    x.set(piv, j, tmp);
                }
            }
            let inv = Complex64::new(1.0, 0.0) / lu.get(k, k);
            for i in (k + 1)..n {
                let f = lu.get(i, k) * inv;
                if f.norm_sqr() == 0.0 {
                    continue;
                }
                lu.set(i, k, f);
                for j in (k + 1)..n {
                    let v = lu.get(i, j) - f * lu.get(k, j);
                    lu.set(i, j, v);
                }
                for j in 0..x.cols {
                    let v = x.get(i, j) - f * x.get(k, j);
                    x.set(i, j, v);
                }
            }
        }
        for j in 0..x.cols {
            for i in (0..n).rev() {
                let mut s = x.get(i, j);
                for k in (i + 1)..n {
                    s -= lu.get(i, k) * x.get(k, j);
                }
                x.set(i, j, s / lu.get(i, i));
            }
        }
        Ok(x)
    }
}

/// Complex matrix validated to be Hermitian: entry(i,j) = conj(entry(j,i))
/// within 1e-12 absolute, diagonal imaginary parts below 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    data: ComplexMatrix,
}

pub const HERMITIAN_SYMMETRY_TOL: f64 = 1e-12;

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self, Error> {
        if m.rows() != m.cols() {
            return Err(Error::Dimension("Hermitian matrix must be square".into()));
        }
        for i in 0..m.rows() {
            if m.get(i, i).im.abs() > HERMITIAN_SYMMETRY_TOL {
                return Err(Error::NonHermitian(format!(
                    "diagonal entry {} has imaginary part {:.3e}",
                    i,
                    m.get(i, i).im
                )));
            }
            for j in (i + 1)..m.cols() {
                let d = (m.get(i, j) - m.get(j, i).conj()).norm();
                if d > HERMITIAN_SYMMETRY_TOL {
                    return Err(Error::NonHermitian(format!(
                        "entries ({i},{j}) and ({j},{i}) differ from conjugates by {:.3e}",
                        d
                    )));
                }
            }
        }
        Ok(HermitianMatrix { data: m })
    }

    /// Symmetrize (H + H*)/2 first, then validate. Intended for matrices
    /// assembled from products where round-off breaks exact symmetry.
    pub fn symmetrize(m: ComplexMatrix) -> Result<Self, Error> {
        if m.rows() != m.cols() {
            return Err(Error::Dimension("Hermitian matrix must be square".into()));
        }
        let half = Complex64::new(0.5, 0.0);
        let sym = m.add(&m.adjoint()).scale(half);
        let mut clean = sym;
        for i in 0..clean.rows() {
            let d = clean.get(i, i);
            clean.set(i, i, Complex64::new(d.re, 0.0));
        }
        Self::new(clean)
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix {
            data: ComplexMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix {
            data: ComplexMatrix::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data.get(i, j)
    }

    /// Set the (i,j) entry and its mirror so the invariant is preserved.
    pub fn set_pair(&mut self, i: usize, j: usize, v: Complex64) {
        if i == j {
            self.data.set(i, i, Complex64::new(v.re, 0.0));
        } else {
            self.data.set(i, j, v);
            self.data.set(j, i, v.conj());
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.frobenius_norm()
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix {
            data: self.data.scale(Complex64::new(s, 0.0)),
        }
    }

    pub fn add(&self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            data: self.data.add(&rhs.data),
        }
    }
}

/// Real symmetric matrix in plain row-major storage; internal helper for the
/// Jacobi eigensolver and the SDP barrier computations.
#[derive(Debug, Clone)]
pub struct RealSymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl RealSymMatrix {
    pub fn zeros(n: usize) -> Self {
        RealSymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Cholesky factor L (lower) with A = L Lᵀ; fails on non-positive pivots.
    pub fn cholesky(&self) -> Result<Vec<f64>, Error> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::NotPositiveDefinite(format!(
                            "Cholesky pivot {} is {:.3e}",
                            i, s
                        )));
                    }
                    l[i * n + j] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(l)
    }
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues ascending, eigenvectors as columns, in the same order).
pub fn jacobi_eig_sym(a: &RealSymMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.frobenius_norm();
    let tol = 1e-12 * norm.max(f64::MIN_POSITIVE);
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[p * n + q].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    // Sort ascending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[i * n + i]
            .partial_cmp(&m[j * n + j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut vals = Vec::with_capacity(n);
    let mut vecs = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        vals.push(m[old_col * n + old_col]);
        for k in 0..n {
            vecs[k * n + new_col] = v[k * n + old_col];
        }
    }
    (vals, vecs)
}

/// Real symmetric embedding [[Re H, -Im H],[Im H, Re H]] of a Hermitian matrix.
/// The embedding is positive semidefinite iff H is, and every eigenvalue of H
/// appears twice in its spectrum.
pub fn realify(h: &HermitianMatrix) -> RealSymMatrix {
    let n = h.dim();
    let mut out = RealSymMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            let e = h.get(i, j);
            out.set(i, j, e.re);
            out.set(i, j + n, -e.im);
            out.set(i + n, j, e.im);
            out.set(i + n, j + n, e.re);
        }
    }
    out
}

/// Hermitian eigendecomposition via cyclic Jacobi on the realified matrix.
///
/// Eigenvalues are ascending; eigenvectors are returned as columns of a
/// ComplexMatrix, orthonormal, one per eigenvalue. Deterministic.
pub fn hermitian_eig(h: &HermitianMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.dim();
    let real = realify(h);
    let (rvals, rvecs) = jacobi_eig_sym(&real);
    let m2 = 2 * n;

    // The realified spectrum carries each eigenvalue of H twice. Walk the real
    // eigenvectors in eigenvalue order and keep a complex vector whenever it is
    // not already (complex-)spanned by the accepted ones.
    let mut vals = Vec::with_capacity(n);
    let mut kept: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for col in 0..m2 {
        if kept.len() == n {
            break;
        }
        let mut w: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new(rvecs[k * m2 + col], rvecs[(k + n) * m2 + col]))
            .collect();
        // Complex Gram-Schmidt against accepted vectors.
        for prev in &kept {
            let inner: Complex64 = prev
                .iter()
                .zip(&w)
                .map(|(p, x)| p.conj() * x)
                .sum();
            for (x, p) in w.iter_mut().zip(prev) {
                *x -= inner * p;
            }
        }
        let nrm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-6 {
            for x in w.iter_mut() {
                *x /= Complex64::new(nrm, 0.0);
            }
            kept.push(w);
            vals.push(rvals[col]);
        }
    }
    debug_assert_eq!(kept.len(), n, "complex pairing of realified spectrum failed");
    let mut vecs = ComplexMatrix::zeros(n, n);
    for (j, w) in kept.iter().enumerate() {
        for (i, x) in w.iter().enumerate() {
            vecs.set(i, j, *x);
        }
    }
    (vals, vecs)
}

pub fn max_eigenvalue(h: &HermitianMatrix) -> f64 {
    let (vals, _) = hermitian_eig(h);
    *vals.last().expect("nonempty spectrum")
}

pub fn min_eigenvalue(h: &HermitianMatrix) -> f64 {
    let (vals, _) = hermitian_eig(h);
    vals[0]
}

/// Largest singular value via the largest eigenvalue of A*A.
pub fn max_singular_value(a: &ComplexMatrix) -> f64 {
    let gram = a.adjoint().mul(a);
    let h = HermitianMatrix::symmetrize(gram).expect("A*A is Hermitian by construction");
    max_eigenvalue(&h).max(0.0).sqrt()
}

/// All singular values, descending.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    let gram = a.adjoint().mul(a);
    let h = HermitianMatrix::symmetrize(gram).expect("A*A is Hermitian by construction");
    let (vals, _) = hermitian_eig(&h);
    let mut sv: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    sv.reverse();
    sv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, c(rng.random_range(-2.0..2.0), 0.0));
            for j in (i + 1)..n {
                let v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m.set(i, j, v);
                m.set(j, i, v.conj());
            }
        }
        HermitianMatrix::new(m).unwrap()
    }

    #[test]
    fn eig_diagonal() {
        let m = ComplexMatrix::from_real(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0])
            .unwrap();
        let h = HermitianMatrix::new(m).unwrap();
        let (vals, _) = hermitian_eig(&h);
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vals[1], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vals[2], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn eig_pauli() {
        let m = ComplexMatrix::from_entries(
            2,
            2,
            vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)],
        )
        .unwrap();
        let h = HermitianMatrix::new(m).unwrap();
        let (vals, _) = hermitian_eig(&h);
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn eig_reconstruction_random_8x8() {
        let h = random_hermitian(8, 42);
        let (vals, vecs) = hermitian_eig(&h);
        let n = 8;
        // Residual ||H v_k - lambda_k v_k|| per eigenpair.
        let hnorm = h.frobenius_norm();
        for k in 0..n {
            let vk = vecs.block(0, k, n, 1);
            let hv = h.matrix().mul(&vk);
            let lv = vk.scale(c(vals[k], 0.0));
            let resid = hv.sub(&lv).frobenius_norm();
            assert!(
                resid <= 1e-9 * (1.0 + hnorm),
                "eigenpair {} residual {:.3e}",
                k,
                resid
            );
        }
        // Orthonormality.
        let gram = vecs.adjoint().mul(&vecs);
        let eye = ComplexMatrix::identity(n);
        assert!(gram.sub(&eye).max_abs() <= 1e-9);
        // Reconstruction H = V diag(vals) V*.
        let mut lam = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            lam.set(k, k, c(vals[k], 0.0));
        }
        let rec = vecs.mul(&lam).mul(&vecs.adjoint());
        assert!(rec.sub(h.matrix()).max_abs() <= 1e-9 * (1.0 + hnorm));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 3.0, 1.0]).unwrap();
        assert!(HermitianMatrix::new(m).is_err());
    }

    #[test]
    fn eig_deterministic() {
        let h = random_hermitian(6, 7);
        let (v1, e1) = hermitian_eig(&h);
        let (v2, e2) = hermitian_eig(&h);
        assert_eq!(v1, v2);
        assert_eq!(e1.entries(), e2.entries());
    }

    #[test]
    fn realify_scalar() {
        let h = HermitianMatrix::new(ComplexMatrix::from_real(1, 1, &[2.0]).unwrap()).unwrap();
        let r = realify(&h);
        assert_eq!(r.data, vec![2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn realify_pauli_doubles_spectrum() {
        let m = ComplexMatrix::from_entries(
            2,
            2,
            vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)],
        )
        .unwrap();
        let h = HermitianMatrix::new(m).unwrap();
        let r = realify(&h);
        let (vals, _) = jacobi_eig_sym(&r);
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vals[1], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vals[2], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vals[3], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn realify_min_eig_matches_complex() {
        for seed in 0..5u64 {
            let h = random_hermitian(5, 100 + seed);
            let r = realify(&h);
            let (rvals, _) = jacobi_eig_sym(&r);
            let cmin = min_eigenvalue(&h);
            assert_abs_diff_eq!(rvals[0], cmin, epsilon = 1e-9);
            // Spectrum doubling: compare complex eigs against every other real one.
            let (cvals, _) = hermitian_eig(&h);
            for (k, cv) in cvals.iter().enumerate() {
                assert_abs_diff_eq!(rvals[2 * k], *cv, epsilon = 1e-8);
                assert_abs_diff_eq!(rvals[2 * k + 1], *cv, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn svd_column_vector() {
        let a = ComplexMatrix::from_real(2, 1, &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(max_singular_value(&a), 5.0, epsilon = 1e-10);
    }

    #[test]
    fn svd_identity() {
        let a = ComplexMatrix::identity(3);
        assert_abs_diff_eq!(max_singular_value(&a), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn svd_golden_ratio() {
        // A = [[1,1],[0,1]]; A*A has eigenpolynomial x^2 - 3x + 1, largest root
        // (3+sqrt(5))/2, whose square root is the golden ratio.
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        let expected = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(max_singular_value(&a), expected, epsilon = 1e-9);
    }

    #[test]
    fn svd_unitary_invariance() {
        let a = random_hermitian(4, 3).matrix().clone();
        // Unitary matrices from eigenvectors of random Hermitians.
        let (_, u) = hermitian_eig(&random_hermitian(4, 4));
        let (_, v) = hermitian_eig(&random_hermitian(4, 5));
        let s0 = max_singular_value(&a);
        let s1 = max_singular_value(&u.mul(&a).mul(&v));
        assert_abs_diff_eq!(s0, s1, epsilon = 1e-8);
    }

    #[test]
    fn lu_solve_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 5;
        let mut a = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
            let d = a.get(i, i);
            a.set(i, i, d + c(3.0, 0.0));
        }
        let b = ComplexMatrix::from_real(n, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let x = a.solve(&b).unwrap();
        let resid = a.mul(&x).sub(&b).max_abs();
        assert!(resid < 1e-10, "residual {:.3e}", resid);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        let b = ComplexMatrix::from_real(2, 1, &[1.0, 1.0]).unwrap();
        assert!(a.solve(&b).is_err());
    }
}
