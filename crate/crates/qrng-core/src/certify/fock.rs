//! Dense complex matrices on a truncated Fock space.
//!
//! Attack realizations live on small spaces (dimension ≤ 8 in practice), so
//! a straightforward row-major matrix with a cyclic Jacobi eigensolver is
//! all the linear algebra the certifier stack needs. Everything here is
//! deterministic and allocation-light.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMat {
    /// Zero matrix of size `dim × dim`.
    pub fn zeros(dim: usize) -> Self {
        CMat {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Builds from an element function.
    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(dim: usize, mut f: F) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, Complex64::new(v, 0.0));
        }
        m
    }

    /// The photon-number operator `diag(0, 1, …, dim−1)`.
    pub fn number_operator(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| {
            if i == j {
                Complex64::new(i as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Rank-one projector `|ψ⟩⟨ψ|` (ψ need not be normalized; it is here).
    pub fn outer(psi: &[Complex64]) -> Self {
        let norm_sq: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        let scale = if norm_sq > 0.0 { 1.0 / norm_sq } else { 0.0 };
        Self::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj() * scale)
    }

    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Element accessor.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    /// Element mutator.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMat {
        Self::from_fn(self.dim, |i, j| self.at(j, i).conj())
    }

    /// Matrix product.
    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matrix product");
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for k in 0..self.dim {
                let a = self.at(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..self.dim {
                    let v = out.at(i, j) + a * other.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Element-wise sum.
    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matrix sum");
        Self::from_fn(self.dim, |i, j| self.at(i, j) + other.at(i, j))
    }

    /// Element-wise difference.
    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matrix difference");
        Self::from_fn(self.dim, |i, j| self.at(i, j) - other.at(i, j))
    }

    /// Scalar multiple.
    pub fn scale(&self, s: f64) -> CMat {
        Self::from_fn(self.dim, |i, j| self.at(i, j) * s)
    }

    /// Trace.
    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.at(i, i)).sum()
    }

    /// `Tr[self · other]` without materializing the product.
    pub fn trace_product(&self, other: &CMat) -> Complex64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in trace product");
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.at(i, j) * other.at(j, i);
            }
        }
        acc
    }

    /// Largest deviation from Hermitian symmetry.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d = (self.at(i, j) - self.at(j, i).conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the matching unitary of
    /// column eigenvectors `V` with `A = V · diag(λ) · V†`. Intended for the
    /// small dimensions used here; panics if the input is visibly
    /// non-Hermitian.
    pub fn eigh(&self) -> (Vec<f64>, CMat) {
        let n = self.dim;
        let scale: f64 = self
            .data
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, |a, b| if b > a { b } else { a })
            .max(1.0);
        assert!(
            self.hermiticity_defect() <= 1e-9 * scale,
            "eigh requires a Hermitian matrix"
        );

        let mut a = self.clone();
        // Exact symmetrization so rounding in the input cannot drift.
        for i in 0..n {
            for j in 0..n {
                let sym = (a.at(i, j) + a.at(j, i).conj()) * 0.5;
                a.set(i, j, sym);
                a.set(j, i, sym.conj());
            }
            let d = a.at(i, i);
            a.set(i, i, Complex64::new(d.re, 0.0));
        }
        let mut v = CMat::identity(n);

        for _sweep in 0..64 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a.at(p, q).norm_sqr();
                }
            }
            if off <= (1e-30 * scale * scale).max(f64::MIN_POSITIVE) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.at(p, q);
                    let mag = apq.norm();
                    if mag <= 1e-18 * scale {
                        continue;
                    }
                    let phi = apq.arg();
                    let tau = (a.at(q, q).re - a.at(p, p).re) / (2.0 * mag);
                    // Stable small root of t² − 2τt − 1 = 0 for this rotation
                    // convention; the annihilation condition is
                    // m(c² − s²) + (a_qq − a_pp)·c·s = 0.
                    let sign = if tau >= 0.0 { -1.0 } else { 1.0 };
                    let t = sign / (libm::fabs(tau) + libm::sqrt(1.0 + tau * tau));
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = t * c;
                    let e_pos = Complex64::from_polar(1.0, phi);
                    let e_neg = e_pos.conj();

                    // Columns: [col_p, col_q] ← [col_p, col_q] · U with
                    // U = [[c, −s·e^{iφ}], [s·e^{−iφ}, c]].
                    for r in 0..n {
                        let arp = a.at(r, p);
                        let arq = a.at(r, q);
                        a.set(r, p, arp * c + arq * s * e_neg);
                        a.set(r, q, arq * c - arp * s * e_pos);
                    }
                    // Rows: U† from the left.
                    for r in 0..n {
                        let apr = a.at(p, r);
                        let aqr = a.at(q, r);
                        a.set(p, r, apr * c + aqr * s * e_pos);
                        a.set(q, r, aqr * c - apr * s * e_neg);
                    }
                    // Keep exact Hermitian structure on the rotated entries.
                    a.set(p, q, Complex64::new(0.0, 0.0));
                    a.set(q, p, Complex64::new(0.0, 0.0));
                    let dp = a.at(p, p);
                    let dq = a.at(q, q);
                    a.set(p, p, Complex64::new(dp.re, 0.0));
                    a.set(q, q, Complex64::new(dq.re, 0.0));

                    for r in 0..n {
                        let vrp = v.at(r, p);
                        let vrq = v.at(r, q);
                        v.set(r, p, vrp * c + vrq * s * e_neg);
                        v.set(r, q, vrq * c - vrp * s * e_pos);
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.at(i, i).re.partial_cmp(&a.at(j, j).re).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| a.at(i, i).re).collect();
        let vectors = CMat::from_fn(n, |r, cidx| v.at(r, order[cidx]));
        (eigenvalues, vectors)
    }

    /// Smallest eigenvalue (Hermitian input).
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigh().0[0]
    }
}

/// Checks positive semidefiniteness within `tol`; returns the smallest
/// eigenvalue on failure.
pub fn psd_check(m: &CMat, tol: f64) -> Result<(), f64> {
    let min = m.min_eigenvalue();
    if min >= -tol {
        Ok(())
    } else {
        Err(min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reconstruct(eigs: &[f64], v: &CMat) -> CMat {
        let d = CMat::diag(eigs);
        v.mul(&d).mul(&v.dagger())
    }

    fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                worst = worst.max((a.at(i, j) - b.at(i, j)).norm());
            }
        }
        worst
    }

    #[test]
    fn diagonal_matrix_eigen() {
        let m = CMat::diag(&[3.0, -1.0, 2.0]);
        let (eigs, v) = m.eigh();
        assert_eq!(eigs, vec![-1.0, 2.0, 3.0]);
        assert!(max_abs_diff(&reconstruct(&eigs, &v), &m) < 1e-12);
    }

    #[test]
    fn two_by_two_analytic() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let m = CMat::from_fn(2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c(1.0, 0.0),
            (0, 1) => c(0.0, 1.0),
            _ => c(0.0, -1.0),
        });
        let (eigs, v) = m.eigh();
        assert!((eigs[0] - 0.0).abs() < 1e-12);
        assert!((eigs[1] - 2.0).abs() < 1e-12);
        assert!(max_abs_diff(&reconstruct(&eigs, &v), &m) < 1e-12);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        // Deterministic pseudo-random Hermitian via a simple LCG.
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for dim in 2..=8 {
            let mut m = CMat::zeros(dim);
            for i in 0..dim {
                for j in i..dim {
                    let v = if i == j {
                        c(next(), 0.0)
                    } else {
                        c(next(), next())
                    };
                    m.set(i, j, v);
                    m.set(j, i, v.conj());
                }
            }
            let (eigs, v) = m.eigh();
            assert!(
                max_abs_diff(&reconstruct(&eigs, &v), &m) < 1e-11,
                "dim {dim}"
            );
            // eigenvector unitarity
            let vv = v.dagger().mul(&v);
            assert!(max_abs_diff(&vv, &CMat::identity(dim)) < 1e-11, "dim {dim}");
            // ascending order
            for w in eigs.windows(2) {
                assert!(w[0] <= w[1] + 1e-14);
            }
            // trace preserved
            let tr: f64 = eigs.iter().sum();
            assert!((tr - m.trace().re).abs() < 1e-10);
        }
    }

    #[test]
    fn projector_is_psd_with_unit_trace() {
        let psi = [c(0.6, 0.0), c(0.0, 0.8)];
        let p = CMat::outer(&psi);
        assert!((p.trace().re - 1.0).abs() < 1e-14);
        assert!(psd_check(&p, 1e-12).is_ok());
        // idempotent
        assert!(max_abs_diff(&p.mul(&p), &p) < 1e-14);
    }

    #[test]
    fn psd_check_flags_negative_directions() {
        let m = CMat::diag(&[0.5, -0.2]);
        match psd_check(&m, 1e-9) {
            Err(min) => assert!((min + 0.2).abs() < 1e-12),
            Ok(()) => panic!("negative eigenvalue not detected"),
        }
    }

    #[test]
    fn trace_product_matches_explicit_product() {
        let a = CMat::from_fn(3, |i, j| c((i + 2 * j) as f64, (i as f64) - (j as f64)));
        let h = a.add(&a.dagger()).scale(0.5);
        let b = CMat::from_fn(3, |i, j| c((i * j) as f64 + 0.5, 0.25 * (i as f64 + j as f64)));
        let g = b.add(&b.dagger()).scale(0.5);
        let direct = h.trace_product(&g);
        let via_mul = h.mul(&g).trace();
        assert!((direct - via_mul).norm() < 1e-12);
    }

    #[test]
    fn number_operator_counts_photons() {
        let n = CMat::number_operator(4);
        let fock2 = CMat::outer(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((fock2.trace_product(&n).re - 2.0).abs() < 1e-14);
    }
}
