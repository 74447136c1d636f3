//! Primitive symmetric-matrix operations for dimensions 1 through 4.
//!
//! Everything else in the crate is built on the two types here: [`SymMat`],
//! a dense real symmetric `N×N` matrix (`N ≤ 4`) that symmetrizes its input
//! on construction, and [`EigDecomp`], its full spectral decomposition with
//! eigenvalues sorted ascending and an orthonormal eigenframe.
//!
//! The eigensolver is a cyclic Jacobi iteration: for matrices this small it
//! is simple, branch-predictable, dependency-free, and — because the sweep
//! order is fixed — bit-for-bit deterministic for identical inputs. Jacobi
//! rotations are also backward stable, so the reconstruction error
//! `‖Σ λᵢ vᵢvᵢᵀ − A‖` stays far below the documented `1e-10·(1 + ‖A‖)`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Largest supported matrix dimension.
///
/// The library targets the space of symmetric `N×N` matrices for small `N`;
/// block tests double the dimension (`2N ≤ 4`), so the hard cap is 4.
pub const MAX_DIM: usize = 4;

/// Number of Jacobi sweeps after which the solver gives up (never reached in
/// practice: 4×4 symmetric matrices converge in well under ten sweeps).
const JACOBI_MAX_SWEEPS: usize = 50;

/// A real symmetric matrix of dimension 1–4, stored dense.
///
/// Construction symmetrizes the input as `(A + Aᵀ)/2`, so the symmetry
/// invariant holds by construction rather than by trust; this mirrors the
/// coherence convention for Hessians, where only the symmetrized second
/// derivative is meaningful. All entries are validated finite.
///
/// Values are immutable after construction: every "mutation" below returns a
/// fresh matrix, so sharing across threads is safe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    n: usize,
    e: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMat {
    /// Builds a matrix from square nested rows, symmetrizing `(A + Aᵀ)/2`.
    ///
    /// # Errors
    ///
    /// Rejects dimensions outside `1..=4` and non-finite entries.
    pub fn from_rows<const M: usize>(rows: [[f64; M]; M]) -> Result<Self> {
        if M == 0 || M > MAX_DIM {
            return Err(Error::Dimension(format!(
                "matrix dimension must be 1..={MAX_DIM}, got {M}"
            )));
        }
        let mut e = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..M {
            for j in 0..M {
                let v = 0.5 * (rows[i][j] + rows[j][i]);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("entry ({i},{j}) of matrix input")));
                }
                e[i][j] = v;
            }
        }
        Ok(SymMat { n: M, e })
    }

    /// Builds a matrix from a row-major flat slice of length `n·n`,
    /// symmetrizing on the way in.
    pub fn from_flat(n: usize, flat: &[f64]) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::Dimension(format!(
                "matrix dimension must be 1..={MAX_DIM}, got {n}"
            )));
        }
        if flat.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {n}×{n} matrix, got {}",
                n * n,
                flat.len()
            )));
        }
        let mut e = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                let v = 0.5 * (flat[i * n + j] + flat[j * n + i]);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("entry ({i},{j}) of matrix input")));
                }
                e[i][j] = v;
            }
        }
        Ok(SymMat { n, e })
    }

    /// Diagonal matrix with the given diagonal.
    pub fn diag(d: &[f64]) -> Result<Self> {
        let n = d.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::Dimension(format!(
                "matrix dimension must be 1..={MAX_DIM}, got {n}"
            )));
        }
        let mut e = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, &v) in d.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("diagonal entry {i}")));
            }
            e[i][i] = v;
        }
        Ok(SymMat { n, e })
    }

    /// The zero matrix.
    pub fn zero(n: usize) -> Result<Self> {
        Self::scaled_identity(n, 0.0)
    }

    /// The identity matrix.
    pub fn identity(n: usize) -> Result<Self> {
        Self::scaled_identity(n, 1.0)
    }

    /// `t · I`.
    pub fn scaled_identity(n: usize, t: f64) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::Dimension(format!(
                "matrix dimension must be 1..={MAX_DIM}, got {n}"
            )));
        }
        if !t.is_finite() {
            return Err(Error::NonFinite("scaled identity factor".into()));
        }
        let mut e = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            e[i][i] = t;
        }
        Ok(SymMat { n, e })
    }

    /// Matrix dimension `N`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n && j < self.n);
        self.e[i][j]
    }

    /// Row-major flat copy of the entries (length `n·n`).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.e[i][j]);
            }
        }
        out
    }

    /// Nested-rows copy of the entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.e[i][j]).collect())
            .collect()
    }

    fn check_same_dim(&self, other: &SymMat) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "dimension mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// `A + B`.
    pub fn add(&self, other: &SymMat) -> Result<SymMat> {
        self.check_same_dim(other)?;
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.e[i][j] += other.e[i][j];
            }
        }
        Ok(out)
    }

    /// `A − B`.
    pub fn sub(&self, other: &SymMat) -> Result<SymMat> {
        self.check_same_dim(other)?;
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.e[i][j] -= other.e[i][j];
            }
        }
        Ok(out)
    }

    /// `c · A`.
    pub fn scale(&self, c: f64) -> SymMat {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.e[i][j] *= c;
            }
        }
        out
    }

    /// `−A`.
    pub fn neg(&self) -> SymMat {
        self.scale(-1.0)
    }

    /// `A + t·I` — the shift that appears in every enlargement and
    /// interiority test in the crate.
    pub fn add_scaled_identity(&self, t: f64) -> SymMat {
        let mut out = *self;
        for i in 0..self.n {
            out.e[i][i] += t;
        }
        out
    }

    /// Trace.
    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.e[i][i]).sum()
    }

    /// Determinant by direct expansion (exact arithmetic shape for `N ≤ 4`;
    /// no eigensolve round-off enters Monge-Ampère residuals).
    pub fn det(&self) -> f64 {
        let e = &self.e;
        match self.n {
            1 => e[0][0],
            2 => e[0][0] * e[1][1] - e[0][1] * e[1][0],
            3 => {
                e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
                    - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
                    + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
            }
            4 => {
                // Expansion along the first row with 3×3 cofactors.
                let minor = |r: [usize; 3], c: [usize; 3]| -> f64 {
                    e[r[0]][c[0]] * (e[r[1]][c[1]] * e[r[2]][c[2]] - e[r[1]][c[2]] * e[r[2]][c[1]])
                        - e[r[0]][c[1]]
                            * (e[r[1]][c[0]] * e[r[2]][c[2]] - e[r[1]][c[2]] * e[r[2]][c[0]])
                        + e[r[0]][c[2]]
                            * (e[r[1]][c[0]] * e[r[2]][c[1]] - e[r[1]][c[1]] * e[r[2]][c[0]])
                };
                e[0][0] * minor([1, 2, 3], [1, 2, 3]) - e[0][1] * minor([1, 2, 3], [0, 2, 3])
                    + e[0][2] * minor([1, 2, 3], [0, 1, 3])
                    - e[0][3] * minor([1, 2, 3], [0, 1, 2])
            }
            _ => unreachable!("dimension validated at construction"),
        }
    }

    /// Quadratic form `vᵀ A v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.n {
            return Err(Error::Dimension(format!(
                "vector length {} vs matrix dimension {}",
                v.len(),
                self.n
            )));
        }
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += v[i] * self.e[i][j] * v[j];
            }
        }
        Ok(s)
    }

    /// Frobenius inner product `tr(A B)`.
    pub fn frobenius_dot(&self, other: &SymMat) -> Result<f64> {
        self.check_same_dim(other)?;
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.e[i][j] * other.e[j][i];
            }
        }
        Ok(s)
    }

    /// Entrywise maximum absolute difference — used for exact-shape
    /// comparisons in tests and for round-trip assertions.
    pub fn max_abs_diff(&self, other: &SymMat) -> Result<f64> {
        self.check_same_dim(other)?;
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max((self.e[i][j] - other.e[i][j]).abs());
            }
        }
        Ok(m)
    }

    /// Full spectral decomposition; see [`eigs`].
    pub fn eigs(&self) -> EigDecomp {
        eigs(self)
    }

    /// Operator norm `max |λᵢ(A)|`; see [`opnorm`].
    pub fn opnorm(&self) -> f64 {
        opnorm(self)
    }

    /// Smallest eigenvalue `λ₁(A)`.
    pub fn lambda_min(&self) -> f64 {
        self.eigs().values()[0]
    }

    /// Largest eigenvalue `λ_N(A)`.
    pub fn lambda_max(&self) -> f64 {
        let d = self.eigs();
        d.values()[self.n - 1]
    }

    /// `k`-th smallest eigenvalue, `k` one-based (`λ_k` with
    /// `λ₁ ≤ … ≤ λ_N`).
    pub fn lambda_k(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.n {
            return Err(Error::InvalidParameter(format!(
                "eigenvalue index k must be 1..={}, got {k}",
                self.n
            )));
        }
        Ok(self.eigs().values()[k - 1])
    }

    /// Positive-semidefiniteness up to `tol`: `λ₁(A) ≥ −tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.lambda_min() >= -tol
    }

    /// The Loewner order `A ⪰ B` up to `tol`: `λ₁(A−B) ≥ −tol`.
    pub fn dominates(&self, other: &SymMat, tol: f64) -> Result<bool> {
        Ok(self.sub(other)?.lambda_min() >= -tol)
    }
}

/// Symmetric matrices serialize as row-major nested JSON arrays
/// (`[[a11, a12], [a21, a22]]`), matching the CLI's matrix-literal syntax.
impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(deserializer)?;
        let n = rows.len();
        if n == 0 || n > MAX_DIM {
            return Err(D::Error::custom(format!(
                "matrix dimension must be 1..={MAX_DIM}, got {n}"
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(D::Error::custom(format!(
                    "row {i} has length {}, expected {n} (matrix must be square)",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        SymMat::from_flat(n, &flat).map_err(D::Error::custom)
    }
}

/// Spectral decomposition of a [`SymMat`]: eigenvalues sorted ascending with
/// a matching orthonormal eigenframe.
#[derive(Debug, Clone, Copy)]
pub struct EigDecomp {
    n: usize,
    values: [f64; MAX_DIM],
    /// `frame[k]` is the unit eigenvector for `values[k]`.
    frame: [[f64; MAX_DIM]; MAX_DIM],
}

impl EigDecomp {
    /// Eigenvalues `λ₁ ≤ … ≤ λ_N`.
    pub fn values(&self) -> &[f64] {
        &self.values[..self.n]
    }

    /// Unit eigenvector for the `k`-th smallest eigenvalue (zero-based `k`).
    pub fn vector(&self, k: usize) -> &[f64] {
        debug_assert!(k < self.n);
        &self.frame[k][..self.n]
    }

    /// Dimension `N`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Rebuilds `Σ λᵢ vᵢvᵢᵀ`; the distance to the original matrix is the
    /// decomposition's backward error.
    pub fn reconstruct(&self) -> SymMat {
        let mut e = [[0.0; MAX_DIM]; MAX_DIM];
        for k in 0..self.n {
            let v = &self.frame[k];
            for i in 0..self.n {
                for j in 0..self.n {
                    e[i][j] += self.values[k] * v[i] * v[j];
                }
            }
        }
        SymMat { n: self.n, e }
    }
}

/// Full eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps visit the strict upper triangle in fixed row-major order and
/// annihilate each off-diagonal entry with a plane rotation; the rotations
/// accumulate into the eigenframe. Convergence for `N ≤ 4` takes a handful
/// of sweeps; the off-diagonal mass shrinks quadratically once small.
///
/// # Notes
///
/// 1. Deterministic: fixed sweep order, fixed tie-breaking, and a sign
///    convention on eigenvectors (largest-magnitude component positive).
/// 2. Eigenvalues are returned ascending; ties keep the sweep's ordering.
/// 3. Inputs are already validated finite by [`SymMat`] construction.
pub fn eigs(a: &SymMat) -> EigDecomp {
    let n = a.n;
    let mut m = a.e;
    // v starts as the identity and accumulates rotations: columns of v are
    // the eigenvectors of the original matrix.
    let mut v = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        v[i][i] = 1.0;
    }

    // Scale-relative stopping threshold on the off-diagonal Frobenius mass.
    let scale: f64 = {
        let mut s: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                s = s.max(m[i][j].abs());
            }
        }
        s.max(1.0)
    };
    let off_tol = 1e-15 * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[p][q].abs());
            }
        }
        if off <= off_tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq.abs() <= off_tol * 1e-2 {
                    continue;
                }
                // Classic stable rotation computation (theta-cot formula).
                let theta = 0.5 * (m[q][q] - m[p][p]) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Apply the rotation to rows/columns p and q.
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                // Re-symmetrize the rotated pair exactly; round-off drift in
                // the off-diagonal pair would otherwise accumulate.
                m[p][q] = 0.5 * (m[p][q] + m[q][p]);
                m[q][p] = m[p][q];

                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    // Sort eigenpairs ascending by value (stable w.r.t. the sweep order).
    let mut idx = [0usize, 1, 2, 3];
    idx[..n].sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).expect("finite eigenvalues"));

    let mut values = [0.0; MAX_DIM];
    let mut frame = [[0.0; MAX_DIM]; MAX_DIM];
    for (slot, &k) in idx[..n].iter().enumerate() {
        values[slot] = m[k][k];
        for i in 0..n {
            frame[slot][i] = v[i][k];
        }
        // Sign convention: the entry of largest magnitude (first such index
        // on ties) is made nonnegative, so repeated calls agree bitwise.
        let mut arg = 0;
        let mut best = frame[slot][0].abs();
        for i in 1..n {
            if frame[slot][i].abs() > best {
                best = frame[slot][i].abs();
                arg = i;
            }
        }
        if frame[slot][arg] < 0.0 {
            for i in 0..n {
                frame[slot][i] = -frame[slot][i];
            }
        }
    }

    EigDecomp { n, values, frame }
}

/// Operator norm `‖A‖ = max |λᵢ(A)|`.
pub fn opnorm(a: &SymMat) -> f64 {
    let d = eigs(a);
    d.values()
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs()))
}

/// Symmetrized outer product `(vwᵀ + wvᵀ)/2`.
///
/// For `v == w` this is the rank-one projector scaffold `vvᵀ`; the
/// symmetrized form is what a second derivative of `⟨v, x⟩⟨w, x⟩` produces.
pub fn outer(v: &[f64], w: &[f64]) -> Result<SymMat> {
    let n = v.len();
    if n == 0 || n > MAX_DIM {
        return Err(Error::Dimension(format!(
            "vector length must be 1..={MAX_DIM}, got {n}"
        )));
    }
    if w.len() != n {
        return Err(Error::Dimension(format!(
            "vector lengths differ: {} vs {}",
            n,
            w.len()
        )));
    }
    for (i, val) in v.iter().chain(w.iter()).enumerate() {
        if !val.is_finite() {
            return Err(Error::NonFinite(format!("outer-product input component {i}")));
        }
    }
    let mut e = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            e[i][j] = 0.5 * (v[i] * w[j] + w[i] * v[j]);
        }
    }
    Ok(SymMat { n, e })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn construction_symmetrizes() {
        let a = SymMat::from_rows([[1.0, 3.0], [1.0, 2.0]]).unwrap();
        assert_close(a.get(0, 1), 2.0, 0.0);
        assert_close(a.get(1, 0), 2.0, 0.0);
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        assert!(SymMat::from_rows([[f64::NAN]]).is_err());
        assert!(SymMat::from_flat(5, &[0.0; 25]).is_err());
        assert!(SymMat::from_flat(2, &[0.0; 3]).is_err());
        assert!(SymMat::diag(&[]).is_err());
    }

    #[test]
    fn eigs_identity() {
        let d = SymMat::identity(2).unwrap().eigs();
        assert_close(d.values()[0], 1.0, 1e-14);
        assert_close(d.values()[1], 1.0, 1e-14);
    }

    #[test]
    fn eigs_diagonal_sorted() {
        let d = SymMat::diag(&[3.0, -1.0]).unwrap().eigs();
        assert_close(d.values()[0], -1.0, 1e-14);
        assert_close(d.values()[1], 3.0, 1e-14);
    }

    #[test]
    fn eigs_offdiagonal_pair() {
        // Characteristic polynomial λ² − 1 = 0.
        let d = SymMat::from_rows([[0.0, 1.0], [1.0, 0.0]]).unwrap().eigs();
        assert_close(d.values()[0], -1.0, 1e-14);
        assert_close(d.values()[1], 1.0, 1e-14);
    }

    #[test]
    fn eigs_reconstruction_and_orthonormality_4d() {
        let a = SymMat::from_rows([
            [2.0, -1.0, 0.3, 0.0],
            [-1.0, 1.5, 0.2, -0.4],
            [0.3, 0.2, -0.7, 1.1],
            [0.0, -0.4, 1.1, 3.2],
        ])
        .unwrap();
        let d = a.eigs();
        let err = d.reconstruct().sub(&a).unwrap().opnorm();
        assert!(err <= 1e-10 * (1.0 + a.opnorm()), "reconstruction error {err}");
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = (0..4).map(|k| d.vector(i)[k] * d.vector(j)[k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_close(dot, expected, 1e-12);
            }
        }
        // Ascending order.
        for k in 1..4 {
            assert!(d.values()[k - 1] <= d.values()[k] + 1e-14);
        }
        // Trace identity.
        assert_close(d.values().iter().sum::<f64>(), a.trace(), 1e-12);
    }

    #[test]
    fn eigs_deterministic() {
        let a = SymMat::from_rows([[1.0, 0.5, -0.25], [0.5, -2.0, 0.75], [-0.25, 0.75, 0.5]])
            .unwrap();
        let d1 = a.eigs();
        let d2 = a.eigs();
        for k in 0..3 {
            assert_eq!(d1.values()[k].to_bits(), d2.values()[k].to_bits());
            for i in 0..3 {
                assert_eq!(d1.vector(k)[i].to_bits(), d2.vector(k)[i].to_bits());
            }
        }
    }

    #[test]
    fn opnorm_examples() {
        assert_close(SymMat::zero(3).unwrap().opnorm(), 0.0, 0.0);
        assert_close(SymMat::diag(&[3.0, -5.0]).unwrap().opnorm(), 5.0, 1e-14);
        // Eigenvalues ±2.
        let a = SymMat::from_rows([[0.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_close(a.opnorm(), 2.0, 1e-14);
    }

    #[test]
    fn outer_examples() {
        let e = outer(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_close(e.max_abs_diff(&SymMat::diag(&[1.0, 0.0]).unwrap()).unwrap(), 0.0, 0.0);

        let m = outer(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let want = SymMat::from_rows([[0.0, 0.5], [0.5, 0.0]]).unwrap();
        assert_close(m.max_abs_diff(&want).unwrap(), 0.0, 0.0);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = outer(&[s, s], &[s, s]).unwrap();
        let want = SymMat::from_rows([[0.5, 0.5], [0.5, 0.5]]).unwrap();
        assert!(h.max_abs_diff(&want).unwrap() <= 1e-15);

        // trace(outer(v, w)) = ⟨v, w⟩.
        let t = outer(&[1.0, 2.0, 3.0], &[-1.0, 0.5, 2.0]).unwrap().trace();
        assert_close(t, 6.0, 1e-14);
    }

    #[test]
    fn det_matches_eigenvalue_product() {
        let a = SymMat::from_rows([
            [1.2, 0.4, -0.3, 0.9],
            [0.4, 2.0, 0.1, -0.2],
            [-0.3, 0.1, 1.7, 0.6],
            [0.9, -0.2, 0.6, -1.1],
        ])
        .unwrap();
        let prod: f64 = a.eigs().values().iter().product();
        assert_close(a.det(), prod, 1e-10 * (1.0 + prod.abs()));
    }

    #[test]
    fn serde_round_trip() {
        let a = SymMat::from_rows([[0.1, -2.5], [-2.5, 7.25]]).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b: SymMat = serde_json::from_str(&json).unwrap();
        assert_eq!(a.max_abs_diff(&b).unwrap(), 0.0);
        // Row-major nested-array syntax is accepted directly.
        let c: SymMat = serde_json::from_str("[[1.0,0.0],[0.0,-1.0]]").unwrap();
        assert_eq!(c.get(1, 1), -1.0);
        // Ragged input rejected.
        assert!(serde_json::from_str::<SymMat>("[[1.0,0.0],[0.0]]").is_err());
    }

    #[test]
    fn loewner_order_basics() {
        let tol = 1e-9;
        let a = SymMat::diag(&[2.0, 1.0]).unwrap();
        let b = SymMat::diag(&[1.0, 0.5]).unwrap();
        assert!(a.dominates(&b, tol).unwrap());
        assert!(!b.dominates(&a, tol).unwrap());
        assert!(a.dominates(&a, tol).unwrap());
    }
}
