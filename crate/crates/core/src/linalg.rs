//! Small dense complex kernels: Hermitian eigendecomposition by cyclic
//! Jacobi, noise-subspace extraction, Householder null-space bases and
//! null-space projection.
//!
//! Matrix sizes never exceed the microphone count, so everything here is
//! plain O(D³) code on `nalgebra` dense storage.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 30;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending and column `k`
/// of `eigenvectors` paired with `eigenvalues[k]`.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col.scale_mut(self.eigenvalues[k]);
        }
        scaled * v.adjoint()
    }
}

/// Orthonormal basis of the noise subspace (the eigenvectors belonging to
/// the smallest eigenvalues), one basis vector per column.
#[derive(Debug, Clone)]
pub struct NoiseSubspace {
    basis: CMatrix,
}

impl NoiseSubspace {
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Orthonormal rows spanning the orthogonal complement of one vector.
#[derive(Debug, Clone)]
pub struct NullSpaceBasis {
    rows: CMatrix,
}

impl NullSpaceBasis {
    pub fn rows(&self) -> &CMatrix {
        &self.rows
    }

    /// Dimension of the space the basis lives in (`D`); it has `D - 1` rows.
    pub fn ambient_dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Projects every column of `x` (`D × T`) onto the basis, giving
    /// `(D - 1) × T`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.nrows() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: x.nrows(),
            });
        }
        Ok(&self.rows * x)
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. The input is symmetrized as `(R + Rᴴ)/2` first.
pub fn hermitian_eig(r: &CMatrix) -> Result<HermitianEig> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: r.ncols(),
        });
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut a = (r + r.adjoint()).unscale(2.0);
    for i in 0..n {
        a[(i, i)].im = 0.0;
    }
    let mut v = CMatrix::identity(n, n);
    let threshold = JACOBI_TOL * a.norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off_max = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off_max = off_max.max(a[(p, q)].norm());
            }
        }
        if off_max <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep column order
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |row, k| v[(row, order[k])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// One Jacobi rotation annihilating `a[(p, q)]`. The unitary is a phase
/// change on column `q` (making the pivot real) followed by a real plane
/// rotation.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let phase = apq / mag;
    let theta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // U = [[c, s], [-s·conj(phase), c·conj(phase)]] acting on (p, q)
    let upp = Complex64::new(c, 0.0);
    let upq = Complex64::new(s, 0.0);
    let uqp = -phase.conj() * s;
    let uqq = phase.conj() * c;

    let n = a.nrows();
    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = akp * upp + akq * uqp;
        a[(k, q)] = akp * upq + akq * uqq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
        a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;

    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = vkp * upp + vkq * uqp;
        v[(k, q)] = vkp * upq + vkq * uqq;
    }
}

/// Eigenvectors of the `D - signal_dim` smallest eigenvalues.
pub fn noise_subspace(eig: &HermitianEig, signal_dim: usize) -> Result<NoiseSubspace> {
    let d = eig.dim();
    if signal_dim >= d {
        return Err(Error::Config(format!(
            "signal dimension {signal_dim} leaves no noise space in dimension {d}"
        )));
    }
    Ok(NoiseSubspace {
        basis: eig.eigenvectors.columns(0, d - signal_dim).into_owned(),
    })
}

/// Orthonormal basis of `{x : aᴴx = 0}`.
///
/// `a` is rotated so its first entry is real and non-negative, then a
/// Householder reflector `H` with `H a = -‖a‖ e₁` completes it to a unitary;
/// rows `1..D` of `H` are the basis. The construction is deterministic in
/// `a`.
pub fn null_space_of_vector(a: &CVector) -> Result<NullSpaceBasis> {
    let d = a.len();
    if d < 2 {
        return Err(Error::Degenerate(format!(
            "null space needs dimension >= 2, got {d}"
        )));
    }
    let norm = a.norm();
    if !norm.is_finite() {
        return Err(Error::NonFinite);
    }
    if norm < 1e-300 {
        return Err(Error::Degenerate("null space of the zero vector".into()));
    }
    let a0 = a[0];
    let rot = if a0.norm() > 0.0 {
        a0.conj() / a0.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut v = a.map(|z| z * rot / norm);
    v[0] += 1.0;
    let vnorm2 = v.norm_squared();
    // H = I - 2 v vᴴ / (vᴴ v); keep rows 1..d
    let rows = CMatrix::from_fn(d - 1, d, |i, j| {
        let i = i + 1;
        let delta = if i == j { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) - v[i] * v[j].conj() * (2.0 / vnorm2)
    });
    Ok(NullSpaceBasis { rows })
}

/// Projects `x` onto the null space: `B·X`.
pub fn project(basis: &NullSpaceBasis, x: &CMatrix) -> Result<CMatrix> {
    basis.apply(x)
}
