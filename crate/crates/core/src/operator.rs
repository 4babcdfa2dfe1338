//! Operators and vectors of a finite-dimensional primal/dual pair.
//!
//! Both `E` and its dual `E*` are stored as coordinate arrays in the standard
//! basis. What distinguishes them is the type: [`PrimalVector`] and
//! [`DualVector`] cannot be mixed up, and every [`SpdOperator`] carries a
//! [`Role`] saying which way it maps. Hessians and their approximations map
//! primal to dual; their inverses map dual to primal.
//!
//! Inverses are applied through the Cholesky factor cached at construction.
//! An explicit inverse matrix is only formed by [`SpdOperator::inverse`].

use std::ops::{Add, Neg, Sub};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative symmetry tolerance for operator construction.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest admissible Cholesky pivot, relative to the Frobenius norm.
pub const PIVOT_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// `E -> E*`: Hessians, their approximations, the reference operator.
    PrimalToDual,
    /// `E* -> E`: inverse Hessians.
    DualToPrimal,
}

impl Role {
    pub fn flipped(self) -> Role {
        match self {
            Role::PrimalToDual => Role::DualToPrimal,
            Role::DualToPrimal => Role::PrimalToDual,
        }
    }
}

macro_rules! coordinate_vector {
    ($name:ident, $what:literal) => {
        #[doc = concat!("Coordinates of ", $what, ".")]
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(DVector<f64>);

        impl $name {
            pub fn new(coords: Vec<f64>) -> Result<Self> {
                Self::from_vector(DVector::from_vec(coords))
            }

            pub fn from_vector(v: DVector<f64>) -> Result<Self> {
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite(stringify!($name)));
                }
                Ok(Self(v))
            }

            /// Wraps without the finiteness check. Used for iterates, where a
            /// non-finite value is reported as divergence by the caller.
            pub(crate) fn from_vector_unchecked(v: DVector<f64>) -> Self {
                Self(v)
            }

            pub fn zeros(n: usize) -> Self {
                Self(DVector::zeros(n))
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn coords(&self) -> &[f64] {
                self.0.as_slice()
            }

            pub fn as_vector(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn into_vector(self) -> DVector<f64> {
                self.0
            }

            pub fn scaled(&self, c: f64) -> Self {
                Self(&self.0 * c)
            }

            /// Euclidean norm of the coordinates.
            pub fn coord_norm(&self) -> f64 {
                self.0.norm()
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|c| c.is_finite())
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_seq(self.0.iter())
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let coords = Vec::<f64>::deserialize(d)?;
                Self::new(coords).map_err(serde::de::Error::custom)
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: &$name) -> $name {
                $name(&self.0 + &rhs.0)
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: &$name) -> $name {
                $name(&self.0 - &rhs.0)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-&self.0)
            }
        }
    };
}

coordinate_vector!(PrimalVector, "a point or direction in the primal space `E`");
coordinate_vector!(DualVector, "a linear functional in the dual space `E*`");

/// The bracket `[min, max]` of generalized eigenvalues of one operator
/// relative to another, i.e. `min A <= G <= max A` in the Loewner order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRange {
    pub min_rel: f64,
    pub max_rel: f64,
}

impl EigenRange {
    pub fn new(min_rel: f64, max_rel: f64) -> Result<Self> {
        if !(min_rel > 0.0 && max_rel >= min_rel && max_rel.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eigen range requires 0 < min <= max, got [{min_rel}, {max_rel}]"
            )));
        }
        Ok(Self { min_rel, max_rel })
    }

    /// Relative slack of `lower * A <= G <= upper * A`. Nonnegative iff the
    /// sandwich holds; `-t` means one side is violated by a factor `1 + t`.
    pub fn sandwich_slack(&self, lower: f64, upper: f64) -> f64 {
        let low = self.min_rel / lower - 1.0;
        let high = 1.0 - self.max_rel / upper;
        low.min(high)
    }

    /// The smallest bracket containing both this range and `1`.
    pub fn including_one(&self) -> EigenRange {
        EigenRange {
            min_rel: self.min_rel.min(1.0),
            max_rel: self.max_rel.max(1.0),
        }
    }

    pub fn contains(&self, other: &EigenRange, tol: f64) -> bool {
        other.min_rel >= self.min_rel - tol && other.max_rel <= self.max_rel + tol
    }
}

/// A symmetric positive definite operator together with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct SpdOperator {
    matrix: DMatrix<f64>,
    role: Role,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for SpdOperator {
    fn eq(&self, other: &Self) -> bool {
        self.role == other.role && self.matrix == other.matrix
    }
}

impl SpdOperator {
    /// Validates symmetry and positive definiteness of `matrix`.
    pub fn new(matrix: DMatrix<f64>, role: Role) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::EmptyDimension);
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SpdOperator"));
        }
        let scale = matrix.amax();
        let mut asymmetry = 0.0_f64;
        for i in 0..rows {
            for j in (i + 1)..rows {
                asymmetry = asymmetry.max((matrix[(i, j)] - matrix[(j, i)]).abs());
            }
        }
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry, scale });
        }
        let norm = matrix.norm();
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
        let min_pivot = chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d * d)
            .fold(f64::INFINITY, f64::min);
        if min_pivot <= PIVOT_TOL * norm {
            return Err(Error::NotSpd(format!(
                "pivot {min_pivot:e} below threshold {:e}",
                PIVOT_TOL * norm
            )));
        }
        Ok(Self { matrix, role, chol })
    }

    /// Replaces `matrix` by `(M + M^T) / 2` before validation.
    pub fn symmetrized(matrix: DMatrix<f64>, role: Role) -> Result<Self> {
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Self::new(sym, role)
    }

    pub fn identity(n: usize, role: Role) -> Result<Self> {
        Self::new(DMatrix::identity(n, n), role)
    }

    pub fn from_diagonal(diag: &[f64], role: Role) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)), role)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Natural log of the determinant of the matrix representation.
    pub fn logdet(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// The inverse operator, with the opposite role.
    pub fn inverse(&self) -> Result<SpdOperator> {
        SpdOperator::symmetrized(self.chol.inverse(), self.role.flipped())
    }

    pub fn scaled(&self, c: f64) -> Result<SpdOperator> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {c}")));
        }
        SpdOperator::new(&self.matrix * c, self.role)
    }

    /// Largest eigenvalue of the matrix representation.
    pub fn spectral_norm(&self) -> f64 {
        self.matrix
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn solve_raw(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub(crate) fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    pub(crate) fn apply_raw(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    pub(crate) fn quad_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.matrix * v))
    }

    pub(crate) fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    fn expect_role(&self, role: Role) -> Result<()> {
        if self.role != role {
            return Err(Error::RoleMismatch {
                expected: role,
                got: self.role,
            });
        }
        Ok(())
    }

    /// `A h` for a primal-to-dual operator.
    pub fn apply_primal(&self, h: &PrimalVector) -> Result<DualVector> {
        self.expect_role(Role::PrimalToDual)?;
        check_dim(self.dim(), h.dim())?;
        Ok(DualVector(self.apply_raw(h.as_vector())))
    }

    /// `H s` for a dual-to-primal operator.
    pub fn apply_dual(&self, s: &DualVector) -> Result<PrimalVector> {
        self.expect_role(Role::DualToPrimal)?;
        check_dim(self.dim(), s.dim())?;
        Ok(PrimalVector(self.apply_raw(s.as_vector())))
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimMismatch { expected, got });
    }
    Ok(())
}

fn check_same(a: &SpdOperator, b: &SpdOperator) -> Result<()> {
    check_dim(a.dim(), b.dim())?;
    if a.role != b.role {
        return Err(Error::RoleMismatch {
            expected: a.role,
            got: b.role,
        });
    }
    Ok(())
}

fn check_pairing(h: &SpdOperator, a: &SpdOperator) -> Result<()> {
    h.expect_role(Role::DualToPrimal)?;
    a.expect_role(Role::PrimalToDual)?;
    check_dim(h.dim(), a.dim())
}

/// `<s, x>`.
pub fn pair(s: &DualVector, x: &PrimalVector) -> Result<f64> {
    check_dim(s.dim(), x.dim())?;
    Ok(s.0.dot(&x.0))
}

/// `<H, A> = Tr(HA)`.
pub fn rel_trace(h: &SpdOperator, a: &SpdOperator) -> Result<f64> {
    check_pairing(h, a)?;
    // Tr(HA) = sum_ij H_ij A_ji, and A is symmetric.
    Ok(h.matrix.component_mul(&a.matrix).sum())
}

/// `ln Det(HA) = ln det A - ln det H^{-1}`.
pub fn rel_logdet(h: &SpdOperator, a: &SpdOperator) -> Result<f64> {
    check_pairing(h, a)?;
    Ok(a.logdet() + h.logdet())
}

/// `Det(H, A) = Det(HA)`, evaluated through log-determinants.
pub fn rel_det(h: &SpdOperator, a: &SpdOperator) -> Result<f64> {
    rel_logdet(h, a).map(f64::exp)
}

/// `||h||_A = <Ah, h>^{1/2}`.
pub fn norm_primal(a: &SpdOperator, h: &PrimalVector) -> Result<f64> {
    a.expect_role(Role::PrimalToDual)?;
    check_dim(a.dim(), h.dim())?;
    Ok(a.quad_form(&h.0).max(0.0).sqrt())
}

/// `||s||*_A = <s, A^{-1} s>^{1/2}`, via a factorization solve.
pub fn norm_dual(a: &SpdOperator, s: &DualVector) -> Result<f64> {
    a.expect_role(Role::PrimalToDual)?;
    check_dim(a.dim(), s.dim())?;
    Ok(s.0.dot(&a.solve_raw(&s.0)).max(0.0).sqrt())
}

/// Solves `A z = s`.
pub fn spd_solve(a: &SpdOperator, s: &DualVector) -> Result<PrimalVector> {
    a.expect_role(Role::PrimalToDual)?;
    check_dim(a.dim(), s.dim())?;
    Ok(PrimalVector(a.solve_raw(&s.0)))
}

/// Eigenvalues of `G` relative to `A`, ascending, via `L^{-1} G L^{-T}` with
/// `A = L L^T`.
pub fn rel_eigenvalues(g: &SpdOperator, a: &SpdOperator) -> Result<Vec<f64>> {
    check_same(g, a)?;
    let l = a.chol.l();
    let left = l
        .solve_lower_triangular(&g.matrix)
        .ok_or_else(|| Error::NotSpd("singular factor".into()))?;
    let reduced = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::NotSpd("singular factor".into()))?;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let mut eig: Vec<f64> = reduced.symmetric_eigenvalues().iter().cloned().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// The tight bracket `min A <= G <= max A`.
pub fn rel_eigen_range(g: &SpdOperator, a: &SpdOperator) -> Result<EigenRange> {
    let eig = rel_eigenvalues(g, a)?;
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    if lo <= 0.0 {
        return Err(Error::NotSpd(format!("relative eigenvalue {lo:e} is not positive")));
    }
    EigenRange::new(lo, hi)
}

/// Smallest eigenvalue of `upper - lower`, divided by the spectral norm of
/// `upper`. Works on arbitrary symmetric matrices.
pub fn loewner_slack_matrices(lower: &DMatrix<f64>, upper: &DMatrix<f64>) -> f64 {
    let diff = upper - lower;
    let diff = (&diff + diff.transpose()) * 0.5;
    let min = diff
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let scale = upper
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        min / scale
    } else {
        min
    }
}

/// Relative slack of `A1 <= A2`.
pub fn loewner_slack(a1: &SpdOperator, a2: &SpdOperator) -> Result<f64> {
    check_same(a1, a2)?;
    Ok(loewner_slack_matrices(&a1.matrix, &a2.matrix))
}

/// `A1 <= A2` up to `tol * ||A2||`.
pub fn loewner_leq(a1: &SpdOperator, a2: &SpdOperator, tol: f64) -> Result<bool> {
    Ok(loewner_slack(a1, a2)? >= -tol)
}
