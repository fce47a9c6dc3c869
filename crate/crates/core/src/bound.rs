//! Closed-form minimax upper bound on the balanced SINR.
//!
//! Substituting `sqrt(p)·w = Z^{1/2} ω` with `‖w‖ = 1` turns the power
//! constraint into the unit sphere, and each user's best-case SINR becomes a
//! generalized Rayleigh quotient `w^H F_j w / w^H G_j w`. Swapping max and min
//! gives `γ̄ = min_j λ_max(G_j^{-1} F_j)`, which dominates every achievable
//! balanced SINR.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, hermitian_inv_sqrt, spectral_map};
use crate::sinr::QuadraticProblem;
use crate::{CMatrix, CVector, C64};

/// Eigenvalue floor for `Z^{-1/2}`, relative to `λ_max(Z)`.
pub const Z_FLOOR_REL: f64 = 1e-12;
/// Largest condition number of `Z` accepted by [`whiten`].
pub const Z_MAX_CONDITION: f64 = 1e14;

/// Problem after power-constraint whitening, always at full power `p = P`.
#[derive(Debug, Clone)]
pub struct WhitenedProblem {
    /// `F_j = Z^{-1/2} Q_j Z^{-1/2}`.
    pub numerator: Vec<CMatrix>,
    /// `G_j = Z^{-1/2} P_j Z^{-1/2} + (σ²/P) I`.
    pub denominator: Vec<CMatrix>,
    pub z_inv_sqrt: CMatrix,
    pub power: f64,
}

impl WhitenedProblem {
    pub fn users(&self) -> usize {
        self.numerator.len()
    }

    pub fn dim(&self) -> usize {
        self.z_inv_sqrt.nrows()
    }

    /// Per-user SINR of a unit-norm whitened direction `w`.
    pub fn sinr(&self, w: &CVector) -> Vec<f64> {
        self.numerator
            .iter()
            .zip(&self.denominator)
            .map(|(f, g)| rayleigh(f, g, w))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BoundResult {
    pub gamma_bar: f64,
    /// User attaining the minimum; lowest index on ties.
    pub j_star: usize,
    /// Unit-norm maximizer of the binding user's Rayleigh quotient.
    pub w0: CVector,
    pub per_user_max: Vec<f64>,
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn rayleigh(f: &CMatrix, g: &CMatrix, w: &CVector) -> f64 {
    w.dotc(&(f * w)).re / w.dotc(&(g * w)).re
}

pub fn whiten(qp: &QuadraticProblem) -> Result<WhitenedProblem> {
    let z_inv_sqrt = hermitian_inv_sqrt(&qp.power_form, Z_FLOOR_REL, Z_MAX_CONDITION)?;
    let n = qp.dim();
    let loading = CMatrix::identity(n, n) * C64::new(qp.sigma2 / qp.power, 0.0);
    let numerator = qp.signal.iter().map(|q| hermitize(&z_inv_sqrt * q * &z_inv_sqrt)).collect();
    let denominator = qp
        .interference
        .iter()
        .map(|p| hermitize(&z_inv_sqrt * p * &z_inv_sqrt) + &loading)
        .collect();
    Ok(WhitenedProblem { numerator, denominator, z_inv_sqrt, power: qp.power })
}

/// Largest generalized eigenvalue of the pencil `(F, G)` with `G` positive
/// definite, together with a unit-norm maximizer of `w^H F w / w^H G w`.
///
/// Solved in the symmetric form `G^{-1/2} F G^{-1/2}`.
pub fn max_generalized_eig(f: &CMatrix, g: &CMatrix) -> Result<(f64, CVector)> {
    if f.shape() != g.shape() || !f.is_square() {
        return Err(Error::Dimension(format!("pencil shapes {:?} and {:?}", f.shape(), g.shape())));
    }
    let (gv, gvec) = hermitian_eig(g)?;
    if !(gv[0] > 0.0) {
        return Err(Error::Numerical(format!(
            "denominator matrix is not positive definite (smallest eigenvalue {:e})",
            gv[0]
        )));
    }
    let g_inv_sqrt = spectral_map(&gv, &gvec, |l| 1.0 / l.sqrt());
    let sym = &g_inv_sqrt * f * &g_inv_sqrt;
    let (values, vectors) = hermitian_eig(&sym)?;
    let top = values.len() - 1;
    let lambda = values[top].max(0.0);
    let mut u: CVector = &g_inv_sqrt * vectors.column(top);
    let norm = u.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numerical("generalized eigenvector has zero or non-finite norm".into()));
    }
    u /= C64::new(norm, 0.0);
    Ok((lambda, u))
}

pub fn upper_bound(wp: &WhitenedProblem) -> Result<BoundResult> {
    if wp.users() == 0 {
        return Err(Error::Dimension("problem has no users".into()));
    }
    let mut per_user_max = Vec::with_capacity(wp.users());
    let mut best: Option<(usize, f64, CVector)> = None;
    for (j, (f, g)) in wp.numerator.iter().zip(&wp.denominator).enumerate() {
        let (lambda, u) = max_generalized_eig(f, g)?;
        per_user_max.push(lambda);
        if best.as_ref().is_none_or(|(_, l, _)| lambda < *l) {
            best = Some((j, lambda, u));
        }
    }
    let (j_star, gamma_bar, w0) = best.expect("at least one user");
    Ok(BoundResult { gamma_bar, j_star, w0, per_user_max })
}

/// Whitens and bounds in one call.
pub fn bound_for(qp: &QuadraticProblem) -> Result<(WhitenedProblem, BoundResult)> {
    let wp = whiten(qp)?;
    let bound = upper_bound(&wp)?;
    Ok((wp, bound))
}
