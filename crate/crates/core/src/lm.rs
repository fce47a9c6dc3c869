//! Modified Levenberg-Marquardt solver for the SINR-target equations.
//!
//! At a fixed target `γ`, a unit-norm whitened direction `w` achieves SINR
//! exactly `γ` for every user iff `f_j(w) = w^H (F_j - γ G_j) w = 0` for all
//! `j`. The solver works in the real isomorphism `ŵ = [Re w; Im w]`, where
//! `f_j(ŵ) = ŵ^T D̂_j ŵ` and the Jacobian rows are `(B_j ŵ)^T` with
//! `B_j = D̂_j + D̂_j^T`.
//!
//! Each iteration computes the damped step
//! `δ = -(J^T J + μ I)^{-1} J^T f` with `μ = ‖f‖`, accepts it outright when it
//! shrinks `‖f‖` by the factor `ν`, and otherwise falls back to an Armijo
//! backtracking search on `Φ = ½‖f‖²`. Iterates are kept on the unit sphere:
//! `f` is homogeneous of degree two, so the origin would otherwise be a
//! trivial zero of the least-squares problem.

use serde::{Deserialize, Serialize};

use crate::bound::WhitenedProblem;
use crate::error::{Error, Result};
use crate::{CMatrix, CVector, RMatrix, RVector, C64};

/// Lower bound on the damping parameter.
pub const MU_FLOOR: f64 = 1e-14;

/// Relative damping floor used by [`damped_step`].
pub const MU_FLOOR_REL: f64 = 1e-12;

pub fn realify_vector(y: &CVector) -> RVector {
    let n = y.len();
    RVector::from_fn(2 * n, |i, _| if i < n { y[i].re } else { y[i - n].im })
}

pub fn complexify_vector(x: &RVector) -> CVector {
    assert!(x.len().is_multiple_of(2), "real vector of odd length {} has no complex counterpart", x.len());
    let n = x.len() / 2;
    CVector::from_fn(n, |i, _| C64::new(x[i], x[i + n]))
}

/// `[[Re Y, -Im Y], [Im Y, Re Y]]`.
pub fn realify_matrix(y: &CMatrix) -> RMatrix {
    let (r, c) = y.shape();
    let mut out = RMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = y[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// The realified residual system at one SINR target.
#[derive(Debug, Clone)]
pub struct RealifiedSystem {
    pub gamma: f64,
    /// `D̂_j(γ)`.
    pub dhat: Vec<RMatrix>,
    /// `B_j = D̂_j + D̂_j^T`.
    pub bsym: Vec<RMatrix>,
}

impl RealifiedSystem {
    /// Builds `D_j(γ) = F_j - γ G_j` from a whitened problem.
    pub fn new(wp: &WhitenedProblem, gamma: f64) -> Self {
        let g = C64::new(gamma, 0.0);
        let d: Vec<CMatrix> = wp
            .numerator
            .iter()
            .zip(&wp.denominator)
            .map(|(f, den)| f - den * g)
            .collect();
        Self::from_complex(gamma, &d)
    }

    pub fn from_complex(gamma: f64, d: &[CMatrix]) -> Self {
        Self::from_real(gamma, d.iter().map(realify_matrix).collect())
    }

    pub fn from_real(gamma: f64, dhat: Vec<RMatrix>) -> Self {
        let bsym = dhat.iter().map(|d| d + d.transpose()).collect();
        Self { gamma, dhat, bsym }
    }

    pub fn equations(&self) -> usize {
        self.dhat.len()
    }

    /// Length of `ŵ`.
    pub fn dim(&self) -> usize {
        self.dhat.first().map_or(0, |d| d.ncols())
    }
}

pub fn residual(w_hat: &RVector, sys: &RealifiedSystem) -> RVector {
    RVector::from_iterator(sys.equations(), sys.dhat.iter().map(|d| w_hat.dot(&(d * w_hat))))
}

pub fn jacobian(w_hat: &RVector, sys: &RealifiedSystem) -> RMatrix {
    let mut jac = RMatrix::zeros(sys.equations(), w_hat.len());
    for (j, b) in sys.bsym.iter().enumerate() {
        jac.set_row(j, &(b * w_hat).transpose());
    }
    jac
}

/// Lipschitz constant of the Jacobian, `sqrt(Σ_i ‖B_i‖_F²)`.
pub fn lipschitz_k(sys: &RealifiedSystem) -> f64 {
    sys.bsym.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

/// `-(J^T J + μ I)^{-1} J^T f` via a Cholesky factorization.
///
/// `μ` is raised to a roundoff floor relative to `‖J^T J‖` so that the
/// rank-deficient normal matrix stays numerically positive definite.
pub fn damped_step(jac: &RMatrix, f: &RVector, mu: f64) -> Result<RVector> {
    let n = jac.ncols();
    let mut normal = jac.tr_mul(jac);
    let mu = mu.max(MU_FLOOR_REL * normal.diagonal().max());
    for i in 0..n {
        normal[(i, i)] += mu;
    }
    let rhs = -jac.tr_mul(f);
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("damped normal matrix not positive definite (mu = {mu:e})")))?;
    Ok(chol.solve(&rhs))
}

/// Levenberg-Marquardt step at `ŵ` with damping `mu`.
pub fn lm_step(w_hat: &RVector, sys: &RealifiedSystem, mu: f64) -> Result<RVector> {
    damped_step(&jacobian(w_hat, sys), &residual(w_hat, sys), mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmijoParams {
    pub alpha0: f64,
    pub beta: f64,
    pub c1: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self { alpha0: 0.25, beta: 0.5, c1: 1e-4, max_backtracks: 30 }
    }
}

/// Backtracking on a one-dimensional merit `α ↦ φ(α)`.
///
/// Returns the first `α = α0·β^m` with `φ(α) ≤ φ0 + c1·α·slope`, and the
/// number of reductions `m`. If no trial passes, returns `(0, max_backtracks)`.
pub fn armijo_backtrack(phi: impl Fn(f64) -> f64, phi0: f64, slope: f64, params: &ArmijoParams) -> (f64, usize) {
    let mut alpha = params.alpha0;
    for m in 0..=params.max_backtracks {
        if phi(alpha) <= phi0 + params.c1 * alpha * slope {
            return (alpha, m);
        }
        alpha *= params.beta;
    }
    (0.0, params.max_backtracks)
}

fn merit(w_hat: &RVector, sys: &RealifiedSystem) -> f64 {
    0.5 * residual(w_hat, sys).norm_squared()
}

/// Armijo search for `Φ(ŵ + αδ)` along `delta`.
pub fn armijo_search(w_hat: &RVector, delta: &RVector, sys: &RealifiedSystem, params: &ArmijoParams) -> (f64, usize) {
    let f = residual(w_hat, sys);
    let slope = jacobian(w_hat, sys).tr_mul(&f).dot(delta);
    let phi0 = 0.5 * f.norm_squared();
    armijo_backtrack(|a| merit(&(w_hat + delta * a), sys), phi0, slope, params)
}

/// How the step interacts with the unit-norm constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepGeometry {
    /// Damped step from the tangent-projected Jacobian `J (I - ŵŵ^T)`;
    /// acceptance and line search are judged at the renormalized point.
    Tangent,
    /// Plain damped step in `R^{2N_R²}`; acceptance and line search are judged
    /// before renormalization.
    Ambient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    /// Full-step acceptance factor `ν`.
    pub nu: f64,
    /// Stop once `‖J^T f‖` drops below this.
    pub eps_lm: f64,
    pub max_iterations: usize,
    pub armijo: ArmijoParams,
    pub geometry: StepGeometry,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            nu: 0.9,
            eps_lm: 1e-7,
            max_iterations: 50,
            armijo: ArmijoParams::default(),
            geometry: StepGeometry::Tangent,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        let checks = [
            (self.nu > 0.0 && self.nu < 1.0, "nu must lie in (0, 1)"),
            (self.eps_lm > 0.0, "eps_lm must be positive"),
            (a.alpha0 > 0.0, "alpha0 must be positive"),
            (a.beta > 0.0 && a.beta < 1.0, "beta must lie in (0, 1)"),
            (a.c1 > 0.0 && a.c1 < 1.0, "c1 must lie in (0, 1)"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidParameter(msg.into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Full,
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// `‖f‖` at the accepted (renormalized) iterate.
    pub res_norm: f64,
    pub step: StepKind,
    pub alpha: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    IterationLimit,
    /// The full step was rejected and the line search found no decrease.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LmState {
    pub w_hat: RVector,
    /// Accepted iterations.
    pub k: usize,
    pub residual: RVector,
    pub res_norm: f64,
    /// Damping used for the last computed step.
    pub mu: f64,
    /// `‖f‖` at the starting point.
    pub initial_res_norm: f64,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
}

impl LmState {
    pub fn stalled(&self) -> bool {
        self.termination == Termination::Stalled
    }

    /// Stalled without accepting a single step.
    pub fn made_no_progress(&self) -> bool {
        self.stalled() && self.k == 0
    }

    pub fn total_backtracks(&self) -> usize {
        self.history.iter().map(|h| h.backtracks).sum()
    }

    /// Armijo trial evaluations across all accepted iterations; full steps
    /// contribute none.
    pub fn line_search_evals(&self) -> usize {
        self.history
            .iter()
            .filter(|h| h.step == StepKind::LineSearch)
            .map(|h| h.backtracks + 1)
            .sum()
    }
}

fn normalized(x: RVector) -> Result<RVector> {
    let n = x.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Numerical(format!("iterate has norm {n}, cannot project to the unit sphere")));
    }
    Ok(x / n)
}

/// Runs the modified Levenberg-Marquardt iteration on `sys` from `w_hat0`.
pub fn solve_system(sys: &RealifiedSystem, w_hat0: &RVector, cfg: &LmConfig) -> Result<LmState> {
    cfg.validate()?;
    if w_hat0.len() != sys.dim() {
        return Err(Error::Dimension(format!(
            "start vector has length {} but the system has dimension {}",
            w_hat0.len(),
            sys.dim()
        )));
    }
    let mut w = normalized(w_hat0.clone())?;
    let mut f = residual(&w, sys);
    let initial_res_norm = f.norm();
    let mut history = Vec::new();
    let mut mu = initial_res_norm.max(MU_FLOOR);
    let mut k = 0;

    let termination = loop {
        let jac = jacobian(&w, sys);
        let grad = jac.tr_mul(&f);
        if grad.norm() < cfg.eps_lm {
            break Termination::GradientTolerance;
        }
        if k >= cfg.max_iterations {
            break Termination::IterationLimit;
        }
        let res_norm = f.norm();
        mu = res_norm.max(MU_FLOOR);
        let phi0 = 0.5 * res_norm * res_norm;

        let (delta, candidate): (RVector, Box<dyn Fn(f64) -> Result<RVector>>) = match cfg.geometry {
            StepGeometry::Tangent => {
                // J ŵ = 2f on the sphere, so J (I - ŵŵ^T) = J - 2 f ŵ^T.
                let projected = &jac - (&f * 2.0) * w.transpose();
                let delta = damped_step(&projected, &f, mu)?;
                let (w0, d0) = (w.clone(), delta.clone());
                (delta, Box::new(move |a| normalized(&w0 + &d0 * a)))
            }
            StepGeometry::Ambient => {
                let delta = damped_step(&jac, &f, mu)?;
                let (w0, d0) = (w.clone(), delta.clone());
                (delta, Box::new(move |a| Ok(&w0 + &d0 * a)))
            }
        };

        let full = candidate(1.0)?;
        let (step, alpha, backtracks) = if residual(&full, sys).norm() <= cfg.nu * res_norm {
            (StepKind::Full, 1.0, 0)
        } else {
            let slope = grad.dot(&delta);
            let (alpha, backtracks) = armijo_backtrack(
                |a| candidate(a).map_or(f64::INFINITY, |x| merit(&x, sys)),
                phi0,
                slope,
                &cfg.armijo,
            );
            if alpha == 0.0 {
                break Termination::Stalled;
            }
            (StepKind::LineSearch, alpha, backtracks)
        };

        w = normalized(candidate(alpha)?)?;
        f = residual(&w, sys);
        k += 1;
        history.push(IterationRecord { res_norm: f.norm(), step, alpha, backtracks });
    };

    let res_norm = f.norm();
    Ok(LmState { w_hat: w, k, residual: f, res_norm, mu, initial_res_norm, history, termination })
}

/// Solves the target equations at `gamma` and returns the complex unit
/// direction together with the solver state.
pub fn solve_at_gamma(wp: &WhitenedProblem, gamma: f64, w_hat0: &RVector, cfg: &LmConfig) -> Result<(CVector, LmState)> {
    let sys = RealifiedSystem::new(wp, gamma);
    let state = solve_system(&sys, w_hat0, cfg)?;
    Ok((complexify_vector(&state.w_hat), state))
}

/// Maps a unit whitened direction back to a full-power precoder,
/// `ω = sqrt(P) Z^{-1/2} w`.
pub fn finalize_precoder(w: &CVector, wp: &WhitenedProblem) -> CVector {
    &wp.z_inv_sqrt * w * C64::new(wp.power.sqrt(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::{upper_bound, whiten};
    use crate::channel::{channels_from_real, generate_channels, iid_complex_gaussian, SystemConfig};
    use crate::sinr::{build_quadratic_problem, QuadraticProblem};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let a = iid_complex_gaussian(rng, n, n);
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> RVector {
        let v = RVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        v.normalize()
    }

    fn scalar_wp() -> WhitenedProblem {
        let ch = channels_from_real(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let cfg = SystemConfig { pairs: 1, relay_antennas: 1, sigma2: 1.0, sigma_r2: 1.0, power: 1.0, ..Default::default() };
        whiten(&build_quadratic_problem(&ch, &cfg).unwrap()).unwrap()
    }

    fn desk_problem(seed: u64) -> (QuadraticProblem, WhitenedProblem) {
        let cfg = SystemConfig { pairs: 2, relay_antennas: 4, seed, ..Default::default() };
        let qp = build_quadratic_problem(&generate_channels(&cfg).unwrap(), &cfg).unwrap();
        let wp = whiten(&qp).unwrap();
        (qp, wp)
    }

    #[test]
    fn realify_examples() {
        let v = realify_vector(&CVector::from_vec(vec![C64::new(1.0, 2.0)]));
        assert_eq!(v.as_slice(), &[1.0, 2.0]);
        let v = realify_vector(&CVector::from_vec(vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)]));
        assert_eq!(v.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        let m = realify_matrix(&CMatrix::from_element(1, 1, C64::new(0.0, 1.0)));
        assert_eq!(m, RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let real = RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m = realify_matrix(&real.map(|x| C64::new(x, 0.0)));
        assert_eq!(m.view((0, 0), (2, 2)), real.view((0, 0), (2, 2)));
        assert_eq!(m.view((2, 2), (2, 2)), real.view((0, 0), (2, 2)));
        assert_eq!(m.view((0, 2), (2, 2)).norm(), 0.0);
    }

    #[test]
    fn realified_quadratic_form_matches_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let d = random_hermitian(&mut rng, 5);
            let w = iid_complex_gaussian(&mut rng, 5, 1).column(0).into_owned();
            let complex = w.dotc(&(&d * &w)).re;
            let wh = realify_vector(&w);
            let real = wh.dot(&(realify_matrix(&d) * &wh));
            assert!((complex - real).abs() <= 1e-12 * complex.abs().max(1.0));
            assert_eq!(complexify_vector(&wh), w);
        }
    }

    #[test]
    fn residual_examples() {
        let wp = scalar_wp();
        let sys = RealifiedSystem::new(&wp, 0.25);
        let f = residual(&RVector::from_vec(vec![1.0, 0.0]), &sys);
        assert!(f.norm() < 1e-15);

        let (_, wp) = desk_problem(1);
        let sys = RealifiedSystem::new(&wp, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_unit(&mut rng, sys.dim());
        assert!(residual(&w, &sys).iter().all(|&x| x >= -1e-15));

        let zero = RealifiedSystem::from_real(1.0, vec![RMatrix::zeros(4, 4); 3]);
        assert_eq!(residual(&w.rows(0, 4).into_owned(), &zero).norm(), 0.0);
    }

    #[test]
    fn jacobian_examples() {
        let (_, wp) = desk_problem(2);
        let sys = RealifiedSystem::new(&wp, 0.1);
        let n = sys.dim();
        assert_eq!(jacobian(&RVector::zeros(n), &sys).norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_unit(&mut rng, n);
        let jac = jacobian(&w, &sys);
        for (j, d) in sys.dhat.iter().enumerate() {
            let expected = (d * &w * 2.0).transpose();
            assert!((jac.row(j) - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let (_, wp) = desk_problem(5);
        let sys = RealifiedSystem::new(&wp, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_unit(&mut rng, sys.dim());
        let jac = jacobian(&w, &sys);
        let h = 1e-6;
        let scale = jac.amax();
        for i in 0..sys.dim() {
            let mut e = RVector::zeros(sys.dim());
            e[i] = h;
            let fd = (residual(&(&w + &e), &sys) - residual(&(&w - &e), &sys)) / (2.0 * h);
            for j in 0..sys.equations() {
                assert!((fd[j] - jac[(j, i)]).abs() <= 1e-5 * scale);
            }
        }
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_k(&RealifiedSystem::from_real(0.0, vec![RMatrix::zeros(3, 3)])), 0.0);
        // D̂ = I/2 gives B = I.
        let sys = RealifiedSystem::from_real(0.0, vec![RMatrix::identity(2, 2) * 0.5]);
        assert!((lipschitz_k(&sys) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_inequality_holds_on_samples() {
        let (_, wp) = desk_problem(9);
        let sys = RealifiedSystem::new(&wp, 0.5);
        let k = lipschitz_k(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a = random_unit(&mut rng, sys.dim()) * rng.random_range(0.1..3.0);
            let b = random_unit(&mut rng, sys.dim());
            let lhs = (jacobian(&a, &sys) - jacobian(&b, &sys)).norm();
            assert!(lhs <= k * (&a - &b).norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn step_examples() {
        let wp = scalar_wp();
        let sys = RealifiedSystem::new(&wp, 0.25);
        let d = lm_step(&RVector::from_vec(vec![1.0, 0.0]), &sys, 1e-3).unwrap();
        assert!(d.norm() < 1e-14);

        let zero = RealifiedSystem::from_real(0.0, vec![RMatrix::zeros(2, 2)]);
        assert_eq!(damped_step(&RMatrix::zeros(1, 2), &RVector::from_vec(vec![3.0]), 1.0).unwrap().norm(), 0.0);
        assert_eq!(lm_step(&RVector::from_vec(vec![1.0, 0.0]), &zero, 1.0).unwrap().norm(), 0.0);

        let (_, wp) = desk_problem(4);
        let sys = RealifiedSystem::new(&wp, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random_unit(&mut rng, sys.dim());
        let g = jacobian(&w, &sys).tr_mul(&residual(&w, &sys));
        let d = lm_step(&w, &sys, 1e9).unwrap();
        assert!(d.norm() <= g.norm() / 1e9);
    }

    #[test]
    fn armijo_examples() {
        let p = ArmijoParams::default();
        // Φ(x) = x² at x = 1 along the Newton direction -2.
        let (alpha, m) = armijo_backtrack(|a| (1.0 - 2.0 * a).powi(2), 1.0, -4.0, &p);
        assert_eq!((alpha, m), (0.25, 0));

        let (_, wp) = desk_problem(6);
        let sys = RealifiedSystem::new(&wp, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = random_unit(&mut rng, sys.dim());
        let (alpha, m) = armijo_search(&w, &RVector::zeros(sys.dim()), &sys, &p);
        assert_eq!((alpha, m), (p.alpha0, 0));

        let ascent = jacobian(&w, &sys).tr_mul(&residual(&w, &sys));
        let (alpha, m) = armijo_search(&w, &ascent, &sys, &p);
        assert_eq!((alpha, m), (0.0, p.max_backtracks));
    }

    #[test]
    fn exact_root_returns_immediately() {
        let wp = scalar_wp();
        let (w, state) = solve_at_gamma(&wp, 0.25, &RVector::from_vec(vec![1.0, 0.0]), &LmConfig::default()).unwrap();
        assert_eq!(state.k, 0);
        assert_eq!(state.termination, Termination::GradientTolerance);
        assert!((w[0].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_target_reaches_common_nullspace() {
        // Rank-one F_j in dimension 9 with 4 users: a common nullspace exists.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 9;
        let d: Vec<CMatrix> = (0..4)
            .map(|_| {
                let v = iid_complex_gaussian(&mut rng, n, 1);
                &v * v.adjoint()
            })
            .collect();
        let sys = RealifiedSystem::from_complex(0.0, &d);
        let start = random_unit(&mut rng, 2 * n);
        let cfg = LmConfig { eps_lm: 1e-12, max_iterations: 200, ..Default::default() };
        let state = solve_system(&sys, &start, &cfg).unwrap();
        assert!(state.res_norm <= 1e-6, "final residual {}", state.res_norm);
        assert!((state.w_hat.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merit_is_monotone_on_desk_instance() {
        for seed in 0..5 {
            let (_, wp) = desk_problem(seed);
            let b = upper_bound(&wp).unwrap();
            let (_, state) =
                solve_at_gamma(&wp, 0.8 * b.gamma_bar, &realify_vector(&b.w0), &LmConfig::default()).unwrap();
            let mut prev = state.initial_res_norm;
            for h in &state.history {
                assert!(h.res_norm < prev, "seed {seed}: {} !< {prev}", h.res_norm);
                prev = h.res_norm;
            }
        }
    }

    #[test]
    fn acceptance_rule_is_respected() {
        let cfg = LmConfig::default();
        let (_, wp) = desk_problem(3);
        let b = upper_bound(&wp).unwrap();
        let (_, state) = solve_at_gamma(&wp, 0.9 * b.gamma_bar, &realify_vector(&b.w0), &cfg).unwrap();
        let mut prev = state.initial_res_norm;
        for h in &state.history {
            if h.step == StepKind::Full {
                assert!(h.res_norm <= cfg.nu * prev);
            } else {
                assert!(h.alpha > 0.0);
                assert!(0.5 * h.res_norm.powi(2) <= 0.5 * prev.powi(2));
            }
            prev = h.res_norm;
        }
    }

    #[test]
    fn local_convergence_from_near_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let n = 4;
        let root = iid_complex_gaussian(&mut rng, n, 1).column(0).normalize();
        let d: Vec<CMatrix> = (0..4)
            .map(|_| {
                let h = random_hermitian(&mut rng, n);
                let v = root.dotc(&(&h * &root)).re;
                h - &root * root.adjoint() * C64::new(v, 0.0)
            })
            .collect();
        let sys = RealifiedSystem::from_complex(0.0, &d);
        let root_hat = realify_vector(&root);
        assert!(residual(&root_hat, &sys).norm() < 1e-14);
        let start = &root_hat + random_unit(&mut rng, 2 * n) * 1e-3;
        let cfg = LmConfig { eps_lm: 1e-14, ..Default::default() };
        let state = solve_system(&sys, &start, &cfg).unwrap();
        let hit = state.history.iter().position(|h| h.res_norm <= 1e-10).map(|i| i + 1);
        assert!(matches!(hit, Some(it) if it <= 8), "history: {:?}", state.history);
    }

    #[test]
    fn finalize_examples() {
        let wp = WhitenedProblem {
            numerator: vec![],
            denominator: vec![],
            z_inv_sqrt: CMatrix::identity(3, 3),
            power: 4.0,
        };
        let mut e1 = CVector::zeros(3);
        e1[0] = C64::new(1.0, 0.0);
        let omega = finalize_precoder(&e1, &wp);
        assert!((omega[0].re - 2.0).abs() < 1e-15 && omega.rows(1, 2).norm() == 0.0);

        let wp = scalar_wp();
        let omega = finalize_precoder(&CVector::from_element(1, C64::new(1.0, 0.0)), &wp);
        assert!((omega[0].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);

        let (qp, wp) = desk_problem(8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = iid_complex_gaussian(&mut rng, qp.dim(), 1).column(0).normalize();
        let omega = finalize_precoder(&w, &wp);
        assert!((qp.power_of(&omega) - qp.power).abs() <= 1e-9 * qp.power);
    }

    #[test]
    fn config_validation() {
        assert!(LmConfig::default().validate().is_ok());
        assert!(LmConfig { nu: 1.0, ..Default::default() }.validate().is_err());
        assert!(LmConfig { eps_lm: 0.0, ..Default::default() }.validate().is_err());
        let bad = ArmijoParams { beta: 1.0, ..Default::default() };
        assert!(LmConfig { armijo: bad, ..Default::default() }.validate().is_err());
    }
}
