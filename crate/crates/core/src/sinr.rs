//! Quadratic-form representation of the user SINRs and the relay power.
//!
//! With `ω = vec(Ω)` (column stacking), every SINR becomes
//! `ω^H Q_j ω / (ω^H P_j ω + σ²)` and the relay power becomes `ω^H Z ω`
//! with `Z = Y^T ⊗ I`. User `j` (0-based) is pair `i` of group `t` with
//! `j = t·M + i`.

use crate::channel::{ChannelSet, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{quad_form, vec_columns};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    First,
    Second,
}

impl Group {
    pub fn other(self) -> Self {
        match self {
            Group::First => Group::Second,
            Group::Second => Group::First,
        }
    }

    fn offset(self) -> usize {
        match self {
            Group::First => 0,
            Group::Second => 1,
        }
    }
}

/// Bijection between `(group, pair)` and the flat user index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserIndexMap {
    pairs: usize,
}

impl UserIndexMap {
    pub fn new(pairs: usize) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// Number of users, `2M`.
    pub fn len(&self) -> usize {
        2 * self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs == 0
    }

    pub fn index(&self, group: Group, pair: usize) -> usize {
        assert!(pair < self.pairs, "pair {pair} out of range for M={}", self.pairs);
        group.offset() * self.pairs + pair
    }

    pub fn user(&self, j: usize) -> (Group, usize) {
        assert!(j < self.len(), "user {j} out of range for 2M={}", self.len());
        if j < self.pairs {
            (Group::First, j)
        } else {
            (Group::Second, j - self.pairs)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Group, usize)> + '_ {
        (0..self.len()).map(|j| {
            let (g, i) = self.user(j);
            (j, g, i)
        })
    }
}

/// The downlink matrices seen by one group: `A = H_t^T`, `B = H_t̄`, `C = H_t`.
struct GroupLinks {
    a: CMatrix,
    b: CMatrix,
    c: CMatrix,
}

fn links(ch: &ChannelSet, group: Group) -> GroupLinks {
    let own = match group {
        Group::First => ch.h1(),
        Group::Second => ch.h2(),
    };
    let other = match group.other() {
        Group::First => ch.h1(),
        Group::Second => ch.h2(),
    };
    GroupLinks { a: own.transpose(), b: other.clone(), c: own.clone() }
}

/// The vector `q` with `[A Ω B]_{i,j} = q^H vec(Ω)`.
///
/// Entry `k·N_R + l` is `conj(A_{i,l} B_{k,j})`.
pub fn coupling_vector(a: &CMatrix, b: &CMatrix, i: usize, j: usize) -> CVector {
    let n = a.ncols();
    CVector::from_fn(n * n, |p, _| {
        let (k, l) = (p / n, p % n);
        (a[(i, l)] * b[(k, j)]).conj()
    })
}

/// Dense relay-noise form `σ_R² · blockdiag(a^H a, ..., a^H a)` with `a` the
/// `i`-th row of `A`, repeated `N_R` times.
pub fn noise_form(a: &CMatrix, i: usize, sigma_r2: f64) -> CMatrix {
    let n = a.ncols();
    let row = a.row(i);
    let block = row.adjoint() * row * C64::new(sigma_r2, 0.0);
    let mut out = CMatrix::zeros(n * n, n * n);
    for k in 0..n {
        out.view_mut((k * n, k * n), (n, n)).copy_from(&block);
    }
    out
}

/// Everything needed to evaluate SINRs and power as quadratic forms.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    /// Rank-one signal forms `Q_j = q_j q_j^H`.
    pub signal: Vec<CMatrix>,
    /// The vectors `q_j` generating `signal`.
    pub signal_vectors: Vec<CVector>,
    /// Interference-plus-relay-noise forms `P_j`.
    pub interference: Vec<CMatrix>,
    /// Power form `Z = Y^T ⊗ I_{N_R}`.
    pub power_form: CMatrix,
    pub sigma2: f64,
    pub power: f64,
    pub index_map: UserIndexMap,
}

/// Per-user numerator and channel-dependent denominator of an SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrTerms {
    pub signal: f64,
    pub interference: f64,
}

impl QuadraticProblem {
    pub fn users(&self) -> usize {
        self.signal.len()
    }

    /// Dimension of `ω`, i.e. `N_R²`.
    pub fn dim(&self) -> usize {
        self.power_form.nrows()
    }

    pub fn relay_antennas(&self) -> usize {
        (self.dim() as f64).sqrt().round() as usize
    }

    pub fn terms(&self, omega: &CVector) -> Vec<SinrTerms> {
        self.signal
            .iter()
            .zip(&self.interference)
            .map(|(q, p)| SinrTerms { signal: quad_form(q, omega), interference: quad_form(p, omega) })
            .collect()
    }

    /// `ω^H Z ω`.
    pub fn power_of(&self, omega: &CVector) -> f64 {
        quad_form(&self.power_form, omega)
    }

    /// Peak power to downlink noise ratio in dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.power / self.sigma2).log10()
    }
}

pub fn build_quadratic_problem(ch: &ChannelSet, cfg: &SystemConfig) -> Result<QuadraticProblem> {
    ch.check_matches(cfg)?;
    let m = ch.pairs();
    let index_map = UserIndexMap::new(m);

    let mut signal = Vec::with_capacity(2 * m);
    let mut signal_vectors = Vec::with_capacity(2 * m);
    let mut interference = Vec::with_capacity(2 * m);
    for group in [Group::First, Group::Second] {
        let GroupLinks { a, b, c } = links(ch, group);
        for i in 0..m {
            let q = coupling_vector(&a, &b, i, i);
            let mut p = noise_form(&a, i, cfg.sigma_r2);
            for j in (0..m).filter(|&j| j != i) {
                let cross = coupling_vector(&a, &b, i, j);
                let same_side = coupling_vector(&a, &c, i, j);
                p += &cross * cross.adjoint() + &same_side * same_side.adjoint();
            }
            signal.push(&q * q.adjoint());
            signal_vectors.push(q);
            interference.push(p);
        }
    }

    let n = ch.relay_antennas();
    let y_t = ch.relay_covariance(cfg.sigma_r2).transpose();
    let power_form = y_t.kronecker(&CMatrix::identity(n, n));

    Ok(QuadraticProblem {
        signal,
        signal_vectors,
        interference,
        power_form,
        sigma2: cfg.sigma2,
        power: cfg.power,
        index_map,
    })
}

/// Relay transmit power `Tr{Ω Y Ω^H}`.
pub fn relay_power(omega: &CMatrix, ch: &ChannelSet, sigma_r2: f64) -> f64 {
    let y = ch.relay_covariance(sigma_r2);
    (omega * y * omega.adjoint()).trace().re
}

/// SINRs evaluated directly from the precoder matrix, ordered by user index.
///
/// The back-propagated self-interference `[AΩC]_{i,i}` is assumed cancelled.
pub fn sinr_direct(omega: &CMatrix, ch: &ChannelSet, cfg: &SystemConfig) -> Vec<f64> {
    let m = ch.pairs();
    let mut out = Vec::with_capacity(2 * m);
    for group in [Group::First, Group::Second] {
        let GroupLinks { a, b, c } = links(ch, group);
        let a_omega = &a * omega;
        let through = &a_omega * b;
        let same_side = &a_omega * c;
        for i in 0..m {
            let signal = through[(i, i)].norm_sqr();
            let mut denom = cfg.sigma2 + cfg.sigma_r2 * a_omega.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>();
            for j in (0..m).filter(|&j| j != i) {
                denom += through[(i, j)].norm_sqr() + same_side[(i, j)].norm_sqr();
            }
            out.push(signal / denom);
        }
    }
    out
}

/// SINRs `ω^H Q_j ω / (ω^H P_j ω + σ²)`.
pub fn sinr_quadratic(omega: &CVector, qp: &QuadraticProblem) -> Vec<f64> {
    qp.terms(omega).into_iter().map(|t| t.signal / (t.interference + qp.sigma2)).collect()
}

/// Inverse of column-stacking vectorization.
pub fn unvec(omega: &CVector) -> Result<CMatrix> {
    let len = omega.len();
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len || n == 0 {
        return Err(Error::Dimension(format!("vector length {len} is not a positive perfect square")));
    }
    Ok(CMatrix::from_column_slice(n, n, omega.as_slice()))
}

pub fn vec(omega: &CMatrix) -> CVector {
    vec_columns(omega)
}
