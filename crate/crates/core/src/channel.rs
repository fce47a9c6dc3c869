//! Correlated Rayleigh channel generation.
//!
//! Both user groups see an `N_R x M` uplink channel
//! `H_t = Θ_RS^{1/2} H̃_t Θ_t^{1/2} · sqrt(P/M)`, where `H̃_t` has iid
//! circularly-symmetric complex Gaussian entries of unit variance and the
//! `Θ` matrices are exponential correlation matrices.
//!
//! Draws come from [`ChaCha8Rng`] seeded with [`SystemConfig::seed`]. Entries
//! of `H̃_1` are drawn first, then `H̃_2`, each in column-major order; every
//! complex entry consumes two standard normals (real part, then imaginary
//! part), each scaled by `1/sqrt(2)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, spectral_map};
use crate::{CMatrix, RMatrix, C64};

/// Relative eigenvalue tolerance used when clamping PSD square roots.
pub const PSD_TOL_REL: f64 = 1e-12;

/// Physical system parameters. All powers are linear, not dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of user pairs `M`.
    pub pairs: usize,
    /// Relay antennas `N_R`.
    pub relay_antennas: usize,
    /// Downlink noise variance at each user.
    pub sigma2: f64,
    /// Noise variance at the relay.
    pub sigma_r2: f64,
    /// Relay power budget.
    pub power: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho_rs: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            pairs: 3,
            relay_antennas: 6,
            sigma2: 1.0,
            sigma_r2: 1.0,
            power: 10.0,
            rho1: 0.1,
            rho2: 0.1,
            rho_rs: 0.5,
            seed: 0,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::InvalidParameter("number of user pairs must be at least 1".into()));
        }
        if self.relay_antennas == 0 {
            return Err(Error::InvalidParameter("relay antennas must be at least 1".into()));
        }
        for (name, v) in [("power", self.power), ("sigma2", self.sigma2), ("sigma_r2", self.sigma_r2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, rho) in [("rho1", self.rho1), ("rho2", self.rho2), ("rho_rs", self.rho_rs)] {
            check_rho(name, rho)?;
        }
        Ok(())
    }
}

fn check_rho(name: &str, rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {rho}")));
    }
    Ok(())
}

/// Uplink channels of both user groups, each `N_R x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    h1: CMatrix,
    h2: CMatrix,
}

impl ChannelSet {
    pub fn new(h1: CMatrix, h2: CMatrix) -> Result<Self> {
        if h1.shape() != h2.shape() {
            return Err(Error::Dimension(format!(
                "group channels differ in shape: {:?} vs {:?}",
                h1.shape(),
                h2.shape()
            )));
        }
        if h1.nrows() == 0 || h1.ncols() == 0 {
            return Err(Error::Dimension("channels must be non-empty".into()));
        }
        if h1.iter().chain(h2.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter("channel entries must be finite".into()));
        }
        Ok(Self { h1, h2 })
    }

    pub fn h1(&self) -> &CMatrix {
        &self.h1
    }

    pub fn h2(&self) -> &CMatrix {
        &self.h2
    }

    pub fn relay_antennas(&self) -> usize {
        self.h1.nrows()
    }

    pub fn pairs(&self) -> usize {
        self.h1.ncols()
    }

    /// Checks the channel shape against a configuration.
    pub fn check_matches(&self, cfg: &SystemConfig) -> Result<()> {
        if self.relay_antennas() != cfg.relay_antennas || self.pairs() != cfg.pairs {
            return Err(Error::Dimension(format!(
                "channels are {}x{} but config expects {}x{}",
                self.relay_antennas(),
                self.pairs(),
                cfg.relay_antennas,
                cfg.pairs
            )));
        }
        Ok(())
    }

    /// `Y = H_1 H_1^H + H_2 H_2^H + σ_R² I`, the relay input covariance.
    pub fn relay_covariance(&self, sigma_r2: f64) -> CMatrix {
        let n = self.relay_antennas();
        &self.h1 * self.h1.adjoint() + &self.h2 * self.h2.adjoint() + CMatrix::identity(n, n) * C64::new(sigma_r2, 0.0)
    }
}

/// Exponential correlation matrix with entries `rho^|i-j|`.
pub fn correlation_matrix(rho: f64, n: usize) -> Result<RMatrix> {
    check_rho("rho", rho)?;
    if n == 0 {
        return Err(Error::InvalidParameter("correlation matrix dimension must be at least 1".into()));
    }
    Ok(RMatrix::from_fn(n, n, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// Symmetric square root of a real symmetric PSD matrix.
///
/// Eigenvalues within `PSD_TOL_REL * λ_max` below zero are clamped to zero;
/// anything more negative is rejected.
pub fn psd_sqrt(a: &RMatrix) -> Result<RMatrix> {
    let (values, vectors) = hermitian_eig(a)?;
    let lmax = values.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let tol = PSD_TOL_REL * lmax;
    let lmin = values.min();
    if lmin < -tol {
        return Err(Error::NotPsd { min_eig: lmin, tol });
    }
    Ok(spectral_map(&values, &vectors, |l| l.max(0.0).sqrt()))
}

/// Draws an `rows x cols` matrix of iid CN(0, 1) entries in column-major order.
pub fn iid_complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::zeros(rows, cols);
    for entry in m.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *entry = C64::new(re * scale, im * scale);
    }
    m
}

fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Generates a correlated channel realization. Pure in `cfg`.
pub fn generate_channels(cfg: &SystemConfig) -> Result<ChannelSet> {
    cfg.validate()?;
    let (n, m) = (cfg.relay_antennas, cfg.pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let raw1 = iid_complex_gaussian(&mut rng, n, m);
    let raw2 = iid_complex_gaussian(&mut rng, n, m);

    let rs_half = to_complex(&psd_sqrt(&correlation_matrix(cfg.rho_rs, n)?)?);
    let g1_half = to_complex(&psd_sqrt(&correlation_matrix(cfg.rho1, m)?)?);
    let g2_half = to_complex(&psd_sqrt(&correlation_matrix(cfg.rho2, m)?)?);
    let scale = C64::new((cfg.power / m as f64).sqrt(), 0.0);

    let h1: CMatrix = (&rs_half * raw1 * g1_half) * scale;
    let h2: CMatrix = (&rs_half * raw2 * g2_half) * scale;
    ChannelSet::new(h1, h2)
}

/// Builds a channel set from real-valued column data, mostly useful for
/// hand-constructed test cases.
pub fn channels_from_real(h1: DMatrix<f64>, h2: DMatrix<f64>) -> Result<ChannelSet> {
    ChannelSet::new(to_complex(&h1), to_complex(&h2))
}
