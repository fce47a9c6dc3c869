//! Runtime property checks on random instances, used by the `check`
//! subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bound::bound_for;
use crate::channel::{iid_complex_gaussian, SystemConfig};
use crate::balance::Instance;
use crate::error::Result;
use crate::lm::{finalize_precoder, jacobian, lipschitz_k, residual, RealifiedSystem};
use crate::sinr::{relay_power, sinr_quadratic, unvec};
use crate::{CVector, RVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_omega(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    iid_complex_gaussian(rng, n, 1).column(0).into_owned()
}

/// Checks the core identities on `instances` random draws shaped like
/// `template`, with seeds `seed, seed + 1, ...`.
pub fn run_checks(template: &SystemConfig, instances: usize, samples: usize) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(template.seed ^ 0x5eed);
    let mut out = vec![
        CheckOutcome { name: "sinr representations agree (rel)", worst: 0.0, tolerance: 1e-8 },
        CheckOutcome { name: "trace/Kronecker power identity (rel)", worst: 0.0, tolerance: 1e-10 },
        CheckOutcome { name: "bound dominance (sampled min-SINR / bound - 1)", worst: f64::NEG_INFINITY, tolerance: 1e-9 },
        CheckOutcome { name: "Jacobian vs central differences (rel)", worst: 0.0, tolerance: 1e-5 },
        CheckOutcome { name: "Jacobian Lipschitz ratio", worst: 0.0, tolerance: 1.0 + 1e-12 },
        CheckOutcome { name: "finalized precoder power (rel)", worst: 0.0, tolerance: 1e-9 },
    ];
    for i in 0..instances {
        let system = SystemConfig { seed: template.seed.wrapping_add(i as u64), ..template.clone() };
        let inst = Instance::generate(&system)?;
        let qp = &inst.problem;
        let n = qp.dim();

        let omega = random_omega(&mut rng, n);
        let direct = inst.sinrs(&omega)?;
        let quad = sinr_quadratic(&omega, qp);
        for (a, b) in direct.iter().zip(&quad) {
            out[0].worst = out[0].worst.max(rel(*a, *b));
        }
        let p_direct = relay_power(&unvec(&omega)?, &inst.channels, system.sigma_r2);
        out[1].worst = out[1].worst.max(rel(p_direct, qp.power_of(&omega)));

        let (wp, bound) = bound_for(qp)?;
        for _ in 0..samples {
            let w = random_omega(&mut rng, n);
            let scale = (rng.random_range(0.0..1.0) * qp.power / qp.power_of(&w)).sqrt();
            let min = sinr_quadratic(&(w * C64::new(scale, 0.0)), qp).into_iter().fold(f64::INFINITY, f64::min);
            if bound.gamma_bar > 0.0 {
                out[2].worst = out[2].worst.max(min / bound.gamma_bar - 1.0);
            }
        }

        let sys = RealifiedSystem::new(&wp, 0.5 * bound.gamma_bar);
        let dim = sys.dim();
        let w_hat = RVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5).normalize();
        let jac = jacobian(&w_hat, &sys);
        let scale = jac.amax().max(f64::MIN_POSITIVE);
        let h = 1e-6;
        for k in 0..dim {
            let mut e = RVector::zeros(dim);
            e[k] = h;
            let fd = (residual(&(&w_hat + &e), &sys) - residual(&(&w_hat - &e), &sys)) / (2.0 * h);
            out[3].worst = out[3].worst.max((fd - jac.column(k)).amax() / scale);
        }

        let k = lipschitz_k(&sys);
        for _ in 0..samples.min(100) {
            let a = RVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5);
            let b = RVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5);
            let lhs = (jacobian(&a, &sys) - jacobian(&b, &sys)).norm();
            let rhs = k * (&a - &b).norm();
            if rhs > 0.0 {
                out[4].worst = out[4].worst.max(lhs / rhs);
            }
        }

        let w = random_omega(&mut rng, n).normalize();
        let power = qp.power_of(&finalize_precoder(&w, &wp));
        out[5].worst = out[5].worst.max(rel(power, qp.power));
    }
    Ok(out)
}
