//! Central finite-difference verification of reverse-mode gradients.
//! Used by unit tests and the acceptance suite; lives in the library so
//! both can drive any [`Parameterized`] module through one code path.

use super::{Parameterized, Phase};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GradReport {
    pub n_checked: usize,
    pub max_rel_err: f64,
    /// `group.path[index]` of the worst parameter.
    pub worst: String,
}

/// Relative error with a floor: near-zero gradients are compared at an
/// absolute scale of 1e-4 so the ratio stays meaningful.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Checks every parameter scalar of `model` against central finite
/// differences of `loss`.
///
/// `analytic` must zero the gradients, run one train-phase forward, and one
/// backward. `loss` must recompute the same scalar the backward pass
/// differentiates; any stochastic layer must be re-seeded inside it so
/// repeated evaluations see identical masks.
pub fn check_gradients<M: Parameterized>(
    model: &mut M,
    analytic: &mut dyn FnMut(&mut M),
    loss: &mut dyn FnMut(&mut M) -> f64,
    eps: f64,
) -> GradReport {
    analytic(model);
    let mut names: Vec<String> = Vec::new();
    let mut grads: Vec<Vec<f64>> = Vec::new();
    model.for_each_param(&mut |name, p| {
        names.push(name.to_string());
        grads.push(p.grad.clone());
    });

    let mut report = GradReport {
        n_checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
    };
    for (gi, group) in grads.iter().enumerate() {
        for (i, &g) in group.iter().enumerate() {
            let bump = |m: &mut M, delta: f64| {
                let mut k = 0;
                m.for_each_param(&mut |_, p| {
                    if k == gi {
                        p.value[i] += delta;
                    }
                    k += 1;
                });
            };
            bump(model, eps);
            let lp = loss(model);
            bump(model, -2.0 * eps);
            let lm = loss(model);
            bump(model, eps);
            let fd = (lp - lm) / (2.0 * eps);
            let rel = relative_error(g, fd);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = format!("{}[{i}]", names[gi]);
            }
            report.n_checked += 1;
        }
    }
    report
}

/// A fresh deterministically seeded rng for train-phase evaluations.
pub fn phase_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Convenience wrapper building a train [`Phase`] around a seeded rng.
pub fn with_train_phase<R>(seed: u64, f: impl FnOnce(&mut Phase) -> R) -> R {
    let mut rng = phase_rng(seed);
    let mut phase = Phase::Train { rng: &mut rng };
    f(&mut phase)
}
