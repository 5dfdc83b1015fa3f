use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::{Error, Result};

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, flat coordinate)` of the worst coordinate.
    pub worst: (usize, usize),
    pub coords_checked: usize,
}

/// Compare analytic gradients against central differences.
///
/// `f` maps parameter values to `(loss, gradients)`; it must be
/// deterministic. For each parameter, every coordinate is checked when it
/// has at most `coords_per_param` entries, otherwise a seeded sample of that
/// many. Relative error is `|a - n| / max(1e-8, |a| + |n|)`.
pub fn gradient_check<F>(
    params: &[Tensor],
    epsilon: f64,
    coords_per_param: usize,
    seed: u64,
    mut f: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<(f64, Vec<Tensor>)>,
{
    let (loss, analytic) = f(params)?;
    if !loss.is_finite() {
        return Err(Error::Nn("gradient check: non-finite loss".into()));
    }
    if analytic.len() != params.len() {
        return Err(Error::Nn("gradient check: gradient count differs from parameter count".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        coords_checked: 0,
    };
    for p in 0..params.len() {
        let size = params[p].data().len();
        let coords: Vec<usize> = if size <= coords_per_param {
            (0..size).collect()
        } else {
            let mut c = sample(&mut rng, size, coords_per_param).into_vec();
            c.sort_unstable();
            c
        };
        for c in coords {
            let orig = work[p].data()[c];
            work[p].data_mut()[c] = orig + epsilon;
            let (plus, _) = f(&work)?;
            work[p].data_mut()[c] = orig - epsilon;
            let (minus, _) = f(&work)?;
            work[p].data_mut()[c] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Nn("gradient check: non-finite loss".into()));
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[p].data()[c];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (p, c);
            }
            report.coords_checked += 1;
        }
    }
    Ok(report)
}
