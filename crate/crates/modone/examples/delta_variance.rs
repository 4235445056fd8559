//! Var(K_M) against the delta-method variance sigma_T^2.
//!
//! Runs three models with different phi families and compares the sample
//! variance of K_M to the closed form sigma_T^2 = beta^{q+1} v' Sigma v.

use modone::limit::{sigma_t_sq, theta};
use modone::model::{JointLaw, ModelSpec, PhiSpec, ZMap};
use modone::sim::sample_batch;
use modone::stats::mean_and_variance;

fn model(phi: PhiSpec, law: JointLaw) -> ModelSpec {
    ModelSpec {
        q: 1,
        betas: vec![0.3, 0.6],
        x: 0.0,
        z: 0.0,
        y: vec![0.0],
        law,
        phi,
    }
}

fn main() -> modone::Result<()> {
    let cases = vec![
        (
            "constant",
            model(
                PhiSpec::constant(2.0),
                JointLaw::gaussian([1.0, 0.5], [[1.0, 0.3], [0.3, 2.0]]),
            ),
        ),
        (
            "reciprocal",
            model(
                PhiSpec::reciprocal(),
                JointLaw::gaussian([2.0, 1.0], [[0.5, 0.2], [0.2, 1.0]]),
            ),
        ),
        (
            "affine-reciprocal",
            model(
                PhiSpec::affine_reciprocal(2.0, 1.0),
                JointLaw::exp_pair(1.0, ZMap::Square),
            ),
        ),
    ];

    let (m, n, seed) = (5_000, 40_000, 3);
    for (name, spec) in &cases {
        let target = sigma_t_sq(spec)?;
        let batch = sample_batch(spec, m, n, seed)?;
        let (mean, var) = mean_and_variance(&batch.k_values())?;
        let rel = (var - target).abs() / target;
        println!(
            "{name:>18}: theta = {:+.4}  Var(K_M) = {var:.4}  sigma_T^2 = {target:.4}  rel err = {:.3}%  (mean {mean:+.4})",
            theta(spec)?,
            100.0 * rel
        );
    }
    Ok(())
}
