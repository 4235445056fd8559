//! Fractional parts of the coupled sums against Uniform[0,1]^q.
//!
//! Draws N copies of the studied vector at a single level M and runs a
//! Kolmogorov-Smirnov test per coordinate. The threshold is the asymptotic
//! Kolmogorov quantile at alpha = 0.001.

use modone::model::{JointLaw, ModelSpec, PhiSpec, ZMap};
use modone::sim::sample_batch;
use modone::stats::{ks_statistic, ks_threshold, uniform_cdf};

fn main() -> modone::Result<()> {
    let spec = ModelSpec {
        q: 2,
        betas: vec![0.3, 0.6, 1.0],
        x: 0.5,
        z: -1.0,
        y: vec![0.25, 2.0],
        law: JointLaw::exp_pair(1.0, ZMap::Square),
        phi: PhiSpec::reciprocal(),
    };

    let (m, n, seed) = (1_000, 20_000, 7);
    let batch = sample_batch(&spec, m, n, seed)?;
    let threshold = ks_threshold(n, 0.001)?;

    println!("M = {m}, N = {n}, seed = {seed}");
    println!("KS threshold at alpha = 0.001: {threshold:.5}");
    for axis in 0..spec.q {
        let mut col = batch.frac_column(axis);
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let stat = ks_statistic(&col, uniform_cdf)?;
        let verdict = if stat <= threshold {
            "uniform"
        } else {
            "NOT uniform"
        };
        println!("axis {axis}: KS = {stat:.5}  -> {verdict}");
    }
    Ok(())
}
