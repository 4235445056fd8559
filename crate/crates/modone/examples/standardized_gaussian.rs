//! Standardized increment vector against its Gaussian limit N(0, Gamma).
//!
//! The standardized batch stacks the q rescaled partial-sum increments with
//! the rescaled Z sum. Its empirical covariance should match the closed-form
//! Gamma entrywise to within a few standard errors, and each marginal should
//! be close to the corresponding N(0, Gamma_jj) in total variation.

use modone::limit::limit_covariance_gamma;
use modone::model::{JointLaw, ModelSpec, PhiSpec, ZMap};
use modone::sim::standardized_batch;
use modone::stats::{covariance_matrix, gaussian_cov_entry_se, marginal_tvs, BinRule};

fn main() -> modone::Result<()> {
    let spec = ModelSpec {
        q: 2,
        betas: vec![0.25, 0.5, 0.75],
        x: 0.0,
        z: 0.0,
        y: vec![0.0, 0.0],
        law: JointLaw::exp_pair(1.0, ZMap::Square),
        phi: PhiSpec::reciprocal(),
    };

    let (m, n, seed) = (5_000, 50_000, 19);
    let batch = standardized_batch(&spec, m, n, seed)?;
    let dim = batch.dim;
    let law = limit_covariance_gamma(&spec)?;
    let gamma = &law.gamma;

    let (_, cov) = covariance_matrix(&batch.flat, dim)?;
    println!("entry   empirical   limit     |diff|/se");
    let rows = batch.rows();
    for i in 0..dim {
        for j in i..dim {
            let se = gaussian_cov_entry_se(gamma, i, j, rows);
            let diff = (cov[(i, j)] - gamma[(i, j)]).abs();
            println!(
                "({i},{j})   {:+.5}    {:+.5}   {:.2}",
                cov[(i, j)],
                gamma[(i, j)],
                diff / se
            );
        }
    }

    let gauss = law.standardized_gaussian()?;
    let tvs = marginal_tvs(&batch.flat, dim, &gauss, &BinRule::default())?;
    for (axis, tv) in tvs.iter().enumerate() {
        println!("marginal TV axis {axis}: {tv:.4}");
    }
    Ok(())
}
