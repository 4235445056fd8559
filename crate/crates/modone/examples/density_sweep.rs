//! Pointwise convergence of the transformed-Gaussian density to its limit.
//!
//! The scene fixes a drift vector eta, a covariance Sigma_1 and a map phi;
//! the transformed density of
//!     (xi_1, ..., xi_q, phi(G_{q+2}/M) G_{q+1})
//! with G ~ N(M eta, Sigma_1) converges to the Gaussian obtained by freezing
//! phi at its limit argument. The sweep evaluates both densities on a grid
//! and reports the worst absolute error per M.

use modone::density::{pointwise_convergence_sweep, LemmaScene};
use modone::model::PhiSpec;
use nalgebra::DMatrix;

fn main() -> modone::Result<()> {
    let eta = vec![1.0, 0.0, 2.0];
    let sigma1 = DMatrix::<f64>::identity(3, 3);
    let make =
        move |m: u64| LemmaScene::for_m(1, eta.clone(), sigma1.clone(), PhiSpec::reciprocal(), m);

    let m_values = [100u64, 10_000, 1_000_000];
    let axis: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
    let sweep = pointwise_convergence_sweep(&make, &m_values, &axis)?;

    println!("        M     max |err|     L1 err");
    for level in &sweep.levels {
        println!(
            "{:>9}    {:.3e}    {:.3e}",
            level.m, level.max_err, level.l1_err
        );
    }
    Ok(())
}
