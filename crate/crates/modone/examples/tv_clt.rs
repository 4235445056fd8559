//! Total-variation CLT: the histogram TV distance between the standardized
//! pair sums and their Gaussian limit shrinks as M grows.

use modone::experiment::tv_clt_curve;
use modone::model::{JointLaw, ZMap};
use modone::stats::BinRule;

fn main() -> modone::Result<()> {
    let law = JointLaw::exp_pair(1.0, ZMap::Square);
    let m_list = [1u64, 4, 16, 64, 256, 1024];
    let (n, seed) = (50_000, 5);

    let curve = tv_clt_curve(&law, &m_list, n, seed, &BinRule::default())?;
    println!("      M    TV axis 0   TV axis 1");
    for (m, tvs) in &curve {
        println!("{m:>7}    {:>8.4}    {:>8.4}", tvs[0], tvs[1]);
    }
    println!();
    println!("axis 1 carries Z = Y^2, whose skewness slows the decay; both");
    println!("curves flatten at the binned-estimator noise floor ~ sqrt(bins/N).");
    Ok(())
}
