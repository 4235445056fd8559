//! The moment condition behind the total-variation theorem.
//!
//! The TV convergence of the transformed density needs
//!     E |phi(eta + Y/M_tilde)|^{-p} < infinity
//! for some M_tilde, with Y standard Gaussian. The checker integrates
//! |phi(eta + y)|^{-p} exp(-M_tilde y^2) with panel splits at every zero and
//! pole of the shifted phi, escalating M_tilde until the integral converges
//! or the trace gives out.

use modone::model::{check_integrability, IntegrabilityVerdict, PhiSpec};

fn run(label: &str, phi: &PhiSpec, center: f64) -> modone::Result<()> {
    let report = check_integrability(phi, center, 3, 20)?;
    match &report.verdict {
        IntegrabilityVerdict::IntegrableWitness { m_tilde, integral } => {
            println!("{label}: integrable, witness M_tilde = {m_tilde}, integral = {integral:.6}");
        }
        IntegrabilityVerdict::LikelyDivergent { reason } => {
            println!("{label}: likely divergent ({reason})");
        }
        IntegrabilityVerdict::Inconclusive => println!("{label}: inconclusive"),
    }
    for t in report.trace.iter().take(3) {
        println!(
            "    M_tilde = {:>2}: value {:.6e}, est err {:.1e}, {} panels, converged: {}",
            t.m_tilde, t.value, t.error, t.panels, t.converged
        );
    }
    Ok(())
}

fn main() -> modone::Result<()> {
    // 1/x away from its pole: integrand |eta + y|^3 e^{-y^2}, plainly finite
    run("reciprocal at eta = 2", &PhiSpec::reciprocal(), 2.0)?;
    // a zero of phi sitting exactly at the expansion point
    run(
        "t - 1 at eta = 1",
        &PhiSpec::polynomial(vec![-1.0, 1.0]),
        1.0,
    )?;
    // constant phi never vanishes
    run("constant 3", &PhiSpec::constant(3.0), 0.0)?;
    Ok(())
}
