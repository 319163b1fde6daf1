//! Population slopes, residual variance and trend truth for the built-in
//! covariance matrices.

use metareg::datagen::{build_joint_distribution, derive_true_slopes, true_parameters, SimulationConfig};

fn main() -> metareg::Result<()> {
    for k in [1, 3, 5] {
        let (beta, sigma2) = derive_true_slopes(&build_joint_distribution(k)?)?;
        let beta: Vec<String> = beta.iter().map(|b| format!("{b:.5}")).collect();
        println!("k={k}  beta=[{}]  sigma2={sigma2:.5}", beta.join(", "));
    }
    for case in [1, 7] {
        let truth = true_parameters(&SimulationConfig::reference(case, 100, 1)?)?;
        println!("case {case}: trend slope {}", truth.trend_slope);
    }
    Ok(())
}
