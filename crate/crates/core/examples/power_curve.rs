//! One-sided power against the 100-point discrepancy grid for two standard
//! errors, plus the sample-size adjusted significance level.

use metareg::metrics::{adjust_alpha, power_curve};

fn main() -> metareg::Result<()> {
    let alpha = adjust_alpha(2500, 0.05, 1250);
    println!("alpha adjusted for N=2500: {alpha:.5}");
    let narrow = power_curve(0.02, 2490, alpha)?;
    let wide = power_curve(0.15, 2490, alpha)?;
    println!("{:>6} {:>10} {:>10}", "delta", "se=0.02", "se=0.15");
    for d in [0.1, 0.2, 0.3, 0.5, 1.0, 2.0] {
        println!("{d:>6.2} {:>10.4} {:>10.4}", narrow.at(d).power, wide.at(d).power);
    }
    Ok(())
}
