//! Central and non-central t distribution functions.

use metareg::numerics::{noncentral_t_cdf, t_cdf, t_quantile};

fn main() -> metareg::Result<()> {
    let df = 30.0;
    let c = t_quantile(0.95, df)?;
    println!("t(30) 95% quantile = {c:.6}, cdf back = {:.6}", t_cdf(c, df));
    for ncp in [0.0, 1.0, 2.5, 5.0] {
        println!("P(T' <= c | ncp = {ncp}) = {:.6}", noncentral_t_cdf(c, df, ncp)?);
    }
    Ok(())
}
