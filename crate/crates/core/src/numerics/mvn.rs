use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{cholesky, Matrix};
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Multivariate normal sampler with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    factor: Matrix,
}

impl MvnSampler {
    pub fn new(cov: &Matrix) -> Result<Self> {
        Ok(Self {
            factor: cholesky(cov)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    /// Writes one draw `mean + L z` into `out`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, mean: &[f64], z: &mut [f64], out: &mut [f64]) {
        let d = self.dim();
        for zi in z.iter_mut().take(d) {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let row = self.factor.row(i);
            let mut s = mean[i];
            for k in 0..=i {
                s += row[k] * z[k];
            }
            out[i] = s;
        }
    }
}

/// `n` i.i.d. draws from N(mean, cov), one per row.
pub fn mvn_sample(mean: &[f64], cov: &Matrix, n: usize, stream: RngStream) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Domain("mvn_sample needs n >= 1".into()));
    }
    if mean.len() != cov.rows() || !cov.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "mean of length {} with {}x{} covariance",
            mean.len(),
            cov.rows(),
            cov.cols()
        )));
    }
    let sampler = MvnSampler::new(cov)?;
    let d = mean.len();
    let mut rng = stream.rng();
    let mut out = Matrix::zeros(n, d);
    let mut z = vec![0.0; d];
    for i in 0..n {
        sampler.draw_into(&mut rng, mean, &mut z, out.row_mut(i));
    }
    Ok(out)
}
