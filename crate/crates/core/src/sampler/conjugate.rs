use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::SamplerError;
use crate::model::{GaussianPrior, PrecisionPrior};

/// Full conditional of a coefficient vector under a Gaussian working model
/// `response_i ~ N(x_i' b, 1 / weight_i)` with independent Gaussian priors.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    pub mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GaussianConditional {
    /// `design` is row-major with `ncols` columns.
    pub fn new(
        design: &[f64],
        ncols: usize,
        response: &[f64],
        weights: &[f64],
        priors: &[GaussianPrior],
        block: &str,
    ) -> Result<Self, SamplerError> {
        let p = ncols;
        debug_assert_eq!(priors.len(), p);
        let n = response.len();
        debug_assert_eq!(design.len(), n * p);
        let mut prec = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        for (j, pr) in priors.iter().enumerate() {
            prec[(j, j)] = pr.precision;
            rhs[j] = pr.precision * pr.mean;
        }
        for i in 0..n {
            let w = weights[i];
            let row = &design[i * p..(i + 1) * p];
            let wy = w * response[i];
            for a in 0..p {
                let wa = w * row[a];
                rhs[a] += row[a] * wy;
                for b in 0..=a {
                    prec[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                prec[(b, a)] = prec[(a, b)];
            }
        }
        let chol = Cholesky::new(prec).ok_or_else(|| SamplerError::NotPositiveDefinite(block.to_string()))?;
        let mean = chol.solve(&rhs);
        Ok(GaussianConditional { mean, chol })
    }

    /// Posterior covariance, the inverse of the precision matrix.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let p = self.mean.len();
        let z = DVector::<f64>::from_iterator(p, (0..p).map(|_| StandardNormal.sample(rng)));
        // P = L L', so L'^{-1} z has covariance P^{-1}.
        let dev = self.chol.l().tr_solve_lower_triangular(&z).expect("non-singular factor");
        (&self.mean + dev).iter().copied().collect()
    }
}

/// Draws coefficients from their Gaussian full conditional.
pub fn update_gaussian_coefficients<R: Rng + ?Sized>(
    design: &[f64],
    ncols: usize,
    response: &[f64],
    weights: &[f64],
    priors: &[GaussianPrior],
    block: &str,
    rng: &mut R,
) -> Result<Vec<f64>, SamplerError> {
    if ncols == 0 {
        return Ok(Vec::new());
    }
    Ok(GaussianConditional::new(design, ncols, response, weights, priors, block)?.draw(rng))
}

/// Shape and rate of the Gamma full conditional of a precision given
/// residuals `e_i` with precision `tau * s_i`.
pub fn precision_conditional(residuals: &[f64], scaling: &[f64], shape: f64, rate: f64) -> (f64, f64) {
    let ss: f64 = residuals.iter().zip(scaling).map(|(e, s)| s * e * e).sum();
    (shape + 0.5 * residuals.len() as f64, rate + 0.5 * ss)
}

/// Draws a level precision; fixed precisions are returned unchanged.
pub fn update_precision<R: Rng + ?Sized>(
    residuals: &[f64],
    scaling: &[f64],
    prior: PrecisionPrior,
    rng: &mut R,
) -> Result<f64, SamplerError> {
    match prior {
        PrecisionPrior::Fixed(v) => Ok(v),
        PrecisionPrior::Gamma { shape, rate } => {
            let (a, b) = precision_conditional(residuals, scaling, shape, rate);
            let g = Gamma::new(a, 1.0 / b)
                .map_err(|e| SamplerError::InvalidArgument(format!("gamma({a}, {b}): {e}")))?;
            Ok(g.sample(rng))
        }
    }
}
