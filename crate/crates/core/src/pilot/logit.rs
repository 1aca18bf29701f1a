//! Ridge-penalized logistic regression by damped Newton (IRLS).

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    /// Penalty `ridge / 2 * |beta|^2`, excluding the intercept when
    /// `intercept_first` is set.
    pub ridge: f64,
    /// Convergence when the largest per-observation score `|g_j| / n` falls
    /// below this, or when Newton steps stop moving the coefficients.
    pub tol: f64,
    pub max_iter: usize,
    pub intercept_first: bool,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            ridge: 0.0,
            tol: 1e-10,
            max_iter: 100,
            intercept_first: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub coef: Vec<f64>,
    pub iterations: usize,
    /// Max absolute per-observation score at the returned coefficients.
    pub grad_norm: f64,
    pub objective: f64,
}

const SEPARATION_NORM: f64 = 1e2;

#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

struct Problem<'a> {
    x: DMatrix<f64>,
    y: &'a [f64],
    penalty: DVector<f64>,
}

impl Problem<'_> {
    fn objective(&self, beta: &DVector<f64>) -> f64 {
        let eta = &self.x * beta;
        let ll: f64 = eta.iter().zip(self.y).map(|(e, y)| y * e - softplus(*e)).sum();
        ll - 0.5 * beta.component_mul(beta).dot(&self.penalty)
    }

    fn score_and_hessian(&self, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let eta = &self.x * beta;
        let q = beta.len();
        let mut resid = DVector::zeros(eta.len());
        let mut weighted = self.x.clone();
        for i in 0..eta.len() {
            let p = logistic(eta[i]);
            resid[i] = self.y[i] - p;
            let w = (p * (1.0 - p)).sqrt();
            for j in 0..q {
                weighted[(i, j)] *= w;
            }
        }
        let score = self.x.tr_mul(&resid) - self.penalty.component_mul(beta);
        let mut hess = weighted.tr_mul(&weighted);
        for j in 0..q {
            hess[(j, j)] += self.penalty[j];
        }
        (score, hess)
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Every observation fitted at near-certainty without a penalty: the
/// likelihood has no finite maximizer.
fn separated(problem: &Problem, beta: &DVector<f64>) -> bool {
    let eta = &problem.x * beta;
    problem.penalty.iter().all(|&p| p == 0.0)
        && eta.iter().zip(problem.y).all(|(e, y)| (y - logistic(*e)).abs() < 1e-6)
}

/// Maximizes the ridge-penalized Bernoulli log-likelihood with logistic
/// link. Each accepted step does not decrease the objective (beyond
/// rounding); steps are halved until it does.
pub fn fit_logit_irls(features: &Matrix, labels: &[f64], opts: &IrlsOptions) -> Result<LogitFit> {
    let (n, q) = (features.nrows(), features.ncols());
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if let Some(v) = labels.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!("labels must be 0 or 1, got {v}")));
    }
    let ones = labels.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::InvalidInput("labels contain a single class".into()));
    }
    if !(opts.ridge >= 0.0 && opts.ridge.is_finite()) {
        return Err(invalid("ridge", "must be nonnegative"));
    }
    if q >= n && opts.ridge == 0.0 {
        return Err(Error::RankDeficient { rank: n, cols: q });
    }
    let mut penalty = DVector::from_element(q, opts.ridge);
    if opts.intercept_first && q > 0 {
        penalty[0] = 0.0;
    }
    let problem = Problem {
        x: DMatrix::from_row_slice(n, q, features.as_slice()),
        y: labels,
        penalty,
    };

    let done = |beta: &DVector<f64>, iterations: usize, grad_norm: f64, objective: f64| {
        if separated(&problem, beta) {
            return Err(Error::Separation { norm: beta.norm() });
        }
        Ok(LogitFit {
            coef: beta.iter().copied().collect(),
            iterations,
            grad_norm,
            objective,
        })
    };
    let mut beta = DVector::zeros(q);
    let mut obj = problem.objective(&beta);
    for iter in 0..opts.max_iter {
        let (score, hess) = problem.score_and_hessian(&beta);
        let grad_norm = max_abs(&score) / n as f64;
        if grad_norm < opts.tol {
            return done(&beta, iter, grad_norm, obj);
        }
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&score),
            None => hess
                .svd(true, true)
                .solve(&score, 1e-12)
                .map_err(|e| Error::InvalidInput(e.to_string()))?,
        };
        if max_abs(&step) <= 1e-13 * (1.0 + max_abs(&beta)) {
            return done(&beta, iter, grad_norm, obj);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand = &beta + &step * t;
            let cand_obj = problem.objective(&cand);
            // nondecreasing up to rounding of the objective itself
            let slack = 1e-12 * (1.0 + obj.abs());
            if cand_obj.is_finite() && cand_obj >= obj - slack {
                debug_assert!(cand_obj >= obj - slack);
                beta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let norm = beta.norm();
        if norm > SEPARATION_NORM {
            return Err(Error::Separation { norm });
        }
        if !accepted {
            return Err(Error::NonConvergence { iterations: iter + 1, grad_norm });
        }
    }
    let (score, _) = problem.score_and_hessian(&beta);
    let grad_norm = max_abs(&score) / n as f64;
    if grad_norm < opts.tol {
        return done(&beta, opts.max_iter, grad_norm, obj);
    }
    if separated(&problem, &beta) || beta.norm() > SEPARATION_NORM / 4.0 {
        return Err(Error::Separation { norm: beta.norm() });
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, grad_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn intercept_only_is_logit_of_mean() {
        let mut rng = derive_stream(1, 0);
        let y: Vec<f64> = (0..1000).map(|_| f64::from(u8::from(rng.bernoulli(0.5)))).collect();
        let x = Matrix::new(1000, 1, vec![1.0; 1000]).unwrap();
        let fit = fit_logit_irls(&x, &y, &IrlsOptions::default()).unwrap();
        let m = y.iter().sum::<f64>() / 1000.0;
        assert!((fit.coef[0] - (m / (1.0 - m)).ln()).abs() < 1e-10);
    }

    fn toy() -> (Matrix, Vec<f64>) {
        let rows = [
            [1.0, 0.5, -1.0],
            [1.0, -0.3, 0.2],
            [1.0, 1.2, 0.7],
            [1.0, -1.5, 1.1],
            [1.0, 0.1, -0.4],
            [1.0, 0.9, 0.3],
            [1.0, -0.7, -0.8],
            [1.0, 0.4, 1.6],
        ];
        let y = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let x = Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        (x, y)
    }

    #[test]
    fn toy_matches_long_gradient_ascent() {
        let (x, y) = toy();
        let fit = fit_logit_irls(&x, &y, &IrlsOptions { tol: 1e-14, ..Default::default() }).unwrap();
        // plain gradient ascent, fixed step, many iterations
        let mut b = [0.0f64; 3];
        for _ in 0..400_000 {
            let mut g = [0.0; 3];
            for i in 0..8 {
                let r = x.row(i);
                let p = logistic(r.iter().zip(&b).map(|(a, c)| a * c).sum());
                for j in 0..3 {
                    g[j] += (y[i] - p) * r[j];
                }
            }
            for j in 0..3 {
                b[j] += 0.05 * g[j];
            }
        }
        for j in 0..3 {
            assert!((fit.coef[j] - b[j]).abs() < 1e-6, "{:?} vs {b:?}", fit.coef);
        }
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let (x, y) = toy();
        let opts = IrlsOptions {
            ridge: 1e9,
            intercept_first: false,
            ..Default::default()
        };
        let fit = fit_logit_irls(&x, &y, &opts).unwrap();
        assert!(fit.coef.iter().all(|c| c.abs() < 1e-8));
    }

    #[test]
    fn separable_data_is_reported() {
        let x = Matrix::from_rows(&[
            vec![1.0, -2.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
        ])
        .unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        let err = fit_logit_irls(&x, &y, &IrlsOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Separation { .. }), "{err}");
        let opts = IrlsOptions { ridge: 1.0, ..Default::default() };
        assert!(fit_logit_irls(&x, &y, &opts).is_ok());
    }

    #[test]
    fn iteration_cap_reports_gradient() {
        let (x, y) = toy();
        let opts = IrlsOptions { max_iter: 1, tol: 1e-15, ..Default::default() };
        match fit_logit_irls(&x, &y, &opts).unwrap_err() {
            Error::NonConvergence { iterations, grad_norm } => {
                assert_eq!(iterations, 1);
                assert!(grad_norm > 0.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn single_class_is_an_error() {
        let (x, _) = toy();
        assert!(fit_logit_irls(&x, &[1.0; 8], &IrlsOptions::default()).is_err());
    }
}
