//! Minimal dense symmetric linear algebra for the block proposals.
//!
//! Blocks are four-dimensional, so a plain Cholesky factorization with
//! triangular solves covers everything the samplers need.

/// Lower-triangular Cholesky factor stored row-major; `None` if the
/// matrix is not positive definite.
#[derive(Debug, Clone)]
pub struct Cholesky {
    pub dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(mat: &[f64], dim: usize) -> Option<Cholesky> {
        assert_eq!(mat.len(), dim * dim);
        let mut l = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut s = mat[i * dim + j];
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[i * dim + j] = s.sqrt();
                } else {
                    l[i * dim + j] = s / l[j * dim + j];
                }
            }
        }
        Some(Cholesky { dim, l })
    }

    /// y = L z (used to turn standard-normal draws into correlated ones).
    pub fn multiply(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.l[i * self.dim + j] * z[j];
            }
            out[i] = s;
        }
    }

    /// Solve L w = v by forward substitution.
    pub fn forward_solve(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let mut s = v[i];
            for j in 0..i {
                s -= self.l[i * self.dim + j] * out[j];
            }
            out[i] = s / self.l[i * self.dim + i];
        }
    }

    /// Solve A z = v with A = L L' (forward then back substitution).
    pub fn solve(&self, v: &[f64], out: &mut [f64]) {
        self.forward_solve(v, out);
        for i in (0..self.dim).rev() {
            let mut s = out[i];
            for j in i + 1..self.dim {
                s -= self.l[j * self.dim + i] * out[j];
            }
            out[i] = s / self.l[i * self.dim + i];
        }
    }

    /// log det of the underlying matrix (twice the log det of L).
    pub fn log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.l[i * self.dim + i].ln())
            .sum::<f64>()
            * 2.0
    }
}

/// Sample covariance of `rows` (each a draw), with a ridge added until
/// the factorization succeeds. Returns the mean, covariance and whether
/// a ridge was needed.
pub fn mean_and_cov(rows: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>, bool) {
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut cov = vec![0.0; dim * dim];
    if rows.len() > 1 {
        for row in rows {
            for i in 0..dim {
                for j in 0..dim {
                    cov[i * dim + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        let denom = (rows.len() - 1) as f64;
        for c in cov.iter_mut() {
            *c /= denom;
        }
    }
    let ridged = Cholesky::new(&cov, dim).is_none();
    if ridged {
        for i in 0..dim {
            cov[i * dim + i] += 1e-8;
        }
        // A second failure means off-diagonals dominate; fall back to a
        // diagonal matrix.
        if Cholesky::new(&cov, dim).is_none() {
            let diag: Vec<f64> = (0..dim).map(|i| cov[i * dim + i].max(1e-8)).collect();
            cov = vec![0.0; dim * dim];
            for i in 0..dim {
                cov[i * dim + i] = diag[i];
            }
        }
    }
    (mean, cov, ridged)
}

/// Gaussian log-density with covariance `c * Sigma` given Sigma's factor.
pub fn mvn_logpdf(x: &[f64], mean: &[f64], chol: &Cholesky, scale: f64) -> f64 {
    let dim = chol.dim;
    let centered: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let mut w = vec![0.0; dim];
    chol.forward_solve(&centered, &mut w);
    let quad: f64 = w.iter().map(|v| v * v).sum::<f64>() / scale;
    let log_det = chol.log_det() + dim as f64 * scale.ln();
    -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_round_trip() {
        // A = L L' for a hand-picked SPD matrix.
        let a = [4.0, 2.0, 2.0, 3.0];
        let ch = Cholesky::new(&a, 2).unwrap();
        let mut y = [0.0; 2];
        ch.multiply(&[1.0, 1.0], &mut y);
        // L = [[2, 0], [1, sqrt(2)]] so L (1,1) = (2, 1 + sqrt(2)).
        assert_relative_eq!(y[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(y[1], 1.0 + 2.0f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(ch.log_det(), (8.0f64).ln(), max_relative = 1e-12);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let ch = Cholesky::new(&a, 2).unwrap();
        // A z = b with z = (1, -1) gives b = (2, -1).
        let mut z = [0.0; 2];
        ch.solve(&[2.0, -1.0], &mut z);
        assert_relative_eq!(z[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(z[1], -1.0, max_relative = 1e-12);
    }

    #[test]
    fn not_spd_detected() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(Cholesky::new(&a, 2).is_none());
    }

    #[test]
    fn mvn_logpdf_matches_univariate() {
        let ch = Cholesky::new(&[4.0], 1).unwrap();
        let lp = mvn_logpdf(&[1.0], &[0.0], &ch, 1.0);
        // N(0, 4) at x = 1.
        let want = -0.5 * ((2.0 * std::f64::consts::PI * 4.0).ln() + 0.25);
        assert_relative_eq!(lp, want, max_relative = 1e-12);
        // Scaling the covariance by 10.
        let lp10 = mvn_logpdf(&[1.0], &[0.0], &ch, 10.0);
        let want10 = -0.5 * ((2.0 * std::f64::consts::PI * 40.0).ln() + 0.025);
        assert_relative_eq!(lp10, want10, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_cov_gets_ridge() {
        let rows = vec![vec![1.0, 2.0]; 5];
        let (mean, cov, ridged) = mean_and_cov(&rows, 2);
        assert!(ridged);
        assert_relative_eq!(mean[0], 1.0, max_relative = 1e-12);
        assert!(Cholesky::new(&cov, 2).is_some());
    }
}
