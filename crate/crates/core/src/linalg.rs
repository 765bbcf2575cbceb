//! Small dense symmetric factorisations and nonnegative least squares.
//!
//! Everything here operates on row-major `Vec<f64>` buffers.  The problem
//! sizes are tiny (tens of rows), so simplicity wins over blocking.

/// Cholesky factor L of a symmetric positive definite matrix, A = L L^T.
pub struct Cholesky {
    l: Vec<f64>,
    n: usize,
}

impl Cholesky {
    /// Factor a row-major symmetric matrix; `None` when not positive definite.
    pub fn new(a: &[f64], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Cholesky { l, n })
    }

    /// Solve A x = b by forward and back substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// Product of squared diagonal entries, i.e. det A.
    #[cfg(test)]
    pub fn det(&self) -> f64 {
        let mut d = 1.0;
        for i in 0..self.n {
            d *= self.l[i * self.n + i] * self.l[i * self.n + i];
        }
        d
    }
}

/// y = A v for row-major A (n x n).
pub fn mat_vec(a: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut s = 0.0;
        for j in 0..n {
            s += row[j] * v[j];
        }
        y[i] = s;
    }
    y
}

/// v^T A v for row-major symmetric A.
pub fn quad_form(a: &[f64], v: &[f64], n: usize) -> f64 {
    let av = mat_vec(a, v, n);
    v.iter().zip(&av).map(|(x, y)| x * y).sum()
}

/// Lawson-Hanson active-set solve of min ||A x - b|| subject to x >= 0.
///
/// `a` is row-major m x n.  Returns the solution and the residual 2-norm.
/// The passive-set subproblems go through normal equations, which is fine
/// at these sizes and conditioning.
pub fn nnls(a: &[f64], m: usize, n: usize, b: &[f64]) -> (Vec<f64>, f64) {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), m);
    let mut x = vec![0.0_f64; n];
    let mut passive = vec![false; n];

    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for i in 0..m {
            let row = &a[i * n..(i + 1) * n];
            for j in 0..n {
                r[i] -= row[j] * x[j];
            }
        }
        r
    };
    let grad = |r: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; n];
        for i in 0..m {
            let row = &a[i * n..(i + 1) * n];
            for j in 0..n {
                w[j] += row[j] * r[i];
            }
        }
        w
    };
    // least squares restricted to the passive columns
    let solve_passive = |passive: &[bool]| -> Vec<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let k = idx.len();
        if k == 0 {
            return vec![0.0; n];
        }
        let mut ata = vec![0.0; k * k];
        let mut atb = vec![0.0; k];
        for (p, &jp) in idx.iter().enumerate() {
            for (q, &jq) in idx.iter().enumerate() {
                let mut s = 0.0;
                for i in 0..m {
                    s += a[i * n + jp] * a[i * n + jq];
                }
                ata[p * k + q] = s;
            }
            let mut s = 0.0;
            for i in 0..m {
                s += a[i * n + jp] * b[i];
            }
            atb[p] = s;
        }
        // ridge fallback keeps degenerate column sets from aborting the solve
        let z = match Cholesky::new(&ata, k) {
            Some(ch) => ch.solve(&atb),
            None => {
                for p in 0..k {
                    ata[p * k + p] += 1e-12 * (1.0 + ata[p * k + p]);
                }
                Cholesky::new(&ata, k)
                    .map(|ch| ch.solve(&atb))
                    .unwrap_or_else(|| vec![0.0; k])
            }
        };
        let mut full = vec![0.0; n];
        for (p, &j) in idx.iter().enumerate() {
            full[j] = z[p];
        }
        full
    };

    let w0 = grad(&residual(&x));
    let scale = w0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;

    for _outer in 0..10 * n.max(1) {
        let r = residual(&x);
        let w = grad(&r);
        let mut best = tol;
        let mut best_j = None;
        for j in 0..n {
            if !passive[j] && w[j] > best {
                best = w[j];
                best_j = Some(j);
            }
        }
        let Some(j) = best_j else { break };
        passive[j] = true;

        loop {
            let z = solve_passive(&passive);
            let violating = (0..n).any(|j| passive[j] && z[j] <= 0.0);
            if !violating {
                x = z;
                break;
            }
            let mut alpha = 1.0_f64;
            for j in 0..n {
                if passive[j] && z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for j in 0..n {
                if passive[j] {
                    x[j] += alpha * (z[j] - x[j]);
                    if x[j] <= 1e-14 * scale {
                        x[j] = 0.0;
                        passive[j] = false;
                    }
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    let r = residual(&x);
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    (x, norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_known_system() {
        // A = [[4, 2], [2, 3]], b = [2, 5] -> x = [-0.5, 2]
        let a = [4.0, 2.0, 2.0, 3.0];
        let ch = Cholesky::new(&a, 2).unwrap();
        let x = ch.solve(&[2.0, 5.0]);
        assert!((x[0] + 0.5).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
        assert!((ch.det() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(Cholesky::new(&a, 2).is_none());
        let a = [0.0, 0.0, 0.0, 1.0];
        assert!(Cholesky::new(&a, 2).is_none());
    }

    #[test]
    fn quad_form_and_mat_vec_agree_with_hand_values() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let v = [1.0, -1.0];
        let av = mat_vec(&a, &v, 2);
        assert_eq!(av, vec![1.0, -2.0]);
        assert!((quad_form(&a, &v, 2) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn nnls_matches_unconstrained_solution_when_feasible() {
        // identity system, nonnegative target
        let a = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let (x, r) = nnls(&a, 3, 2, &[0.3, 0.7, 0.0]);
        assert!((x[0] - 0.3).abs() < 1e-12);
        assert!((x[1] - 0.7).abs() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn nnls_clamps_negative_coordinate() {
        // unconstrained LS solution is (1, -1); constrained optimum is (0.5, 0)
        let a = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let b = [1.0, -1.0, 0.0];
        let (x, _) = nnls(&a, 3, 2, &b);
        assert!((x[0] - 0.5).abs() < 1e-10, "x = {x:?}");
        assert!(x[1].abs() < 1e-12);
    }

    #[test]
    fn nnls_recovers_sparse_mixture_of_distributions() {
        // columns: three shifted triangular pmfs over 5 outcomes
        let cols = [
            [0.6, 0.3, 0.1, 0.0, 0.0],
            [0.1, 0.3, 0.2, 0.3, 0.1],
            [0.0, 0.0, 0.1, 0.3, 0.6],
        ];
        let w = [0.25, 0.0, 0.75];
        let mut b = [0.0; 5];
        let mut a = vec![0.0; 15];
        for i in 0..5 {
            for j in 0..3 {
                a[i * 3 + j] = cols[j][i];
                b[i] += cols[j][i] * w[j];
            }
        }
        let (x, r) = nnls(&a, 5, 3, &b);
        for j in 0..3 {
            assert!((x[j] - w[j]).abs() < 1e-10, "x = {x:?}");
        }
        assert!(r < 1e-12);
    }
}
