//! One-dimensional maximisation helpers shared by the solvers.

/// 1/phi^2 and 1/phi, the golden section ratios.
const INV_PHI2: f64 = 0.381_966_011_250_105_1;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximisation of `f` on `[a, b]` to interval width `tol`.
///
/// Returns the midpoint of the final bracket and the value there.  `f` is
/// assumed unimodal on the bracket; on plateaus the method still converges
/// to a point of maximal value.
pub fn golden_section_max(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    if b < a {
        std::mem::swap(&mut a, &mut b);
    }
    let mut x1 = a + INV_PHI2 * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + INV_PHI2 * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // the bracket midpoint can sit a hair below the best probe
    if f1 > fx && f1 >= f2 {
        (x1, f1)
    } else if f2 > fx {
        (x2, f2)
    } else {
        (x, fx)
    }
}

/// Indices of local maxima of `v`, endpoints included (an endpoint counts
/// when it is not below its single neighbour).  Flat stretches report their
/// first index.
pub fn grid_local_maxima(v: &[f64]) -> Vec<usize> {
    let n = v.len();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    if n == 1 {
        return vec![0];
    }
    for i in 0..n {
        let left_ok = i == 0 || v[i] > v[i - 1];
        let right_ok = i + 1 == n || v[i] >= v[i + 1];
        let plateau_start = i > 0 && v[i] == v[i - 1];
        if left_ok && right_ok && !plateau_start {
            out.push(i);
        }
    }
    out
}
