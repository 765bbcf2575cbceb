//! Shared numeric helpers: a compensated log-factorial table, log-sum-exp,
//! and binary entropy.

/// log2 of e; multiply nats by this to get bits.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Error-free sum: returns (a + b rounded, exact residual).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Cumulative table of ln k! kept as a hi/lo pair per entry.
///
/// ln k! reaches 10^6 nats around k = 10^5, where a single f64 carries only
/// about 2e-10 of absolute precision; binomial log-PMFs cancel those huge
/// values down to order one, so the residual `lo` parts must survive into
/// the subtraction.  `ln_choose_parts` stays accurate to ~1e-13 absolute
/// across the table.
pub struct LnFactorials {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl LnFactorials {
    pub fn up_to(n: usize) -> Self {
        let mut hi = Vec::with_capacity(n + 1);
        let mut lo = Vec::with_capacity(n + 1);
        hi.push(0.0);
        lo.push(0.0);
        let (mut h, mut l) = (0.0_f64, 0.0_f64);
        for k in 1..=n {
            let (s, e) = two_sum(h, (k as f64).ln());
            h = s;
            l += e;
            // fold the residual back in so it stays far below one ulp of hi
            let (s, e) = two_sum(h, l);
            h = s;
            l = e;
            hi.push(h);
            lo.push(l);
        }
        LnFactorials { hi, lo }
    }

    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.hi[k] + self.lo[k]
    }

    /// ln C(n, k) as a (principal, residual) pair, combining the three
    /// table entries with their residuals so the cancellation loses
    /// nothing; callers fold the residual into further large terms.
    pub fn ln_choose_parts(&self, n: usize, k: usize) -> (f64, f64) {
        debug_assert!(k <= n && n < self.hi.len());
        let (d1, e1) = two_sum(self.hi[n], -self.hi[k]);
        let (d2, e2) = two_sum(d1, -self.hi[n - k]);
        (d2, e1 + e2 + (self.lo[n] - self.lo[k] - self.lo[n - k]))
    }
}

/// ln of a sum of exponentials; empty input and all -inf give -inf.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &t in terms {
        if t > max {
            max = t;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms
        .iter()
        .filter(|t| t.is_finite())
        .map(|&t| (t - max).exp())
        .sum();
    max + sum.ln()
}

/// Binary entropy in bits with the 0 log 0 = 0 convention.
pub fn binary_entropy_bits(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).log2();
    }
    h
}
