//! Real polynomials with exact critical-point search on an interval.

/// `c[0] + c[1] u + c[2] u² + ...`
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `self + s * other`
    pub fn add_scaled(&mut self, other: &Polynomial, s: f64) {
        if self.coeffs.len() < other.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), 0.0);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
        while self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
    }

    /// Sign-changing roots strictly inside `(a, b)`, ascending.
    ///
    /// Roots of the derivative split `[a, b]` into monotone pieces, so each
    /// piece holds at most one root and bisection cannot miss it. Roots of
    /// even multiplicity (no sign change) are not reported.
    pub fn roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        if !(a < b) {
            return Vec::new();
        }
        match self.degree() {
            0 => Vec::new(),
            1 => {
                let r = -self.coeffs[0] / self.coeffs[1];
                if a < r && r < b {
                    vec![r]
                } else {
                    Vec::new()
                }
            }
            2 => {
                let (c, bq, aq) = (self.coeffs[0], self.coeffs[1], self.coeffs[2]);
                let disc = bq * bq - 4.0 * aq * c;
                if disc <= 0.0 {
                    return Vec::new();
                }
                // numerically stable pair
                let q = -0.5 * (bq + bq.signum() * disc.sqrt());
                let mut r = vec![q / aq];
                if q != 0.0 {
                    r.push(c / q);
                } else {
                    r.push(0.0);
                }
                r.sort_by(f64::total_cmp);
                r.dedup();
                r.into_iter().filter(|&x| a < x && x < b).collect()
            }
            _ => {
                let mut knots = vec![a];
                knots.extend(self.derivative().roots_in(a, b));
                knots.push(b);
                let mut roots = Vec::new();
                for w in knots.windows(2) {
                    if let Some(r) = self.bisect(w[0], w[1]) {
                        if a < r && r < b && roots.last() != Some(&r) {
                            roots.push(r);
                        }
                    }
                }
                roots
            }
        }
    }

    fn bisect(&self, mut lo: f64, mut hi: f64) -> Option<f64> {
        let mut flo = self.eval(lo);
        let fhi = self.eval(hi);
        if flo == 0.0 || fhi == 0.0 || flo.signum() == fhi.signum() {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = self.eval(mid);
            if fm == 0.0 {
                return Some(mid);
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Interior critical points in `(a, b)`.
    pub fn critical_points_in(&self, a: f64, b: f64) -> Vec<f64> {
        self.derivative().roots_in(a, b)
    }
}
