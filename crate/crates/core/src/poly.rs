//! Small dense real polynomials in a local time variable.
//!
//! Between two consecutive motion breakpoints every sensing probability is
//! affine in time, so joint detections, uncertainty states and collaboration
//! integrals are polynomials of degree at most `N + 2`. Integrals are exact and
//! guard crossings are found by isolating monotone pieces.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    /// `coeffs[k]` multiplies `x^k`.
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Poly::new(vec![c0, c1])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Antiderivative vanishing at 0.
    pub fn integral(&self) -> Poly {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(0.0);
        out.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k + 1) as f64),
        );
        Poly::new(out)
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Sign of the polynomial immediately to the right of 0.
    ///
    /// Coefficients with magnitude at most `tol` are treated as zero; returns 0
    /// only when every coefficient is.
    pub fn sign_after_zero(&self, tol: f64) -> i8 {
        for &c in &self.coeffs {
            if c > tol {
                return 1;
            }
            if c < -tol {
                return -1;
            }
        }
        0
    }

    /// All sign-changing roots in the open interval `(lo, hi)`, ascending,
    /// located to full floating precision.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.degree() == 0 || hi.is_nan() || lo.is_nan() || hi <= lo {
            return Vec::new();
        }
        if self.degree() == 1 {
            let r = -self.coeffs[0] / self.coeffs[1];
            return if r > lo && r < hi {
                vec![r]
            } else {
                Vec::new()
            };
        }
        let mut knots = vec![lo];
        knots.extend(self.derivative().roots_in(lo, hi));
        knots.push(hi);
        let mut roots = Vec::new();
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (self.eval(a), self.eval(b));
            if fa == 0.0 && a > lo {
                if roots.last() != Some(&a) {
                    roots.push(a);
                }
            } else if fa * fb < 0.0 {
                roots.push(bisect(|x| (self.eval(x) > 0.0) == (fb > 0.0), a, b, 0.0));
            }
        }
        roots
    }

    /// Earliest `x` in `(0, hi]` where `pred(self(x))` holds, assuming it does
    /// not hold immediately to the right of 0. Localized by bisection to `tol`.
    pub fn first_crossing<F>(&self, hi: f64, tol: f64, pred: F) -> Option<f64>
    where
        F: Fn(f64) -> bool,
    {
        let mut knots = self.derivative().roots_in(0.0, hi);
        knots.push(hi);
        let mut lo = 0.0;
        for &b in &knots {
            if pred(self.eval(b)) {
                // monotone on [lo, b]: the predicate set is an interval ending at b
                return Some(bisect(|x| pred(self.eval(x)), lo, b, tol));
            }
            lo = b;
        }
        None
    }
}

/// Smallest point (to within `tol`, or full precision when `tol` is 0) where
/// the monotone predicate switches from false at `lo` to true at `hi`.
fn bisect<F: Fn(f64) -> bool>(pred: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

impl Add for &Poly {
    type Output = Poly;

    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(0.0)
                        + rhs.coeffs.get(k).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;

    fn sub(self, rhs: &Poly) -> Poly {
        self + &rhs.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;

    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}
