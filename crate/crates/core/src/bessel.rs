//! Bessel functions of the first kind of order 0 and 1, and the positive
//! zeros of `J0` that set the drumhead mode frequencies.
//!
//! Three evaluation regimes are used, chosen so the absolute error stays
//! near machine precision everywhere:
//!
//! * `|x| <= 4`: power series. The alternating terms stay below `I0(4) ~ 11`,
//!   so cancellation costs at most one decimal digit.
//! * `4 < |x| <= 25`: Miller's backward recurrence normalised with
//!   `J0 + 2 * (J2 + J4 + ...) = 1`.
//! * `|x| > 25`: Hankel asymptotic expansion, truncated at its smallest term
//!   (below `1e-20` in this range).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 4.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// Largest zero index accepted by [`zero_of_j0`].
pub const MAX_ZERO_INDEX: usize = 10_000;

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 50;

/// Bessel function of the first kind, order zero.
pub fn eval_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(j0_abs(x.abs()))
}

/// Bessel function of the first kind, order one.
pub fn eval_j1(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    let value = j1_abs(x.abs());
    Ok(if x < 0.0 { -value } else { value })
}

fn j0_abs(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        power_series(0, x)
    } else if x <= ASYMPTOTIC_LIMIT {
        miller(x).0
    } else {
        hankel(0, x)
    }
}

fn j1_abs(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        power_series(1, x)
    } else if x <= ASYMPTOTIC_LIMIT {
        miller(x).1
    } else {
        hankel(1, x)
    }
}

/// `J_n(x) = (x/2)^n * sum_k (-x^2/4)^k / (k! (k+n)!)` for `n` in {0, 1}.
fn power_series(order: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..64u32 {
        term *= q / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Returns `(J0(x), J1(x))` from a downward recurrence started well above
/// `x`, where `J_N(x)` is negligible.
fn miller(x: f64) -> (f64, f64) {
    let start = {
        let n = x as usize + 20 + (40.0 * x).sqrt() as usize;
        n + (n & 1)
    };
    let two_over_x = 2.0 / x;
    let mut above = 0.0; // J_{k+1}
    let mut current = 1e-30; // J_k
    let mut norm = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let below = k as f64 * two_over_x * current - above;
        if k % 2 == 0 {
            norm += 2.0 * current;
        }
        if k == 1 {
            j1 = current;
        }
        above = current;
        current = below;
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += current;
    (current / norm, j1 / norm)
}

/// Hankel expansion `J_n(x) = sqrt(2/(pi x)) (P cos w - Q sin w)` with
/// `w = x - n pi/2 - pi/4`. The phase is expanded with exact `sin x`/`cos x`
/// so no rounding is introduced by subtracting `pi/4` from a large `x`.
fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let eight_x = 8.0 * x;
    for k in 1..80u32 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * eight_x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-20 {
            break;
        }
    }
    let (s, c) = x.sin_cos();
    let (cos_w, sin_w) = match order {
        0 => ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2),
        _ => ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2),
    };
    (2.0 / (PI * x)).sqrt() * (p * cos_w - q * sin_w)
}

/// The `n`-th positive zero of `J0` (1-based).
///
/// Starts from McMahon's estimate `b + 1/(8b)` with `b = (n - 1/4) pi` and
/// refines with Newton's method using `J0' = -J1`. If Newton leaves the
/// bracket `[(n - 1/2) pi, n pi]` or fails to converge, bisection on that
/// bracket takes over.
pub fn zero_of_j0(n: usize) -> Result<f64> {
    if n == 0 || n > MAX_ZERO_INDEX {
        return Err(Error::domain(format!(
            "zero index must lie in 1..={MAX_ZERO_INDEX}, got {n}"
        )));
    }
    Ok(find_zero(n))
}

fn find_zero(n: usize) -> f64 {
    let lo = (n as f64 - 0.5) * PI;
    let hi = n as f64 * PI;
    let beta = (n as f64 - 0.25) * PI;
    let mut x = beta + 1.0 / (8.0 * beta);
    for _ in 0..NEWTON_MAX_ITER {
        let step = j0_abs(x) / j1_abs(x);
        x += step;
        if !(lo..=hi).contains(&x) || !x.is_finite() {
            break;
        }
        if step.abs() < NEWTON_TOL {
            return x;
        }
    }
    bisect(lo, hi)
}

fn bisect(mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = j0_abs(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let f_mid = j0_abs(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

/// Cached positive zeros of `J0`, `zeros[0]` being the first.
///
/// Growth is append-only, so a table shared behind `&` never changes
/// under a reader.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselZeroTable {
    zeros: Vec<f64>,
}

impl BesselZeroTable {
    /// Zeros `1..=max_order`.
    pub fn build(max_order: usize) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::domain("zero table needs max_order >= 1"));
        }
        let mut table = BesselZeroTable { zeros: Vec::new() };
        table.extend_to(max_order)?;
        Ok(table)
    }

    /// Computes any missing zeros up to `max_order`; existing entries are
    /// left untouched.
    pub fn extend_to(&mut self, max_order: usize) -> Result<()> {
        if max_order > MAX_ZERO_INDEX {
            return Err(Error::domain(format!(
                "zero index must lie in 1..={MAX_ZERO_INDEX}, got {max_order}"
            )));
        }
        for n in self.zeros.len() + 1..=max_order {
            self.zeros.push(find_zero(n));
        }
        Ok(())
    }

    pub fn max_order(&self) -> usize {
        self.zeros.len()
    }

    /// The `n`-th zero (1-based).
    pub fn zero(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.zeros.len() {
            return Err(Error::domain(format!(
                "mode {n} outside zero table of order {}",
                self.zeros.len()
            )));
        }
        Ok(self.zeros[n - 1])
    }

    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    /// First zero, the fundamental drumhead mode.
    pub fn fundamental(&self) -> f64 {
        self.zeros[0]
    }
}
