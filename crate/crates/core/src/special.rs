//! Special functions.

use std::f64::consts::{FRAC_PI_4, PI};

/// Crossover between the power series and the Hankel asymptotic expansion.
const SERIES_LIMIT: f64 = 12.0;

/// Bessel function of the first kind, order zero.
///
/// Power series for `|x| ≤ 12`, Hankel asymptotic expansion beyond.
/// Absolute error stays below 1e-11 on the real line.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        let next = sum + term;
        if next == sum {
            break;
        }
        sum = next;
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    // t_k = a_k(0) / x^k with a_k(0) = Π_{i≤k} (-(2i-1)²) / (k! 8^k).
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    for k in 1..100 {
        let odd = (2 * k - 1) as f64;
        let next = term * (-odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        // P collects even k with sign (-1)^{k/2}; Q collects odd k with sign (-1)^{(k-1)/2}.
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
