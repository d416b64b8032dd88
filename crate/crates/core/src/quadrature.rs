//! Composite Simpson quadrature with interval doubling.

use crate::error::{Error, Result};

const MAX_DOUBLINGS: u32 = 22;

/// Integrates `f` over `[a, b]` by composite Simpson, doubling the interval
/// count until successive estimates agree to `rel_tol` (or to `abs_floor`,
/// whichever is looser).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut n: usize = 2;
    let mut h = (b - a) / n as f64;
    let ends = f(a) + f(b);
    let mut even = 0.0; // interior points kept from coarser levels
    let mut odd = f(a + h);
    let mut prev = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
    for _ in 0..MAX_DOUBLINGS {
        even += odd;
        n *= 2;
        h = (b - a) / n as f64;
        odd = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum();
        let next = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        let delta = (next - prev).abs();
        if !next.is_finite() {
            return Err(Error::Numerical {
                op: "simpson",
                reason: format!("non-finite estimate on [{a}, {b}] at {n} intervals"),
            });
        }
        if n >= 16 && (delta <= rel_tol * next.abs() || delta <= abs_floor) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical {
        op: "simpson",
        reason: format!(
            "no convergence on [{a}, {b}] after {n} intervals: last estimates {prev:e} and \
             differences above tolerance {rel_tol:e}"
        ),
    })
}

/// Integrates over `[a, b]` with extra breakpoints at geometrically growing
/// distances from `origin`, which resolves profiles that decay on very
/// different scales above the ground.
pub fn integrate_from_ground<F: Fn(f64) -> f64>(
    f: F,
    origin: f64,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a >= b {
        return Ok(0.0);
    }
    let mut points = vec![a];
    let mut offset = 25.0;
    while origin + offset < b {
        let p = origin + offset;
        if p > a {
            points.push(p);
        }
        offset *= 2.0;
    }
    points.push(b);

    let coarse: f64 = points
        .windows(2)
        .map(|w| coarse_simpson(&f, w[0], w[1]))
        .sum::<f64>()
        .abs();
    let floor = rel_tol * 1e-3 * coarse / points.len() as f64;
    let mut total = 0.0;
    for w in points.windows(2) {
        total += simpson(&f, w[0], w[1], rel_tol, floor)?;
    }
    Ok(total)
}

fn coarse_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let n = 64;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
