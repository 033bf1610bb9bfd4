//! Adaptive Gauss–Kronrod quadrature (7-point Gauss, 15-point Kronrod).
//!
//! Panels are split greedily by estimated error until the summed estimate
//! meets the requested absolute tolerance. Good for the smooth, compactly
//! supported integrands this crate produces; not a general-purpose library.

use crate::error::{Error, Result};

/// Kronrod abscissae (positive half), 15-point rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the embedded 7-point rule (odd Kronrod abscissae).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One panel evaluation: returns (kronrod value, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, &x) in XGK.iter().enumerate().take(7) {
        let dx = h * x;
        let fsum = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    kronrod *= h;
    gauss *= h;
    (kronrod, (kronrod - gauss).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_PANELS: usize = 4096;
    let (value, err) = gk15(&f, a, b);
    let mut panels = vec![Panel { a, b, value, err }];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= abs_tol {
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureNotConverged {
                best: total_err,
                tol: abs_tol,
            });
        }
        // Split the worst panel.
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap();
        let Panel { a, b, .. } = panels.swap_remove(worst);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            // Interval no longer splittable in f64; accept what we have.
            return Err(Error::QuadratureNotConverged {
                best: total_err,
                tol: abs_tol,
            });
        }
        for (lo, hi) in [(a, m), (m, b)] {
            let (value, err) = gk15(&f, lo, hi);
            panels.push(Panel {
                a: lo,
                b: hi,
                value,
                err,
            });
        }
    }
}

/// Integrates `f` over `[a, +inf)` for integrands with decaying tails.
///
/// Sums adaptive panels of doubling width and stops once two consecutive
/// panels contribute less than a fraction of the tolerance.
pub fn integrate_half_line<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    first_width: f64,
    abs_tol: f64,
) -> Result<f64> {
    assert!(first_width > 0.0);
    let mut lo = a;
    let mut w = first_width;
    let mut total = 0.0;
    let mut quiet = 0usize;
    for _ in 0..128 {
        let part = integrate(&f, lo, lo + w, abs_tol * 0.25)?;
        total += part;
        if part.abs() < 0.125 * abs_tol {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo += w;
        w *= 2.0;
    }
    Err(Error::QuadratureNotConverged {
        best: f64::NAN,
        tol: abs_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(v, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn oscillatory_integrand() {
        // \int_0^1 sin^2(pi x) dx = 1/2
        let v = integrate(|x| (PI * x).sin().powi(2), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn kink_is_handled_by_subdivision() {
        // \int_{-1}^{1} |x| dx = 1
        let v = integrate(|x: f64| x.abs(), -1.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn half_line_gaussian_tail() {
        // \int_0^inf e^{-x^2/2} dx = sqrt(pi/2)
        let v = integrate_half_line(|x| (-0.5 * x * x).exp(), 0.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, (PI / 2.0).sqrt(), epsilon = 1e-9);
    }
}
