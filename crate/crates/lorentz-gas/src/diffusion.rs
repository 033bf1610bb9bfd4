//! Weak-coupling limit objects: generator coefficients, reflected SDE paths,
//! the stationary energy density, and speed-space densities including the
//! Maxwell–Boltzmann reference.
//!
//! On the rescaled clock the energy chain converges to the diffusion with
//! generator
//!
//! ```text
//! L f(x) = 1/2 a(x) f''(x) + b(x) f'(x)
//! a(x) = Sigma1^2 / (2x)
//! b(x) = dbeta2_mean / (2x) + dbeta4_mean / (4 x^2)
//! ```
//!
//! on `[xi_plus, inf)` with a reflecting floor. Setting the probability flux
//! `J = -(D1 rho)' + D2 rho` to zero (`D1 = a/2`, `D2 = b`) gives the
//! stationary energy density in closed form,
//!
//! ```text
//! rho_eq(x) ~ x^(1 + dbeta4/Sigma1^2) exp(2 dbeta2 x / Sigma1^2)
//!           = x^((d-1)/2 + C/k^2)     exp(-x / k^2),
//! ```
//!
//! normalized numerically on the half-line.

use crate::error::{Error, Result};
use crate::expansion::ExpansionCoeffs;
use crate::quadrature;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Coefficients of the limiting diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCoeffs {
    pub sigma1_sq: f64,
    pub delta_beta2_mean: f64,
    pub delta_beta4_mean: f64,
    pub xi_plus: f64,
    pub dim: usize,
    pub k_scatt_sq: f64,
    pub c: f64,
}

impl LimitCoeffs {
    pub fn from_expansion(coeffs: &ExpansionCoeffs, xi_plus: f64, dim: usize) -> Self {
        LimitCoeffs {
            sigma1_sq: coeffs.sigma1_sq,
            delta_beta2_mean: coeffs.delta_beta2_mean,
            delta_beta4_mean: coeffs.delta_beta4_mean,
            xi_plus,
            dim,
            k_scatt_sq: coeffs.k_scatt_sq,
            c: coeffs.c,
        }
    }
}

/// Drift and diffusion coefficients `(a(x), b(x))` of the limit generator.
pub fn limit_coefficients(x: f64, lc: &LimitCoeffs) -> (f64, f64) {
    debug_assert!(x > 0.0);
    let a = lc.sigma1_sq / (2.0 * x);
    let b = lc.delta_beta2_mean / (2.0 * x) + lc.delta_beta4_mean / (4.0 * x * x);
    (a, b)
}

/// Applies the generator to a test function given its derivative values at
/// `x`: `L f = 1/2 a f'' + b f'`.
pub fn generator_apply(x: f64, df: f64, d2f: f64, lc: &LimitCoeffs) -> f64 {
    let (a, b) = limit_coefficients(x, lc);
    0.5 * a * d2f + b * df
}

/// One reflected Euler–Maruyama path.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPath {
    pub taus: Vec<f64>,
    pub states: Vec<f64>,
    pub dt: f64,
}

/// Reflected Euler–Maruyama with caller-supplied drift `b(x)` and diffusion
/// variance rate `a(x)`:
///
/// ```text
/// X_{k+1} = X_k + b(X_k) dt + sqrt(a(X_k) dt) N(0,1),
/// ```
///
/// followed by mirror reflection `X -> 2 xi_plus - X` below the floor (the
/// same rule the chain uses). Records every `record_stride`-th state.
pub fn reflected_euler_maruyama_with<B, A, R>(
    x0: f64,
    xi_plus: f64,
    dt: f64,
    n_steps: usize,
    drift: B,
    diff_var: A,
    rng: &mut R,
    record_stride: usize,
) -> Result<DiffusionPath>
where
    B: Fn(f64) -> f64,
    A: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    if !(dt > 0.0) || record_stride == 0 {
        return Err(Error::InvalidParam(
            "dt must be > 0 and record_stride >= 1".into(),
        ));
    }
    if x0 < xi_plus {
        return Err(Error::InvalidParam("x0 must be >= xi_plus".into()));
    }
    // Safeguard scale: a single drift step crossing the whole initial
    // distance to the floor means dt is far too coarse.
    let guard = (x0 - xi_plus).max(1.0);
    let mut x = x0;
    let mut path = DiffusionPath {
        taus: vec![0.0],
        states: vec![x0],
        dt,
    };
    for k in 0..n_steps {
        let b = drift(x);
        let a = diff_var(x);
        if !(a >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "diffusion coefficient negative at x = {x}"
            )));
        }
        let step_drift = b.abs() * dt;
        if step_drift > guard {
            return Err(Error::StepTooLarge {
                step: step_drift,
                dist: guard,
            });
        }
        let z: f64 = StandardNormal.sample(rng);
        x += b * dt + (a * dt).sqrt() * z;
        if x < xi_plus {
            x = 2.0 * xi_plus - x;
        }
        if (k + 1) % record_stride == 0 || k + 1 == n_steps {
            path.taus.push((k + 1) as f64 * dt);
            path.states.push(x);
        }
    }
    Ok(path)
}

/// Reflected Euler–Maruyama for the limit diffusion itself.
pub fn reflected_euler_maruyama<R: Rng + ?Sized>(
    x0: f64,
    lc: &LimitCoeffs,
    dt: f64,
    t_max: f64,
    rng: &mut R,
) -> Result<DiffusionPath> {
    if !(t_max >= dt) {
        return Err(Error::InvalidParam("t_max must be >= dt".into()));
    }
    let n_steps = (t_max / dt).round() as usize;
    reflected_euler_maruyama_with(
        x0,
        lc.xi_plus,
        dt,
        n_steps,
        |x| limit_coefficients(x, lc).1,
        |x| limit_coefficients(x, lc).0,
        rng,
        1,
    )
}

/// Cumulative distribution tabulated on a uniform grid (per-interval Simpson),
/// with linear interpolation and an inverse for equilibrium sampling.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    lo: f64,
    dx: f64,
    cum: Vec<f64>,
}

impl TabulatedCdf {
    pub fn build<F: Fn(f64) -> f64>(pdf: F, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || n < 8 {
            return Err(Error::InvalidParam("bad cdf table range".into()));
        }
        let dx = (hi - lo) / n as f64;
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let a = lo + i as f64 * dx;
            let b = a + dx;
            acc += dx / 6.0 * (pdf(a) + 4.0 * pdf(0.5 * (a + b)) + pdf(b));
            cum.push(acc);
        }
        Ok(TabulatedCdf { lo, dx, cum })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.cum.len() - 1;
        let s = (x - self.lo) / self.dx;
        if s <= 0.0 {
            return 0.0;
        }
        if s >= n as f64 {
            return self.cum[n];
        }
        let i = s.floor() as usize;
        let frac = s - i as f64;
        self.cum[i] * (1.0 - frac) + self.cum[i + 1] * frac
    }

    /// Inverse by bisection on the monotone table; `u` in `[0, total mass)`.
    pub fn inverse(&self, u: f64) -> f64 {
        let n = self.cum.len() - 1;
        let total = self.cum[n];
        let u = u.clamp(0.0, total);
        let mut lo = 0usize;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cum[mid] <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = self.cum[hi] - self.cum[lo];
        let frac = if span > 0.0 { (u - self.cum[lo]) / span } else { 0.5 };
        self.lo + (lo as f64 + frac) * self.dx
    }
}

/// Stationary energy density of the reflected limit diffusion on
/// `[xi_plus, inf)`, from the zero-flux condition.
#[derive(Debug, Clone)]
pub struct StationaryEnergyDensity {
    pub exponent: f64,
    /// Exponential rate; equals `1 / k_scatt^2` for ensemble coefficients.
    pub rate: f64,
    pub xi_plus: f64,
    norm: f64,
}

impl StationaryEnergyDensity {
    pub fn new(lc: &LimitCoeffs) -> Result<Self> {
        if !(lc.sigma1_sq > 0.0) {
            return Err(Error::NotNormalizable(
                "sigma1_sq must be positive".into(),
            ));
        }
        let exponent = 1.0 + lc.delta_beta4_mean / lc.sigma1_sq;
        let rate = -2.0 * lc.delta_beta2_mean / lc.sigma1_sq;
        if !(rate > 0.0) {
            return Err(Error::NotNormalizable(format!(
                "exponential rate {rate} is not positive (delta_beta2_mean must be < 0)"
            )));
        }
        let shape = |x: f64| (exponent * x.ln() - rate * x).exp();
        let norm =
            quadrature::integrate_half_line(shape, lc.xi_plus, 1.0 / rate, 1e-12)?;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalizable("normalization integral failed".into()));
        }
        Ok(StationaryEnergyDensity {
            exponent,
            rate,
            xi_plus: lc.xi_plus,
            norm,
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.xi_plus {
            return 0.0;
        }
        (self.exponent * x.ln() - self.rate * x).exp() / self.norm
    }

    /// Upper cut with tail mass far below any tolerance used here.
    pub fn suggested_upper(&self) -> f64 {
        self.xi_plus + (self.exponent.abs() + 60.0) / self.rate
    }

    pub fn cdf_table(&self, n: usize) -> Result<TabulatedCdf> {
        TabulatedCdf::build(|x| self.pdf(x), self.xi_plus, self.suggested_upper(), n)
    }
}

/// Stationary speed density on `[sqrt(2 xi_plus), inf)`: per collision
/// `~ p^(d + 2C/k^2) exp(-p^2/2k^2)`, or weighted by the holding time
/// `ell_star/p` between collisions, `~ p^(d - 1 + 2C/k^2) exp(-p^2/2k^2)`.
#[derive(Debug, Clone)]
pub struct StationarySpeedDensity {
    pub exponent: f64,
    pub k_sq: f64,
    pub p_min: f64,
    norm: f64,
}

impl StationarySpeedDensity {
    pub fn new(lc: &LimitCoeffs, time_weighted: bool) -> Result<Self> {
        if !(lc.k_scatt_sq > 0.0) {
            return Err(Error::NotNormalizable("k_scatt_sq must be positive".into()));
        }
        let d = lc.dim as f64;
        let base = if time_weighted { d - 1.0 } else { d };
        let exponent = base + 2.0 * lc.c / lc.k_scatt_sq;
        let k_sq = lc.k_scatt_sq;
        let p_min = (2.0 * lc.xi_plus).sqrt();
        let shape = move |p: f64| (exponent * p.ln() - 0.5 * p * p / k_sq).exp();
        let norm = quadrature::integrate_half_line(shape, p_min, k_sq.sqrt(), 1e-12)?;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalizable("normalization integral failed".into()));
        }
        Ok(StationarySpeedDensity {
            exponent,
            k_sq,
            p_min,
            norm,
        })
    }

    pub fn pdf(&self, p: f64) -> f64 {
        if p < self.p_min {
            return 0.0;
        }
        (self.exponent * p.ln() - 0.5 * p * p / self.k_sq).exp() / self.norm
    }

    pub fn suggested_upper(&self) -> f64 {
        self.p_min + self.k_sq.sqrt() * (self.exponent.abs().sqrt() + 14.0)
    }

    pub fn cdf_table(&self, n: usize) -> Result<TabulatedCdf> {
        TabulatedCdf::build(|p| self.pdf(p), self.p_min, self.suggested_upper(), n)
    }
}

/// `Gamma(d/2)` for integer `d` (exact half-integer recursion).
fn gamma_half(d: usize) -> f64 {
    let target = d as f64 / 2.0;
    let (mut x, mut g) = if d % 2 == 0 {
        (1.0, 1.0)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Maxwell–Boltzmann speed distribution in `d` dimensions at temperature `T`
/// (Boltzmann constant 1): `p^(d-1) exp(-p^2/2T)`, normalized on `[0, inf)`.
#[derive(Debug, Clone, Copy)]
pub struct MaxwellBoltzmann {
    pub t: f64,
    pub dim: usize,
    norm: f64,
}

impl MaxwellBoltzmann {
    pub fn new(t: f64, dim: usize) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidParam("temperature must be > 0".into()));
        }
        if dim < 1 {
            return Err(Error::InvalidParam("dim must be >= 1".into()));
        }
        // int_0^inf p^(d-1) e^(-p^2/2T) dp = 2^(d/2 - 1) Gamma(d/2) T^(d/2)
        let d = dim as f64;
        let norm = 2f64.powf(0.5 * d - 1.0) * gamma_half(dim) * t.powf(0.5 * d);
        Ok(MaxwellBoltzmann { t, dim, norm })
    }

    pub fn pdf(&self, p: f64) -> f64 {
        if p < 0.0 {
            return 0.0;
        }
        let d = self.dim as f64;
        ((d - 1.0) * p.ln() - 0.5 * p * p / self.t).exp() / self.norm
    }

    pub fn cdf_table(&self, n: usize) -> Result<TabulatedCdf> {
        let hi = self.t.sqrt() * ((self.dim as f64).sqrt() + 14.0);
        TabulatedCdf::build(|p| self.pdf(p), 0.0, hi, n)
    }
}

/// Normalized Maxwell–Boltzmann speed density value.
pub fn maxwell_boltzmann_density(p: f64, t: f64, dim: usize) -> Result<f64> {
    Ok(MaxwellBoltzmann::new(t, dim)?.pdf(p))
}

/// Probability flux `J(x) = -(D1 rho)'(x) + D2(x) rho(x)` of the stationary
/// density, with the derivative taken by a five-point central difference.
/// Vanishes identically for the zero-flux solution.
pub fn stationary_flux_fd(
    density: &StationaryEnergyDensity,
    lc: &LimitCoeffs,
    x: f64,
    h: f64,
) -> f64 {
    let d1_rho = |x: f64| {
        let (a, _) = limit_coefficients(x, lc);
        0.5 * a * density.pdf(x)
    };
    let deriv = (-d1_rho(x + 2.0 * h) + 8.0 * d1_rho(x + h) - 8.0 * d1_rho(x - h)
        + d1_rho(x - 2.0 * h))
        / (12.0 * h);
    let (_, b) = limit_coefficients(x, lc);
    -deriv + b * density.pdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn synthetic_lc(sigma1_sq: f64, k_sq: f64, c: f64, dim: usize, xi_plus: f64) -> LimitCoeffs {
        // Consistent synthetic coefficients: dbeta2 = -sigma^2/(2 k^2),
        // dbeta4 = sigma^2 ((d-3)/2 + c/k^2).
        let d = dim as f64;
        LimitCoeffs {
            sigma1_sq,
            delta_beta2_mean: -0.5 * sigma1_sq / k_sq,
            delta_beta4_mean: sigma1_sq * ((d - 3.0) / 2.0 + c / k_sq),
            xi_plus,
            dim,
            k_scatt_sq: k_sq,
            c,
        }
    }

    #[test]
    fn coefficient_values_and_decay() {
        let lc = synthetic_lc(1.0, 1.0, 0.0, 3, 1.0);
        let (a, _) = limit_coefficients(1.0, &lc);
        assert_eq!(a, 0.5);
        let (a, b) = limit_coefficients(1e8, &lc);
        assert!(a.abs() < 1e-7 && b.abs() < 1e-7);
    }

    #[test]
    fn generator_on_polynomials() {
        let lc = synthetic_lc(0.8, 2.0, 0.1, 2, 1.0);
        let x = 3.0;
        let (a, b) = limit_coefficients(x, &lc);
        assert_eq!(generator_apply(x, 0.0, 0.0, &lc), 0.0);
        assert_eq!(generator_apply(x, 1.0, 0.0, &lc), b);
        assert_relative_eq!(
            generator_apply(x, 2.0 * x, 2.0, &lc),
            a + 2.0 * x * b,
            epsilon = 1e-14
        );
    }

    #[test]
    fn em_zero_coefficients_constant_path() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let path = reflected_euler_maruyama_with(
            2.0,
            1.0,
            0.01,
            100,
            |_| 0.0,
            |_| 0.0,
            &mut rng,
            1,
        )
        .unwrap();
        assert!(path.states.iter().all(|&x| x == 2.0));
    }

    #[test]
    fn em_drift_to_floor_reflects() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let path = reflected_euler_maruyama_with(
            1.5,
            1.0,
            0.01,
            200,
            |_| -1.0,
            |_| 0.0,
            &mut rng,
            1,
        )
        .unwrap();
        assert!(path.states.iter().all(|&x| x >= 1.0));
        // Decreases, then oscillates in the band right above the floor.
        assert!(path.states[10] < 1.5);
        let tail = &path.states[60..];
        assert!(tail.iter().all(|&x| x <= 1.0 + 0.011));
    }

    #[test]
    fn em_step_too_large_detected() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let err = reflected_euler_maruyama_with(
            1.5,
            1.0,
            2.0,
            10,
            |_| -1.0,
            |_| 0.0,
            &mut rng,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn em_matches_ou_moments() {
        // Synthetic Ornstein-Uhlenbeck without boundary activation:
        // dX = -theta (X - mu) dt + sigma dW.
        let (theta, mu, sigma) = (1.2, 3.0, 0.5);
        let (x0, t_max, dt) = (2.0f64, 1.0f64, 1e-3f64);
        let n_paths = 10_000;
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let n_steps = (t_max / dt).round() as usize;
        for _ in 0..n_paths {
            let path = reflected_euler_maruyama_with(
                x0,
                -1e6, // floor far away
                dt,
                n_steps,
                |x| -theta * (x - mu),
                |_| sigma * sigma,
                &mut rng,
                n_steps,
            )
            .unwrap();
            let xt = *path.states.last().unwrap();
            sum += xt;
            sum_sq += xt * xt;
        }
        let mean = sum / n_paths as f64;
        let var = sum_sq / n_paths as f64 - mean * mean;
        let exact_mean = mu + (x0 - mu) * (-theta * t_max).exp();
        let exact_var = sigma * sigma / (2.0 * theta) * (1.0 - (-2.0 * theta * t_max).exp());
        let se_mean = (exact_var / n_paths as f64).sqrt();
        // SE of the variance of a Gaussian sample: var * sqrt(2/n).
        let se_var = exact_var * (2.0 / n_paths as f64).sqrt();
        assert!(
            (mean - exact_mean).abs() < 3.0 * se_mean + theta * dt,
            "mean {mean} vs {exact_mean}"
        );
        assert!(
            (var - exact_var).abs() < 3.0 * se_var + sigma * sigma * dt,
            "var {var} vs {exact_var}"
        );
    }

    #[test]
    fn stationary_density_normalized_and_gamma_shaped() {
        let lc = synthetic_lc(0.9, 1.3, 0.0, 2, 1.0);
        let sd = StationaryEnergyDensity::new(&lc).unwrap();
        let mass = quadrature::integrate_half_line(
            |x| sd.pdf(x),
            lc.xi_plus,
            1.0,
            1e-10,
        )
        .unwrap();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-8);
        // C = 0 reduces to the pure Gamma-type shape x^((d-1)/2) e^(-x/k^2).
        assert_relative_eq!(sd.exponent, 0.5, epsilon = 1e-14);
        assert_relative_eq!(sd.rate, 1.0 / 1.3, epsilon = 1e-14);
    }

    #[test]
    fn stationary_density_rejects_bad_coefficients() {
        let mut lc = synthetic_lc(1.0, 1.0, 0.0, 2, 1.0);
        lc.delta_beta2_mean = 0.1; // growing exponential: not normalizable
        assert!(matches!(
            StationaryEnergyDensity::new(&lc),
            Err(Error::NotNormalizable(_))
        ));
    }

    #[test]
    fn closed_form_matches_zero_flux_ode() {
        // Integrate (D1 rho)' = D2 rho from the floor and compare shapes.
        let lc = synthetic_lc(0.7, 1.1, 0.23, 2, 1.0);
        let sd = StationaryEnergyDensity::new(&lc).unwrap();
        let x_max = 12.0;
        let n = 20_000;
        let h = (x_max - lc.xi_plus) / n as f64;
        // y = D1 rho, y' = (D2/D1) y.
        let ratio = |x: f64| {
            let (a, b) = limit_coefficients(x, &lc);
            b / (0.5 * a)
        };
        let d1 = |x: f64| 0.5 * limit_coefficients(x, &lc).0;
        let mut y = d1(lc.xi_plus) * sd.pdf(lc.xi_plus);
        let mut max_rel = 0.0f64;
        for i in 0..n {
            let x = lc.xi_plus + i as f64 * h;
            let k1 = ratio(x) * y;
            let k2 = ratio(x + 0.5 * h) * (y + 0.5 * h * k1);
            let k3 = ratio(x + 0.5 * h) * (y + 0.5 * h * k2);
            let k4 = ratio(x + h) * (y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let x1 = x + h;
            let rho_ode = y / d1(x1);
            let rho_cf = sd.pdf(x1);
            if rho_cf > 1e-12 {
                max_rel = max_rel.max((rho_ode - rho_cf).abs() / rho_cf);
            }
        }
        assert!(max_rel <= 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn flux_vanishes_on_grid() {
        let lc = synthetic_lc(0.7, 1.1, 0.23, 2, 1.0);
        let sd = StationaryEnergyDensity::new(&lc).unwrap();
        let max_pdf = sd.pdf(1.0).max(sd.pdf(1.5)).max(sd.pdf(2.0));
        for i in 0..200 {
            let x = 1.05 + i as f64 * 0.05;
            let j = stationary_flux_fd(&sd, &lc, x, 1e-3);
            assert!(j.abs() <= 1e-6 * max_pdf, "flux {j} at x = {x}");
        }
    }

    #[test]
    fn generator_density_duality() {
        // For smooth f supported away from the boundary,
        // int L f rho dx = 0 at stationarity.
        let lc = synthetic_lc(0.7, 1.1, 0.23, 2, 1.0);
        let sd = StationaryEnergyDensity::new(&lc).unwrap();
        let (x1, x2) = (1.5, 6.0);
        // Smooth bump on (x1, x2): f = exp(-1/(1-u^2)), u in (-1, 1).
        let fu = |x: f64| {
            let u = (2.0 * x - (x1 + x2)) / (x2 - x1);
            if u.abs() >= 1.0 {
                return (0.0, 0.0, 0.0);
            }
            let w = 1.0 - u * u;
            let f = (-1.0 / w).exp();
            let g1 = -2.0 * u / (w * w);
            let g2 = -(2.0 + 6.0 * u * u) / (w * w * w);
            let du = 2.0 / (x2 - x1);
            (f, f * g1 * du, f * (g1 * g1 + g2) * du * du)
        };
        let integral = quadrature::integrate(
            |x| {
                let (_, df, d2f) = fu(x);
                generator_apply(x, df, d2f, &lc) * sd.pdf(x)
            },
            x1,
            x2,
            1e-11,
        )
        .unwrap();
        assert!(integral.abs() < 1e-8, "duality integral {integral}");
    }

    #[test]
    fn speed_density_weighting_ratio() {
        let lc = synthetic_lc(0.9, 1.4, 0.17, 3, 1.0);
        let per = StationarySpeedDensity::new(&lc, false).unwrap();
        let tw = StationarySpeedDensity::new(&lc, true).unwrap();
        // Ratio of time-weighted to per-collision density is proportional
        // to 1/p pointwise.
        let c0 = tw.pdf(2.0) / per.pdf(2.0) * 2.0;
        for p in [1.6, 2.5, 3.5, 5.0] {
            let c = tw.pdf(p) / per.pdf(p) * p;
            assert_relative_eq!(c, c0, epsilon = 1e-9);
        }
    }

    #[test]
    fn time_weighted_density_approaches_maxwell_boltzmann() {
        // C = 0 and a vanishing floor: same formula as the d-dimensional
        // Maxwell-Boltzmann speed density up to support renormalization.
        let xi = 1e-6;
        let lc = synthetic_lc(1.0, 1.0, 0.0, 2, xi);
        let tw = StationarySpeedDensity::new(&lc, true).unwrap();
        let mb = MaxwellBoltzmann::new(1.0, 2).unwrap();
        let cut_mass = quadrature::integrate(|p| mb.pdf(p), 0.0, (2.0 * xi).sqrt(), 1e-14)
            .unwrap();
        for p in [0.2, 0.7, 1.3, 2.4, 3.7] {
            let rel = (tw.pdf(p) * (1.0 - cut_mass) / mb.pdf(p) - 1.0).abs();
            assert!(rel <= 1e-6, "rel err {rel} at p = {p}");
        }
    }

    #[test]
    fn speed_density_mode_in_three_dimensions() {
        // d = 3, C = 0, time-weighted: mode at p = sqrt(2) k.
        let k_sq = 1.7;
        let lc = synthetic_lc(1.0, k_sq, 0.0, 3, 1e-9);
        let tw = StationarySpeedDensity::new(&lc, true).unwrap();
        let mode = (2.0 * k_sq).sqrt();
        let d = 1e-4;
        assert!(tw.pdf(mode) > tw.pdf(mode + d));
        assert!(tw.pdf(mode) > tw.pdf(mode - d));
    }

    #[test]
    fn maxwell_boltzmann_normalization_and_moments() {
        for (t, d) in [(1.0, 2), (0.7, 3), (2.5, 4), (1.3, 5)] {
            let mb = MaxwellBoltzmann::new(t, d).unwrap();
            let mass =
                quadrature::integrate_half_line(|p| mb.pdf(p), 0.0, t.sqrt(), 1e-12).unwrap();
            assert_relative_eq!(mass, 1.0, epsilon = 1e-10);
            // Second moment d*T (Gaussian identity).
            let m2 = quadrature::integrate_half_line(
                |p| p * p * mb.pdf(p),
                0.0,
                t.sqrt(),
                1e-12,
            )
            .unwrap();
            assert_relative_eq!(m2, d as f64 * t, epsilon = 1e-8);
        }
    }

    #[test]
    fn cdf_table_round_trip() {
        let mb = MaxwellBoltzmann::new(1.0, 3).unwrap();
        let cdf = mb.cdf_table(4096).unwrap();
        assert!(cdf.eval(0.0) == 0.0);
        assert!((cdf.eval(100.0) - 1.0).abs() < 1e-9);
        for u in [0.1, 0.5, 0.9] {
            let x = cdf.inverse(u);
            assert_relative_eq!(cdf.eval(x), u, epsilon = 1e-9);
        }
    }
}
