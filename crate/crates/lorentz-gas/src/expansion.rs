//! High-energy expansion of the per-collision energy transfer.
//!
//! For a fast particle the transfer of one collision expands in inverse
//! powers of the speed,
//!
//! ```text
//! dE = alpha_star * beta1(kappa)/|p|
//!    + alpha_star^2 * ( dbeta2(kappa)/|p|^2 + dbeta4/|p|^4 ) + remainders,
//! ```
//!
//! with coefficients built from line integrals of the form factor along the
//! impact chord. This module computes those chord integrals, the
//! per-collision coefficients, their averages over the collision randomness,
//! and the truncated step map that drives the coarse Markov chain.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::scatter::{FormFactor, Kappa, ModelParams, ScattererPotential};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Absolute tolerance of single chord integrals.
pub const CHORD_TOL: f64 = 1e-10;
/// Absolute tolerance of the nested ensemble averages.
pub const ENSEMBLE_TOL: f64 = 1e-8;

/// Which chord integral family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralKind {
    /// `L_k(mu, |b|) = int_0^mu lambda^k sigma(b + (lambda - 1/2) e) dlambda`
    L,
    /// `K_k(mu, |b|) = int_0^mu L_k(lambda, |b|) dlambda`
    K,
}

/// Chord line-integral evaluators for a fixed form factor.
///
/// The chord at impact distance `|b|` is parameterised by `lambda` in
/// `[0, 1]`, entering the interaction ball side at `lambda = 0`; the profile
/// along it is `sigma(sqrt(|b|^2 + (lambda - 1/2)^2))`.
#[derive(Debug, Clone)]
pub struct GeometricIntegrals {
    ff: FormFactor,
    tol: f64,
}

impl GeometricIntegrals {
    pub fn new(ff: FormFactor) -> Self {
        GeometricIntegrals { ff, tol: CHORD_TOL }
    }

    pub fn with_tolerance(ff: FormFactor, tol: f64) -> Self {
        GeometricIntegrals { ff, tol }
    }

    /// Profile value at chord parameter `lambda` for impact distance `b`.
    #[inline]
    pub fn chord_sigma(&self, lambda: f64, b_norm: f64) -> f64 {
        let u = lambda - 0.5;
        self.ff.sigma((b_norm * b_norm + u * u).sqrt())
    }

    /// `L_k(mu, |b|)` for `k` in {0, 1}.
    pub fn l(&self, k: u8, mu: f64, b_norm: f64) -> Result<f64> {
        debug_assert!(k <= 1);
        if b_norm >= 0.5 || mu == 0.0 {
            return Ok(0.0);
        }
        quadrature::integrate(
            |lambda| lambda.powi(k as i32) * self.chord_sigma(lambda, b_norm),
            0.0,
            mu,
            self.tol,
        )
    }

    /// `K_k(mu, |b|)`, reduced to a single integral:
    /// `int_0^mu (mu - t) t^k sigma(chord t) dt`.
    pub fn k(&self, k: u8, mu: f64, b_norm: f64) -> Result<f64> {
        debug_assert!(k <= 1);
        if b_norm >= 0.5 || mu == 0.0 {
            return Ok(0.0);
        }
        quadrature::integrate(
            |t| (mu - t) * t.powi(k as i32) * self.chord_sigma(t, b_norm),
            0.0,
            mu,
            self.tol,
        )
    }

    /// Nested chord constant entering the fourth-order average:
    /// `int_0^1 dl int_0^l dl' K_0(l', |b|) sigma(chord l')`,
    /// reduced to `int_0^1 (1 - l) K_0(l, |b|) sigma(chord l) dl`.
    pub fn nested_k0_sigma(&self, b_norm: f64) -> Result<f64> {
        if b_norm >= 0.5 {
            return Ok(0.0);
        }
        quadrature::integrate(
            |l| {
                let k0 = self.k(0, l, b_norm).unwrap_or(f64::NAN);
                (1.0 - l) * k0 * self.chord_sigma(l, b_norm)
            },
            0.0,
            1.0,
            self.tol.max(1e-9),
        )
    }
}

/// One chord integral value; see [`GeometricIntegrals`].
pub fn geometric_integral(
    kind: IntegralKind,
    k: u8,
    mu: f64,
    b_norm: f64,
    ff: &FormFactor,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParam(format!("mu must be in [0,1], got {mu}")));
    }
    if b_norm < 0.0 {
        return Err(Error::InvalidParam("b_norm must be >= 0".into()));
    }
    let gi = GeometricIntegrals::new(ff.clone());
    match kind {
        IntegralKind::L => gi.l(k, mu, b_norm),
        IntegralKind::K => gi.k(k, mu, b_norm),
    }
}

/// First-order coefficient `beta1(kappa) = (P / sqrt(M)) L_0(1, |b|)`.
/// Linear in P, hence of zero mean under any P-symmetric scatterer law.
pub fn beta1(kappa: &Kappa, mass_ratio: f64, ff: &FormFactor) -> Result<f64> {
    let l0 = GeometricIntegrals::new(ff.clone()).l(0, 1.0, kappa.b_norm())?;
    Ok(kappa.p_scat / mass_ratio.sqrt() * l0)
}

/// Second-order coefficient `dbeta2(kappa) = -L_0(1, |b|)^2 / 2`; never
/// positive.
pub fn delta_beta2(kappa: &Kappa, ff: &FormFactor) -> Result<f64> {
    let l0 = GeometricIntegrals::new(ff.clone()).l(0, 1.0, kappa.b_norm())?;
    Ok(-0.5 * l0 * l0)
}

/// Law of the scatterer's initial state `(Q, P)`: a stationary,
/// compact-support, P-symmetric distribution of the free scatterer dynamics.
///
/// Both laws are realised through harmonic action-angle variables
/// (`Q = sqrt(2E) sin(theta)`, `P = sqrt(2ME) cos(theta)`, `theta` uniform),
/// so they require the harmonic potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScattererLaw {
    /// All scatterers on the energy shell `H_scatt = e_star`.
    Microcanonical { e_star: f64 },
    /// `density(E) ~ exp(-beta E)` truncated to `[0, cutoff]`.
    TruncatedGibbs { beta: f64, cutoff: f64 },
}

impl ScattererLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScattererLaw::Microcanonical { e_star } => {
                if !e_star.is_finite() || e_star < 0.0 {
                    return Err(Error::InvalidParam("e_star must be >= 0".into()));
                }
            }
            ScattererLaw::TruncatedGibbs { beta, cutoff } => {
                if !(beta > 0.0) || !(cutoff > 0.0) {
                    return Err(Error::InvalidParam(
                        "truncated Gibbs needs beta > 0 and cutoff > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Mean scatterer energy `E* = mean of H_scatt`.
    pub fn mean_energy(&self) -> f64 {
        match *self {
            ScattererLaw::Microcanonical { e_star } => e_star,
            ScattererLaw::TruncatedGibbs { beta, cutoff } => {
                // Mean of Exp(beta) conditioned on E <= cutoff.
                let z = 1.0 - (-beta * cutoff).exp();
                1.0 / beta - cutoff * (-beta * cutoff).exp() / z
            }
        }
    }

    /// `mean(P^2) = M * E*` for these action-angle laws.
    pub fn mean_p_sq(&self, mass_ratio: f64) -> f64 {
        mass_ratio * self.mean_energy()
    }

    /// Draws one scatterer energy from the law.
    fn sample_energy<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScattererLaw::Microcanonical { e_star } => e_star,
            ScattererLaw::TruncatedGibbs { beta, cutoff } => {
                let z = 1.0 - (-beta * cutoff).exp();
                let u: f64 = rng.random();
                -(1.0 - u * z).ln() / beta
            }
        }
    }

    /// Draws `(Q, P)` on the sampled energy shell with a uniform phase.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, mass_ratio: f64) -> (f64, f64) {
        let e = self.sample_energy(rng);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let (s, c) = theta.sin_cos();
        ((2.0 * e).sqrt() * s, (2.0 * mass_ratio * e).sqrt() * c)
    }
}

/// Full law of the collision randomness: the scatterer-state law plus the
/// impact law (uniform on the radius-1/2 ball orthogonal to the incoming
/// direction) in a given ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub law: ScattererLaw,
    pub dim: usize,
}

impl EnsembleSpec {
    pub fn new(law: ScattererLaw, dim: usize) -> Result<Self> {
        law.validate()?;
        if dim < 2 {
            return Err(Error::InvalidParam("dim must be >= 2".into()));
        }
        Ok(EnsembleSpec { law, dim })
    }

    /// Average of `f(|b|)` under the uniform impact law: the radial density
    /// over `[0, 1/2]` is `(d-1) 2^(d-1) r^(d-2)`.
    pub fn impact_average<F: Fn(f64) -> f64>(&self, f: F, tol: f64) -> Result<f64> {
        let d = self.dim as f64;
        let w = (d - 1.0) * 2f64.powi(self.dim as i32 - 1);
        quadrature::integrate(|r| w * r.powi(self.dim as i32 - 2) * f(r), 0.0, 0.5, tol)
    }
}

/// Expansion coefficients averaged over the collision randomness. Field
/// names match the JSON export schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoeffs {
    /// Mean scatterer energy.
    #[serde(rename = "E_star")]
    pub e_star: f64,
    /// Temperature-like scale `k_scatt^2 = mean(P^2)/M`.
    #[serde(rename = "k_scatt_sq")]
    pub k_scatt_sq: f64,
    /// `mean over b of L_0(1, |b|)^2`.
    #[serde(rename = "L0_sq_mean")]
    pub l0_sq_mean: f64,
    /// `Sigma_1^2 = k_scatt^2 * L0_sq_mean = mean(beta1^2)`.
    #[serde(rename = "Sigma1_sq")]
    pub sigma1_sq: f64,
    /// `mean(dbeta2) = -L0_sq_mean / 2`.
    #[serde(rename = "delta_beta2_mean")]
    pub delta_beta2_mean: f64,
    /// Nested-integral constant `C = mean(U'') * mean_b(nested) / L0_sq_mean`.
    #[serde(rename = "C")]
    pub c: f64,
    /// `mean(dbeta4) = Sigma1_sq ((d-3)/2 + C / k_scatt^2)`.
    #[serde(rename = "delta_beta4_mean")]
    pub delta_beta4_mean: f64,
}

impl ExpansionCoeffs {
    /// Serialises the coefficient block with its canonical field names.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficients serialise")
    }
}

/// Computes the ensemble-averaged expansion coefficients by nested adaptive
/// quadrature.
///
/// The scatterer laws are defined through harmonic action-angle variables,
/// so the model potential must be harmonic (`mean(U'') = 1`).
pub fn ensemble_coeffs(spec: &EnsembleSpec, params: &ModelParams) -> Result<ExpansionCoeffs> {
    params.validate()?;
    spec.law.validate()?;
    if params.potential != ScattererPotential::Harmonic {
        return Err(Error::InvalidParam(
            "ensemble averages are defined for the harmonic potential".into(),
        ));
    }
    if spec.dim != params.dim {
        return Err(Error::InvalidParam(format!(
            "ensemble dim {} != model dim {}",
            spec.dim, params.dim
        )));
    }
    let gi = GeometricIntegrals::new(params.form_factor.clone());

    let e_star = spec.law.mean_energy();
    let k_scatt_sq = spec.law.mean_p_sq(params.mass_ratio) / params.mass_ratio;

    let l0_sq_mean = spec.impact_average(
        |r| {
            let l0 = gi.l(0, 1.0, r).unwrap_or(f64::NAN);
            l0 * l0
        },
        ENSEMBLE_TOL,
    )?;
    let nested_mean =
        spec.impact_average(|r| gi.nested_k0_sigma(r).unwrap_or(f64::NAN), ENSEMBLE_TOL)?;
    if !l0_sq_mean.is_finite() || !nested_mean.is_finite() {
        return Err(Error::QuadratureNotConverged {
            best: f64::NAN,
            tol: ENSEMBLE_TOL,
        });
    }

    let u2_mean = 1.0; // harmonic: U'' = 1 identically
    let sigma1_sq = k_scatt_sq * l0_sq_mean;
    let delta_beta2_mean = -0.5 * l0_sq_mean;
    let c = if l0_sq_mean > 0.0 {
        u2_mean * nested_mean / l0_sq_mean
    } else {
        0.0
    };
    let d = spec.dim as f64;
    let delta_beta4_mean = if k_scatt_sq > 0.0 {
        sigma1_sq * ((d - 3.0) / 2.0 + c / k_scatt_sq)
    } else {
        0.0
    };

    Ok(ExpansionCoeffs {
        e_star,
        k_scatt_sq,
        l0_sq_mean,
        sigma1_sq,
        delta_beta2_mean,
        c,
        delta_beta4_mean,
    })
}

/// Fast evaluator of `L_0(1, |b|)`: either exact quadrature per call or a
/// precomputed Catmull-Rom table for hot loops.
#[derive(Debug, Clone)]
pub enum L0Evaluator {
    Quadrature(GeometricIntegrals),
    Table(L0Table),
}

impl L0Evaluator {
    pub fn eval(&self, b_norm: f64) -> f64 {
        match self {
            L0Evaluator::Quadrature(gi) => gi.l(0, 1.0, b_norm).unwrap_or(f64::NAN),
            L0Evaluator::Table(t) => t.eval(b_norm),
        }
    }
}

/// `L_0(1, b)` tabulated on a uniform grid over `[0, 1/2]`.
#[derive(Debug, Clone)]
pub struct L0Table {
    values: Vec<f64>,
}

impl L0Table {
    /// Builds the table from chord quadrature; `n` of a few hundred gives
    /// interpolation errors far below the chain's statistical resolution.
    pub fn build(ff: &FormFactor, n: usize) -> Result<Self> {
        let gi = GeometricIntegrals::new(ff.clone());
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let b = 0.5 * i as f64 / (n - 1) as f64;
            values.push(gi.l(0, 1.0, b)?);
        }
        // Compact support makes the last node exactly zero.
        *values.last_mut().unwrap() = 0.0;
        Ok(L0Table { values })
    }

    #[inline]
    pub fn eval(&self, b_norm: f64) -> f64 {
        if b_norm >= 0.5 {
            return 0.0;
        }
        crate::scatter::table_eval(&self.values, b_norm).0
    }
}

/// Context for the truncated step map: the explicit terms of the high-energy
/// expansion with the remainder terms dropped and the fourth-order
/// coefficient replaced by its ensemble mean (the per-collision fourth-order
/// coefficient is not available pointwise).
#[derive(Debug, Clone)]
pub struct StepContext {
    pub alpha_star: f64,
    pub mass_ratio: f64,
    pub delta_beta4_mean: f64,
    l0: L0Evaluator,
}

impl StepContext {
    pub fn new(params: &ModelParams, coeffs: &ExpansionCoeffs) -> Result<Self> {
        Ok(StepContext {
            alpha_star: params.alpha_star,
            mass_ratio: params.mass_ratio,
            delta_beta4_mean: coeffs.delta_beta4_mean,
            l0: L0Evaluator::Table(L0Table::build(&params.form_factor, 1024)?),
        })
    }

    /// Assembles a context from an existing evaluator, e.g. to sweep
    /// `alpha_star` without rebuilding the chord table.
    pub fn from_parts(
        alpha_star: f64,
        mass_ratio: f64,
        delta_beta4_mean: f64,
        l0: L0Evaluator,
    ) -> Self {
        StepContext {
            alpha_star,
            mass_ratio,
            delta_beta4_mean,
            l0,
        }
    }

    pub fn l0_evaluator(&self) -> &L0Evaluator {
        &self.l0
    }

    /// Exact-quadrature variant (slow; for spot checks).
    pub fn with_quadrature(params: &ModelParams, coeffs: &ExpansionCoeffs) -> Self {
        StepContext {
            alpha_star: params.alpha_star,
            mass_ratio: params.mass_ratio,
            delta_beta4_mean: coeffs.delta_beta4_mean,
            l0: L0Evaluator::Quadrature(GeometricIntegrals::new(params.form_factor.clone())),
        }
    }

    /// One truncated step in energy variables. The expansion is stated in
    /// momentum variables, `dE = a* beta1/|p| + a*^2 (dbeta2/|p|^2 +
    /// dbeta4/|p|^4)`; substituting `|p|^2 = 2x` gives
    ///
    /// ```text
    /// F(x, kappa) = x + a* beta1/(2x)^(1/2)
    ///             + a*^2 ( dbeta2/(2x) + dbeta4/(4x^2) ).
    /// ```
    ///
    /// Only this form is consistent with the exact transfer's ensemble drift
    /// and with the limit coefficients `b(x) = dbeta2/(2x) + dbeta4/(4x^2)`.
    pub fn truncated_step(&self, x: f64, kappa: &Kappa) -> f64 {
        debug_assert!(x > 0.0);
        let l0 = self.l0.eval(kappa.b_norm());
        let beta1 = kappa.p_scat / self.mass_ratio.sqrt() * l0;
        let dbeta2 = -0.5 * l0 * l0;
        let a = self.alpha_star;
        x + a * beta1 / (2.0 * x).sqrt()
            + a * a * (dbeta2 / (2.0 * x) + self.delta_beta4_mean / (4.0 * x * x))
    }
}

/// One evaluation of the truncated step map; convenience wrapper over
/// [`StepContext`] for single calls.
pub fn truncated_step(
    x: f64,
    kappa: &Kappa,
    coeffs: &ExpansionCoeffs,
    alpha_star: f64,
    mass_ratio: f64,
    ff: &FormFactor,
) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidParam("x must be positive".into()));
    }
    let ctx = StepContext {
        alpha_star,
        mass_ratio,
        delta_beta4_mean: coeffs.delta_beta4_mean,
        l0: L0Evaluator::Quadrature(GeometricIntegrals::new(ff.clone())),
    };
    Ok(ctx.truncated_step(x, kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cos2() -> FormFactor {
        FormFactor::CosineSquared
    }

    /// Closed form for the cosine-squared central chord:
    /// `L_0(mu, 0) = mu/2 - sin(2 pi mu)/(4 pi)`.
    fn l0_cos2_closed(mu: f64) -> f64 {
        0.5 * mu - (2.0 * PI * mu).sin() / (4.0 * PI)
    }

    #[test]
    fn central_chord_closed_forms() {
        let gi = GeometricIntegrals::new(cos2());
        assert_relative_eq!(gi.l(0, 1.0, 0.0).unwrap(), 0.5, epsilon = 1e-10);
        for mu in [0.1, 0.3, 0.5, 0.77, 1.0] {
            assert_relative_eq!(gi.l(0, mu, 0.0).unwrap(), l0_cos2_closed(mu), epsilon = 1e-10);
        }
        // K_0(1, 0) = int_0^1 (mu/2 - sin(2 pi mu)/(4 pi)) dmu = 1/4.
        assert_relative_eq!(gi.k(0, 1.0, 0.0).unwrap(), 0.25, epsilon = 1e-10);
    }

    #[test]
    fn chord_integrals_vanish_outside_support_and_at_zero_mu() {
        for ff in [FormFactor::SmoothBump, cos2()] {
            let gi = GeometricIntegrals::new(ff);
            for k in 0..=1u8 {
                assert_eq!(gi.l(k, 1.0, 0.6).unwrap(), 0.0);
                assert_eq!(gi.k(k, 1.0, 0.6).unwrap(), 0.0);
                assert_eq!(gi.l(k, 0.0, 0.1).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn l_is_nondecreasing_in_mu() {
        let gi = GeometricIntegrals::new(FormFactor::SmoothBump);
        for b in [0.0, 0.2, 0.4] {
            let mut prev = 0.0;
            for i in 1..=20 {
                let mu = i as f64 / 20.0;
                let v = gi.l(0, mu, b).unwrap();
                assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn k_matches_direct_double_integral() {
        // K_k as iterated integral of L_k versus the single-integral form.
        let gi = GeometricIntegrals::new(FormFactor::SmoothBump);
        for (k, b, mu) in [(0u8, 0.1, 0.8), (1u8, 0.25, 1.0)] {
            let direct =
                quadrature::integrate(|l| gi.l(k, l, b).unwrap(), 0.0, mu, 1e-11).unwrap();
            assert_relative_eq!(gi.k(k, mu, b).unwrap(), direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn beta1_values() {
        let m = 64.0;
        let k0 = Kappa {
            q_scat: 0.4,
            p_scat: 0.0,
            b: vec![0.0, 0.1],
        };
        assert_eq!(beta1(&k0, m, &cos2()).unwrap(), 0.0);
        let k1 = Kappa {
            q_scat: 0.0,
            p_scat: m.sqrt(),
            b: vec![0.0, 0.0],
        };
        assert_relative_eq!(beta1(&k1, m, &cos2()).unwrap(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn delta_beta2_nonpositive_and_zero_off_support() {
        let kappa = Kappa {
            q_scat: 0.0,
            p_scat: 3.0,
            b: vec![0.0, 0.3],
        };
        assert!(delta_beta2(&kappa, &FormFactor::SmoothBump).unwrap() <= 0.0);
        let grazing = Kappa {
            q_scat: 0.0,
            p_scat: 3.0,
            b: vec![0.0, 0.5],
        };
        assert_eq!(delta_beta2(&grazing, &FormFactor::SmoothBump).unwrap(), 0.0);
    }

    #[test]
    fn law_moments() {
        let law = ScattererLaw::Microcanonical { e_star: 1.5 };
        assert_eq!(law.mean_energy(), 1.5);
        assert_eq!(law.mean_p_sq(100.0), 150.0);
        // Truncated Gibbs mean energy against direct quadrature.
        let (beta, cutoff) = (0.7, 4.0);
        let law = ScattererLaw::TruncatedGibbs { beta, cutoff };
        let z = quadrature::integrate(|e| (-beta * e).exp(), 0.0, cutoff, 1e-12).unwrap();
        let m1 =
            quadrature::integrate(|e| e * (-beta * e).exp(), 0.0, cutoff, 1e-12).unwrap() / z;
        assert_relative_eq!(law.mean_energy(), m1, epsilon = 1e-10);
    }

    #[test]
    fn microcanonical_draws_sit_on_shell() {
        use rand::SeedableRng;
        let law = ScattererLaw::Microcanonical { e_star: 2.0 };
        let m = 25.0;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (q, p) = law.sample(&mut rng, m);
            let h = p * p / (2.0 * m) + 0.5 * q * q;
            assert_relative_eq!(h, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn coeffs_internal_identities() {
        let params = ModelParams::default_with(0.05, 100.0);
        let spec = EnsembleSpec::new(ScattererLaw::Microcanonical { e_star: 1.0 }, 2).unwrap();
        let c = ensemble_coeffs(&spec, &params).unwrap();
        assert_eq!(c.e_star, 1.0);
        assert_eq!(c.k_scatt_sq, 1.0);
        assert_relative_eq!(c.sigma1_sq, c.k_scatt_sq * c.l0_sq_mean, epsilon = 1e-14);
        assert_relative_eq!(c.delta_beta2_mean, -0.5 * c.l0_sq_mean, epsilon = 1e-14);
        let d = 2.0;
        assert_relative_eq!(
            c.delta_beta4_mean,
            c.sigma1_sq * ((d - 3.0) / 2.0 + c.c / c.k_scatt_sq),
            epsilon = 1e-14
        );
        assert!(c.sigma1_sq > 0.0);
    }

    #[test]
    fn degenerate_ensemble_has_zero_sigma() {
        let params = ModelParams::default_with(0.05, 100.0);
        let spec = EnsembleSpec::new(ScattererLaw::Microcanonical { e_star: 0.0 }, 2).unwrap();
        let c = ensemble_coeffs(&spec, &params).unwrap();
        assert_eq!(c.sigma1_sq, 0.0);
        assert_eq!(c.k_scatt_sq, 0.0);
    }

    #[test]
    fn coeffs_json_field_names() {
        let params = ModelParams::default_with(0.05, 100.0);
        let spec = EnsembleSpec::new(ScattererLaw::Microcanonical { e_star: 1.0 }, 2).unwrap();
        let c = ensemble_coeffs(&spec, &params).unwrap();
        let json = c.to_json();
        for name in [
            "E_star",
            "k_scatt_sq",
            "L0_sq_mean",
            "Sigma1_sq",
            "delta_beta2_mean",
            "\"C\"",
            "delta_beta4_mean",
        ] {
            assert!(json.contains(name), "missing {name} in {json}");
        }
    }

    #[test]
    fn truncated_step_limits() {
        let mut params = ModelParams::default_with(0.0, 100.0);
        params.form_factor = cos2();
        let spec = EnsembleSpec::new(ScattererLaw::Microcanonical { e_star: 1.0 }, 2).unwrap();
        let coeffs = ensemble_coeffs(&spec, &params).unwrap();
        let kappa = Kappa {
            q_scat: 0.3,
            p_scat: 5.0,
            b: vec![0.0, 0.2],
        };
        // Zero coupling: identity.
        let f = truncated_step(3.0, &kappa, &coeffs, 0.0, 100.0, &params.form_factor).unwrap();
        assert_eq!(f, 3.0);
        // P = 0 and grazing impact: only the mean fourth-order term remains.
        let grazing = Kappa {
            q_scat: 0.3,
            p_scat: 0.0,
            b: vec![0.0, 0.5],
        };
        let a = 0.1;
        let f = truncated_step(2.0, &grazing, &coeffs, a, 100.0, &params.form_factor).unwrap();
        assert_relative_eq!(
            f,
            2.0 + a * a * coeffs.delta_beta4_mean / (4.0 * 4.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn truncated_step_explicit_pieces() {
        // Cosine-squared profile, b = 0, P = sqrt(M), x = 2, a* = 0.1:
        // every term has a closed form except the mean fourth-order one.
        let m = 100.0;
        let mut params = ModelParams::default_with(0.1, m);
        params.form_factor = cos2();
        let spec = EnsembleSpec::new(ScattererLaw::Microcanonical { e_star: 1.0 }, 2).unwrap();
        let coeffs = ensemble_coeffs(&spec, &params).unwrap();
        let kappa = Kappa {
            q_scat: 0.0,
            p_scat: m.sqrt(),
            b: vec![0.0, 0.0],
        };
        let x = 2.0f64;
        let a = 0.1;
        let expected = x
            + a * 0.5 / (2.0 * x).sqrt()
            + a * a * (-0.125 / (2.0 * x) + coeffs.delta_beta4_mean / (4.0 * x * x));
        let f = truncated_step(x, &kappa, &coeffs, a, m, &params.form_factor).unwrap();
        assert_relative_eq!(f, expected, epsilon = 1e-9);
    }

    #[test]
    fn l0_table_matches_quadrature() {
        let ff = FormFactor::SmoothBump;
        let table = L0Table::build(&ff, 1024).unwrap();
        let gi = GeometricIntegrals::new(ff);
        for i in 0..=100 {
            let b = (0.5 * i as f64 / 100.0 + 1e-4).min(0.5);
            let exact = gi.l(0, 1.0, b).unwrap();
            assert!(
                (table.eval(b) - exact).abs() < 1e-8,
                "b = {b}: {} vs {exact}",
                table.eval(b)
            );
        }
    }
}
