//! Collision randomness and the Markov chains built on it.
//!
//! Two chains are provided. The *energy chain* tracks the kinetic energy
//! only, stepping either through the exact collision ODE or through the
//! truncated expansion map, and keeps itself above the floor `xi_plus` by
//! mirror reflection:
//!
//! ```text
//! E_{n+1} = F(E_n, kappa_n)            if F >= xi_plus
//! E_{n+1} = 2 xi_plus - F(E_n, ...)    otherwise
//! ```
//!
//! The *vector chain* follows the full momentum and position,
//!
//! ```text
//! p_{n+1} = p_n + R(p_n, kappa_n)
//! t_{n+1} = t_n + ell_star / |p_{n+1}|
//! q_{n+1} = q_n + (ell_star / |p_{n+1}|) p_{n+1},
//! ```
//!
//! and runs in exact-ODE mode only: the truncated expansion governs the
//! energy alone and gives no deflection law, so inventing one would be
//! unanchored.

use crate::error::{Error, Result};
use crate::expansion::{ensemble_coeffs, EnsembleSpec, ScattererLaw, StepContext};
use crate::geometry;
use crate::scatter::{simulate_collision, solve_plane, Kappa, ModelParams, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Seeded, stream-addressed random source. Identical `(seed, stream)`
/// reproduces identical draws bit for bit; distinct streams are independent,
/// which is how parallel chains stay reproducible regardless of worker
/// count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Draws one collision's random data: `(Q, P)` from the scatterer law and
/// an impact vector uniform on the radius-1/2 ball orthogonal to the
/// (unit) incoming direction. The draw order is part of the determinism
/// contract and never changes.
pub fn sample_kappa<R: rand::Rng + ?Sized>(
    rng: &mut R,
    law: &ScattererLaw,
    mass_ratio: f64,
    p_dir: &[f64],
) -> Kappa {
    debug_assert!((geometry::norm(p_dir) - 1.0).abs() < 1e-9, "p_dir must be unit");
    let (q_scat, p_scat) = law.sample(rng, mass_ratio);
    let coords = geometry::sample_ball(rng, p_dir.len() - 1, 0.5);
    let b = geometry::embed_orthogonal(p_dir, &coords);
    Kappa {
        q_scat,
        p_scat,
        b,
    }
}

/// How the energy chain computes its step map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainMode {
    /// Full transfer from the collision ODE at `|p| = sqrt(2 E)`.
    ExactOde,
    /// Truncated expansion step map.
    Truncated,
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub params: ModelParams,
    pub law: ScattererLaw,
    pub mode: ChainMode,
    pub n_steps: usize,
    /// Initial energy; the regime of interest has `e0 >> xi_plus`.
    pub e0: f64,
    /// Record every `record_stride`-th state (state 0 always recorded).
    pub record_stride: usize,
    pub solver: SolverConfig,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.law.validate()?;
        self.solver.validate()?;
        if !self.e0.is_finite() || self.e0 < self.params.xi_plus {
            return Err(Error::InvalidParam("e0 must be >= xi_plus".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParam("record_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Recorded states of an energy-chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyChainTrajectory {
    /// Collision indices of the recorded states (starts at 0).
    pub steps: Vec<usize>,
    /// Physical times; `t_{n+1} = t_n + ell_star / sqrt(2 E_{n+1})`.
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Total chain length (collisions taken).
    pub n_steps: usize,
    pub reflections: usize,
}

/// Mirror reflection at the floor; returns the next energy and whether the
/// step reflected.
#[inline]
pub(crate) fn reflect_at_floor(f: f64, xi_plus: f64) -> (f64, bool) {
    if f >= xi_plus {
        (f, false)
    } else {
        (2.0 * xi_plus - f, true)
    }
}

enum StepEngine {
    Exact,
    Truncated(StepContext),
}

/// Reusable energy-chain driver. Construction does the expensive one-off
/// work (ensemble coefficients, chord table) so ensembles of chains can
/// share it.
pub struct EnergyChainRunner {
    cfg: ChainConfig,
    engine: StepEngine,
}

impl EnergyChainRunner {
    pub fn new(cfg: ChainConfig) -> Result<Self> {
        cfg.validate()?;
        let engine = match cfg.mode {
            ChainMode::ExactOde => StepEngine::Exact,
            ChainMode::Truncated => {
                let spec = EnsembleSpec::new(cfg.law, cfg.params.dim)?;
                let coeffs = ensemble_coeffs(&spec, &cfg.params)?;
                StepEngine::Truncated(StepContext::new(&cfg.params, &coeffs)?)
            }
        };
        Ok(EnergyChainRunner { cfg, engine })
    }

    /// Same runner with the step context taken from precomputed
    /// coefficients (skips the quadrature pass).
    pub fn with_step_context(cfg: ChainConfig, ctx: StepContext) -> Result<Self> {
        cfg.validate()?;
        if cfg.mode != ChainMode::Truncated {
            return Err(Error::InvalidParam(
                "step context only applies to truncated mode".into(),
            ));
        }
        Ok(EnergyChainRunner {
            cfg,
            engine: StepEngine::Truncated(ctx),
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    /// One chain step from energy `e_n` with collision data `kappa`:
    /// the step map followed by mirror reflection at the floor.
    pub fn step(&self, e_n: f64, kappa: &Kappa) -> Result<(f64, bool)> {
        debug_assert!(e_n >= self.cfg.params.xi_plus);
        let f = match &self.engine {
            StepEngine::Truncated(ctx) => ctx.truncated_step(e_n, kappa),
            StepEngine::Exact => {
                let out = solve_plane(
                    (2.0 * e_n).sqrt(),
                    kappa.b_norm(),
                    kappa.q_scat,
                    kappa.p_scat,
                    &self.cfg.params,
                    &self.cfg.solver,
                )?;
                let p_norm = (2.0 * e_n).sqrt();
                e_n + p_norm * out.wx + 0.5 * (out.wx * out.wx + out.wy * out.wy)
            }
        };
        Ok(reflect_at_floor(f, self.cfg.params.xi_plus))
    }

    /// Runs one chain; deterministic given the stream.
    pub fn run(&self, stream: RngStream) -> Result<EnergyChainTrajectory> {
        let mut rng = stream.rng();
        self.run_with_rng(&mut rng)
    }

    /// Runs one chain from an externally prepared generator (used when the
    /// initial state itself is drawn from the same stream).
    pub fn run_with_rng<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<EnergyChainTrajectory> {
        self.run_from(self.cfg.e0, rng)
    }

    pub fn run_from<R: rand::Rng + ?Sized>(
        &self,
        e0: f64,
        rng: &mut R,
    ) -> Result<EnergyChainTrajectory> {
        if e0 < self.cfg.params.xi_plus {
            return Err(Error::InvalidParam("e0 must be >= xi_plus".into()));
        }
        let n = self.cfg.n_steps;
        let stride = self.cfg.record_stride;
        let mut traj = EnergyChainTrajectory {
            steps: vec![0],
            times: vec![0.0],
            energies: vec![e0],
            n_steps: n,
            reflections: 0,
        };
        // The energy chain's transfer depends on the incoming direction only
        // through |p|, so a fixed canonical direction is legitimate.
        let dir = canonical_direction(self.cfg.params.dim);
        let mut e = e0;
        let mut t = 0.0;
        for step in 0..n {
            let kappa = sample_kappa(rng, &self.cfg.law, self.cfg.params.mass_ratio, &dir);
            let (next, reflected) = self.step(e, &kappa).map_err(|e| Error::ChainAborted {
                step,
                source: Box::new(e),
            })?;
            e = next;
            if reflected {
                traj.reflections += 1;
            }
            t += self.cfg.params.ell_star / (2.0 * e).sqrt();
            if (step + 1) % stride == 0 || step + 1 == n {
                traj.steps.push(step + 1);
                traj.times.push(t);
                traj.energies.push(e);
            }
        }
        Ok(traj)
    }
}

fn canonical_direction(dim: usize) -> Vec<f64> {
    let mut dir = vec![0.0; dim];
    dir[0] = 1.0;
    dir
}

/// Recorded states of a vector-chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorChainTrajectory {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub momenta: Vec<Vec<f64>>,
    pub n_steps: usize,
}

/// Driver for the full vector chain (exact-ODE mode only).
pub struct VectorChainRunner {
    cfg: ChainConfig,
}

impl VectorChainRunner {
    pub fn new(cfg: ChainConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.mode != ChainMode::ExactOde {
            return Err(Error::InvalidParam(
                "vector chain requires exact-ode mode (no truncated deflection law)".into(),
            ));
        }
        Ok(VectorChainRunner { cfg })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn run(&self, stream: RngStream) -> Result<VectorChainTrajectory> {
        let mut rng = stream.rng();
        let cfg = &self.cfg;
        let d = cfg.params.dim;
        let mut p = canonical_direction(d);
        let speed0 = (2.0 * cfg.e0).sqrt();
        p.iter_mut().for_each(|x| *x *= speed0);
        let mut q = vec![0.0; d];
        let mut t = 0.0;
        let stride = cfg.record_stride;
        let mut traj = VectorChainTrajectory {
            steps: vec![0],
            times: vec![0.0],
            positions: vec![q.clone()],
            momenta: vec![p.clone()],
            n_steps: cfg.n_steps,
        };
        for step in 0..cfg.n_steps {
            let dir = geometry::unit(&p).expect("momentum stays nonzero");
            let kappa = sample_kappa(&mut rng, &cfg.law, cfg.params.mass_ratio, &dir);
            let res = simulate_collision(&p, &kappa, &cfg.params, &cfg.solver).map_err(|e| {
                Error::ChainAborted {
                    step,
                    source: Box::new(e),
                }
            })?;
            p = res.p_out;
            let e = 0.5 * geometry::norm_sq(&p);
            if e < cfg.params.xi_plus {
                return Err(Error::EnergyFloorBreached { step });
            }
            let dt = cfg.params.ell_star / (2.0 * e).sqrt();
            t += dt;
            for (qi, pi) in q.iter_mut().zip(&p) {
                *qi += dt * pi;
            }
            if (step + 1) % stride == 0 || step + 1 == cfg.n_steps {
                traj.steps.push(step + 1);
                traj.times.push(t);
                traj.positions.push(q.clone());
                traj.momenta.push(p.clone());
            }
        }
        Ok(traj)
    }
}

/// Piecewise-linear interpolation of an energy chain on the rescaled clock
/// `tau_n = alpha_star^2 n`.
#[derive(Debug, Clone)]
pub struct InterpolatedEnergyPath {
    tau_step: f64,
    energies: Vec<f64>,
}

impl InterpolatedEnergyPath {
    /// Requires a stride-1 trajectory (every collision recorded).
    pub fn new(traj: &EnergyChainTrajectory, alpha_star: f64) -> Result<Self> {
        if !(alpha_star > 0.0) {
            return Err(Error::InvalidParam("alpha_star must be > 0".into()));
        }
        if traj.energies.len() != traj.n_steps + 1 {
            return Err(Error::InvalidParam(
                "interpolation needs a stride-1 trajectory".into(),
            ));
        }
        Ok(InterpolatedEnergyPath {
            tau_step: alpha_star * alpha_star,
            energies: traj.energies.clone(),
        })
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_step * (self.energies.len() - 1) as f64
    }

    /// `E(tau) = ((tau_{n+1} - tau) E_n + (tau - tau_n) E_{n+1}) / tau_step`.
    pub fn eval(&self, tau: f64) -> Result<f64> {
        let hi = self.tau_max();
        if !(0.0..=hi).contains(&tau) {
            return Err(Error::OutOfRange {
                value: tau,
                lo: 0.0,
                hi,
            });
        }
        let s = tau / self.tau_step;
        let n = (s.floor() as usize).min(self.energies.len() - 2);
        let frac = s - n as f64;
        Ok(self.energies[n] * (1.0 - frac) + self.energies[n + 1] * frac)
    }
}
