//! Shared test oracles, kept independent of the library's solution paths:
//! a plain d-dimensional fixed-step RK4 collision integrator (no canonical
//! frame, no deviation variables, no event logic) and small helpers.

use lorentz_gas::scatter::{Kappa, ModelParams};

/// Full-dimensional collision state for the oracle.
#[derive(Clone)]
struct State {
    q: Vec<f64>,
    v: Vec<f64>,
    q_scat: f64,
    v_scat: f64,
}

fn deriv(s: &State, params: &ModelParams) -> State {
    let alpha = params.alpha();
    let (_, grad) = params.form_factor.eval(&s.q);
    let r = lorentz_gas::geometry::norm(&s.q);
    State {
        q: s.v.clone(),
        v: grad.iter().map(|g| -alpha * s.q_scat * g).collect(),
        q_scat: s.v_scat,
        v_scat: (-params.potential.du(s.q_scat) - alpha * params.form_factor.sigma(r))
            / params.mass_ratio,
    }
}

fn axpy(a: &State, c: f64, b: &State) -> State {
    State {
        q: a.q.iter().zip(&b.q).map(|(x, y)| x + c * y).collect(),
        v: a.v.iter().zip(&b.v).map(|(x, y)| x + c * y).collect(),
        q_scat: a.q_scat + c * b.q_scat,
        v_scat: a.v_scat + c * b.v_scat,
    }
}

fn rk4(s: &State, h: f64, params: &ModelParams) -> State {
    let k1 = deriv(s, params);
    let k2 = deriv(&axpy(s, 0.5 * h, &k1), params);
    let k3 = deriv(&axpy(s, 0.5 * h, &k2), params);
    let k4 = deriv(&axpy(s, h, &k3), params);
    let mut out = s.clone();
    for (kk, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
        out = axpy(&out, h * w / 6.0, kk);
    }
    out
}

/// Energy transfer of one collision by brute force: integrate the full
/// d-dimensional system over a fixed window `1.2/|p|` (the force vanishes
/// outside the interaction ball, so overshooting the exit changes nothing),
/// halving the step until two refinements agree to `tol`.
///
/// The transfer is read off the scatterer side, `-dH_scatt`: total energy
/// is conserved and the coupling vanishes at entry and exit, so the
/// particle's gain is the scatterer's loss. The scatterer state is an
/// O(1)-magnitude quantity, which keeps a transfer many orders below
/// `|p|^2` out of the particle velocity's rounding noise.
pub fn oracle_delta_e(p_in: &[f64], kappa: &Kappa, params: &ModelParams, tol: f64) -> f64 {
    let p_norm = lorentz_gas::geometry::norm(p_in);
    let t_final = 1.2 / p_norm;
    let h_scatt = |q: f64, v: f64| {
        0.5 * params.mass_ratio * v * v + params.potential.u(q)
    };
    let run = |n: usize| -> f64 {
        let mut s = State {
            q: kappa
                .b
                .iter()
                .zip(p_in)
                .map(|(b, p)| b - p / (2.0 * p_norm))
                .collect(),
            v: p_in.to_vec(),
            q_scat: kappa.q_scat,
            v_scat: kappa.p_scat / params.mass_ratio,
        };
        let h0 = h_scatt(s.q_scat, s.v_scat);
        let h = t_final / n as f64;
        for _ in 0..n {
            s = rk4(&s, h, params);
        }
        assert!(
            lorentz_gas::geometry::norm(&s.q) > 0.5,
            "oracle particle still inside the interaction ball"
        );
        h0 - h_scatt(s.q_scat, s.v_scat)
    };
    let mut n = 2048usize;
    let mut prev = run(n);
    for _ in 0..6 {
        n *= 2;
        let next = run(n);
        if (next - prev).abs() < tol {
            return next;
        }
        prev = next;
    }
    prev
}
