use lorentz_gas::chain::*;
use lorentz_gas::diffusion::*;
use lorentz_gas::expansion::*;
use lorentz_gas::scatter::*;

fn table(states: &[Vec<f64>], n_slots: usize) -> Vec<[(f64, f64); 2]> {
    let n = states.len() as f64;
    (0..n_slots).map(|j| {
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for row in states { let x = row[j]; s1 += x; s2 += x * x; s4 += x.powi(4); }
        let m1 = s1 / n; let m2 = s2 / n;
        let v1 = (m2 - m1 * m1).max(0.0);
        let v2 = (s4 / n - m2 * m2).max(0.0);
        [(m1, (v1 / n).sqrt()), (m2, (v2 / n).sqrt())]
    }).collect()
}

fn main() {
    let params = ModelParams::default_with(0.05, 100.0);
    let law = ScattererLaw::Microcanonical { e_star: 1.0 };
    let spec = EnsembleSpec::new(law, 2).unwrap();
    let coeffs = ensemble_coeffs(&spec, &params).unwrap();
    let lc = LimitCoeffs::from_expansion(&coeffs, 1.0, 2);
    let l0 = L0Table::build(&params.form_factor, 1024).unwrap();
    let x0 = 1.2f64;
    let taus = [0.25f64, 0.5, 1.0];
    // High-precision diffusion reference: fine dt, many paths.
    let dt = 5e-4f64;
    let n_paths = 2_000_000usize;
    let targets: Vec<usize> = taus.iter().map(|t| (t / dt).round() as usize).collect();
    let n_steps = *targets.last().unwrap();
    let mut sde: Vec<Vec<f64>> = Vec::with_capacity(n_paths);
    for i in 0..n_paths {
        let mut rng = RngStream::new(999, i as u64).rng();
        let path = reflected_euler_maruyama_with(x0, 1.0, dt, n_steps,
            |x| limit_coefficients(x, &lc).1,
            |x| limit_coefficients(x, &lc).0,
            &mut rng, 1).unwrap();
        sde.push(targets.iter().map(|&k| path.states[k]).collect());
    }
    let sde_m = table(&sde, 3);
    println!("SDE ref: {:?}", sde_m.iter().map(|r| (r[0].0, r[1].0)).collect::<Vec<_>>());
    for alpha_star in [0.1f64, 0.05, 0.025] {
        let n = (1.0 / (alpha_star * alpha_star)).round() as usize;
        let ctx = StepContext::from_parts(alpha_star, 100.0, coeffs.delta_beta4_mean, L0Evaluator::Table(l0.clone()));
        let cfg = ChainConfig {
            params: ModelParams::default_with(alpha_star, 100.0),
            law, mode: ChainMode::Truncated, n_steps: n, e0: x0,
            record_stride: 1, solver: SolverConfig::default(),
        };
        let runner = EnergyChainRunner::with_step_context(cfg, ctx).unwrap();
        let n_chains = 2_000_000usize;
        let mut ch: Vec<Vec<f64>> = Vec::with_capacity(n_chains);
        for i in 0..n_chains {
            let traj = runner.run(RngStream::new(7, i as u64)).unwrap();
            let path = InterpolatedEnergyPath::new(&traj, alpha_star).unwrap();
            ch.push(taus.iter().map(|&t| path.eval(t).unwrap()).collect());
        }
        let ch_m = table(&ch, 3);
        print!("a*={alpha_star}: ");
        for j in 0..3 {
            for k in 0..2 {
                let bias = ch_m[j][k].0 - sde_m[j][k].0;
                let se = (ch_m[j][k].1.powi(2) + sde_m[j][k].1.powi(2)).sqrt();
                print!(" tau={} m{}: {:+.2e}({:.1}se)", taus[j], k + 1, bias, bias.abs() / se);
            }
        }
        println!();
    }
}
