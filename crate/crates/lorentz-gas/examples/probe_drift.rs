use lorentz_gas::chain::*;
use lorentz_gas::expansion::*;
use lorentz_gas::scatter::*;

fn main() {
    let alpha_star = 0.05;
    let m = 100.0f64;
    let e = 8.0f64;
    let law = ScattererLaw::Microcanonical { e_star: 1.0 };
    let params = ModelParams::default_with(alpha_star, m);
    let spec = EnsembleSpec::new(law, 2).unwrap();
    let coeffs = ensemble_coeffs(&spec, &params).unwrap();
    let cfg_e = ChainConfig { params: params.clone(), law, mode: ChainMode::ExactOde, n_steps: 1, e0: e, record_stride: 1, solver: SolverConfig::default() };
    let cfg_t = ChainConfig { params, law, mode: ChainMode::Truncated, n_steps: 1, e0: e, record_stride: 1, solver: SolverConfig::default() };
    let exact = EnergyChainRunner::new(cfg_e).unwrap();
    let trunc = EnergyChainRunner::new(cfg_t).unwrap();
    let dir = vec![1.0, 0.0];
    let mut rng = RngStream::new(10, 0).rng();
    let n = 200_000;
    let (mut se, mut st) = (0.0, 0.0);
    for _ in 0..n {
        let kappa = sample_kappa(&mut rng, &law, m, &dir);
        se += exact.step(e, &kappa).unwrap().0 - e;
        st += trunc.step(e, &kappa).unwrap().0 - e;
    }
    let a2 = alpha_star * alpha_star;
    println!("exact-ode mean drift/a*^2   = {:.6e}", se / n as f64 / a2);
    println!("truncated mean drift/a*^2   = {:.6e}", st / n as f64 / a2);
    println!("dbeta2_mean/(2x) prediction = {:.6e}", coeffs.delta_beta2_mean / (2.0 * e) + coeffs.delta_beta4_mean / (4.0 * e * e));
    println!("dbeta2_mean/x  (defF slip)  = {:.6e}", coeffs.delta_beta2_mean / e + coeffs.delta_beta4_mean / (e * e));
}
