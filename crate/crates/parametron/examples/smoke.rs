use parametron::experiments::*;
use std::time::Instant;

fn main() {
    let base = BaseConfig::baseline();
    let t0 = Instant::now();
    let cfg = CatCreationConfig::new(
        base.clone(),
        baseline_constant_detuning(),
        DynamicsMode::Nrot,
        vec![50.0],
    );
    let r = run_cat_creation(&cfg).unwrap();
    let p = r.point_at(50.0).unwrap();
    let el = t0.elapsed().as_secs_f64();
    let steps = 70.0 / 1e-5;
    println!(
        "constant detuning T=50: value_at_T={:.5} tail_mean={:.5} tail_std={:.5}  [{:.1} s, {:.2e} steps/s]",
        p.stats.value_at_t, p.stats.tail_mean, p.stats.tail_std, el, steps / el
    );

    let t0 = Instant::now();
    let cfg = CatCreationConfig::new(
        base.clone(),
        baseline_decay_detuning(),
        DynamicsMode::Nrot,
        vec![50.0],
    );
    let r = run_cat_creation(&cfg).unwrap();
    let p = r.point_at(50.0).unwrap();
    let el = t0.elapsed().as_secs_f64();
    println!(
        "decay detuning    T=50: value_at_T={:.5} tail_mean={:.5} tail_std={:.5}  [{:.1} s]",
        p.stats.value_at_t, p.stats.tail_mean, p.stats.tail_std, el
    );

    // RWA adiabatic limit T=100
    let cfg = CatCreationConfig::new(
        base,
        baseline_constant_detuning(),
        DynamicsMode::Rwa,
        vec![100.0],
    );
    let r = run_cat_creation(&cfg).unwrap();
    let p = r.point_at(100.0).unwrap();
    let idx_t = (100.0 / 0.1_f64).round() as usize;
    let p4 = p.trajectory.populations[idx_t][4];
    println!(
        "RWA T=100: p0(T)={:.8} tail_mean={:.8} fifth-level at T={:.2e}",
        p.stats.value_at_t, p.stats.tail_mean, p4
    );
}
