use psca_core::diagnostics::{estimate_constants, prox_gradient_map};
use psca_core::oracles::nonconvex_box_instance;
use psca_core::schedule::RandomizedSchedule;
use psca_core::step::gamma_bar;
use psca_core::surrogate::{SurrogateFamily, SurrogateSpec};
use psca_core::*;

#[test]
fn probe_nonconvex() {
    let n = 200usize;
    let seeds = 20u64;
    let max_iters = 20_000usize;
    let t0 = std::time::Instant::now();
    let mut avg = vec![0.0f64; max_iters + 1];
    let mut kappa_min = f64::INFINITY;
    for seed in 0..seeds {
        let problem = nonconvex_box_instance(n, -0.5, 0.1, seed).unwrap();
        let l = problem.lipschitz_grad().unwrap();
        let alpha = 1.1 * l;
        let spec =
            SurrogateSpec::for_problem(SurrogateFamily::ProximalLinear, alpha, &problem).unwrap();
        let bar = gamma_bar(spec.tau, l, spec.l_tilde.unwrap(), n).unwrap();
        let gamma = 0.5 * bar;
        let schedule =
            Schedule::Randomized(RandomizedSchedule::uniform(n, 0.5, 1000 + seed).unwrap());
        let mut config =
            SolverConfig::new(schedule, StepSchedule::Constant { gamma0: gamma }, spec);
        config.max_iters = max_iters as u64;
        config.record_every = 1;
        let trace = psca_run(&problem, &config).unwrap();
        avg[0] += trace.initial_prox_grad_norm.unwrap().powi(2);
        for (k, rec) in trace.records.iter().enumerate() {
            avg[k + 1] += rec.prox_grad_norm.unwrap().powi(2);
        }
        // kappa with trajectory minimum in place of h*
        let h_min = trace
            .records
            .iter()
            .map(|r| r.objective)
            .fold(trace.initial_objective, f64::min);
        let spec2 =
            SurrogateSpec::for_problem(SurrogateFamily::ProximalLinear, alpha, &problem).unwrap();
        let consts = estimate_constants(
            &problem,
            &spec2,
            &config.schedule,
            &config.steps,
            &trace,
            Some(h_min),
        )
        .unwrap();
        if seed == 0 {
            println!(
                "seed0: L={l:.1} gamma={gamma:.4e} h0={:.2} hmin={h_min:.2} kappa={:?}",
                trace.initial_objective, consts.kappa
            );
            let pg = prox_gradient_map(&problem, &trace.final_x).unwrap();
            println!("final prox-grad norm {:.3e}", psca_core::linalg::norm(&pg));
        }
        kappa_min = kappa_min.min(consts.kappa.unwrap());
    }
    for v in avg.iter_mut() {
        *v /= seeds as f64;
    }
    for eps in [1e-1, 1e-2, 1e-3] {
        let t = avg.iter().position(|&m| m <= eps);
        println!(
            "eps={eps:.0e}: T_obs={t:?} bound kappa_min/eps = {:.3e}",
            kappa_min / eps
        );
    }
    println!("initial avg {:.3e}, final avg {:.3e}", avg[0], avg[max_iters]);
    println!("elapsed {:?}", t0.elapsed());
}
