//! The variance-power rule on a task the reservoir cannot learn: the
//! fifteenth-order Legendre target. The training capacity at finite T is
//! pure overfitting (roughly one part per sample per readout parameter);
//! extrapolation sends it to zero and the variance decays visibly faster
//! than 1/T, so the rule declares the true capacity zero.
//!
//! ```bash
//! cargo run --release --example zero_capacity_rule
//! ```

use reservoir_ipc::esn::EsnConfig;
use reservoir_ipc::fit::{decide_zero_ipc, fit_means, fit_variance, loglog_slope};
use reservoir_ipc::harness::{run_experiment, ExperimentPlan, SummaryRow, TaskSpec};
use reservoir_ipc::tasks::{LegendreTaskSpec, LegendreTerm};
use std::time::Instant;

fn main() {
    let plan = ExperimentPlan {
        task: TaskSpec::Legendre(
            LegendreTaskSpec::new(vec![LegendreTerm {
                delay: 5,
                degree: 15,
            }])
            .unwrap(),
        ),
        reservoir: Some(EsnConfig {
            nodes: 20,
            ..EsnConfig::default()
        }),
        t_grid: (1..=8).map(|i| 200 * i).collect(),
        ratio_num: 1,
        ratio_den: 1,
        trials: 60,
        washout: 300,
        base_seed: 29,
        threads: 0,
        fix_reservoir: true,
    };
    let start = Instant::now();
    let rows = run_experiment(&plan).unwrap();
    println!(
        "small zero-capacity experiment in {:.2?}\n",
        start.elapsed()
    );
    println!("training capacity tracks (readout params)/T before extrapolation:");
    for r in &rows {
        println!(
            "  T={:<5} mean_train={:.5} (21/T = {:.5})  var_train={:.3e}",
            r.t_train,
            r.mean_train,
            21.0 / r.t_train as f64,
            r.var_train
        );
    }

    let means: Vec<_> = rows.iter().map(SummaryRow::mean_sample).collect();
    let vars: Vec<_> = rows.iter().map(SummaryRow::var_sample).collect();
    let fit = fit_means(&means)
        .unwrap()
        .with_variance(fit_variance(&vars).unwrap());
    let slope = loglog_slope(&vars).unwrap();
    let decision = decide_zero_ipc(fit.a, slope.slope, 0.01, 0.3);

    println!("\nextrapolated capacity a = {:+.6}", fit.a);
    println!(
        "variance power = {:.3} ± {:.3} (a learnable task would give -1)",
        slope.slope, slope.std_err
    );
    println!(
        "zero-capacity decision: {} (|a| < {} AND slope < {})",
        decision.is_zero,
        decision.a_tol,
        -1.0 - decision.slope_tol
    );
}
