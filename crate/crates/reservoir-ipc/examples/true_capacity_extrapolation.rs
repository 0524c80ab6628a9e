//! End-to-end estimation on the analytic model: Monte Carlo over a length
//! grid, weighted least-squares extrapolation, and comparison with both the
//! exact coefficients and the threshold-gated baseline.
//!
//! ```bash
//! cargo run --release --example true_capacity_extrapolation
//! ```

use reservoir_ipc::acceptance::simple_model_theory;
use reservoir_ipc::fit::{asymptotic_coefficients, fit_means, fit_variance, loglog_slope};
use reservoir_ipc::harness::{run_experiment, ExperimentPlan, SummaryRow, TaskSpec};
use reservoir_ipc::ipc::{chi_square_threshold, empirical_ipc};
use std::time::Instant;

fn main() {
    let plan = ExperimentPlan {
        task: TaskSpec::Simple,
        reservoir: None,
        t_grid: vec![200, 300, 400, 500, 600],
        ratio_num: 2,
        ratio_den: 1,
        trials: 2000,
        washout: 50,
        base_seed: 29,
        threads: 0,
        fix_reservoir: false,
    };
    let start = Instant::now();
    let rows = run_experiment(&plan).unwrap();
    println!(
        "{} trials per length in {:.2?}\n",
        plan.trials,
        start.elapsed()
    );
    for r in &rows {
        println!(
            "T={:<4} T'={:<5} mean_train={:.6} mean_test={:.6} var_train={:.3e}",
            r.t_train, r.t_test, r.mean_train, r.mean_test, r.var_train
        );
    }

    let means: Vec<_> = rows.iter().map(SummaryRow::mean_sample).collect();
    let vars: Vec<_> = rows.iter().map(SummaryRow::var_sample).collect();
    let fit = fit_means(&means)
        .unwrap()
        .with_variance(fit_variance(&vars).unwrap());
    let slope = loglog_slope(&vars).unwrap();
    let exact = asymptotic_coefficients(&simple_model_theory(), 0.5).unwrap();

    println!("\n           estimated      exact");
    println!("  a   {:>12.6} {:>10.6}", fit.a, exact.a);
    println!("  b1  {:>12.6} {:>10.6}", fit.b1, exact.b1);
    println!("  b2  {:>12.6} {:>10.6}", fit.b2, exact.b2);
    println!("  d   {:>12.6} {:>10.6}", fit.d, exact.d);
    println!(
        "  variance power {:.3} ± {:.3} (1/T decay expected)",
        slope.slope, slope.std_err
    );

    // the baseline gates the largest-length mean instead of extrapolating
    let last = rows.last().unwrap();
    let threshold = chi_square_threshold(1, 1e-4, last.t_train).unwrap();
    let empirical = empirical_ipc(last.mean_train, threshold);
    println!(
        "\nbaseline at T={}: threshold={:.4}, empirical={:.6}",
        last.t_train, threshold, empirical
    );
    println!(
        "distance to the exact capacity: extrapolated {:.2e}, empirical {:.2e}",
        (fit.a - exact.a).abs(),
        (empirical - exact.a).abs()
    );
}
