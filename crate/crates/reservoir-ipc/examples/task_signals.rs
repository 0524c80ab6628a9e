//! Benchmark signal generators: uniform input processes, Legendre product
//! targets, and the NARMA10 recursion.
//!
//! ```bash
//! cargo run --example task_signals
//! ```

use reservoir_ipc::seed::derive_rng;
use reservoir_ipc::tasks::{
    gen_input, legendre_eval, legendre_target, narma10_step, InputDistribution, InputHistory,
    InputSpec, LegendreTaskSpec, LegendreTerm, Narma10Params, Narma10State,
};

fn main() {
    // i.i.d. uniform inputs, reproducible under a fixed stream
    let spec = InputSpec::new(InputDistribution::UniformSymmetric, 1).unwrap();
    let mut rng = derive_rng(7, &[0]);
    let inputs = gen_input(&spec, 10, &mut rng).unwrap();
    println!("Uniform(-1,1) inputs: {:?}", &inputs[..5]);

    // Legendre polynomials by the three-term recurrence
    for degree in [1, 2, 5, 15] {
        println!("P_{degree}(0.5) = {:+.6}", legendre_eval(degree, 0.5));
    }

    // delayed product target: P_2(u_{t-1}) * P_1(u_{t-2})
    let task = LegendreTaskSpec::new(vec![
        LegendreTerm {
            delay: 1,
            degree: 2,
        },
        LegendreTerm {
            delay: 2,
            degree: 1,
        },
    ])
    .unwrap();
    let mut history = InputHistory::new(task.max_delay());
    println!("\nproduct target over a short stream:");
    for (t, &u) in inputs.iter().enumerate() {
        match legendre_target(&task, &history) {
            Ok(y) => println!("  t={t}: y = {y:+.6}"),
            Err(_) => println!("  t={t}: (window not yet filled)"),
        }
        history.push(u);
    }

    // NARMA10: same input law as the benchmark, zero-initialized state
    let narma_spec = InputSpec::new(InputDistribution::UniformPositive, 1).unwrap();
    let mut rng = derive_rng(7, &[1]);
    let mut state = Narma10State::new();
    let params = Narma10Params::default();
    let drive = gen_input(&narma_spec, 2000, &mut rng).unwrap();
    let mut last = 0.0;
    for &u in &drive {
        last = narma10_step(&mut state, &params, u).unwrap();
    }
    println!(
        "\nNARMA10 after {} driven steps: y = {last:.6}",
        drive.len()
    );

    // with the input switched off the recursion settles at a fixed point
    let mut state = Narma10State::new();
    let mut y = 0.0;
    for _ in 0..400 {
        y = narma10_step(&mut state, &params, 0.0).unwrap();
    }
    println!("NARMA10 fixed point under zero input: {y:.6} (root of 0.5y^2 - 0.7y + 0.1)");
}
