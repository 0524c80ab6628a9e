//! Echo state network anatomy: building random weights, verifying the
//! spectral radius, watching initial conditions wash out, and dumping the
//! realized matrices for audits.
//!
//! ```bash
//! cargo run --example esn_dynamics
//! ```

use nalgebra::DVector;
use rand::Rng;
use reservoir_ipc::esn::{
    build_esn, esn_step, run_washout, spectral_radius, EsnConfig, EsnWeights, ReservoirState,
};
use reservoir_ipc::seed::derive_rng;

fn main() {
    let config = EsnConfig {
        nodes: 60,
        seed: 11,
        ..EsnConfig::default()
    };
    let weights = build_esn(&config, &mut derive_rng(config.seed, &[])).unwrap();

    let zeros = weights.recurrent.iter().filter(|&&v| v == 0.0).count();
    println!(
        "built {}x{} reservoir: spectral radius {:.9} (target {}), {:.1}% zero entries",
        weights.nodes(),
        weights.nodes(),
        spectral_radius(&weights.recurrent),
        config.spectral_radius,
        100.0 * zeros as f64 / (config.nodes * config.nodes) as f64
    );

    // the echo-state property: two far-apart initial states forget their
    // origin once driven by the same input stream
    let mut rng = derive_rng(config.seed, &[1]);
    let inputs: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let run_from = |fill: f64| {
        let mut stream = inputs.iter();
        run_washout(
            ReservoirState {
                x: DVector::from_element(60, fill),
            },
            500,
            |s| {
                esn_step(
                    &weights,
                    &s,
                    &DVector::from_element(1, *stream.next().unwrap()),
                )
            },
        )
    };
    for tau in [10u64, 50, 200, 500] {
        let mut stream = inputs.iter();
        let a = run_washout(
            ReservoirState {
                x: DVector::from_element(60, 0.9),
            },
            tau,
            |s| {
                esn_step(
                    &weights,
                    &s,
                    &DVector::from_element(1, *stream.next().unwrap()),
                )
            },
        );
        let mut stream = inputs.iter();
        let b = run_washout(
            ReservoirState {
                x: DVector::from_element(60, -0.9),
            },
            tau,
            |s| {
                esn_step(
                    &weights,
                    &s,
                    &DVector::from_element(1, *stream.next().unwrap()),
                )
            },
        );
        println!(
            "  state distance after {tau:>3} washout steps: {:.3e}",
            (a.x - b.x).norm()
        );
    }
    let settled = run_from(0.0);
    println!(
        "first settled entries: {:?}",
        settled.x.as_slice()[..4].to_vec()
    );

    // weights round-trip through the CSV dump format
    let mut dump = Vec::new();
    weights.write_csv(&mut dump).unwrap();
    let restored = EsnWeights::read_csv(dump.as_slice()).unwrap();
    println!(
        "CSV dump: {} bytes, round-trip identical: {}",
        dump.len(),
        restored == weights
    );
}
