//! Streaming capacity evaluation: moment accumulators replace stored
//! trajectories, merge across segments, and checkpoint to a binary blob.
//!
//! ```bash
//! cargo run --example streaming_capacity
//! ```

use nalgebra::DVector;
use rand::Rng;
use reservoir_ipc::ipc::MomentAccumulator;
use reservoir_ipc::seed::derive_rng;

fn main() {
    // a 3-feature stream with a partly learnable target
    let mut rng = derive_rng(3, &[]);
    let mut sample = move || {
        let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0_f64..1.0));
        let noise: f64 = rng.gen_range(-0.3..0.3);
        let y = DVector::from_element(1, 0.8 * x[0] - 0.5 * x[2] + noise);
        (x, y)
    };

    let mut train = MomentAccumulator::new(3, 1);
    let mut test = MomentAccumulator::new(3, 1);
    for _ in 0..2000 {
        let (x, y) = sample();
        train.accumulate(&x, &y).unwrap();
    }
    for _ in 0..1000 {
        let (x, y) = sample();
        test.accumulate(&x, &y).unwrap();
    }

    let readout = train.solve_readout().unwrap();
    println!(
        "readout weights: {:?} (gram rank {})",
        readout.weights.as_slice().to_vec(),
        readout.gram_rank
    );
    println!("training capacity: {:.6}", train.training_ipc().unwrap());
    println!("test capacity:     {:.6}", train.test_ipc(&test).unwrap());

    // merging segment accumulators equals accumulating the whole stream
    let mut left = MomentAccumulator::new(3, 1);
    let mut right = MomentAccumulator::new(3, 1);
    let mut whole = MomentAccumulator::new(3, 1);
    for i in 0..500 {
        let (x, y) = sample();
        if i < 250 { &mut left } else { &mut right }
            .accumulate(&x, &y)
            .unwrap();
        whole.accumulate(&x, &y).unwrap();
    }
    let merged = left.merge(&right).unwrap();
    println!(
        "\nmerged {} + {} samples; capacity {:.9} vs single-pass {:.9}",
        250,
        250,
        merged.training_ipc().unwrap(),
        whole.training_ipc().unwrap()
    );

    // checkpoint and resume through the versioned blob
    let blob = train.to_bytes();
    let resumed = MomentAccumulator::from_bytes(&blob).unwrap();
    println!(
        "checkpoint blob: {} bytes, restored accumulator identical: {}",
        blob.len(),
        resumed == train
    );
}
