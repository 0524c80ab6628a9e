//! Analytic coefficient construction for the one-node model, where every
//! term of the capacity expansion is known in closed form.
//!
//! The training mean follows a + b1/T, the test mean a - b2/T', and both
//! variances share the coefficient d. For this model the exact values are
//! ratios of small integers, which makes it the canonical cross-check for
//! the Monte Carlo + fitting pipeline.
//!
//! ```bash
//! cargo run --example exact_asymptotes
//! ```

use reservoir_ipc::acceptance::simple_model_theory;
use reservoir_ipc::fit::asymptotic_coefficients;

fn main() {
    let terms = simple_model_theory();
    println!("expansion terms of the one-node model:");
    println!(
        "  mean square target      = 13/9  = {:.9}",
        terms.mean_square_target
    );
    println!("  optimal loss            = 1");
    println!(
        "  target power variance   = 6992/1215 = {:.9}",
        terms.target_power_variance
    );
    println!("  loss-target covariance  = 0");
    println!("  loss variance           = 0");
    println!("  sensitivity trace       = 3");

    // the verification experiment holds T' = 2T
    let coeffs = asymptotic_coefficients(&terms, 0.5).unwrap();
    println!("\ncoefficients at T/T' = 1/2:");
    println!(
        "  a  = {:.12}  (exact 4/13        = {:.12})",
        coeffs.a,
        4.0 / 13.0
    );
    println!(
        "  b1 = {:.12}  (exact 1839/10985  = {:.12})",
        coeffs.b1,
        1839.0 / 10985.0
    );
    println!(
        "  b2 = {:.12}  (exact 66606/10985 = {:.12})",
        coeffs.b2,
        66606.0 / 10985.0
    );
    println!(
        "  d  = {:.12}  (exact 188784/142805 = {:.12})",
        coeffs.d,
        188784.0 / 142805.0
    );

    // the ratio moves b2 (the test side sees T' = ratio^-1 T), not a or b1
    println!("\nb2 as the test segment grows relative to the training segment:");
    for (num, den) in [(1u64, 1u64), (1, 2), (1, 4)] {
        let c = asymptotic_coefficients(&terms, num as f64 / den as f64).unwrap();
        println!("  T/T' = {num}/{den}: b1 = {:.6}, b2 = {:.6}", c.b1, c.b2);
    }

    // a zero-capacity system degenerates: the three long-run (co)variances
    // coincide and the variance coefficient cancels
    let mut zero = terms;
    zero.optimal_loss = zero.mean_square_target;
    zero.loss_variance = 1.5;
    zero.loss_target_covariance = 1.5;
    zero.target_power_variance = 1.5;
    let c = asymptotic_coefficients(&zero, 1.0).unwrap();
    println!(
        "\nzero-capacity degeneracy: a = {:.3}, d = {:.3e}",
        c.a, c.d
    );
}
