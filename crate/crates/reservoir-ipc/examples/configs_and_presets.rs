//! Config files and presets: the INI surface of the command-line binary,
//! usable directly from the library.
//!
//! ```bash
//! cargo run --example configs_and_presets
//! ```

use reservoir_ipc::config::{Preset, RunConfig};

fn main() {
    // every preset serializes to canonical INI and parses back unchanged
    let config = Preset::Legendre15.config(false);
    let text = config.to_ini();
    println!("--- legendre15 preset (desk scale) ---\n{text}");
    let parsed = RunConfig::from_ini(&text).unwrap();
    println!(
        "round-trip fixed point: {}",
        parsed == config && parsed.to_ini() == text
    );

    // paper-scale variants restore the published experiment sizes
    let paper = Preset::Legendre15.config(true);
    println!(
        "paper scale: {} nodes, {} trials, lengths up to {}",
        paper.reservoir.unwrap().nodes,
        paper.trials,
        paper.t_grid.last().unwrap()
    );

    // a hand-written config only needs the keys that differ from defaults
    let custom = "\
[task]
kind = legendre
terms = 2:3

[reservoir]
nodes = 32
density = 0.5

[experiment]
t_grid = 400:2000:400
trials = 50
seed = 4242
";
    let config = RunConfig::from_ini(custom).unwrap();
    println!(
        "custom config: grid {:?}, dof {}, washout {}",
        config.t_grid,
        config.effective_dof(),
        config.washout
    );

    // unknown keys are rejected, not silently ignored
    let bad = custom.replace("density", "sparsity");
    println!(
        "misspelled key -> {}",
        RunConfig::from_ini(&bad).unwrap_err()
    );
}
