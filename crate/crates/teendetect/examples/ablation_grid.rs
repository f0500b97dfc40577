//! Run a reduced ablation grid over the synthetic platform pair and render
//! the results table: each column toggles a subset of the components
//! (C concentrator, S adaptive classifier, A adversarial adaptation).
//!
//! Usage: cargo run --release --example ablation_grid

use teendetect::adaptation::Hyperparams;
use teendetect::corpus::Platform;
use teendetect::encoder::EncoderConfig;
use teendetect::evaluation::{run_grid, Components, DatasetRegistry, GridSettings};
use teendetect::synthetic::{default_pair, demo_adapt_hyperparams, demo_train_hyperparams, generate};

fn main() -> anyhow::Result<()> {
    let (mut longform, mut shortform) = default_pair(0);
    // trimmed sizes keep this example quick; the bundled synthetic.json
    // config runs the full-size grid
    longform.n_records = 400;
    shortform.n_records = 200;

    let mut registry = DatasetRegistry::new();
    registry.insert(generate(&longform)?);
    registry.insert(generate(&shortform)?);

    let pairs = vec![(
        Platform::Synthetic("longform".into()),
        Platform::Synthetic("shortform".into()),
    )];
    let variants = Components::cross_platform_variants();
    let settings = GridSettings {
        n_train: Some(280),
        hyperparams: demo_train_hyperparams(0),
        adapt_hyperparams: Some(Hyperparams {
            epochs: 6,
            ..demo_adapt_hyperparams(0)
        }),
        encoder: EncoderConfig::toy(16),
        allow_pan13_source: false,
        test_fraction: 0.2,
        keep_target_checkpoints: false,
    };

    let grid = run_grid(&pairs, &variants, &[0, 1], &registry, &settings);
    print!("{}", grid.render_table());
    let failed = grid.cells.iter().filter(|c| c.outcome.is_err()).count();
    println!("{} cells, {} failed", grid.cells.len(), failed);
    Ok(())
}
