//! Train the source encoder and the small-data adaptive classifier head on
//! a 700-record labelled sample, then report held-out accuracy.
//!
//! Usage: cargo run --release --example train_source

use teendetect::corpus::{stratified_sample, train_test_split};
use teendetect::encoder::{accuracy, train_source_encoder, Encoder, EncoderConfig, Role};
use teendetect::heads::{Classifier, ClassifierVariant};
use teendetect::synthetic::{default_pair, demo_train_hyperparams, generate};

fn main() -> anyhow::Result<()> {
    let (longform_spec, _) = default_pair(0);
    let corpus = generate(&longform_spec)?;
    let (train_pool, held_out) = train_test_split(&corpus, 0.2, 0)?;
    let train = stratified_sample(&train_pool, 700, 0)?;

    let config = EncoderConfig::toy(32);
    let mut encoder = Encoder::new(config.clone(), Role::Source, 0);
    let mut classifier = Classifier::new(ClassifierVariant::Adaptive, config.embedding_dim, 1);

    let hp = demo_train_hyperparams(0);
    let curve = train_source_encoder(&mut encoder, &mut classifier, &train, &hp)?;
    for (epoch, loss) in curve.iter().enumerate() {
        println!("epoch {epoch}: mean loss {loss:.4}");
    }
    println!(
        "held-out accuracy on {} records: {:.3}",
        held_out.len(),
        accuracy(&encoder, &classifier, &held_out)?
    );
    Ok(())
}
