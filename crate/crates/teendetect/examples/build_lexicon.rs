//! Build the alignment lexicon from a labelled corpus: unigrams and bigrams
//! ranked by absolute log-odds between the teenager and adult classes.
//!
//! Usage: cargo run --example build_lexicon

use teendetect::concentrator::build_lexicon;
use teendetect::synthetic::{default_pair, generate};

fn main() -> anyhow::Result<()> {
    let (longform_spec, _) = default_pair(0);
    let corpus = generate(&longform_spec)?;

    // external curated terms are optional; corpus statistics alone suffice
    let external = vec![("skateboard".to_string(), 2.0)];
    let lexicon = build_lexicon(&external, &[&corpus], 900)?;

    println!(
        "lexicon holds {} of up to {} entries",
        lexicon.len(),
        lexicon.capacity()
    );
    println!("top 15 terms by weight:");
    for entry in lexicon.entries().iter().take(15) {
        println!("  {:<24} {:.4}", entry.term, entry.weight);
    }
    Ok(())
}
