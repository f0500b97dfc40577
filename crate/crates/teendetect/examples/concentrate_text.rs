//! Concentrate a long text down to a target token budget by keeping the
//! lexicon-densest windows. Budgets derive from the target platform's
//! average length, so both platforms feed the encoder comparable inputs.
//!
//! Usage: cargo run --example concentrate_text

use teendetect::concentrator::{build_lexicon, concentrate, default_budget};
use teendetect::corpus::dataset_stats;
use teendetect::synthetic::{default_pair, generate};

fn main() -> anyhow::Result<()> {
    let (longform_spec, shortform_spec) = default_pair(0);
    let source = generate(&longform_spec)?;
    let target = generate(&shortform_spec)?;

    let lexicon = build_lexicon(&[], &[&source], 900)?;
    let budget = default_budget(&dataset_stats(&target)?);
    println!("token budget from target platform: {}", budget.max_tokens);

    let long_text = &source.records[0].text;
    let concentrated = concentrate(long_text, &lexicon, budget);
    println!(
        "before: {} tokens\n  {}",
        long_text.split_whitespace().count(),
        long_text
    );
    println!(
        "after:  {} tokens\n  {}",
        concentrated.split_whitespace().count(),
        concentrated
    );

    // texts already inside the budget pass through unchanged
    let short_text = &target
        .records
        .iter()
        .find(|r| r.text.split_whitespace().count() <= budget.max_tokens)
        .expect("target platform has texts inside the budget")
        .text;
    assert_eq!(&concentrate(short_text, &lexicon, budget), short_text);
    println!("target texts inside the budget are untouched");
    Ok(())
}
