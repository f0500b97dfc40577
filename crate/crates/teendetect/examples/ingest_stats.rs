//! Ingest a raw CSV dump into the canonical JSONL format and print the
//! dataset statistics (size, average length, teenager ratio).
//!
//! Usage: cargo run --example ingest_stats

use std::fs;

use teendetect::corpus::{dataset_stats, load_dataset, save_jsonl, Format, Platform};

const RAW_CSV: &str = "\
id,text,age,label
y1,cant wait for the weekend gaming marathon,15,
y2,posted a new video about my commute setup,34,
y3,homework is due tomorrow and i have not started,,1
y4,  spaces   get   normalized   here  ,41,0
y5,my crush liked my comment today,16,1
";

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("teendetect-ingest-example");
    fs::create_dir_all(&dir)?;
    let input = dir.join("youtube.csv");
    fs::write(&input, RAW_CSV)?;

    let dataset = load_dataset(&input, Format::Csv, Platform::Youtube)?;
    let output = dir.join("youtube.jsonl");
    save_jsonl(&dataset, &output)?;

    let stats = dataset_stats(&dataset)?;
    println!("wrote {} records to {}", dataset.len(), output.display());
    println!("{}", serde_json::to_string_pretty(&stats)?);
    for record in &dataset.records {
        println!("  {} label={} text={:?}", record.id, record.label, record.text);
    }
    Ok(())
}
