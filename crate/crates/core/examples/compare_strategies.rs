//! Runs a short active-learning experiment per strategy and prints the
//! final-stage accuracy.
//!
//!     cargo run --release --example compare_strategies

use smem::acquisition::{AcquisitionConfig, Strategy};
use smem::alloop::{run_experiment, ALConfig};
use smem::dataset::DatasetConfig;
use smem::model::ModelConfig;

fn main() -> smem::Result<()> {
    let data = DatasetConfig {
        pool_size: 2000,
        test_size: 1000,
        seed: 7,
        ..Default::default()
    };
    let model = ModelConfig {
        dim_v: data.dim_v,
        dim_q: data.dim_q,
        hidden: 32,
        num_classes: data.num_classes,
        lambda: 1.0,
        seed: 7,
    };
    for strategy in [Strategy::Random, Strategy::Entropy, Strategy::Smem, Strategy::SmemFull] {
        let al = ALConfig {
            num_stages: 3,
            acquisition: AcquisitionConfig::default().with_strategy(strategy),
            seed: 7,
            ..Default::default()
        };
        let records = run_experiment(&al, &data, &model)?;
        let last = records.last().expect("at least stage 0");
        println!(
            "{:<10} labeled={:<5} vqa={:.4} top1={:.4}",
            strategy.name(),
            last.labeled_count,
            last.vqa_accuracy,
            last.top1_accuracy
        );
    }
    Ok(())
}
