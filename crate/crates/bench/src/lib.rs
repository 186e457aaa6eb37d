//! Shared setup for the criterion benches.

use std::path::PathBuf;

use gnnevade::{load_bundle, Architecture, FrozenModel, Graph, TrainConfig};

pub fn fixture(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect()
}

/// Cora with a GCN trained on seed 0.
pub fn cora_gcn() -> (Graph, FrozenModel) {
    let g = load_bundle(fixture("cora.bundle.json")).expect("cora fixture");
    let trained = gnnevade::models::train(&g, Architecture::Gcn, &TrainConfig::default()).expect("training");
    let model = FrozenModel::new(trained.params().clone(), &g).expect("frozen model");
    (g, model)
}
