//! Regenerates the bundled synthetic dataset:
//! `cargo run -p gridplan-cli --example make_fixture -- fixtures/synthetic`

use std::path::PathBuf;

use gridplan_cli::synthetic::{write_dataset, SyntheticSite};

fn main() {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures/synthetic".into())
        .into();
    write_dataset(&SyntheticSite::default(), &dir).expect("writing the dataset");
    println!("dataset written to {}", dir.display());
}
