#![allow(dead_code)]

use std::path::PathBuf;

use latent_mfg::io_cli::{parse_config, ScenarioConfig};
use latent_mfg::model::GameSpec;

pub const FORCED: [(f64, usize); 2] = [(0.0, 0), (0.5, 1)];

pub fn table_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/table1_table2.cfg")
}

pub fn table_config() -> ScenarioConfig {
    parse_config(&table_config_path()).expect("shipped config parses")
}

pub fn table_spec() -> GameSpec {
    table_config().game_spec().unwrap()
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
