#![no_main]

use dampedwave_cli::config::{GridSize, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_toml(text) else {
        return;
    };
    // Compared as text: NaN parameters defeat `PartialEq`.
    let text = cfg.to_toml();
    let again = RunConfig::from_toml(&text).expect("serialized config parses");
    assert_eq!(again.to_toml(), text);
    // Resolving builds the spectral plans, so keep the grid small.
    let points: usize = match &cfg.domain.n {
        GridSize::Uniform(n) => n.saturating_pow(cfg.domain.d.min(3) as u32),
        GridSize::PerAxis(ns) => ns.iter().fold(1usize, |a, &n| a.saturating_mul(n)),
    };
    if points <= 4096 {
        let _ = cfg.resolve();
    }
});
