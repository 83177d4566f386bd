#![no_main]

use dampedwave_cli::config::SweepConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(sweep) = SweepConfig::from_toml(text) else {
        return;
    };
    if sweep.size() <= 64 {
        if let Ok(points) = sweep.points() {
            assert_eq!(points.len(), sweep.size());
        }
    }
});
