#![no_main]

use dampedwave::diagnostics::{read_csv, write_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = read_csv(data) else {
        return;
    };
    let mut out = Vec::new();
    write_csv(&mut out, &rows).expect("write to memory");
    let again = read_csv(out.as_slice()).expect("written csv parses");
    assert_eq!(again.len(), rows.len());
});
