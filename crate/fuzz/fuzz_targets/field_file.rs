#![no_main]

use dampedwave::checkpoint::FieldFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = FieldFile::from_bytes(data) {
        let bytes = file.to_bytes();
        assert_eq!(bytes.as_slice(), data);
    }
});
