#![no_main]
use std::path::Path;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cams) = fairmesh::io::parse_cameras(text, Path::new("cams.txt")) {
            let again = fairmesh::io::parse_cameras(&fairmesh::io::format_cameras(&cams), Path::new("cams.txt")).unwrap();
            assert_eq!(again.len(), cams.len());
        }
    }
});
