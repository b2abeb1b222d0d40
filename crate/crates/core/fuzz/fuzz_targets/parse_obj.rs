#![no_main]
use std::path::Path;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mesh) = fairmesh::io::parse_obj(text, Path::new("fuzz.obj")) {
            // Anything accepted must round-trip.
            let again = fairmesh::io::parse_obj(&fairmesh::io::format_obj(&mesh), Path::new("fuzz.obj")).unwrap();
            assert_eq!(again.faces(), mesh.faces());
        }
    }
});
