#![no_main]
use std::path::Path;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(image) = fairmesh::io::decode_pgm(data, Path::new("fuzz.pgm")) {
        let again = fairmesh::io::decode_pgm(&fairmesh::io::encode_pgm(&image), Path::new("fuzz.pgm")).unwrap();
        assert_eq!((again.width(), again.height()), (image.width(), image.height()));
    }
});
