//! Regenerates `include/slevel.h` from the extern "C" surface in src/lib.rs.

use std::path::Path;

fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("cargo sets CARGO_MANIFEST_DIR");
    let header = Path::new(&crate_dir).join("include").join("slevel.h");

    match cbindgen::generate(&crate_dir) {
        // `write_to_file` leaves the file untouched when the content is
        // unchanged, so rebuilds stay incremental.
        Ok(bindings) => {
            bindings.write_to_file(&header);
        }
        Err(e) => panic!("failed to generate {}: {e}", header.display()),
    }

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
