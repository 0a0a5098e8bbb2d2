//! Regenerate the bundled fixture areas. Usage: `make_fixtures [root]`
//! (default `fixtures`). Output is deterministic, so a clean checkout and a
//! regeneration agree byte for byte.

use std::path::PathBuf;

use modeshift_cli::fixtures::{all_bundles, write_bundle};

fn main() {
    let root: PathBuf =
        std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fixtures"));
    for spec in all_bundles() {
        match write_bundle(&root, &spec) {
            Ok(()) => println!("wrote {}", root.join(spec.name).display()),
            Err(e) => {
                eprintln!("error writing {}: {e}", spec.name);
                std::process::exit(1);
            }
        }
    }
}
