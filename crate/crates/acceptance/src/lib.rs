//! Helpers for the end-to-end acceptance suite in `tests/`.

use std::path::PathBuf;

/// Repository root, resolved from this crate's manifest directory.
pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("crates/acceptance sits two levels below the root")
        .to_path_buf()
}

/// Path to a workspace binary built alongside the test executable. Builds it
/// on demand so the suite also works when run for this package alone.
pub fn bin_path(name: &str) -> PathBuf {
    let mut dir = std::env::current_exe().expect("test executable path");
    dir.pop(); // the test binary
    if dir.ends_with("deps") {
        dir.pop();
    }
    let path = dir.join(name);
    if !path.exists() {
        let status = std::process::Command::new(env!("CARGO"))
            .args(["build", "--workspace", "--bins"])
            .current_dir(workspace_root())
            .status()
            .expect("cargo is available");
        assert!(status.success(), "building workspace binaries failed");
    }
    assert!(path.exists(), "binary {name} not found at {}", path.display());
    path
}
