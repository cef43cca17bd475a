//! The CSV fixtures are regenerated from fixed seeds; set
//! `QEMBED_WRITE_FIXTURES=1` to rewrite them after changing a generator.

use std::path::Path;

use qembed_pipelines::data::{class_counts, load_features, write_features};
use qembed_pipelines::synth::{descriptor_like, write_fixture, FIXTURES};

fn fixture_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures"))
}

#[test]
fn fixtures_match_their_generators() {
    for spec in FIXTURES {
        if std::env::var_os("QEMBED_WRITE_FIXTURES").is_some() {
            write_fixture(&spec, fixture_dir()).unwrap();
        }
        let path = fixture_dir().join(format!("{}.csv", spec.name));
        let on_disk = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(on_disk == write_features(&descriptor_like(&spec)).unwrap(), "{} is stale", path.display());
        let samples = load_features(&path).unwrap();
        assert_eq!(class_counts(&samples), (spec.n_pos, spec.n_neg));
    }
}
