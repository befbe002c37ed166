//! Keeps the committed corpus files in crates/dynpush/corpus in sync with
//! the builtin generator.

use dynpush::coupling::corpus;
use std::path::PathBuf;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Regenerates the committed corpus files. Run manually:
/// `cargo test -p dynpush --test corpus_sync regenerate -- --ignored`
#[test]
#[ignore]
fn regenerate() {
    let dir = corpus_dir();
    std::fs::create_dir_all(&dir).unwrap();
    for (name, content) in corpus::builtin_files() {
        std::fs::write(dir.join(format!("{name}.txt")), content).unwrap();
    }
}

#[test]
fn committed_files_match_builtin_generator() {
    let files = corpus::builtin_files();
    assert_eq!(files.len(), 7);
    for (name, expected) in files {
        let path = corpus_dir().join(format!("{name}.txt"));
        let on_disk = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("missing corpus file {}: {e}", path.display()));
        assert_eq!(on_disk, expected, "corpus drift in {name}.txt");
    }
}

#[test]
fn committed_corpus_parses_and_is_large_enough() {
    let instances = corpus::load_corpus_dir(&corpus_dir()).expect("corpus dir parses");
    assert_eq!(instances.len(), corpus::builtin().len());
    let small = instances.iter().filter(|i| i.graph.n() <= 5).count();
    assert!(small >= 200, "corpus has only {small} instances with n ≤ 5");
    assert!(instances.iter().all(|i| !i.reversed));
}
