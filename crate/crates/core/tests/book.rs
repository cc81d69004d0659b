//! Every guide chapter must be compiled as a doc-test.

use std::path::Path;

#[test]
fn every_chapter_is_doc_tested() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let summary = std::fs::read_to_string(root.join("../../book/src/SUMMARY.md")).unwrap();
    let lib = std::fs::read_to_string(root.join("src/lib.rs")).unwrap();
    let chapters: Vec<&str> =
        summary.lines().filter_map(|l| l.split_once("](").map(|(_, rest)| rest.trim_end_matches(')'))).collect();
    assert!(chapters.len() >= 5, "{chapters:?}");
    for ch in chapters {
        assert!(root.join("../../book/src").join(ch).exists(), "{ch} missing");
        assert!(lib.contains(&format!("book/src/{ch}\")")), "{ch} is not included in lib.rs");
    }
}
