use std::collections::BTreeSet;

use ecorag_core::corpus::{
    chunk_text, expected_chunk_count, load_documents, normalize_text, reconstruct, ChunkConfig, CorpusError, Document,
};
use proptest::prelude::*;

fn doc(text: String) -> Document {
    Document {
        id: "doc".into(),
        text,
        source_path: "doc".into(),
    }
}

/// Count windows by walking starts one stride at a time.
fn walk_count(len: usize, size: usize, overlap: usize) -> usize {
    if len == 0 {
        return 0;
    }
    let mut n = 0;
    let mut start = 0;
    loop {
        n += 1;
        if start + size >= len {
            return n;
        }
        start += size - overlap;
    }
}

fn config() -> impl Strategy<Value = ChunkConfig> {
    (1usize..60).prop_flat_map(|size| (Just(size), 0..size)).prop_map(|(s, o)| ChunkConfig::new(s, o).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn overlap_stripped_chunks_rebuild_the_text(text in "\\PC{0,400}", cfg in config()) {
        let chunks = chunk_text(&doc(text.clone()), cfg).unwrap();
        prop_assert_eq!(reconstruct(&chunks, cfg.overlap), text);
    }

    #[test]
    fn chunk_shape(text in "[a-zé\u{4e2d} \n]{0,300}", cfg in config()) {
        let len = text.chars().count();
        let chunks = chunk_text(&doc(text), cfg).unwrap();
        prop_assert_eq!(chunks.len(), walk_count(len, cfg.chunk_size, cfg.overlap));
        prop_assert_eq!(chunks.len(), expected_chunk_count(len, cfg));
        for (i, c) in chunks.iter().enumerate() {
            prop_assert_eq!(c.seq, i);
            prop_assert_eq!(c.start_char, i * cfg.stride());
            prop_assert!(c.text.chars().count() <= cfg.chunk_size);
        }
        if let Some(last) = chunks.last() {
            prop_assert_eq!(last.start_char + last.text.chars().count(), len);
        }
    }

    #[test]
    fn normalization_is_idempotent(text in "(\\PC|\r\n|e\u{301}){0,80}") {
        let once = normalize_text(&text);
        prop_assert_eq!(normalize_text(&once), once.clone());
        prop_assert!(!once.contains("\r\n"));
    }
}

#[test]
fn stride_examples() {
    let cfg = ChunkConfig::default();
    let chunks = chunk_text(&doc("x".repeat(2500)), cfg).unwrap();
    let starts: Vec<usize> = chunks.iter().map(|c| c.start_char).collect();
    assert_eq!(starts, [0, 800, 1600]);
    assert_eq!(chunks[2].text.len(), 900);
    let chunks = chunk_text(&doc("x".repeat(1800)), cfg).unwrap();
    assert_eq!(chunks.iter().map(|c| c.start_char).collect::<Vec<_>>(), [0, 800]);
}

#[test]
fn large_file_keeps_length_after_newline_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let line = "abcdefghij\r\n";
    let repeats = 10 * 1024 * 1024 / line.len();
    std::fs::write(dir.path().join("big.txt"), line.repeat(repeats)).unwrap();
    let exts: BTreeSet<String> = ["txt".to_string()].into();
    let (docs, report) = load_documents(dir.path(), &exts).unwrap();
    assert_eq!(docs.len(), 1);
    assert_eq!(report.files_read, 1);
    // One byte dropped per CRLF.
    assert_eq!(docs[0].text.len(), repeats * (line.len() - 1));
}

#[test]
fn unreadable_files_are_skipped_and_empty_corpus_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), "alpha").unwrap();
    std::fs::write(dir.path().join("b.txt"), [0xff, 0xfe, 0x00]).unwrap();
    std::fs::write(dir.path().join("c.bin"), "ignored").unwrap();
    let exts: BTreeSet<String> = ["txt".to_string()].into();
    let (docs, report) = load_documents(dir.path(), &exts).unwrap();
    assert_eq!(docs.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), ["a.txt"]);
    assert_eq!(report.files_skipped, 1);

    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(load_documents(empty.path(), &exts), Err(CorpusError::NoDocuments(_))));
    assert!(matches!(
        load_documents(&empty.path().join("missing"), &exts),
        Err(CorpusError::MissingRoot(_))
    ));
}
