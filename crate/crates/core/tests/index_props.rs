use ecorag_core::embed::{l2_norm, normalize, Embedding};
use ecorag_core::index::{read_index, write_index, ChunkRef, IndexBuilder, IndexError, IndexMetadata, VectorIndex};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn meta() -> IndexMetadata {
    IndexMetadata {
        embedding_model: "test".into(),
        chunk_size: 1000,
        overlap: 200,
        created_at: "2024-01-01T00:00:00Z".into(),
        corpus_fingerprint: String::new(),
    }
}

fn random_vectors(rng: &mut StdRng, n: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect()
}

fn build(raw: &[Vec<f32>]) -> VectorIndex {
    let mut b = IndexBuilder::new(meta());
    for (i, v) in raw.iter().enumerate() {
        let r = ChunkRef {
            doc_id: format!("doc{:02}", i % 17),
            seq: i,
            start_char: 0,
        };
        b.push(r, format!("chunk {i}"), &normalize(&Embedding(v.clone())).unwrap()).unwrap();
    }
    b.seal()
}

/// All cosines from the raw vectors, fully sorted: score desc, doc asc, seq asc.
fn oracle(raw: &[Vec<f32>], q: &[f32], k: usize) -> Vec<(String, usize)> {
    let norm = |v: &[f32]| v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    let qn = norm(q);
    let mut all: Vec<(f64, String, usize)> = raw
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let d: f64 = v.iter().zip(q).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
            (d / (norm(v) * qn), format!("doc{:02}", i % 17), i)
        })
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    all.into_iter().take(k).map(|(_, d, s)| (d, s)).collect()
}

fn hits(index: &VectorIndex, q: &[f32], k: usize) -> Vec<(String, usize)> {
    index
        .search_top_k(&normalize(&Embedding(q.to_vec())).unwrap(), k)
        .unwrap()
        .into_iter()
        .map(|h| (h.chunk_ref.doc_id, h.chunk_ref.seq))
        .collect()
}

#[test]
fn matches_brute_force_on_200_vectors() {
    let mut rng = StdRng::seed_from_u64(7);
    let raw = random_vectors(&mut rng, 200, 32);
    let index = build(&raw);
    for q in random_vectors(&mut rng, 50, 32) {
        assert_eq!(hits(&index, &q, 5), oracle(&raw, &q, 5));
    }
}

#[test]
fn thousand_entries_are_unit_norm() {
    let mut rng = StdRng::seed_from_u64(8);
    let raw = random_vectors(&mut rng, 1000, 24);
    let index = build(&raw);
    assert_eq!(index.len(), 1000);
    for i in 0..index.len() {
        assert!((l2_norm(index.vector(i)) - 1.0).abs() < 1e-5);
    }
}

#[test]
fn high_dimensional_normalization() {
    let mut rng = StdRng::seed_from_u64(9);
    let v = random_vectors(&mut rng, 1, 1024).remove(0);
    let u = normalize(&Embedding(v)).unwrap();
    let norm: f64 = u.values().iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-5);
}

#[test]
fn persistence_preserves_results() {
    let mut rng = StdRng::seed_from_u64(10);
    let raw = random_vectors(&mut rng, 100, 16);
    let index = build(&raw);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.index");
    ecorag_core::index::save_index(&index, &path).unwrap();
    let loaded = ecorag_core::index::load_index(&path).unwrap();
    for q in random_vectors(&mut rng, 10, 16) {
        let u = normalize(&Embedding(q)).unwrap();
        assert_eq!(index.search_top_k(&u, 4).unwrap(), loaded.search_top_k(&u, 4).unwrap());
    }
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    assert!(matches!(read_index(&bytes), Err(IndexError::Corruption(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn top_k_is_a_prefix_of_top_k_plus_one(seed in any::<u64>(), n in 1usize..80, dim in 1usize..12, k in 1usize..12) {
        let mut rng = StdRng::seed_from_u64(seed);
        let raw = random_vectors(&mut rng, n, dim);
        let raw: Vec<Vec<f32>> = raw.into_iter().filter(|v| v.iter().any(|x| *x != 0.0)).collect();
        prop_assume!(!raw.is_empty());
        let index = build(&raw);
        let q = random_vectors(&mut rng, 1, dim).remove(0);
        prop_assume!(q.iter().any(|x| *x != 0.0));
        let a = hits(&index, &q, k);
        let b = hits(&index, &q, k + 1);
        prop_assert_eq!(a.len(), k.min(raw.len()));
        prop_assert_eq!(&b[..a.len()], &a[..]);
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>(), n in 1usize..40, dim in 1usize..10) {
        let mut rng = StdRng::seed_from_u64(seed);
        let raw: Vec<Vec<f32>> = random_vectors(&mut rng, n, dim)
            .into_iter()
            .filter(|v| v.iter().any(|x| *x != 0.0))
            .collect();
        prop_assume!(!raw.is_empty());
        let index = build(&raw);
        let bytes = write_index(&index);
        prop_assert_eq!(read_index(&bytes).unwrap(), index);
    }
}
