use bitext_core::corpus::{gen_synthetic, Lang, NoiseSpec, Sentence, Side};
use bitext_core::mine::{
    cosine, mine_candidates, write_candidates, EmbeddingIndex, EmbeddingVector, HashEmbedder, Neighbor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut ChaCha8Rng, dim: usize, coarse: bool) -> EmbeddingVector {
    loop {
        let v: Vec<f32> = (0..dim)
            .map(|_| if coarse { rng.random_range(-1i32..=1) as f32 } else { rng.random_range(-1.0f32..1.0) })
            .collect();
        if let Ok(u) = EmbeddingVector::normalized(v) {
            return u;
        }
    }
}

fn index_of(vectors: &[EmbeddingVector]) -> EmbeddingIndex {
    let lang = Lang::new("e").unwrap();
    let payloads = (0..vectors.len())
        .map(|i| Sentence::new(&format!("s{i}"), lang.clone()).unwrap())
        .collect();
    EmbeddingIndex::new(payloads, vectors.to_vec(), vectors[0].dim()).unwrap()
}

/// Full scan, full sort by descending cosine then ascending position.
fn brute_force(q: &EmbeddingVector, vectors: &[EmbeddingVector], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = vectors
        .iter()
        .enumerate()
        .map(|(index, v)| Neighbor {
            index,
            cosine: cosine(q, v).unwrap(),
        })
        .collect();
    all.sort_by(|a, b| b.cosine.partial_cmp(&a.cosine).unwrap().then(a.index.cmp(&b.index)));
    all.truncate(k);
    all
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_brute_force(seed in any::<u64>(), n in 1usize..300, dim in 1usize..12, k in 1usize..10, coarse in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors: Vec<_> = (0..n).map(|_| random_unit(&mut rng, dim, coarse)).collect();
        let idx = index_of(&vectors);
        for _ in 0..5 {
            let q = random_unit(&mut rng, dim, coarse);
            prop_assert_eq!(idx.knn(&q, k).unwrap(), brute_force(&q, &vectors, k));
        }
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(seed in any::<u64>(), dim in 1usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unit(&mut rng, dim, false);
        let v = random_unit(&mut rng, dim, false);
        let c = cosine(&u, &v).unwrap();
        prop_assert_eq!(c, cosine(&v, &u).unwrap());
        prop_assert!(c.abs() <= 1.0);
        prop_assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-6);
        prop_assert!((u.norm() - 1.0).abs() < 1e-5);
    }
}

#[test]
fn knn_is_exact_across_shards() {
    // larger than one scan shard, with many exact ties
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vectors: Vec<_> = (0..9000).map(|_| random_unit(&mut rng, 4, true)).collect();
    let idx = index_of(&vectors);
    for _ in 0..20 {
        let q = random_unit(&mut rng, 4, true);
        assert_eq!(idx.knn(&q, 7).unwrap(), brute_force(&q, &vectors, 7));
    }
}

#[test]
fn candidate_counts_and_thread_independence() {
    let (c, _) = gen_synthetic(60, 30, (2, 6), &NoiseSpec::zero(0), 5).unwrap();
    let emb = HashEmbedder::toy(64);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let s = EmbeddingIndex::from_corpus_side(&[&c], Side::Src, &emb).unwrap();
                let t = EmbeddingIndex::from_corpus_side(&[&c], Side::Tgt, &emb).unwrap();
                let cands = mine_candidates(&c, &s, &t, 4, &emb).unwrap();
                for pc in &cands {
                    assert_eq!(pc.src.len(), 4.min(s.len()));
                    assert_eq!(pc.tgt.len(), 4.min(t.len()));
                }
                let mut buf = Vec::new();
                write_candidates(&cands, &mut buf).unwrap();
                buf
            })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn hashed_embeddings_are_unit_norm() {
    let (c, _) = gen_synthetic(20, 30, (1, 5), &NoiseSpec::zero(0), 9).unwrap();
    let emb = HashEmbedder::with_dim(32);
    let idx = EmbeddingIndex::from_corpus_side(&[&c], Side::Tgt, &emb).unwrap();
    for i in 0..idx.len() {
        let n: f64 = idx.vector(i).iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-5);
    }
}

// (-1,0)·(0,-1) sums two negative zeros; a zero tie still breaks by position
#[test]
fn signed_zero_cosines_tie_by_position() {
    let unit = |v: Vec<f32>| EmbeddingVector::normalized(v).unwrap();
    let vectors = vec![unit(vec![0.0, 1.0]), unit(vec![0.0, -1.0]), unit(vec![0.0, 1.0])];
    let q = unit(vec![-1.0, 0.0]);
    let got = index_of(&vectors).knn(&q, 3).unwrap();
    assert_eq!(got.iter().map(|n| n.index).collect::<Vec<_>>(), [0, 1, 2]);
    assert_eq!(got, brute_force(&q, &vectors, 3));
}
