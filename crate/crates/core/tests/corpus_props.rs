use bitext_core::corpus::{
    downsample, gen_synthetic, parse_corpus, split_pools, toy_reference, write_corpus, Corpus, Format, Lang,
    NoiseSpec, Side,
};
use proptest::prelude::*;

fn langs() -> (Lang, Lang) {
    (Lang::new("f").unwrap(), Lang::new("e").unwrap())
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9éüß,.!?' ]{0,24}[a-zé]"
}

fn corpus(max: usize) -> impl Strategy<Value = Corpus> {
    let score = prop_oneof![
        Just(None),
        (-1e6f64..1e6).prop_map(Some),
        prop::num::f64::NORMAL.prop_map(Some),
    ];
    prop::collection::vec((text(), text(), score), 0..max).prop_map(|rows| {
        let (f, e) = langs();
        let mut c = Corpus::new(f, e).unwrap();
        for (s, t, sc) in rows {
            c.push_text(&s, &t, sc).unwrap();
        }
        c
    })
}

fn scored_corpus(max: usize) -> impl Strategy<Value = Corpus> {
    prop::collection::vec((text(), text(), 0.9f64..1.2), 0..max).prop_map(|rows| {
        let (f, e) = langs();
        let mut c = Corpus::new(f, e).unwrap();
        for (s, t, sc) in rows {
            c.push_text(&s, &t, Some(sc)).unwrap();
        }
        c
    })
}

proptest! {
    #[test]
    fn save_then_load_is_identity(c in corpus(20), jsonl in any::<bool>()) {
        let fmt = if jsonl { Format::Jsonl } else { Format::Tsv };
        let mut buf = Vec::new();
        write_corpus(&c, fmt, &mut buf).unwrap();
        let (f, e) = langs();
        let back = parse_corpus(&buf, fmt, &f, &e).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn pools_partition_the_corpus(c in scored_corpus(40), low in 0.9f64..1.1, gap in 0.001f64..0.1) {
        let high = low + gap;
        let (a, b) = split_pools(&c, low, high).unwrap();
        let scores: Vec<f64> = c.pairs().iter().map(|p| p.score.unwrap()).collect();
        let dropped = scores.iter().filter(|&&s| s <= low).count();
        prop_assert_eq!(a.len() + b.len() + dropped, c.len());
        prop_assert!(a.pairs().iter().all(|p| p.score.unwrap() >= high));
        let in_b = |s: f64| s > low && s < high;
        prop_assert!(b.pairs().iter().all(|p| in_b(p.score.unwrap())));
        prop_assert_eq!(a.len(), scores.iter().filter(|&&s| s >= high).count());
    }

    #[test]
    fn downsample_is_a_seeded_ordered_subset(c in corpus(30), frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let n = (frac * c.len() as f64) as usize;
        let s1 = downsample(&c, n, seed).unwrap();
        let s2 = downsample(&c, n, seed).unwrap();
        prop_assert_eq!(&s1, &s2);
        prop_assert_eq!(s1.len(), n);
        // order-preserving subsequence of the input
        let mut it = c.pairs().iter();
        for p in s1.pairs() {
            prop_assert!(it.any(|q| q == p));
        }
    }

    #[test]
    fn zero_noise_generation_follows_the_toy_rule(n in 0usize..50, vocab in 2usize..40, seed in any::<u64>()) {
        let (clean, noisy) = gen_synthetic(n, vocab, (1, 6), &NoiseSpec::zero(seed), seed).unwrap();
        prop_assert_eq!(&clean, &noisy);
        for p in clean.pairs() {
            // independent re-derivation: f<i> -> e<i>, reversed
            let expect: Vec<String> = p.src.text().split_whitespace().rev()
                .map(|w| format!("e{}", &w[1..])).collect();
            prop_assert_eq!(p.tgt.text(), expect.join(" "));
            let toy = toy_reference(p.src.text());
            prop_assert_eq!(toy.as_deref(), Some(p.tgt.text()));
        }
    }
}

#[test]
fn corpus_sides_keep_their_languages() {
    let (clean, _) = gen_synthetic(10, 5, (2, 4), &NoiseSpec::zero(0), 3).unwrap();
    assert!(clean.side_texts(Side::Src).all(|t| t.starts_with('f')));
    assert!(clean.pairs().iter().all(|p| p.tgt.lang().as_str() == "e"));
}
