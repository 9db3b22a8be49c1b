use mtbench_core::bleu::{corpus_bleu, BleuConfig, Tokenizer};
use mtbench_core::rng::SeededRng;
use proptest::prelude::*;

const WORDS: &[&str] = &[
    "the", "cat", "sat", "on", "mat", "a", "dog", ",", ".", "3.5", "模型", "你",
];

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 0..10).prop_map(|w| w.join(" "))
}

fn corpus() -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::vec((sentence(), sentence()), 1..8)
}

fn configs() -> [BleuConfig; 2] {
    [
        BleuConfig::default(),
        BleuConfig {
            tokenizer: Tokenizer::Zh,
            ..BleuConfig::default()
        },
    ]
}

proptest! {
    #[test]
    fn joint_shuffle_leaves_score_unchanged(pairs in corpus(), seed in any::<u64>()) {
        let mut shuffled = pairs.clone();
        SeededRng::new(seed).shuffle(&mut shuffled);
        for cfg in configs() {
            let (h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            let (hs, rs): (Vec<_>, Vec<_>) = shuffled.iter().cloned().unzip();
            let a = corpus_bleu(&h, &r, &cfg).unwrap();
            let b = corpus_bleu(&hs, &rs, &cfg).unwrap();
            prop_assert_eq!(a.score, b.score);
        }
    }

    // Holds for a hypothesis that equals its reference: its n-grams all match
    // and the reference length stays in the denominator of the brevity penalty.
    #[test]
    fn emptying_an_exact_hypothesis_never_raises_the_score(pairs in corpus(), pick in any::<prop::sample::Index>()) {
        for cfg in configs() {
            let (mut h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            let i = pick.index(h.len());
            h[i] = r[i].clone();
            let before = corpus_bleu(&h, &r, &cfg).unwrap().score;
            h[i] = String::new();
            let after = corpus_bleu(&h, &r, &cfg).unwrap().score;
            prop_assert!(after <= before + 1e-9, "{} > {}", after, before);
        }
    }

    #[test]
    fn score_stays_in_range(pairs in corpus()) {
        let (h, r): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let s = corpus_bleu(&h, &r, &BleuConfig::default()).unwrap();
        prop_assert!((0.0..=100.0 + 1e-9).contains(&s.score));
        prop_assert!(s.bp >= 0.0 && s.bp <= 1.0);
    }
}

#[test]
fn emptying_an_unmatched_hypothesis_can_raise_the_score() {
    let cfg = BleuConfig::default();
    let refs = ["the cat sat on the mat", ""];
    let with_noise = corpus_bleu(&["the cat sat on the mat", "sat sat sat"], &refs, &cfg).unwrap();
    let emptied = corpus_bleu(&["the cat sat on the mat", ""], &refs, &cfg).unwrap();
    assert!(emptied.score > with_noise.score);
}
