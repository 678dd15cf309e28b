//! Fixtures shared by the benchmarks.

use xcal_core::rng::{KeyedRng, Rng64};
use xcal_core::simulator::{simulate, SimConfig, Simulation};

const VOCAB: [&str; 16] = [
    "the",
    "a",
    "committee",
    "approved",
    "new",
    "budget",
    "for",
    "next",
    "year",
    "after",
    "long",
    "debate",
    "members",
    "voted",
    "against",
    "it",
];

/// `n` candidate/reference sentence pairs of 8 to 30 words over a small
/// vocabulary, so n-grams overlap.
pub fn sentence_pairs(n: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut rng = KeyedRng::new(seed, 0);
    let mut sentence = || {
        let len = 8 + rng.below(23) as usize;
        (0..len)
            .map(|_| VOCAB[rng.below(VOCAB.len() as u64) as usize])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let cands = (0..n).map(|_| sentence()).collect();
    let refs = (0..n).map(|_| sentence()).collect();
    (cands, refs)
}

/// A simulated campaign with `pairs` language pairs at full item counts.
pub fn campaign(pairs: usize, seed: u64) -> Simulation {
    simulate(&SimConfig {
        n_language_pairs: pairs,
        n_items: 200,
        n_reference_items: 100,
        n_calibration_items: 100,
        seed,
        ..SimConfig::default()
    })
    .expect("valid config")
}
