//! Statistical checks on the synthetic generator.

use std::collections::BTreeMap;

use cyberlang::synth::{exact_likelihood, generate_corpus, standard_sources, GenConfig, MarkovSpec, SynthRng};
use cyberlang::Label;

#[test]
fn anomaly_share_within_binomial_interval() {
    let (bg, an) = standard_sources(1, 8, 11);
    for seed in 0..5 {
        let cfg = GenConfig { n_sequences: 2000, length_min: 30, length_max: 70, anomaly_fraction: 0.05, seed };
        let corpus = generate_corpus(&bg, &an, &cfg).unwrap();
        let attacks = corpus.iter().filter(|s| s.label == Label::Attack).count() as f64;
        // mean 100, sd sqrt(2000 * 0.05 * 0.95) ≈ 9.75; 99% ≈ ±2.576 sd
        let sd = (2000.0f64 * 0.05 * 0.95).sqrt();
        assert!((attacks - 100.0).abs() <= 2.576 * sd, "seed {seed}: {attacks} attacks");
        assert!(corpus.iter().all(|s| (30..=70).contains(&s.tokens.len())));
    }
}

#[test]
fn empirical_transitions_converge() {
    let mut rng = SynthRng::new(77);
    let spec = MarkovSpec::random(2, 3, 1.5, &mut rng);
    let seq = spec.sample(300_000, &mut rng).unwrap();
    let mut counts: BTreeMap<Vec<u32>, [u64; 3]> = BTreeMap::new();
    for w in seq.windows(3) {
        counts.entry(w[..2].to_vec()).or_default()[w[2] as usize] += 1;
    }
    for (ctx, row) in &spec.transitions {
        let c = counts[ctx];
        let n: u64 = c.iter().sum();
        for (sym, &p) in row.iter().enumerate() {
            let phat = c[sym] as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((phat - p).abs() <= 3.0 * sd + 1e-12, "{ctx:?}->{sym}: {phat} vs {p}");
        }
    }
}

#[test]
fn exact_likelihood_matches_direct_product() {
    let mut rng = SynthRng::new(5);
    for order in 0..3 {
        let spec = MarkovSpec::random(order, 4, 2.0, &mut rng);
        for _ in 0..50 {
            let len = order + rng.below(15) as usize;
            let seq = spec.sample(len, &mut rng).unwrap();
            let mut want = spec.initial[&seq[..order]];
            for i in order..seq.len() {
                want *= spec.transitions[&seq[i - order..i]][seq[i] as usize];
            }
            let got = exact_likelihood(&spec, &seq).unwrap();
            assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        }
    }
}

#[test]
fn same_seed_same_corpus() {
    let (bg, an) = standard_sources(2, 5, 9);
    let cfg = GenConfig { n_sequences: 50, length_min: 3, length_max: 9, anomaly_fraction: 0.2, seed: 9 };
    assert_eq!(generate_corpus(&bg, &an, &cfg).unwrap(), generate_corpus(&bg, &an, &cfg).unwrap());
    assert_eq!(standard_sources(2, 5, 9), (bg, an));
}
