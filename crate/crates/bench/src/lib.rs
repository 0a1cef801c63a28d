//! Shared fixtures for the benchmarks.

use gazeattn::augment::{build_augmented_dataset, AugmentConfig, AugmentedDataset};
use gazeattn::code::Corpus;
use gazeattn::gaze::Scanpath;
use gazeattn::synth::{generate_corpus, synthesize_corpus, SynthConfig};

pub struct Fixture {
    pub corpus: Corpus,
    pub scanpaths: Vec<Scanpath>,
    pub dataset: AugmentedDataset,
}

pub fn fixture(snippets: usize) -> Fixture {
    let corpus = generate_corpus(snippets, 20..=40, 42);
    let scanpaths = synthesize_corpus(&corpus, &SynthConfig::default()).expect("generated snippets are non-empty");
    let dataset =
        build_augmented_dataset(&corpus, &scanpaths, &AugmentConfig::default()).expect("synthetic scanpaths are valid");
    Fixture {
        corpus,
        scanpaths,
        dataset,
    }
}
