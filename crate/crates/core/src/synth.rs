//! Seeded synthetic snippets and scanpaths for desk-scale experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::code::{parse_snippet, Corpus, Snippet};
use crate::error::{Error, Result};
use crate::gaze::{FixationEvent, FixationRecord, Scanpath};

/// Parameters of the locality-controlled gaze model.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Probability that a saccade lands within `window_lines` of the current line.
    pub locality_prob: f64,
    pub window_lines: usize,
    pub fixations_per_snippet: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            locality_prob: 0.95,
            window_lines: 3,
            fixations_per_snippet: 60,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.locality_prob) {
            return Err(Error::Config(format!(
                "locality_prob must lie in [0, 1], got {}",
                self.locality_prob
            )));
        }
        if self.fixations_per_snippet == 0 {
            return Err(Error::Config("fixations_per_snippet must be at least 1".into()));
        }
        Ok(())
    }
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Rng for one snippet, derived from the corpus seed and the snippet id.
pub fn snippet_rng(seed: u64, snippet_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stable_hash(snippet_id))
}

fn duration(rng: &mut impl Rng) -> f64 {
    rng.gen_range(100..=400) as f64
}

/// Random-walk scanpath: the first fixation is uniform; each later one stays
/// within `window_lines` of the current line with `locality_prob`, otherwise
/// jumps uniformly anywhere.
pub fn synthesize_scanpath(snippet: &Snippet, config: &SynthConfig, rng: &mut impl Rng) -> Result<Scanpath> {
    config.validate()?;
    let n = snippet.len();
    if n == 0 {
        return Err(Error::Invalid(format!("snippet `{}` has no tokens", snippet.id)));
    }
    let lines: Vec<usize> = snippet.tokens.iter().map(|t| t.line).collect();
    let mut current = rng.gen_range(0..n);
    let mut events = Vec::with_capacity(config.fixations_per_snippet);
    events.push(FixationEvent {
        token_index: current,
        duration_ms: duration(rng),
    });
    for _ in 1..config.fixations_per_snippet {
        current = if rng.gen_bool(config.locality_prob) {
            let line = lines[current];
            let lo = lines.partition_point(|&l| l + config.window_lines < line);
            let hi = lines.partition_point(|&l| l <= line + config.window_lines);
            rng.gen_range(lo..hi)
        } else {
            rng.gen_range(0..n)
        };
        events.push(FixationEvent {
            token_index: current,
            duration_ms: duration(rng),
        });
    }
    Ok(Scanpath {
        snippet_id: snippet.id.clone(),
        events,
        unmapped_count: 0,
    })
}

/// One scanpath per non-empty snippet, each from its own derived seed.
pub fn synthesize_corpus(corpus: &Corpus, config: &SynthConfig) -> Result<Vec<Scanpath>> {
    corpus
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| synthesize_scanpath(s, config, &mut snippet_rng(config.seed, &s.id)))
        .collect()
}

/// Fixation rows that map back onto exactly the same tokens.
pub fn scanpath_to_records(scanpath: &Scanpath, snippet: &Snippet) -> Vec<FixationRecord> {
    scanpath
        .events
        .iter()
        .enumerate()
        .map(|(seq, e)| {
            let token = &snippet.tokens[e.token_index];
            FixationRecord {
                snippet_id: scanpath.snippet_id.clone(),
                seq: seq as u64,
                line: token.line,
                column: token.col_start,
                duration_ms: e.duration_ms,
            }
        })
        .collect()
}

const NAMES: &[&str] = &[
    "count", "total", "index", "value", "result", "buffer", "node", "size", "offset", "limit", "item", "key", "name",
    "user", "input", "cache", "left", "right", "sum", "flag",
];
const TYPES: &[&str] = &["int", "long", "double", "boolean"];
const CLASSES: &[&str] = &["String", "List", "Map", "Node", "Builder"];
const METHODS: &[&str] = &["add", "get", "put", "append", "remove", "check", "update", "apply"];
const WORDS: &[&str] = &["check", "the", "input", "value", "update", "cache", "done", "next"];

fn pick<'a>(rng: &mut impl Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().unwrap_or("x")
}

/// A synthetic Java method of roughly `lines` lines. Statement kinds come in
/// short runs of repeated shape, so tokens with the same label cluster on
/// neighbouring lines the way they do in real code.
pub fn generate_snippet(id: &str, lines: usize, rng: &mut impl Rng) -> Snippet {
    let mut out = vec![format!(
        "public {} {}({} {}, {} {}) {{",
        pick(rng, TYPES),
        pick(rng, METHODS),
        pick(rng, TYPES),
        pick(rng, NAMES),
        pick(rng, CLASSES),
        pick(rng, NAMES)
    )];
    let mut depth = 1usize;
    while out.len() + depth < lines.max(3) {
        let kind = rng.gen_range(0..9);
        let repeats = rng.gen_range(1..=3);
        for _ in 0..repeats {
            if out.len() + depth >= lines.max(3) {
                break;
            }
            let indent = "    ".repeat(depth);
            let a = pick(rng, NAMES);
            let b = pick(rng, NAMES);
            let num = rng.gen_range(0..100);
            let line = match kind {
                0 => format!("{indent}{} {a} = {num};", pick(rng, TYPES)),
                1 => format!("{indent}{a} = {b} + {num};"),
                2 => format!("{indent}{a}.{}({b}, \"{}\");", pick(rng, METHODS), pick(rng, WORDS)),
                3 => format!(
                    "{indent}// {} {} {}",
                    pick(rng, WORDS),
                    pick(rng, WORDS),
                    pick(rng, WORDS)
                ),
                4 => format!("{indent}{} {a} = new {}();", pick(rng, CLASSES), pick(rng, CLASSES)),
                5 if depth < 3 => {
                    depth += 1;
                    format!("{indent}if ({a} > {num} && {b} != null) {{")
                }
                6 if depth < 3 => {
                    depth += 1;
                    format!("{indent}for (int i = 0; i < {a}.size(); i++) {{")
                }
                7 if depth > 1 => {
                    depth -= 1;
                    format!("{}}}", "    ".repeat(depth))
                }
                _ => format!("{indent}{a} += {b} * {num};"),
            };
            out.push(line);
        }
    }
    while depth > 0 {
        depth -= 1;
        out.push(format!("{}}}", "    ".repeat(depth)));
    }
    let source = out.join("\n") + "\n";
    parse_snippet(id, &source).expect("generated snippets are lexically valid")
}

/// `count` generated snippets with ids `snip0000`, `snip0001`, ...
pub fn generate_corpus(count: usize, lines: std::ops::RangeInclusive<usize>, seed: u64) -> Corpus {
    let snippets = (0..count).map(|i| {
        let id = format!("snip{i:04}");
        let mut rng = snippet_rng(seed, &id);
        let n = rng.gen_range(lines.clone());
        generate_snippet(&id, n, &mut rng)
    });
    Corpus::from_snippets(snippets).expect("generated ids are unique")
}

/// Parameters of the planted reader used for learnability experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    /// Chance that the reader fixates a token while sweeping past it.
    pub fixation_prob: f64,
    /// Chance of a short regression after each fixation.
    pub regression_prob: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            fixation_prob: 0.35,
            regression_prob: 0.1,
            seed: 42,
        }
    }
}

/// A reader that sweeps the snippet in source order, fixating a random subset
/// of tokens and occasionally regressing to a recent token. Which tokens get
/// fixated is noise; which labels sit near each other is structure, so the
/// label signal becomes stable only once same-label neighbours are pulled in.
pub fn planted_scanpath(snippet: &Snippet, config: &PlantedConfig, rng: &mut impl Rng) -> Result<Scanpath> {
    if snippet.is_empty() {
        return Err(Error::Invalid(format!("snippet `{}` has no tokens", snippet.id)));
    }
    let mut events = Vec::new();
    for i in 0..snippet.len() {
        if !rng.gen_bool(config.fixation_prob) {
            continue;
        }
        events.push(FixationEvent {
            token_index: i,
            duration_ms: duration(rng),
        });
        if i > 0 && rng.gen_bool(config.regression_prob) {
            let back = rng.gen_range(i.saturating_sub(4)..i);
            events.push(FixationEvent {
                token_index: back,
                duration_ms: duration(rng),
            });
        }
    }
    if events.is_empty() {
        events.push(FixationEvent {
            token_index: 0,
            duration_ms: duration(rng),
        });
    }
    Ok(Scanpath {
        snippet_id: snippet.id.clone(),
        events,
        unmapped_count: 0,
    })
}

pub fn planted_corpus_scanpaths(corpus: &Corpus, config: &PlantedConfig) -> Result<Vec<Scanpath>> {
    corpus
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| planted_scanpath(s, config, &mut snippet_rng(config.seed, &s.id)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::map_fixations_to_tokens;

    fn snippet() -> Snippet {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        generate_snippet("s", 40, &mut rng)
    }

    #[test]
    fn full_locality_stays_in_window() {
        let s = snippet();
        let config = SynthConfig {
            locality_prob: 1.0,
            ..SynthConfig::default()
        };
        let sp = synthesize_scanpath(&s, &config, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(sp.events.len(), 60);
        let lines: Vec<_> = sp.token_indices().map(|i| s.tokens[i].line).collect();
        assert!(lines.windows(2).all(|w| w[0].abs_diff(w[1]) <= 3));
    }

    #[test]
    fn zero_locality_still_valid() {
        let s = parse_snippet("two", "int a;\nint b;").unwrap();
        let config = SynthConfig {
            locality_prob: 0.0,
            ..SynthConfig::default()
        };
        let sp = synthesize_scanpath(&s, &config, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        sp.validate(&s).unwrap();
    }

    #[test]
    fn empty_snippet_rejected() {
        let s = parse_snippet("e", "").unwrap();
        assert!(synthesize_scanpath(&s, &SynthConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).is_err());
        assert!(planted_scanpath(&s, &PlantedConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn bad_config_rejected() {
        let s = snippet();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let config = SynthConfig {
            locality_prob: 1.5,
            ..SynthConfig::default()
        };
        assert!(synthesize_scanpath(&s, &config, &mut rng).is_err());
        let config = SynthConfig {
            fixations_per_snippet: 0,
            ..SynthConfig::default()
        };
        assert!(synthesize_scanpath(&s, &config, &mut rng).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let corpus = generate_corpus(5, 20..=30, 42);
        let config = SynthConfig::default();
        assert_eq!(
            synthesize_corpus(&corpus, &config).unwrap(),
            synthesize_corpus(&corpus, &config).unwrap()
        );
        assert_eq!(generate_corpus(5, 20..=30, 42), corpus);
    }

    #[test]
    fn records_map_back_to_same_tokens() {
        let s = snippet();
        let sp = synthesize_scanpath(&s, &SynthConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let records = scanpath_to_records(&sp, &s);
        assert_eq!(map_fixations_to_tokens(&records, &s).unwrap(), sp);
    }

    #[test]
    fn generated_snippet_shape() {
        let s = snippet();
        assert!(s.line_count() >= 38 && s.line_count() <= 41, "{}", s.line_count());
        assert!(s.source.trim_end().ends_with('}'));
    }
}
