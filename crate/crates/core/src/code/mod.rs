//! Tokenization and semantic labelling of code snippets.

mod corpus;
mod label;
mod lexer;

pub use corpus::{parse_snippet, parse_snippet_with, Corpus, Snippet};
pub use label::{LabelRules, SemanticLabel, JAVA_KEYWORDS, JAVA_LITERAL_WORDS, JAVA_OPERATORS, JAVA_SEPARATORS};
pub use lexer::{label_tokens, tokenize, tokenize_with, SourceToken};
