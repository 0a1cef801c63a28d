use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Syntactic category of a code token.
///
/// Variant order is the canonical label order used wherever label sequences
/// are compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SemanticLabel {
    Keyword,
    Identifier,
    Literal,
    Operator,
    Separator,
    Comment,
    Other,
}

impl SemanticLabel {
    pub const ALL: [SemanticLabel; 7] = [
        SemanticLabel::Keyword,
        SemanticLabel::Identifier,
        SemanticLabel::Literal,
        SemanticLabel::Operator,
        SemanticLabel::Separator,
        SemanticLabel::Comment,
        SemanticLabel::Other,
    ];

    /// Dense id in `1..=7`; `0` is left free for padding in model inputs.
    pub fn id(self) -> usize {
        self as usize + 1
    }

    pub fn from_id(id: usize) -> Option<Self> {
        id.checked_sub(1).and_then(|i| Self::ALL.get(i).copied())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SemanticLabel::Keyword => "Keyword",
            SemanticLabel::Identifier => "Identifier",
            SemanticLabel::Literal => "Literal",
            SemanticLabel::Operator => "Operator",
            SemanticLabel::Separator => "Separator",
            SemanticLabel::Comment => "Comment",
            SemanticLabel::Other => "Other",
        }
    }
}

impl fmt::Display for SemanticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Java SE reserved words, including `_`.
pub const JAVA_KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "_",
];

/// Word-form literals.
pub const JAVA_LITERAL_WORDS: &[&str] = &["true", "false", "null"];

/// Java operators, longest first so the lexer can do maximal munch.
pub const JAVA_OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=",
    "&=", "|=", "^=", "%=", "<<", ">>", "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
];

pub const JAVA_SEPARATORS: &[&str] = &["...", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@"];

/// Lookup tables that decide a token's [`SemanticLabel`] from its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRules {
    pub keywords: BTreeSet<String>,
    pub literal_words: BTreeSet<String>,
    pub operators: BTreeSet<String>,
    pub separators: BTreeSet<String>,
}

impl Default for LabelRules {
    fn default() -> Self {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        LabelRules {
            keywords: set(JAVA_KEYWORDS),
            literal_words: set(JAVA_LITERAL_WORDS),
            operators: set(JAVA_OPERATORS),
            separators: set(JAVA_SEPARATORS),
        }
    }
}

impl LabelRules {
    pub fn classify(&self, text: &str) -> SemanticLabel {
        let mut chars = text.chars();
        let Some(first) = chars.next() else {
            return SemanticLabel::Other;
        };
        if text.starts_with("//") || text.starts_with("/*") {
            return SemanticLabel::Comment;
        }
        let second = chars.next();
        if first.is_ascii_digit()
            || first == '"'
            || first == '\''
            || (first == '.' && second.is_some_and(|c| c.is_ascii_digit()))
        {
            return SemanticLabel::Literal;
        }
        if self.literal_words.contains(text) {
            return SemanticLabel::Literal;
        }
        if self.keywords.contains(text) {
            return SemanticLabel::Keyword;
        }
        if is_ident_start(first) {
            return SemanticLabel::Identifier;
        }
        if self.operators.contains(text) {
            return SemanticLabel::Operator;
        }
        if self.separators.contains(text) {
            return SemanticLabel::Separator;
        }
        SemanticLabel::Other
    }
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

pub(crate) fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}
