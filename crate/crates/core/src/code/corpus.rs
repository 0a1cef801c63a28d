use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::label::LabelRules;
use super::lexer::{tokenize_with, SourceToken};
use crate::error::{Error, Result};

/// A tokenized, labelled code snippet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snippet {
    pub id: String,
    pub source: String,
    pub tokens: Vec<SourceToken>,
}

impl Snippet {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn line_count(&self) -> usize {
        self.tokens.last().map_or(0, |t| t.end_line)
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.tokens.len() {
            Ok(())
        } else {
            Err(Error::InvalidTokenIndex {
                snippet: self.id.clone(),
                index,
                len: self.tokens.len(),
            })
        }
    }
}

pub fn parse_snippet(id: &str, source: &str) -> Result<Snippet> {
    parse_snippet_with(id, source, &LabelRules::default())
}

pub fn parse_snippet_with(id: &str, source: &str, rules: &LabelRules) -> Result<Snippet> {
    Ok(Snippet {
        id: id.to_string(),
        source: source.to_string(),
        tokens: tokenize_with(source, rules)?,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SnippetRecord {
    id: String,
    source: String,
}

/// Snippets keyed by id; iteration is in id order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    snippets: BTreeMap<String, Snippet>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, snippet: Snippet) -> Result<()> {
        if self.snippets.contains_key(&snippet.id) {
            return Err(Error::DuplicateSnippet(snippet.id));
        }
        self.snippets.insert(snippet.id.clone(), snippet);
        Ok(())
    }

    pub fn from_snippets(snippets: impl IntoIterator<Item = Snippet>) -> Result<Self> {
        let mut corpus = Corpus::new();
        for s in snippets {
            corpus.insert(s)?;
        }
        Ok(corpus)
    }

    pub fn get(&self, id: &str) -> Option<&Snippet> {
        self.snippets.get(id)
    }

    pub fn require(&self, id: &str) -> Result<&Snippet> {
        self.get(id).ok_or_else(|| Error::UnknownSnippet(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Snippet> {
        self.snippets.values()
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    /// Loads a directory (one snippet per file, id = file stem) or a JSONL
    /// file with `{id, source}` records.
    pub fn load(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Self::from_dir(path)
        } else {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            Self::from_jsonl(BufReader::new(file))
        }
    }

    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut paths = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_file() {
                paths.push(path);
            }
        }
        paths.sort();
        let mut corpus = Corpus::new();
        for path in paths {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if id.starts_with('.') {
                continue;
            }
            let source = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            corpus.insert(parse_snippet(id, &source)?)?;
        }
        Ok(corpus)
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut corpus = Corpus::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io("<snippets>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SnippetRecord = serde_json::from_str(&line)?;
            corpus.insert(parse_snippet(&record.id, &record.source)?)?;
        }
        Ok(corpus)
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for s in self.iter() {
            let record = SnippetRecord {
                id: s.id.clone(),
                source: s.source.clone(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n").map_err(|e| Error::io("<snippets>", e))?;
        }
        Ok(())
    }
}
