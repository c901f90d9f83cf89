use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::MetricsError;

/// Static word vectors in word2vec text layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses `word v1 .. vd` lines, optionally preceded by a `count dim`
    /// header. Later duplicates of a word replace earlier ones.
    pub fn parse(text: &str) -> Result<Self, MetricsError> {
        let mut table = Self::default();
        let mut declared_dim = None;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if table.vectors.is_empty() && declared_dim.is_none() && fields.len() == 2 {
                if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    declared_dim = Some(d);
                    continue;
                }
            }
            let word = fields[0];
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| MetricsError::Parse {
                    line: lineno,
                    message: format!("bad number for {word:?}: {e}"),
                })?;
            let expected = declared_dim.or((table.dim > 0).then_some(table.dim));
            match expected {
                Some(d) if d != values.len() => {
                    return Err(MetricsError::Parse {
                        line: lineno,
                        message: format!("{word:?} has {} values, expected {d}", values.len()),
                    })
                }
                _ if values.is_empty() => {
                    return Err(MetricsError::Parse {
                        line: lineno,
                        message: format!("{word:?} has no values"),
                    })
                }
                _ => {}
            }
            table.dim = values.len();
            table.vectors.insert(word.to_string(), values);
        }
        Ok(table)
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = Self::default();
        for (w, v) in entries {
            let w = w.into();
            if table.dim == 0 {
                table.dim = v.len();
            } else if v.len() != table.dim {
                return Err(MetricsError::Invalid(format!(
                    "{w:?} has {} values, expected {}",
                    v.len(),
                    table.dim
                )));
            }
            table.vectors.insert(w, v);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Exact lookup, falling back to the lowercased word.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors
            .get(word)
            .or_else(|| self.vectors.get(&word.to_lowercase()))
            .map(Vec::as_slice)
    }

    pub fn require(&self, word: &str) -> Result<&[f64], MetricsError> {
        self.get(word).ok_or_else(|| MetricsError::MissingWord(word.to_string()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let n = norm(a) * norm(b);
    if n == 0.0 {
        0.0
    } else {
        dot(a, b) / n
    }
}
