//! GloVe text-format embedding loader: one line per word, token followed by
//! space-separated floats.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Result, WsdError};
use crate::numeric::Vector;

pub struct GloveTable {
    pub dim: usize,
    vectors: HashMap<String, Vector>,
    pub skipped_lines: usize,
}

impl GloveTable {
    /// Builds a table from in-memory vectors (synthetic embeddings, tests).
    pub fn from_vectors(dim: usize, vectors: HashMap<String, Vector>) -> Self {
        GloveTable { dim, vectors, skipped_lines: 0 }
    }

    /// Direct lookup, falling back to the lowercased form on miss (the
    /// released GloVe vectors are lowercase-keyed).
    pub fn lookup(&self, word: &str) -> Option<&Vector> {
        self.vectors
            .get(word)
            .or_else(|| self.vectors.get(&word.to_lowercase()))
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn load_glove(path: &Path, expected_dim: usize) -> Result<GloveTable> {
    let file = std::fs::File::open(path)?;
    let mut vectors = HashMap::new();
    let mut skipped = 0usize;
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = match parts.next() {
            Some(w) => w,
            None => continue,
        };
        let floats: Option<Vec<f64>> = parts.map(|s| s.parse::<f64>().ok()).collect();
        match floats {
            Some(vals) if vals.len() == expected_dim => {
                vectors.insert(word.to_string(), Vector::from(vals));
            }
            _ => skipped += 1,
        }
    }
    if vectors.is_empty() {
        return Err(WsdError::Data(format!(
            "no valid {expected_dim}-dimensional embedding lines in {}",
            path.display()
        )));
    }
    Ok(GloveTable { dim: expected_dim, vectors, skipped_lines: skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_lines_and_skips_bad_dims() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "the 0.1 0.2").unwrap();
        writeln!(f, "cat 0.3 0.4 0.5").unwrap(); // wrong count, skipped
        writeln!(f, "dog -1.5 2.25").unwrap();
        let table = load_glove(f.path(), 2).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.skipped_lines, 1);
        assert_eq!(table.lookup("the").unwrap().data, vec![0.1, 0.2]);
        assert_eq!(table.lookup("dog").unwrap().data, vec![-1.5, 2.25]);
    }

    #[test]
    fn lowercase_fallback() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "paris 1.0 2.0").unwrap();
        let table = load_glove(f.path(), 2).unwrap();
        assert!(table.lookup("Paris").is_some());
        assert!(table.lookup("london").is_none());
    }

    #[test]
    fn all_wrong_dims_is_hard_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "the 0.1 0.2 0.3").unwrap();
        assert!(load_glove(f.path(), 2).is_err());
    }

    #[test]
    fn hundred_line_fixture() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for i in 0..100 {
            writeln!(f, "w{i} {}.5 {}.25", i, i).unwrap();
        }
        let table = load_glove(f.path(), 2).unwrap();
        assert_eq!(table.len(), 100);
        assert_eq!(table.lookup("w42").unwrap().data, vec![42.5, 42.25]);
    }
}
