//! Text vector dump: an optional `#config <json>` line, then one
//! `<escaped-token> <f1> <f2> ...` line per token.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Embedding, EmbeddingConfig};
use crate::corpus::{escape, unescape};
use crate::error::{Error, Result};

const CONFIG_PREFIX: &str = "#config ";

impl Embedding {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let cfg = serde_json::to_string(&self.config).expect("config serializes");
        writeln!(out, "{CONFIG_PREFIX}{cfg}").unwrap();
        for (t, v) in &self.vectors {
            out.push_str(&escape(t));
            for x in v {
                write!(out, " {x:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Embedding> {
        let mut config: Option<EmbeddingConfig> = None;
        let mut vectors = BTreeMap::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let err = |m: String| Error::Parse {
                line: i + 1,
                message: m,
            };
            if let Some(json) = line.strip_prefix(CONFIG_PREFIX) {
                config = Some(serde_json::from_str(json).map_err(|e| err(e.to_string()))?);
                continue;
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = unescape(fields.next().unwrap()).map_err(|e| err(e.to_string()))?;
            let v = fields
                .map(|f| f.parse::<f64>().map_err(|e| err(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if *dim.get_or_insert(v.len()) != v.len() {
                return Err(err(format!(
                    "expected {} components, found {}",
                    dim.unwrap(),
                    v.len()
                )));
            }
            vectors.insert(token, v);
        }
        let config = match config {
            Some(c) => c,
            None => EmbeddingConfig {
                dim: dim.unwrap_or(0),
                ..Default::default()
            },
        };
        Embedding::from_vectors(vectors, config)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Embedding> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Embedding::from_text(&text)
    }
}
