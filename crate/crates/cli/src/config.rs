//! Optional TOML config file. Keys mirror the long flag names; a flag given on
//! the command line wins over the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub dim: Option<usize>,
    pub lr: Option<f64>,
    pub margin_l: Option<f64>,
    pub margin_e: Option<f64>,
    pub margin_c: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub sampling: Option<String>,
    pub pool: Option<String>,
    pub model: Option<String>,
    pub checkpoint_every: Option<usize>,
    pub slack: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag value, else file value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_kebab_keys() {
        let c: FileConfig = toml::from_str("dim = 20\nmargin-c = 0.3\nsampling = \"unif\"\n").unwrap();
        assert_eq!(c.dim, Some(20));
        assert_eq!(c.margin_c, Some(0.3));
        assert_eq!(c.sampling.as_deref(), Some("unif"));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<FileConfig>("dimension = 3\n").is_err());
    }

    #[test]
    fn flag_beats_file() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }
}
