//! Flat key=value config files, flag-over-file resolution, and the sidecar
//! JSON that records every resolved value for provenance.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};

/// Key=value pairs read from an optional config file. Lines are
/// `key = value` (whitespace around `=` optional); `#` starts a comment;
/// blank lines are ignored. Flags always override file values.
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    anyhow!(
                        "config line {} is not key=value: {raw:?}",
                        lineno + 1
                    )
                })?;
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Accumulates the fully resolved configuration (defaults filled in) and
/// writes it next to the output file as `<output>.config.json`.
#[derive(Default)]
pub struct Resolved {
    entries: BTreeMap<String, serde_json::Value>,
}

impl Resolved {
    pub fn record(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn write_sidecar(&self, output: &Path) -> Result<()> {
        let mut sidecar = output.as_os_str().to_owned();
        sidecar.push(".config.json");
        let path = PathBuf::from(sidecar);
        let body = serde_json::to_string_pretty(&self.entries)?;
        std::fs::write(&path, body + "\n")
            .with_context(|| format!("cannot write sidecar {}", path.display()))?;
        Ok(())
    }
}

/// Resolves one scalar setting: explicit flag beats config file beats
/// default; records the final value.
pub fn resolve<T>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: Option<T>,
) -> Result<T>
where
    T: FromStr + Display,
    T::Err: Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(raw) = file.get(key) {
        return raw
            .parse::<T>()
            .map_err(|e| anyhow!("config key {key} = {raw:?}: {e}"));
    }
    default.ok_or_else(|| anyhow!("missing required setting {key} (flag --{})", key.replace('_', "-")))
}

/// Resolves an output path: flag beats config file beats default.
pub fn resolve_path(
    flag: Option<PathBuf>,
    file: &FileConfig,
    key: &str,
    default: &str,
) -> PathBuf {
    flag.unwrap_or_else(|| {
        PathBuf::from(file.get(key).unwrap_or(default))
    })
}

/// Parses `n` comma-separated floats.
pub fn parse_floats<const N: usize>(raw: &str, what: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(anyhow!("{what} needs {N} comma-separated numbers, got {raw:?}"));
    }
    let mut out = [0.0; N];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .parse::<f64>()
            .map_err(|e| anyhow!("{what} component {p:?}: {e}"))?;
    }
    Ok(out)
}

/// Fixed 17-significant-digit float formatting: round-trip exact, '.'
/// decimal separator.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 2.0_f64.sqrt(), 1e-300, 12345.6789, 0.0] {
            let s = fmt_f(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            assert!(!s.contains(','));
        }
    }

    #[test]
    fn config_parsing_and_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "h = 0.75\n# comment\nseed=42\n").unwrap();
        let file = FileConfig::load(Some(&path)).unwrap();
        // Flag wins, file beats default, default fills the rest.
        assert_eq!(resolve(Some(1.5f64), &file, "h", Some(0.5)).unwrap(), 1.5);
        assert_eq!(resolve(None::<f64>, &file, "h", Some(0.5)).unwrap(), 0.75);
        assert_eq!(resolve(None::<u64>, &file, "seed", Some(0)).unwrap(), 42);
        assert_eq!(resolve(None::<f64>, &file, "dt", Some(1e-3)).unwrap(), 1e-3);
        assert!(resolve(None::<f64>, &file, "t_end", None).is_err());
    }

    #[test]
    fn float_list_parsing() {
        assert_eq!(
            parse_floats::<4>("1, 2,2 ,4", "alphas").unwrap(),
            [1.0, 2.0, 2.0, 4.0]
        );
        assert!(parse_floats::<4>("1,2,3", "alphas").is_err());
        assert!(parse_floats::<2>("a,b", "center").is_err());
    }
}
