//! Config-file handling, effective-setting resolution and the metadata
//! block written at the top of every output file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// Flat `key = value` settings file; blank lines and `#` comments are
/// skipped. Command-line flags override file values.
#[derive(Debug, Default, Clone)]
pub struct FileSettings {
    map: BTreeMap<String, String>,
}

impl FileSettings {
    pub fn load(path: &Path) -> Result<FileSettings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "{} line {}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileSettings { map })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::usage(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.parse(key)
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.parse(key)
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.parse(key)
    }

    pub fn u32(&self, key: &str) -> Result<Option<u32>, CliError> {
        self.parse(key)
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.map.get(key).cloned()
    }
}

/// Flag value if given, else config-file value, else the default.
pub fn effective<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// The effective configuration echoed into output headers.
#[derive(Debug, Clone)]
pub struct Metadata {
    command: String,
    entries: BTreeMap<String, String>,
}

impl Metadata {
    pub fn new(command: &str) -> Metadata {
        Metadata {
            command: command.to_string(),
            entries: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    /// Render the comment block: version, command, generator identity,
    /// then the sorted effective settings. Deliberately no timestamps so
    /// identical runs produce identical bytes.
    pub fn header(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# recare {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# generator: ChaCha20 (rand_chacha), SplitMix64 seed streams");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }
}

/// Format with 10 significant digits, plain decimal notation.
pub fn fmt10(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".to_string()
        } else if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (9 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Trim trailing zeros (and a dangling point) for stable short forms.
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        t.to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt10_examples() {
        assert_eq!(fmt10(0.0), "0");
        assert_eq!(fmt10(0.001452413896024628), "0.001452413896");
        assert_eq!(fmt10(-4.175100001), "-4.175100001");
        assert_eq!(fmt10(2113.0), "2113");
        assert_eq!(fmt10(1.5), "1.5");
    }

    #[test]
    fn settings_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "alpha = 0.05\n# comment\nseed=9\nname = spx\n").unwrap();
        let s = FileSettings::load(&path).unwrap();
        assert_eq!(s.f64("alpha").unwrap(), Some(0.05));
        assert_eq!(s.u64("seed").unwrap(), Some(9));
        assert_eq!(s.string("name"), Some("spx".into()));
        assert_eq!(s.f64("missing").unwrap(), None);
        assert_eq!(effective(Some(0.01), Some(0.05), 0.1), 0.01);
        assert_eq!(effective(None, Some(0.05), 0.1), 0.05);
        assert_eq!(effective::<f64>(None, None, 0.1), 0.1);
    }

    #[test]
    fn bad_config_line_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "alpha 0.05\n").unwrap();
        assert!(FileSettings::load(&path).is_err());
    }
}
