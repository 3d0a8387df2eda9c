//! Run configuration merged from three layers: command defaults, an
//! optional `key = value` file, and command-line flags. Flags win over file
//! entries, file entries win over defaults.

use std::path::{Path, PathBuf};

use anova_mixt::{Error, Result};

/// One optional entry per tunable; `None` means "not set at this layer".
#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    pub basis: Option<String>,
    pub superposition: Option<usize>,
    pub family: Option<PathBuf>,
    pub n1: Option<i64>,
    pub n2: Option<i64>,
    pub theta: Option<f64>,
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub target: Option<String>,
    pub normalize: Option<bool>,
    pub full: Option<bool>,
}

const KNOWN_KEYS: &str =
    "basis, superposition, family, n1, n2, theta, seed, data, model, out, \
     threads, target, normalize, full";

impl RunConfig {
    /// Parses a configuration file: one `key = value` pair per line,
    /// `#` starts a comment, blank lines are ignored. Keys match the long
    /// flag names.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let bad = |msg: String| Error::Parse { line: lineno, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(bad(format!("field `{key}` has no value")));
            }
            match key {
                "basis" => cfg.basis = Some(value.to_string()),
                "superposition" => cfg.superposition = Some(parse(key, value, lineno)?),
                "family" => cfg.family = Some(PathBuf::from(value)),
                "n1" => cfg.n1 = Some(parse(key, value, lineno)?),
                "n2" => cfg.n2 = Some(parse(key, value, lineno)?),
                "theta" => cfg.theta = Some(parse(key, value, lineno)?),
                "seed" => cfg.seed = Some(parse(key, value, lineno)?),
                "data" => cfg.data = Some(PathBuf::from(value)),
                "model" => cfg.model = Some(PathBuf::from(value)),
                "out" => cfg.out = Some(PathBuf::from(value)),
                "threads" => cfg.threads = Some(parse(key, value, lineno)?),
                "target" => cfg.target = Some(value.to_string()),
                "normalize" => cfg.normalize = Some(parse(key, value, lineno)?),
                "full" => cfg.full = Some(parse(key, value, lineno)?),
                other => {
                    return Err(bad(format!(
                        "unknown field `{other}` (known fields: {KNOWN_KEYS})"
                    )))
                }
            }
        }
        Ok(cfg)
    }

    /// Field-wise overlay: entries of `self` win, holes fall through to
    /// `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        RunConfig {
            basis: self.basis.or(base.basis),
            superposition: self.superposition.or(base.superposition),
            family: self.family.or(base.family),
            n1: self.n1.or(base.n1),
            n2: self.n2.or(base.n2),
            theta: self.theta.or(base.theta),
            seed: self.seed.or(base.seed),
            data: self.data.or(base.data),
            model: self.model.or(base.model),
            out: self.out.or(base.out),
            threads: self.threads.or(base.threads),
            target: self.target.or(base.target),
            normalize: self.normalize.or(base.normalize),
            full: self.full.or(base.full),
        }
    }

    /// A required field, reported by name when absent.
    pub fn require<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T> {
        field.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("missing required field `{name}` (flag --{name})"))
        })
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Parse {
        line,
        msg: format!("field `{key}`: bad value `{value}`: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_parse_and_overlay() {
        let dir = std::env::temp_dir().join("anova-mixt-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(
            &path,
            "# comment\nbasis = exp,alg\nn1 = 12  # trailing comment\nseed = 7\nfull = true\n",
        )
        .unwrap();
        let file = RunConfig::from_file(&path).unwrap();
        assert_eq!(file.basis.as_deref(), Some("exp,alg"));
        assert_eq!(file.n1, Some(12));
        assert_eq!(file.full, Some(true));

        let flags = RunConfig { n1: Some(20), ..Default::default() };
        let merged = flags.over(file);
        assert_eq!(merged.n1, Some(20)); // flag wins
        assert_eq!(merged.seed, Some(7)); // file fills the hole
    }

    #[test]
    fn unknown_field_is_named() {
        let dir = std::env::temp_dir().join("anova-mixt-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.conf");
        std::fs::write(&path, "bandwidth = 3\n").unwrap();
        let err = RunConfig::from_file(&path).unwrap_err().to_string();
        assert!(err.contains("bandwidth"), "{err}");
    }
}
