//! Config-file loading and error-to-exit-code mapping.
//!
//! The config format is plain `key = value` lines under one section
//! header per pipeline stage. Unknown sections and unknown keys are
//! rejected, so a typo never silently falls back to a default. Values
//! given on the command line override file values, which override the
//! built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use roomscan::Error;

/// Sections and the keys each accepts.
const SECTIONS: &[(&str, &[&str])] = &[
    (
        "clean",
        &[
            "method",
            "axes",
            "threshold",
            "bins",
            "cutoff",
            "neighbors",
            "std_ratio",
            "radius",
            "min_neighbors",
        ],
    ),
    (
        "planes",
        &[
            "distance_threshold",
            "iterations",
            "min_consensus",
            "seed",
            "max_planes",
            "min_inliers",
            "min_wall_inliers",
            "horiz_tol_deg",
            "vert_tol_deg",
        ],
    ),
    (
        "segment",
        &[
            "block_size",
            "points_per_block",
            "min_points",
            "include_coords",
            "scaler",
            "folds",
            "seed",
            "weights_seed",
            "kernel",
            "gamma",
            "c",
            "tol",
            "max_passes",
        ],
    ),
    (
        "synth",
        &[
            "width",
            "depth",
            "height",
            "points_per_face",
            "sigma",
            "outlier_fraction",
            "outlier_scale",
            "seed",
        ],
    ),
];

/// A failure on the way to an exit code: either a bad argument or
/// config value (exit 2), or an error from the pipeline itself.
#[derive(Debug)]
pub enum CliError {
    Args(String),
    Core(Error),
}

impl CliError {
    pub fn args(message: impl Into<String>) -> CliError {
        CliError::Args(message.into())
    }

    /// The process exit code this failure maps to: 2 for argument and
    /// config errors, 3 for I/O and file-format errors, 4 for
    /// algorithm failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Args(_) => 2,
            CliError::Core(Error::InvalidParameter { .. }) => 2,
            CliError::Core(
                Error::Io { .. }
                | Error::Parse { .. }
                | Error::Truncated { .. }
                | Error::UnsupportedFormat(_)
                | Error::AttributeLength { .. }
                | Error::ShapeMismatch { .. }
                | Error::NonFiniteCoordinate { .. },
            ) => 3,
            CliError::Core(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Args(message) => f.write_str(message),
            CliError::Core(err) => write!(f, "{err}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> CliError {
        CliError::Core(err)
    }
}

/// Parsed config-file values, addressed by `(section, key)`.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<(String, String), String>,
}

impl FileConfig {
    pub fn empty() -> FileConfig {
        FileConfig::default()
    }

    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FileConfig::parse(&text)
    }

    /// Parses the `key = value` format. `#` and `;` start comments.
    pub fn parse(text: &str) -> Result<FileConfig, CliError> {
        let mut values = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (number, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let describe = |what: String| CliError::Args(format!("config line {}: {what}", number + 1));
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(describe(format!("malformed section header `{line}`")));
                };
                let name = name.trim();
                let Some((known, _)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                    return Err(describe(format!("unknown section `{name}`")));
                };
                section = Some(known);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(describe(format!("expected `key = value`, got `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(section) = section else {
                return Err(describe(format!("key `{key}` appears before any section")));
            };
            let keys = SECTIONS.iter().find(|(s, _)| *s == section).expect("validated").1;
            if !keys.contains(&key) {
                return Err(describe(format!("unknown key `{key}` in section [{section}]")));
            }
            values.insert((section.to_owned(), key.to_owned()), value.to_owned());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_owned(), key.to_owned()))
            .map(String::as_str)
    }

    /// Reads and parses one value; a present-but-malformed value is an
    /// argument error naming the key.
    pub fn parsed<T>(&self, section: &str, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Args(format!("config value `{key}` in [{section}]: {e} (got `{raw}`)"))
            }),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(at) => &line[..at],
        None => line,
    }
}

/// Command line first, then the config file, then the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_parse_under_their_sections() {
        let cfg = FileConfig::parse(
            "# pipeline settings\n[clean]\nmethod = radius\nradius = 0.25\n\n[segment]\nfolds = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.get("clean", "method"), Some("radius"));
        assert_eq!(cfg.parsed::<f64>("clean", "radius").unwrap(), Some(0.25));
        assert_eq!(cfg.parsed::<usize>("segment", "folds").unwrap(), Some(5));
        assert_eq!(cfg.get("clean", "axes"), None);
    }

    #[test]
    fn unknown_sections_and_keys_are_rejected() {
        let err = FileConfig::parse("[wash]\ncycles = 3\n").unwrap_err();
        assert!(err.to_string().contains("unknown section `wash`"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = FileConfig::parse("[clean]\nmethod = zscore\nturbo = yes\n").unwrap_err();
        assert!(err.to_string().contains("unknown key `turbo`"), "{err}");
        let err = FileConfig::parse("stray = 1\n").unwrap_err();
        assert!(err.to_string().contains("before any section"), "{err}");
    }

    #[test]
    fn malformed_lines_name_their_line_number() {
        let err = FileConfig::parse("[clean]\nmethod zscore\n").unwrap_err();
        assert!(err.to_string().contains("config line 2"), "{err}");
        let err = FileConfig::parse("[clean\n").unwrap_err();
        assert!(err.to_string().contains("malformed section header"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = FileConfig::parse("\n; note\n[synth]\nseed = 9 # chosen by fair dice roll\n").unwrap();
        assert_eq!(cfg.parsed::<u64>("synth", "seed").unwrap(), Some(9));
    }

    #[test]
    fn bad_values_name_the_key_and_section() {
        let cfg = FileConfig::parse("[segment]\nfolds = many\n").unwrap();
        let err = cfg.parsed::<usize>("segment", "folds").unwrap_err();
        assert!(err.to_string().contains("`folds` in [segment]"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn later_values_override_earlier_ones() {
        let cfg = FileConfig::parse("[synth]\nseed = 1\nseed = 2\n").unwrap();
        assert_eq!(cfg.parsed::<u64>("synth", "seed").unwrap(), Some(2));
    }

    #[test]
    fn precedence_prefers_flags_over_file_over_default() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick::<i32>(None, None, 3), 3);
    }

    #[test]
    fn exit_codes_follow_the_error_family() {
        assert_eq!(CliError::args("bad").exit_code(), 2);
        let invalid = CliError::from(Error::invalid("t", "negative"));
        assert_eq!(invalid.exit_code(), 2);
        let io = CliError::from(Error::io(
            "missing.ply",
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
        assert_eq!(io.exit_code(), 3);
        assert!(io.to_string().contains("missing.ply"));
        let algo = CliError::from(Error::MissingLabels);
        assert_eq!(algo.exit_code(), 4);
        let parse = CliError::from(Error::Parse { line: 3, message: "bad float".into() });
        assert_eq!(parse.exit_code(), 3);
    }
}
