//! Scenario runner: line-oriented configuration, report files, exit codes.
//!
//! Configuration is `key = value` per line with `#` comments. Keys:
//! `scenario`, `preset`, `d` (or `dim`), `n`, `box` (`[a, b]` or `a, b`),
//! `scheme`, `dt`, `T` (or `t_final`), `seed`, `out`, `samples`, `trials`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::coeffs::presets::PresetRegistry;
use crate::evolve::SchemeRegistry;
use crate::props::scenarios::{run_scenario, Artifact, RunSettings, ScenarioRegistry};
use crate::props::PropertyReport;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub settings: RunSettings,
    /// Whether `d` was set explicitly; otherwise the preset's default applies.
    dim_given: bool,
    pub out: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "all".to_string(),
            settings: RunSettings::default(),
            dim_given: false,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        message: message.into(),
    }
}

fn number<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| parse_err(line, format!("'{value}' is not a valid value for {key}")))
}

fn parse_box(line: usize, value: &str) -> Result<(f64, f64), ConfigError> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(parse_err(line, format!("box must be two numbers, got '{value}'")));
    }
    let a: f64 = number(line, "box", parts[0])?;
    let b: f64 = number(line, "box", parts[1])?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(parse_err(line, format!("box [{a}, {b}] is empty or not finite")));
    }
    Ok((a, b))
}

/// Parses and validates a configuration; missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(parse_err(line, format!("missing value for {key}")));
        }
        let s = &mut cfg.settings;
        match key {
            "scenario" => cfg.scenario = value.to_string(),
            "preset" => s.preset = value.to_string(),
            "d" | "dim" => {
                s.dim = number(line, key, value)?;
                cfg.dim_given = true;
            }
            "n" => s.n = number(line, key, value)?,
            "box" => (s.box_lower, s.box_upper) = parse_box(line, value)?,
            "scheme" => s.scheme = value.to_string(),
            "dt" => {
                s.dt = number(line, key, value)?;
                if !(s.dt > 0.0 && s.dt.is_finite()) {
                    return Err(parse_err(line, format!("dt must be positive, got {value}")));
                }
            }
            "T" | "t_final" => {
                s.t_final = number(line, key, value)?;
                if !(s.t_final > 0.0 && s.t_final.is_finite()) {
                    return Err(parse_err(line, format!("T must be positive, got {value}")));
                }
            }
            "seed" => s.seed = number(line, key, value)?,
            "out" => cfg.out = PathBuf::from(value),
            "samples" => s.sampling.quasi_points = number(line, key, value)?,
            "trials" => {
                s.trials = number(line, key, value)?;
                if s.trials == 0 {
                    return Err(parse_err(line, "trials must be positive"));
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// Cross-field validation; fills in the preset's default dimension when
    /// none was given.
    pub fn validate(&mut self) -> Result<(), ConfigError> {
        let presets = PresetRegistry::standard();
        let preset = presets
            .get(&self.settings.preset)
            .map_err(|_| ConfigError::UnknownPreset(self.settings.preset.clone()))?;
        if !self.dim_given {
            self.settings.dim = preset.default_dim();
        }
        if !preset.dims().contains(&self.settings.dim) {
            return Err(parse_err(
                0,
                format!("preset '{}' does not support d = {}", preset.name(), self.settings.dim),
            ));
        }
        if self.settings.n < 3 {
            return Err(parse_err(0, format!("n must be at least 3, got {}", self.settings.n)));
        }
        if ScenarioRegistry::standard().get(&self.scenario).is_none() {
            return Err(parse_err(0, format!("unknown scenario '{}'", self.scenario)));
        }
        if SchemeRegistry::standard().get(&self.settings.scheme).is_err() {
            return Err(parse_err(0, format!("unknown scheme '{}'", self.settings.scheme)));
        }
        if self.settings.dt > self.settings.t_final {
            return Err(parse_err(0, "dt exceeds T"));
        }
        Ok(())
    }

    pub fn set_scenario(&mut self, name: &str) -> Result<(), ConfigError> {
        self.scenario = name.to_string();
        self.validate()
    }
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))
}

/// Every file of a finished run, by name.
pub fn output_files(report: &PropertyReport, artifacts: &[Artifact]) -> Vec<(String, String)> {
    let mut files = vec![
        ("report.csv".to_string(), report.to_csv()),
        ("hypotheses.csv".to_string(), report.hypotheses.to_csv()),
        ("summary.txt".to_string(), report.summary()),
    ];
    for a in artifacts {
        files.push((a.file_name.clone(), a.contents.clone()));
    }
    for c in &report.checks {
        if let Some(f) = c.witness.as_ref().and_then(|w| w.function.as_ref()) {
            let header = format!("# witness for {}: {}\n", c.name, c.witness.as_ref().map(|w| w.description.as_str()).unwrap_or(""));
            files.push((format!("witness_{}.csv", c.name), header + &f.to_csv()));
        }
    }
    files
}

/// Runs the configured scenario and writes its outputs. Returns the exit
/// code: 0 when every check passes, 1 when some check fails, 2 on errors.
pub fn run(cfg: &ScenarioConfig) -> i32 {
    let scenarios = ScenarioRegistry::standard();
    let Some(scenario) = scenarios.get(&cfg.scenario) else {
        eprintln!("error: unknown scenario '{}'", cfg.scenario);
        return EXIT_ERROR;
    };
    let (report, artifacts) = match run_scenario(scenario, &cfg.settings, &PresetRegistry::standard()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = fs::create_dir_all(&cfg.out) {
        eprintln!("error: cannot create {}: {e}", cfg.out.display());
        return EXIT_ERROR;
    }
    for (name, contents) in output_files(&report, &artifacts) {
        if let Err(e) = write_atomic(&cfg.out, &name, &contents) {
            eprintln!("error: cannot write {name}: {e}");
            return EXIT_ERROR;
        }
    }
    print!("{}", report.summary());
    if report.all_passed() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = parse_config("").unwrap();
        let s = &cfg.settings;
        assert_eq!((s.dim, s.n, s.box_lower, s.box_upper), (1, 128, -4.0, 4.0));
        assert_eq!(s.scheme, "implicit-euler");
        assert_eq!((s.dt, s.t_final, s.seed), (0.01, 1.0, 42));
    }

    #[test]
    fn direct_field_mapping() {
        let cfg = parse_config("scenario = positivity\npreset = coupling-negative").unwrap();
        assert_eq!(cfg.scenario, "positivity");
        assert_eq!(cfg.settings.preset, "coupling-negative");
        let cfg = parse_config("# comment\npreset = trig-2d  # inline\nbox = [-3, 3]\nT = 0.5\n").unwrap();
        assert_eq!(cfg.settings.dim, 2);
        assert_eq!((cfg.settings.box_lower, cfg.settings.t_final), (-3.0, 0.5));
    }

    #[test]
    fn errors_carry_lines() {
        assert!(matches!(parse_config("dt = -1"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("\nfoo = 1"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(parse_config("preset = nope"), Err(ConfigError::UnknownPreset(_))));
        assert!(matches!(parse_config("n = abc"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("just words"), Err(ConfigError::Parse { .. })));
        assert!(parse_config("scenario = nope").is_err());
        assert!(parse_config("preset = trig-2d\nd = 1").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", "one").unwrap();
        write_atomic(dir.path(), "a.txt", "two").unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("a.txt")).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
