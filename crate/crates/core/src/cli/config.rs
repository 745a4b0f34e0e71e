//! Scenario configuration: defaults, `key=value` files and flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "GRWM_CONFIG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Anomaly,
    Mass,
    Ggb,
    Evolve,
    Count,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Anomaly,
        Scenario::Mass,
        Scenario::Ggb,
        Scenario::Evolve,
        Scenario::Count,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Anomaly => "anomaly",
            Scenario::Mass => "mass",
            Scenario::Ggb => "ggb",
            Scenario::Evolve => "evolve",
            Scenario::Count => "count",
        }
    }

    pub fn stochastic(self) -> bool {
        matches!(self, Scenario::Evolve | Scenario::Count)
    }

    fn default_n(self) -> u64 {
        match self {
            Scenario::Anomaly | Scenario::Count => 25,
            Scenario::Mass => 100_000,
            Scenario::Ggb => 10,
            Scenario::Evolve => 20,
        }
    }

    /// Inclusive bounds on `n` and the text used in error messages.
    fn n_range(self) -> (u64, u64, &'static str) {
        match self {
            Scenario::Anomaly => (1, 1_000_000, "[1, 1000000]"),
            Scenario::Mass => (1, u32::MAX as u64, "[1, 4294967295]"),
            Scenario::Ggb => (2, 24, "an even integer in [2, 24]"),
            Scenario::Evolve => (1, 100_000, "[1, 100000]"),
            Scenario::Count => (1, 1000, "[1, 1000]"),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| {
                ConfigError(format!(
                    "invalid scenario '{s}': expected one of anomaly, mass, ggb, evolve, count"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: u64,
    pub a_sq: f64,
    pub p: f64,
    pub epsilon: f64,
    pub t: f64,
    pub lambda_particle: f64,
    pub constituents: f64,
    pub duration_s: f64,
    pub trials: u64,
    pub eta: f64,
    pub delta: f64,
    pub seed: Option<u64>,
    pub mass: f64,
    pub deficit: f64,
    pub threads: Option<usize>,
    pub output_format: OutputFormat,
    pub output_path: Option<PathBuf>,
}

/// Keys accepted in config files, in report order.
pub const KEYS: [&str; 18] = [
    "scenario",
    "n",
    "a_sq",
    "p",
    "epsilon",
    "t",
    "lambda_particle",
    "constituents",
    "duration_s",
    "trials",
    "eta",
    "delta",
    "seed",
    "mass",
    "deficit",
    "threads",
    "output_format",
    "output_path",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .or_else(|_| err(format!("invalid value '{value}' for {key}: not a number")))
}

fn check(key: &str, value: f64, ok: bool, range: &str) -> Result<(), ConfigError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        err(format!("invalid {key} = {value}: expected {range}"))
    }
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        Self {
            scenario,
            n: scenario.default_n(),
            a_sq: 0.99,
            p: 0.1,
            epsilon: 1e-3,
            t: 0.01,
            lambda_particle: 1e-16,
            constituents: 1e21,
            duration_s: 2e-4,
            trials: 1000,
            eta: 0.0,
            delta: 0.01,
            seed: None,
            mass: 1.0,
            deficit: 1000.0,
            threads: None,
            output_format: OutputFormat::Json,
            output_path: None,
        }
    }

    /// Sets one field from its textual value. The scenario is fixed by the
    /// subcommand, so a `scenario` entry only has to name a valid scenario.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "scenario" => {
                value.parse::<Scenario>()?;
            }
            "n" => self.n = parse_num(key, value)?,
            "a_sq" => self.a_sq = parse_num(key, value)?,
            "p" => self.p = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "t" => self.t = parse_num(key, value)?,
            "lambda_particle" => self.lambda_particle = parse_num(key, value)?,
            "constituents" => self.constituents = parse_num(key, value)?,
            "duration_s" => self.duration_s = parse_num(key, value)?,
            "trials" => self.trials = parse_num(key, value)?,
            "eta" => self.eta = parse_num(key, value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "seed" => self.seed = Some(parse_num(key, value)?),
            "mass" => self.mass = parse_num(key, value)?,
            "deficit" => self.deficit = parse_num(key, value)?,
            "threads" => self.threads = Some(parse_num(key, value)?),
            "output_format" => {
                self.output_format = match value {
                    "json" => OutputFormat::Json,
                    "csv" => OutputFormat::Csv,
                    _ => {
                        return err(format!(
                            "invalid output_format '{value}': expected json or csv"
                        ))
                    }
                }
            }
            "output_path" => self.output_path = Some(PathBuf::from(value)),
            _ => return err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Checks every field against its legal range.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let (lo, hi, range) = self.scenario.n_range();
        let n_ok =
            (lo..=hi).contains(&self.n) && (self.scenario != Scenario::Ggb || self.n % 2 == 0);
        check("n", self.n as f64, n_ok, range)?;
        check(
            "a_sq",
            self.a_sq,
            self.a_sq > 0.0 && self.a_sq <= 1.0,
            "(0, 1]",
        )?;
        check("p", self.p, self.p > 0.0 && self.p < 0.5, "(0, 0.5)")?;
        check(
            "epsilon",
            self.epsilon,
            self.epsilon > 0.0 && self.epsilon < 1.0,
            "(0, 1)",
        )?;
        check("t", self.t, (0.0..1.0).contains(&self.t), "[0, 1)")?;
        let finite_nonneg = |x: f64| x >= 0.0 && x.is_finite();
        check(
            "lambda_particle",
            self.lambda_particle,
            finite_nonneg(self.lambda_particle),
            "[0, inf)",
        )?;
        check(
            "constituents",
            self.constituents,
            finite_nonneg(self.constituents),
            "[0, inf)",
        )?;
        check(
            "duration_s",
            self.duration_s,
            finite_nonneg(self.duration_s),
            "[0, inf)",
        )?;
        check(
            "trials",
            self.trials as f64,
            (1..=10_000_000).contains(&self.trials),
            "[1, 10000000]",
        )?;
        check("eta", self.eta, (0.0..1.0).contains(&self.eta), "[0, 1)")?;
        check(
            "delta",
            self.delta,
            self.delta > 0.0 && self.delta < 1.0,
            "(0, 1)",
        )?;
        check(
            "mass",
            self.mass,
            self.mass > 0.0 && self.mass.is_finite(),
            "(0, inf)",
        )?;
        check(
            "deficit",
            self.deficit,
            finite_nonneg(self.deficit),
            "[0, inf)",
        )?;
        if let Some(threads) = self.threads {
            check(
                "threads",
                threads as f64,
                (1..=1024).contains(&threads),
                "[1, 1024]",
            )?;
        }
        if self.scenario.stochastic() && self.seed.is_none() {
            return err(format!(
                "seed is required for the {} scenario",
                self.scenario
            ));
        }
        Ok(())
    }

    /// Every set field as text; re-parsing the map restores the config.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("scenario", self.scenario.to_string());
        put("n", self.n.to_string());
        put("a_sq", self.a_sq.to_string());
        put("p", self.p.to_string());
        put("epsilon", self.epsilon.to_string());
        put("t", self.t.to_string());
        put("lambda_particle", self.lambda_particle.to_string());
        put("constituents", self.constituents.to_string());
        put("duration_s", self.duration_s.to_string());
        put("trials", self.trials.to_string());
        put("eta", self.eta.to_string());
        put("delta", self.delta.to_string());
        if let Some(seed) = self.seed {
            put("seed", seed.to_string());
        }
        put("mass", self.mass.to_string());
        put("deficit", self.deficit.to_string());
        if let Some(threads) = self.threads {
            put("threads", threads.to_string());
        }
        put("output_format", self.output_format.as_str().to_string());
        if let Some(path) = &self.output_path {
            put("output_path", path.display().to_string());
        }
        map
    }

    /// Rebuilds a config from a [`ScenarioConfig::to_map`] map.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let Some(scenario) = map.get("scenario") else {
            return err("missing key 'scenario'");
        };
        let mut config = Self::defaults(scenario.parse()?);
        for (k, v) in map {
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Parses `key = value` lines; blank lines and lines starting with `#` are
/// skipped. Unknown and repeated keys are errors.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("config line {}: expected key=value", lineno + 1));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return err(format!("config line {}: unknown key '{key}'", lineno + 1));
        }
        if entries.iter().any(|(k, _)| k == key) {
            return err(format!(
                "config line {}: key '{key}' given twice",
                lineno + 1
            ));
        }
        entries.push((key.to_string(), value.to_string()));
    }
    Ok(entries)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .or_else(|e| err(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config_text(&text)
}

#[derive(Debug, Parser)]
#[command(
    name = "grwm",
    version,
    about = "Counting claims, mass density and GRW collapse on marble states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuzzy-link enumeration check on the product state
    Anomaly(Flags),
    /// Accessible mass in the box for the product state
    Mass(Flags),
    /// Mass density of the two-region superposed and split states
    Ggb(Flags),
    /// Hit trajectories of the product state
    Evolve(Flags),
    /// Register coupling followed by collapse, over many trials
    Count(Flags),
}

impl Command {
    pub fn scenario(&self) -> Scenario {
        match self {
            Command::Anomaly(_) => Scenario::Anomaly,
            Command::Mass(_) => Scenario::Mass,
            Command::Ggb(_) => Scenario::Ggb,
            Command::Evolve(_) => Scenario::Evolve,
            Command::Count(_) => Scenario::Count,
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Anomaly(f)
            | Command::Mass(f)
            | Command::Ggb(f)
            | Command::Evolve(f)
            | Command::Count(f) => f,
        }
    }
}

/// Flags shared by every subcommand. Values are validated after merging with
/// the config file and defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Number of marbles
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<String>,
    /// In-box probability |a|^2 of each marble
    #[arg(long, allow_negative_numbers = true)]
    pub a_sq: Option<String>,
    /// Fuzzy-link tolerance; claims hold at mass >= 1 - p
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<String>,
    /// Accessibility threshold on V/M^2
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<String>,
    /// Tail factor of a hit
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<String>,
    /// Hit rate per constituent (1/s)
    #[arg(long, allow_negative_numbers = true)]
    pub lambda_particle: Option<String>,
    /// Constituents per marble, register and pointer
    #[arg(long, allow_negative_numbers = true)]
    pub constituents: Option<String>,
    /// Evolution time per trajectory (s)
    #[arg(long, allow_negative_numbers = true)]
    pub duration_s: Option<String>,
    /// Number of trajectories
    #[arg(long, allow_negative_numbers = true)]
    pub trials: Option<String>,
    /// Pointer error weight
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<String>,
    /// Collapse criterion: dominant configuration carries >= 1 - delta
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<String>,
    /// Master seed (required for evolve and count)
    #[arg(long, allow_negative_numbers = true)]
    pub seed: Option<String>,
    /// Mass per marble
    #[arg(long, allow_negative_numbers = true)]
    pub mass: Option<String>,
    /// Target in-box mass deficit, in units of the marble mass
    #[arg(long, allow_negative_numbers = true)]
    pub deficit: Option<String>,
    /// Worker threads (default: available parallelism)
    #[arg(long, allow_negative_numbers = true)]
    pub threads: Option<String>,
    /// json or csv
    #[arg(long, allow_negative_numbers = true)]
    pub output_format: Option<String>,
    /// Write the report here instead of stdout
    #[arg(long, allow_negative_numbers = true)]
    pub output_path: Option<String>,
    /// key=value config file (default: $GRWM_CONFIG)
    #[arg(long, allow_negative_numbers = true)]
    pub config: Option<PathBuf>,
}

impl Flags {
    fn entries(&self) -> Vec<(&'static str, &str)> {
        [
            ("n", &self.n),
            ("a_sq", &self.a_sq),
            ("p", &self.p),
            ("epsilon", &self.epsilon),
            ("t", &self.t),
            ("lambda_particle", &self.lambda_particle),
            ("constituents", &self.constituents),
            ("duration_s", &self.duration_s),
            ("trials", &self.trials),
            ("eta", &self.eta),
            ("delta", &self.delta),
            ("seed", &self.seed),
            ("mass", &self.mass),
            ("deficit", &self.deficit),
            ("threads", &self.threads),
            ("output_format", &self.output_format),
            ("output_path", &self.output_path),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

/// Resolves defaults, then the config file, then flags.
///
/// `env_config` is the value of [`CONFIG_ENV`], used when no `--config` flag
/// is given.
pub fn resolve(
    command: &Command,
    env_config: Option<PathBuf>,
) -> Result<ScenarioConfig, ConfigError> {
    let flags = command.flags();
    let mut config = ScenarioConfig::defaults(command.scenario());
    if let Some(path) = flags.config.clone().or(env_config) {
        for (k, v) in read_config_file(&path)? {
            config.set(&k, &v)?;
        }
    }
    for (k, v) in flags.entries() {
        config.set(k, v)?;
    }
    config.validate()?;
    Ok(config)
}

/// Parses command-line arguments (program name first) into a config.
pub fn parse_config<I, T>(
    args: I,
    env_config: Option<PathBuf>,
) -> Result<ScenarioConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| ConfigError(e.to_string()))?;
    resolve(&cli.command, env_config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<ScenarioConfig, ConfigError> {
        parse_config(std::iter::once("grwm").chain(args.iter().copied()), None)
    }

    #[test]
    fn anomaly_flags() {
        let c = parse(&["anomaly", "--n", "25", "--a-sq", "0.99", "--p", "0.1"]).unwrap();
        assert_eq!(c.scenario, Scenario::Anomaly);
        assert_eq!((c.n, c.a_sq, c.p), (25, 0.99, 0.1));
    }

    #[test]
    fn errors_name_field_and_range() {
        let e = parse(&["anomaly", "--a-sq", "1.5"]).unwrap_err();
        assert!(e.0.contains("a_sq") && e.0.contains("(0, 1]"), "{e}");
        let e = parse(&["ggb", "--n", "7"]).unwrap_err();
        assert!(e.0.contains("n = 7") && e.0.contains("even"), "{e}");
        let e = parse(&["count"]).unwrap_err();
        assert!(e.0.contains("seed"), "{e}");
        let e = parse(&["mass", "--p", "abc"]).unwrap_err();
        assert!(e.0.contains("'abc' for p"), "{e}");
    }

    #[test]
    fn config_text_rules() {
        let entries = parse_config_text("# comment\n\nn = 5\n  a_sq=0.5  \n").unwrap();
        assert_eq!(
            entries,
            vec![("n".into(), "5".into()), ("a_sq".into(), "0.5".into())]
        );
        assert!(parse_config_text("bogus = 1")
            .unwrap_err()
            .0
            .contains("unknown key 'bogus'"));
        assert!(parse_config_text("n = 1\nn = 2").is_err());
        assert!(parse_config_text("n 5").is_err());
    }

    #[test]
    fn map_round_trip() {
        let mut c = ScenarioConfig::defaults(Scenario::Count);
        c.seed = Some(7);
        c.a_sq = 0.1 + 0.2;
        c.output_path = Some("out.json".into());
        assert_eq!(ScenarioConfig::from_map(&c.to_map()).unwrap(), c);
    }
}
