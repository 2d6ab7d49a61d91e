//! Run-configuration parsing.
//!
//! Line-oriented `key = value` format with `[section]` headers. `[run]` and
//! `[range]` hold global settings; each `[protocol.NAME]` defines a fully
//! specified acquisition and each `[design.NAME]` a design search. Timing
//! values must carry a unit (`ms` or `s`); timing lists accept both the
//! `[start:step:end]` shorthand and explicit comma lists. Flip angles are
//! degrees, with an optional `deg` suffix. Unknown keys are rejected.

use std::collections::HashSet;
use std::path::PathBuf;

use relaxcrb_core::{
    timing_range, ConstraintSet, DesignSpec, Family, Range64, SeirTiming, SequenceProtocol,
    TissueRange,
};
use thiserror::Error;

/// Subcommand selector; the CLI argument takes precedence over the optional
/// `command` key in `[run]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Command {
    #[default]
    Evaluate,
    Optimize,
    Simulate,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Evaluate => "evaluate",
            Self::Optimize => "optimize",
            Self::Simulate => "simulate",
            Self::Compare => "compare",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "evaluate" => Self::Evaluate,
            "optimize" => Self::Optimize,
            "simulate" => Self::Simulate,
            "compare" => Self::Compare,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        key: String,
        section: String,
    },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("[{section}]: missing required field `{field}`")]
    MissingField { section: String, field: String },
    #[error("line {line}: timing field `{field}` needs a unit (ms or s)")]
    UnitError { line: usize, field: String },
    #[error("[{section}]: {msg}")]
    Invalid { section: String, msg: String },
    #[error("config is empty")]
    Empty,
}

/// Fully validated run configuration with defaults applied.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub snr: f64,
    pub t_scan_ms: f64,
    pub n_trials: usize,
    pub rng_seed: u64,
    pub format: OutputFormat,
    pub out_dir: Option<PathBuf>,
    pub range: Range64,
    pub protocols: Vec<(String, SequenceProtocol<f64>)>,
    pub designs: Vec<(String, DesignSpec<f64>)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Evaluate,
            snr: 100.0,
            t_scan_ms: 10_000.0,
            n_trials: 5000,
            rng_seed: 42,
            format: OutputFormat::Csv,
            out_dir: None,
            range: TissueRange::new(1000.0, 2000.0, 60.0, 110.0, 3000.0, 21, 11)
                .expect("default range valid"),
            protocols: Vec::new(),
            designs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
struct RawEntry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Debug, Clone)]
struct RawSection {
    line: usize,
    name: String,
    entries: Vec<RawEntry>,
}

/// Parses the documented format into a validated [`RunConfig`].
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let sections = split_sections(text)?;
    if sections.is_empty() {
        return Err(ConfigError::Empty);
    }

    let mut config = RunConfig::default();
    let mut range_fields = RangeFields::default();
    let mut seen_names: HashSet<String> = HashSet::new();

    for section in &sections {
        match section.name.as_str() {
            "run" => apply_run(section, &mut config)?,
            "range" => range_fields.apply(section)?,
            name if name.starts_with("protocol.") => {
                let pname = name.trim_start_matches("protocol.").to_string();
                if pname.is_empty() || !seen_names.insert(name.to_string()) {
                    return Err(ConfigError::Syntax {
                        line: section.line,
                        msg: format!("bad or duplicate section name `{name}`"),
                    });
                }
                let protocol = build_protocol(section)?;
                protocol.validate().map_err(|e| ConfigError::Invalid {
                    section: name.to_string(),
                    msg: e.to_string(),
                })?;
                config.protocols.push((pname, protocol));
            }
            name if name.starts_with("design.") => {
                let dname = name.trim_start_matches("design.").to_string();
                if dname.is_empty() || !seen_names.insert(name.to_string()) {
                    return Err(ConfigError::Syntax {
                        line: section.line,
                        msg: format!("bad or duplicate section name `{name}`"),
                    });
                }
                let design = build_design(section, config.rng_seed)?;
                config.designs.push((dname, design));
            }
            other => {
                return Err(ConfigError::Syntax {
                    line: section.line,
                    msg: format!("unknown section `[{other}]`"),
                })
            }
        }
    }

    config.range = range_fields.into_range()?;
    // Designs default to the run seed unless they set their own.
    for (_, d) in &mut config.designs {
        if d.rng_seed == u64::MAX {
            d.rng_seed = config.rng_seed;
        }
    }

    if config.snr <= 0.0 || !config.snr.is_finite() {
        return Err(ConfigError::Invalid {
            section: "run".into(),
            msg: format!("snr must be positive, got {}", config.snr),
        });
    }
    if config.t_scan_ms <= 0.0 || !config.t_scan_ms.is_finite() {
        return Err(ConfigError::Invalid {
            section: "run".into(),
            msg: format!("t_scan must be positive, got {} ms", config.t_scan_ms),
        });
    }
    if config.n_trials == 0 {
        return Err(ConfigError::Invalid {
            section: "run".into(),
            msg: "n_trials must be at least 1".into(),
        });
    }
    Ok(config)
}

fn split_sections(text: &str) -> Result<Vec<RawSection>, ConfigError> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(ConfigError::Syntax {
                line,
                msg: "unterminated section header".into(),
            })?;
            sections.push(RawSection {
                line,
                name: name.trim().to_string(),
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or(ConfigError::Syntax {
            line,
            msg: format!("expected `key = value`, got `{trimmed}`"),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                msg: "empty key or value".into(),
            });
        }
        let section = sections.last_mut().ok_or(ConfigError::Syntax {
            line,
            msg: format!("`{key}` appears before any [section] header"),
        })?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::DuplicateKey { line, key });
        }
        section.entries.push(RawEntry { line, key, value });
    }
    Ok(sections)
}

/// Scalar timing in ms; the unit suffix is mandatory.
fn parse_timing(e: &RawEntry) -> Result<f64, ConfigError> {
    let v = e.value.trim();
    let (num, unit) = match v.rsplit_once(char::is_whitespace) {
        Some((n, u)) => (n.trim(), u.trim()),
        None => {
            return Err(ConfigError::UnitError {
                line: e.line,
                field: e.key.clone(),
            })
        }
    };
    let x: f64 = num.parse().map_err(|_| ConfigError::Syntax {
        line: e.line,
        msg: format!("`{num}` is not a number"),
    })?;
    match unit {
        "ms" => Ok(x),
        "s" => Ok(x * 1000.0),
        _ => Err(ConfigError::UnitError {
            line: e.line,
            field: e.key.clone(),
        }),
    }
}

/// Timing list in ms: `[start:step:end] ms` or `[a, b, c] ms`.
fn parse_timing_list(e: &RawEntry) -> Result<Vec<f64>, ConfigError> {
    let v = e.value.trim();
    let (body, unit) = match v.rsplit_once(']') {
        Some((b, u)) => (b, u.trim()),
        None => {
            return Err(ConfigError::Syntax {
                line: e.line,
                msg: "timing list must be bracketed".into(),
            })
        }
    };
    let factor = match unit {
        "ms" => 1.0,
        "s" => 1000.0,
        _ => {
            return Err(ConfigError::UnitError {
                line: e.line,
                field: e.key.clone(),
            })
        }
    };
    let inner = body.trim_start().strip_prefix('[').ok_or(ConfigError::Syntax {
        line: e.line,
        msg: "timing list must be bracketed".into(),
    })?;
    Ok(parse_list_body(inner, e.line)?
        .into_iter()
        .map(|x| x * factor)
        .collect())
}

/// Unitless list (flip angles in degrees, counts).
fn parse_plain_list(e: &RawEntry) -> Result<Vec<f64>, ConfigError> {
    let v = e.value.trim();
    let v = v.strip_suffix("deg").unwrap_or(v).trim();
    let inner = v
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or(ConfigError::Syntax {
            line: e.line,
            msg: "list must be bracketed".into(),
        })?;
    parse_list_body(inner, e.line)
}

fn parse_list_body(inner: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    let bad = |msg: String| ConfigError::Syntax { line, msg };
    if inner.contains(':') {
        let parts: Vec<&str> = inner.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad("range shorthand is `start:step:end`".into()));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.parse().map_err(|_| bad(format!("`{p}` is not a number"))))
            .collect::<Result<_, _>>()?;
        let list = timing_range(nums[0], nums[1], nums[2]);
        if list.is_empty() {
            return Err(bad("range shorthand produced no entries (step <= 0?)".into()));
        }
        Ok(list)
    } else {
        inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|p| p.parse().map_err(|_| bad(format!("`{p}` is not a number"))))
            .collect()
    }
}

fn parse_angle(e: &RawEntry) -> Result<f64, ConfigError> {
    let v = e.value.trim();
    let v = v.strip_suffix("deg").unwrap_or(v).trim();
    v.parse().map_err(|_| ConfigError::Syntax {
        line: e.line,
        msg: format!("`{v}` is not a number"),
    })
}

fn parse_f64(e: &RawEntry) -> Result<f64, ConfigError> {
    e.value.parse().map_err(|_| ConfigError::Syntax {
        line: e.line,
        msg: format!("`{}` is not a number", e.value),
    })
}

fn parse_usize(e: &RawEntry) -> Result<usize, ConfigError> {
    e.value.parse().map_err(|_| ConfigError::Syntax {
        line: e.line,
        msg: format!("`{}` is not a non-negative integer", e.value),
    })
}

fn apply_run(section: &RawSection, config: &mut RunConfig) -> Result<(), ConfigError> {
    for e in &section.entries {
        match e.key.as_str() {
            "command" => {
                config.command = Command::parse(&e.value).ok_or(ConfigError::Syntax {
                    line: e.line,
                    msg: format!("unknown command `{}`", e.value),
                })?
            }
            "snr" => config.snr = parse_f64(e)?,
            "t_scan" => config.t_scan_ms = parse_timing(e)?,
            "n_trials" => config.n_trials = parse_usize(e)?,
            "rng_seed" => {
                config.rng_seed = e.value.parse().map_err(|_| ConfigError::Syntax {
                    line: e.line,
                    msg: format!("`{}` is not a seed", e.value),
                })?
            }
            "format" => {
                config.format = match e.value.as_str() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => {
                        return Err(ConfigError::Syntax {
                            line: e.line,
                            msg: format!("unknown format `{other}`"),
                        })
                    }
                }
            }
            "out" => config.out_dir = Some(PathBuf::from(&e.value)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    key: e.key.clone(),
                    section: "run".into(),
                })
            }
        }
    }
    Ok(())
}

#[derive(Debug, Default)]
struct RangeFields {
    t1_min: Option<f64>,
    t1_max: Option<f64>,
    t2_min: Option<f64>,
    t2_max: Option<f64>,
    m0: Option<f64>,
    grid_t1: Option<usize>,
    grid_t2: Option<usize>,
}

impl RangeFields {
    fn apply(&mut self, section: &RawSection) -> Result<(), ConfigError> {
        for e in &section.entries {
            match e.key.as_str() {
                "t1_min" => self.t1_min = Some(parse_timing(e)?),
                "t1_max" => self.t1_max = Some(parse_timing(e)?),
                "t2_min" => self.t2_min = Some(parse_timing(e)?),
                "t2_max" => self.t2_max = Some(parse_timing(e)?),
                "m0" => self.m0 = Some(parse_f64(e)?),
                "grid_t1" => self.grid_t1 = Some(parse_usize(e)?),
                "grid_t2" => self.grid_t2 = Some(parse_usize(e)?),
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: e.line,
                        key: e.key.clone(),
                        section: "range".into(),
                    })
                }
            }
        }
        Ok(())
    }

    fn into_range(self) -> Result<Range64, ConfigError> {
        let d = RunConfig::default().range;
        TissueRange::new(
            self.t1_min.unwrap_or(d.t1_min),
            self.t1_max.unwrap_or(d.t1_max),
            self.t2_min.unwrap_or(d.t2_min),
            self.t2_max.unwrap_or(d.t2_max),
            self.m0.unwrap_or(d.m0),
            self.grid_t1.unwrap_or(d.grid_t1),
            self.grid_t2.unwrap_or(d.grid_t2),
        )
        .map_err(|e| ConfigError::Invalid {
            section: "range".into(),
            msg: e.to_string(),
        })
    }
}

fn find<'a>(section: &'a RawSection, key: &str) -> Option<&'a RawEntry> {
    section.entries.iter().find(|e| e.key == key)
}

fn require<'a>(section: &'a RawSection, key: &str) -> Result<&'a RawEntry, ConfigError> {
    find(section, key).ok_or_else(|| ConfigError::MissingField {
        section: section.name.clone(),
        field: key.to_string(),
    })
}

fn reject_unknown(section: &RawSection, allowed: &[&str]) -> Result<(), ConfigError> {
    for e in &section.entries {
        if !allowed.contains(&e.key.as_str()) {
            return Err(ConfigError::UnknownKey {
                line: e.line,
                key: e.key.clone(),
                section: section.name.clone(),
            });
        }
    }
    Ok(())
}

fn build_protocol(section: &RawSection) -> Result<SequenceProtocol<f64>, ConfigError> {
    let family = require(section, "family")?;
    match family.value.as_str() {
        "cir" => {
            reject_unknown(section, &["family", "ti", "w"])?;
            Ok(SequenceProtocol::Cir {
                ti: parse_timing_list(require(section, "ti")?)?,
                w: parse_timing(require(section, "w")?)?,
            })
        }
        "sr" => {
            reject_unknown(section, &["family", "ti"])?;
            Ok(SequenceProtocol::Sr {
                ti: parse_timing_list(require(section, "ti")?)?,
            })
        }
        "fir1" => {
            reject_unknown(section, &["family", "ti", "w"])?;
            Ok(SequenceProtocol::Fir1 {
                ti: parse_timing_list(require(section, "ti")?)?,
                w: parse_timing(require(section, "w")?)?,
            })
        }
        "fir2" => {
            reject_unknown(section, &["family", "ti", "tr"])?;
            Ok(SequenceProtocol::Fir2 {
                ti: parse_timing_list(require(section, "ti")?)?,
                tr: parse_timing(require(section, "tr")?)?,
            })
        }
        "ll" => {
            reject_unknown(section, &["family", "alpha", "t", "tr"])?;
            Ok(SequenceProtocol::Ll {
                alpha: parse_angle(require(section, "alpha")?)?,
                t: parse_timing_list(require(section, "t")?)?,
                tr: parse_timing(require(section, "tr")?)?,
            })
        }
        "seir" => {
            reject_unknown(
                section,
                &[
                    "family",
                    "tr_ir",
                    "ti",
                    "tr_se",
                    "te",
                    "n_echo_ir",
                    "n_echo_se",
                    "t_seq_convention",
                ],
            )?;
            let timing = match find(section, "t_seq_convention") {
                None => SeirTiming::default(),
                Some(e) => match e.value.as_str() {
                    "block_sum" => SeirTiming::BlockSum,
                    "block_sum_plus_ti" => SeirTiming::BlockSumPlusTi,
                    other => {
                        return Err(ConfigError::Syntax {
                            line: e.line,
                            msg: format!("unknown t_seq_convention `{other}`"),
                        })
                    }
                },
            };
            Ok(SequenceProtocol::Seir {
                tr_ir: parse_timing(require(section, "tr_ir")?)?,
                ti: parse_timing(require(section, "ti")?)?,
                tr_se: parse_timing(require(section, "tr_se")?)?,
                te: parse_timing(require(section, "te")?)?,
                n_echo_ir: find(section, "n_echo_ir").map_or(Ok(3), parse_usize)?,
                n_echo_se: find(section, "n_echo_se").map_or(Ok(4), parse_usize)?,
                timing,
            })
        }
        "despot" => {
            reject_unknown(
                section,
                &["family", "alpha_spgr", "tr_spgr", "alpha_ssfp", "tr_ssfp"],
            )?;
            Ok(SequenceProtocol::Despot {
                alpha_spgr: parse_plain_list(require(section, "alpha_spgr")?)?,
                tr_spgr: parse_timing(require(section, "tr_spgr")?)?,
                alpha_ssfp: parse_plain_list(require(section, "alpha_ssfp")?)?,
                tr_ssfp: parse_timing(require(section, "tr_ssfp")?)?,
            })
        }
        other => Err(ConfigError::Invalid {
            section: section.name.clone(),
            msg: format!("unknown family `{other}`"),
        }),
    }
}

fn build_design(section: &RawSection, _run_seed: u64) -> Result<DesignSpec<f64>, ConfigError> {
    let family_entry = require(section, "family")?;
    let family = Family::parse(&family_entry.value).ok_or_else(|| ConfigError::Invalid {
        section: section.name.clone(),
        msg: format!("unknown family `{}`", family_entry.value),
    })?;
    reject_unknown(
        section,
        &[
            "family",
            "n_acq",
            "rho",
            "multistart",
            "rng_seed",
            "t_max",
            "w_max",
            "step_min",
            "te_min",
            "te_max",
            "tr_spgr",
            "tr_ssfp",
            "n_spgr",
            "n_ssfp",
            "n_echo_ir",
            "n_echo_se",
            "alpha_min",
        ],
    )?;

    let mut spec = DesignSpec::new(family);
    // Sentinel replaced by the run seed after parsing, unless set here.
    spec.rng_seed = u64::MAX;

    if let Some(e) = find(section, "n_acq") {
        let counts: Vec<usize> = if e.value.starts_with('[') {
            parse_plain_list(e)?
                .into_iter()
                .map(|x| x as usize)
                .collect()
        } else {
            vec![parse_usize(e)?]
        };
        if counts.is_empty() || counts.iter().any(|&n| n == 0) {
            return Err(ConfigError::Invalid {
                section: section.name.clone(),
                msg: "n_acq entries must be positive".into(),
            });
        }
        spec.n_acq = counts;
    }
    if let Some(e) = find(section, "rho") {
        let rho = parse_f64(e)?;
        if !(0.0..=1.0).contains(&rho) {
            return Err(ConfigError::Invalid {
                section: section.name.clone(),
                msg: format!("rho {rho} outside [0, 1]"),
            });
        }
        spec.rho = rho;
    }
    if let Some(e) = find(section, "multistart") {
        spec.multistart = parse_usize(e)?;
    }
    if let Some(e) = find(section, "rng_seed") {
        spec.rng_seed = e.value.parse().map_err(|_| ConfigError::Syntax {
            line: e.line,
            msg: format!("`{}` is not a seed", e.value),
        })?;
    }

    let mut cons = ConstraintSet::default();
    if let Some(e) = find(section, "t_max") {
        cons.t_max = parse_timing(e)?;
    }
    if let Some(e) = find(section, "w_max") {
        cons.w_max = Some(parse_timing(e)?);
    }
    if let Some(e) = find(section, "step_min") {
        cons.step_min = parse_timing(e)?;
    }
    if let Some(e) = find(section, "te_min") {
        cons.te_min = parse_timing(e)?;
    }
    if let Some(e) = find(section, "te_max") {
        cons.te_max = parse_timing(e)?;
    }
    if let Some(e) = find(section, "tr_spgr") {
        cons.tr_spgr = parse_timing(e)?;
    }
    if let Some(e) = find(section, "tr_ssfp") {
        cons.tr_ssfp = parse_timing(e)?;
    }
    if let Some(e) = find(section, "n_spgr") {
        cons.n_spgr = parse_usize(e)?;
    }
    if let Some(e) = find(section, "n_ssfp") {
        cons.n_ssfp = parse_usize(e)?;
    }
    if let Some(e) = find(section, "n_echo_ir") {
        cons.n_echo_ir = parse_usize(e)?;
    }
    if let Some(e) = find(section, "n_echo_se") {
        cons.n_echo_se = parse_usize(e)?;
    }
    if let Some(e) = find(section, "alpha_min") {
        cons.alpha_min = parse_angle(e)?;
    }
    spec.constraints = cons;
    Ok(spec)
}
