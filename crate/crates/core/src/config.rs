//! INI-style experiment configuration.
//!
//! ```ini
//! [scenario]
//! num_ues = 6
//! sim_duration = 10          ; seconds
//! tti_duration = 0.001       ; seconds
//! cell_capacity = 20000000   ; bit/s at nominal efficiency
//! num_prbs = 25
//! seed = 1
//! start_offsets = random     ; random | zero
//! buffer_capacity = 500      ; packets per flow
//! gbr_window = 0.1           ; seconds
//! channel = static_per_ue    ; none | static_per_ue | block_fading
//! channel_lo = 0.6
//! channel_hi = 1.0
//! channel_block_ttis = 10    ; block_fading only
//!
//! [scheduler]
//! ema_window_ttis = 100
//! d_max_cap = 10
//! epsilon_time = 0.0001
//! priority_normalizer = reciprocal   ; reciprocal | linear:<levels>
//! throughput_floor = 1
//! alpha = 0.4                ; defaults for flows that omit them
//! beta = 0.3
//! gamma = 0.3
//!
//! [flow.control]             ; one section per profile, in UE order
//! qfi = 1
//! five_qi = 85
//! packet_size = 64
//! arrival = periodic         ; periodic | video
//! period = 0.001
//! delay_bound = 0.005        ; or none
//! gbr = none
//! priority_level = 1
//! priority_weight = none
//! rate_cap = none
//! alpha = 0.4
//! beta = 0.3
//! gamma = 0.3
//!
//! [flow.video]
//! arrival = video
//! frame_interval = 0.0333333
//! burst_min = 5
//! burst_max = 40
//! ...
//!
//! [experiment]
//! runs = 20
//! base_seed = 1
//! schedulers = qos-pf,max-ci,static-priority
//! ue_sweep = 5,10,20,40
//!
//! [weights.balanced]         ; sensitivity sweep entries
//! alpha = 0.4
//! beta = 0.3
//! gamma = 0.3
//! ```
//!
//! Unknown sections or keys are errors.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ini::{Ini, Properties};
use thiserror::Error;

use crate::channel::ChannelVariation;
use crate::model::{ArrivalSpec, QfiProfile, Scenario, StartOffsetPolicy, DEFAULT_BUFFER_CAPACITY};
use crate::presets::{self, WeightConfig};
use crate::scalar::Scalar;
use crate::scheduler::{PriorityNormalizer, QosPfParams, SchedulerKind};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("[{section}] unknown key `{key}`")]
    UnknownKey { section: String, key: String },
    #[error("[{section}] missing key `{key}`")]
    MissingKey { section: String, key: String },
    #[error("[{section}] `{key}` has invalid value {value:?}")]
    InvalidValue {
        section: String,
        key: String,
        value: String,
    },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("{path}: {message}")]
    Read { path: String, message: String },
}

/// Batch settings read from `[experiment]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub runs: u32,
    pub base_seed: u64,
    pub schedulers: Vec<SchedulerKind>,
    pub ue_sweep: Vec<u32>,
}

impl ExperimentSettings {
    pub fn defaults(base_seed: u64) -> Self {
        Self {
            runs: 20,
            base_seed,
            schedulers: SchedulerKind::ALL.to_vec(),
            ue_sweep: vec![5, 10, 20, 40],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config<T> {
    pub scenario: Scenario<T>,
    pub scheduler: QosPfParams<T>,
    pub experiment: ExperimentSettings,
    pub weights: Vec<WeightConfig<T>>,
}

impl<T: Scalar> Config<T> {
    pub fn new(scenario: Scenario<T>) -> Self {
        let seed = scenario.seed;
        Self {
            scenario,
            scheduler: QosPfParams::default(),
            experiment: ExperimentSettings::defaults(seed),
            weights: presets::weight_configs(),
        }
    }
}

/// Key lookup over one section that remembers which keys were read.
struct Section<'a> {
    name: String,
    props: &'a Properties,
    seen: HashSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(name: &str, props: &'a Properties) -> Self {
        Self {
            name: name.to_string(),
            props,
            seen: HashSet::new(),
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        self.seen.insert(key);
        self.props.get(key).map(str::trim)
    }

    fn invalid(&self, key: &str, value: &str) -> ConfigError {
        ConfigError::InvalidValue {
            section: self.name.clone(),
            key: key.to_string(),
            value: value.to_string(),
        }
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::MissingKey {
            section: self.name.clone(),
            key: key.to_string(),
        }
    }

    fn parse<V: FromStr>(&mut self, key: &'static str) -> Result<Option<V>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| self.invalid(key, v)),
        }
    }

    fn require<V: FromStr>(&mut self, key: &'static str) -> Result<V, ConfigError> {
        self.parse(key)?.ok_or_else(|| self.missing(key))
    }

    fn or<V: FromStr>(&mut self, key: &'static str, default: V) -> Result<V, ConfigError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn scalar<T: Scalar>(&mut self, key: &'static str) -> Result<Option<T>, ConfigError> {
        match self.parse::<f64>(key)? {
            None => Ok(None),
            Some(v) => T::from_f64(v)
                .filter(|_| v.is_finite())
                .map(Some)
                .ok_or_else(|| self.invalid(key, &v.to_string())),
        }
    }

    fn require_scalar<T: Scalar>(&mut self, key: &'static str) -> Result<T, ConfigError> {
        self.scalar(key)?.ok_or_else(|| self.missing(key))
    }

    fn scalar_or<T: Scalar>(&mut self, key: &'static str, default: T) -> Result<T, ConfigError> {
        Ok(self.scalar(key)?.unwrap_or(default))
    }

    /// `none` or a number; absent means `none`.
    fn optional_scalar<T: Scalar>(&mut self, key: &'static str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) if v.eq_ignore_ascii_case("none") => Ok(None),
            Some(_) => self.scalar(key),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        for (k, _) in self.props.iter() {
            if !self.seen.contains(k) {
                return Err(ConfigError::UnknownKey {
                    section: self.name,
                    key: k.to_string(),
                });
            }
        }
        Ok(())
    }
}

fn parse_list<V: FromStr>(sec: &Section<'_>, key: &str, raw: &str) -> Result<Vec<V>, ConfigError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| sec.invalid(key, raw)))
        .collect()
}

fn parse_normalizer(raw: &str) -> Option<PriorityNormalizer> {
    if raw == "reciprocal" {
        return Some(PriorityNormalizer::Reciprocal);
    }
    raw.strip_prefix("linear:")
        .and_then(|n| n.trim().parse().ok())
        .map(|levels| PriorityNormalizer::Linear { levels })
}

fn parse_scenario_section<T: Scalar>(mut sec: Section<'_>) -> Result<Scenario<T>, ConfigError> {
    let start_offsets = match sec.raw("start_offsets").unwrap_or("random") {
        "random" => StartOffsetPolicy::Random,
        "zero" => StartOffsetPolicy::Zero,
        other => return Err(sec.invalid("start_offsets", other)),
    };
    let channel_kind = sec.raw("channel").unwrap_or("none");
    let lo: Option<f64> = sec.parse("channel_lo")?;
    let hi: Option<f64> = sec.parse("channel_hi")?;
    let block: Option<u64> = sec.parse("channel_block_ttis")?;
    let channel = match channel_kind {
        "none" => ChannelVariation::None,
        "static_per_ue" => ChannelVariation::StaticPerUe {
            lo: lo.ok_or_else(|| sec.missing("channel_lo"))?,
            hi: hi.ok_or_else(|| sec.missing("channel_hi"))?,
        },
        "block_fading" => ChannelVariation::BlockFading {
            lo: lo.ok_or_else(|| sec.missing("channel_lo"))?,
            hi: hi.ok_or_else(|| sec.missing("channel_hi"))?,
            block_ttis: block.ok_or_else(|| sec.missing("channel_block_ttis"))?,
        },
        other => return Err(sec.invalid("channel", other)),
    };
    let s = Scenario {
        num_ues: sec.require("num_ues")?,
        flows_per_ue: Vec::new(),
        sim_duration: sec.require_scalar("sim_duration")?,
        tti_duration: sec.scalar_or("tti_duration", T::ratio(1, 1000))?,
        cell_capacity: sec.require_scalar("cell_capacity")?,
        num_prbs: sec.or("num_prbs", 25)?,
        seed: sec.or("seed", 1)?,
        start_offsets,
        buffer_capacity: sec.or("buffer_capacity", DEFAULT_BUFFER_CAPACITY)?,
        channel,
        gbr_window: sec.scalar_or("gbr_window", T::ratio(1, 10))?,
    };
    sec.finish()?;
    Ok(s)
}

/// Default `(alpha, beta, gamma)` for flows that leave them out.
type Weights<T> = (T, T, T);

fn parse_scheduler_section<T: Scalar>(
    sec: Option<Section<'_>>,
) -> Result<(QosPfParams<T>, Weights<T>), ConfigError> {
    let defaults = QosPfParams::<T>::default();
    let balanced = (T::ratio(4, 10), T::ratio(3, 10), T::ratio(3, 10));
    let Some(mut sec) = sec else {
        return Ok((defaults, balanced));
    };
    let normalizer = match sec.raw("priority_normalizer") {
        None => defaults.priority_normalizer,
        Some(raw) => {
            parse_normalizer(raw).ok_or_else(|| sec.invalid("priority_normalizer", raw))?
        }
    };
    let params = QosPfParams {
        ema_window_ttis: sec.or("ema_window_ttis", defaults.ema_window_ttis)?,
        d_max_cap: sec.scalar_or("d_max_cap", defaults.d_max_cap)?,
        epsilon_time: sec.scalar_or("epsilon_time", defaults.epsilon_time)?,
        priority_normalizer: normalizer,
        throughput_floor: sec.scalar_or("throughput_floor", defaults.throughput_floor)?,
    };
    let weights = (
        sec.scalar_or("alpha", balanced.0)?,
        sec.scalar_or("beta", balanced.1)?,
        sec.scalar_or("gamma", balanced.2)?,
    );
    sec.finish()?;
    Ok((params, weights))
}

fn parse_flow_section<T: Scalar>(
    role: &str,
    mut sec: Section<'_>,
    weights: Weights<T>,
) -> Result<QfiProfile<T>, ConfigError> {
    let arrival = match sec.raw("arrival").unwrap_or("periodic") {
        "periodic" => ArrivalSpec::Periodic {
            period: sec.require_scalar("period")?,
        },
        "video" => ArrivalSpec::Video {
            frame_interval: sec.require_scalar("frame_interval")?,
            burst_min: sec.require("burst_min")?,
            burst_max: sec.require("burst_max")?,
        },
        other => return Err(sec.invalid("arrival", other)),
    };
    let profile = QfiProfile {
        role: role.to_string(),
        qfi: sec.require("qfi")?,
        five_qi: sec.require("five_qi")?,
        packet_size: sec.require("packet_size")?,
        arrival,
        delay_bound: sec.optional_scalar("delay_bound")?,
        gbr: sec.optional_scalar("gbr")?,
        priority_level: sec.require("priority_level")?,
        priority_weight: sec.optional_scalar("priority_weight")?,
        alpha: sec.scalar_or("alpha", weights.0)?,
        beta: sec.scalar_or("beta", weights.1)?,
        gamma: sec.scalar_or("gamma", weights.2)?,
        rate_cap: sec.optional_scalar("rate_cap")?,
    };
    sec.finish()?;
    Ok(profile)
}

fn parse_experiment_section(
    sec: Option<Section<'_>>,
    seed: u64,
) -> Result<ExperimentSettings, ConfigError> {
    let defaults = ExperimentSettings::defaults(seed);
    let Some(mut sec) = sec else {
        return Ok(defaults);
    };
    let schedulers = match sec.raw("schedulers") {
        None => defaults.schedulers,
        Some(raw) => SchedulerKind::parse_list(raw).map_err(|_| sec.invalid("schedulers", raw))?,
    };
    let ue_sweep = match sec.raw("ue_sweep") {
        None => defaults.ue_sweep,
        Some(raw) => parse_list(&sec, "ue_sweep", raw)?,
    };
    let settings = ExperimentSettings {
        runs: sec.or("runs", defaults.runs)?,
        base_seed: sec.or("base_seed", seed)?,
        schedulers,
        ue_sweep,
    };
    sec.finish()?;
    Ok(settings)
}

/// Parses a configuration text.
pub fn parse_config<T: Scalar>(text: &str) -> Result<Config<T>, ConfigError> {
    let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;

    let mut scenario_sec = None;
    let mut scheduler_sec = None;
    let mut experiment_sec = None;
    let mut flow_secs = Vec::new();
    let mut weight_secs = Vec::new();
    for (name, props) in ini.iter() {
        match name {
            None => {
                if let Some((k, _)) = props.iter().next() {
                    return Err(ConfigError::UnknownKey {
                        section: String::new(),
                        key: k.to_string(),
                    });
                }
            }
            Some("scenario") => scenario_sec = Some(Section::new("scenario", props)),
            Some("scheduler") => scheduler_sec = Some(Section::new("scheduler", props)),
            Some("experiment") => experiment_sec = Some(Section::new("experiment", props)),
            Some(other) => {
                if let Some(role) = other.strip_prefix("flow.") {
                    flow_secs.push((role.to_string(), Section::new(other, props)));
                } else if let Some(w) = other.strip_prefix("weights.") {
                    weight_secs.push((w.to_string(), Section::new(other, props)));
                } else {
                    return Err(ConfigError::UnknownSection(other.to_string()));
                }
            }
        }
    }

    let mut scenario: Scenario<T> = parse_scenario_section(
        scenario_sec.ok_or_else(|| ConfigError::MissingSection("scenario".into()))?,
    )?;
    let (scheduler, weights) = parse_scheduler_section(scheduler_sec)?;
    for (role, sec) in flow_secs {
        scenario
            .flows_per_ue
            .push(parse_flow_section(&role, sec, weights)?);
    }
    let experiment = parse_experiment_section(experiment_sec, scenario.seed)?;
    let weights = if weight_secs.is_empty() {
        presets::weight_configs()
    } else {
        weight_secs
            .into_iter()
            .map(|(name, mut sec)| {
                let w = WeightConfig {
                    name,
                    alpha: sec.require_scalar("alpha")?,
                    beta: sec.require_scalar("beta")?,
                    gamma: sec.require_scalar("gamma")?,
                };
                sec.finish()?;
                Ok(w)
            })
            .collect::<Result<_, ConfigError>>()?
    };
    Ok(Config {
        scenario,
        scheduler,
        experiment,
        weights,
    })
}

pub fn load_config<T: Scalar>(path: &Path) -> Result<Config<T>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

fn num<T: Scalar>(v: T) -> String {
    v.as_f64().to_string()
}

fn opt<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), num)
}

fn join<V: ToString>(v: &[V]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Renders a configuration that [`parse_config`] reads back unchanged.
pub fn write_config<T: Scalar>(cfg: &Config<T>) -> String {
    let s = &cfg.scenario;
    let mut out = String::new();
    let _ = writeln!(out, "[scenario]");
    let _ = writeln!(out, "num_ues = {}", s.num_ues);
    let _ = writeln!(out, "sim_duration = {}", num(s.sim_duration));
    let _ = writeln!(out, "tti_duration = {}", num(s.tti_duration));
    let _ = writeln!(out, "cell_capacity = {}", num(s.cell_capacity));
    let _ = writeln!(out, "num_prbs = {}", s.num_prbs);
    let _ = writeln!(out, "seed = {}", s.seed);
    let _ = writeln!(out, "start_offsets = {}", s.start_offsets);
    let _ = writeln!(out, "buffer_capacity = {}", s.buffer_capacity);
    let _ = writeln!(out, "gbr_window = {}", num(s.gbr_window));
    let _ = writeln!(out, "channel = {}", s.channel.name());
    match s.channel {
        ChannelVariation::None => {}
        ChannelVariation::StaticPerUe { lo, hi } => {
            let _ = writeln!(out, "channel_lo = {lo}\nchannel_hi = {hi}");
        }
        ChannelVariation::BlockFading { lo, hi, block_ttis } => {
            let _ = writeln!(
                out,
                "channel_lo = {lo}\nchannel_hi = {hi}\nchannel_block_ttis = {block_ttis}"
            );
        }
    }

    let p = &cfg.scheduler;
    let _ = writeln!(out, "\n[scheduler]");
    let _ = writeln!(out, "ema_window_ttis = {}", p.ema_window_ttis);
    let _ = writeln!(out, "d_max_cap = {}", num(p.d_max_cap));
    let _ = writeln!(out, "epsilon_time = {}", num(p.epsilon_time));
    let normalizer = match p.priority_normalizer {
        PriorityNormalizer::Reciprocal => "reciprocal".to_string(),
        PriorityNormalizer::Linear { levels } => format!("linear:{levels}"),
    };
    let _ = writeln!(out, "priority_normalizer = {normalizer}");
    let _ = writeln!(out, "throughput_floor = {}", num(p.throughput_floor));

    for f in &s.flows_per_ue {
        let _ = writeln!(out, "\n[flow.{}]", f.role);
        let _ = writeln!(out, "qfi = {}", f.qfi);
        let _ = writeln!(out, "five_qi = {}", f.five_qi);
        let _ = writeln!(out, "packet_size = {}", f.packet_size);
        match f.arrival {
            ArrivalSpec::Periodic { period } => {
                let _ = writeln!(out, "arrival = periodic\nperiod = {}", num(period));
            }
            ArrivalSpec::Video {
                frame_interval,
                burst_min,
                burst_max,
            } => {
                let _ = writeln!(
                    out,
                    "arrival = video\nframe_interval = {}\nburst_min = {burst_min}\nburst_max = {burst_max}",
                    num(frame_interval)
                );
            }
        }
        let _ = writeln!(out, "delay_bound = {}", opt(f.delay_bound));
        let _ = writeln!(out, "gbr = {}", opt(f.gbr));
        let _ = writeln!(out, "priority_level = {}", f.priority_level);
        let _ = writeln!(out, "priority_weight = {}", opt(f.priority_weight));
        let _ = writeln!(out, "rate_cap = {}", opt(f.rate_cap));
        let _ = writeln!(
            out,
            "alpha = {}\nbeta = {}\ngamma = {}",
            num(f.alpha),
            num(f.beta),
            num(f.gamma)
        );
    }

    let e = &cfg.experiment;
    let _ = writeln!(out, "\n[experiment]");
    let _ = writeln!(out, "runs = {}", e.runs);
    let _ = writeln!(out, "base_seed = {}", e.base_seed);
    let _ = writeln!(out, "schedulers = {}", join(&e.schedulers));
    let _ = writeln!(out, "ue_sweep = {}", join(&e.ue_sweep));

    for w in &cfg.weights {
        let _ = writeln!(out, "\n[weights.{}]", w.name);
        let _ = writeln!(
            out,
            "alpha = {}\nbeta = {}\ngamma = {}",
            num(w.alpha),
            num(w.beta),
            num(w.gamma)
        );
    }
    out
}
