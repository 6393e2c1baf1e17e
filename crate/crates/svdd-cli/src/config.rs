//! Flat key-value experiment configs.
//!
//! One `key = value` pair per line, `#` starts a comment, dotted keys group
//! the stages (`model.K`, `reward.motif`, `decoder.M`). Unknown and duplicate
//! keys are hard errors: a silently ignored typo corrupts an experiment.
//! Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use svdd_core::decoders::SelectionMode;
use svdd_core::error::{Error, Result};
use svdd_core::model::DEFAULT_ENUM_BUDGET;
use svdd_core::rewards::RewardParams;
use svdd_core::values::FunctionClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderName {
    Pretrained,
    BestOfN,
    SvddMc,
    SvddPm,
    Smc,
    ExactPolicy,
}

impl DecoderName {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderName::Pretrained => "pretrained",
            DecoderName::BestOfN => "best-of-n",
            DecoderName::SvddMc => "svdd-mc",
            DecoderName::SvddPm => "svdd-pm",
            DecoderName::Smc => "smc",
            DecoderName::ExactPolicy => "exact-policy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKindName {
    Exact,
    Mc,
    SoftQ,
    Pm,
}

#[derive(Debug, Clone)]
pub struct ValueSpec {
    pub kind: ValueKindName,
    pub sample_count: usize,
    pub iterations: usize,
    pub class: FunctionClass,
    pub load: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub family: Family,
    pub k: Option<usize>,
    pub len: Option<usize>,
    pub horizon: usize,
    pub schedule: String,
    pub alphabet: Option<String>,
    pub data_path: PathBuf,
    pub reward_name: String,
    pub reward_params: RewardParams,
    pub decoder: Option<DecoderName>,
    pub alpha: f64,
    pub candidates: Option<usize>,
    pub particles: Option<usize>,
    pub mode: Option<SelectionMode>,
    pub num_samples: usize,
    pub audit: bool,
    pub value: Option<ValueSpec>,
    pub seed: u64,
    pub out: PathBuf,
    pub budget: usize,
}

pub const DEFAULT_CANDIDATES: usize = 10;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

struct KeyMap {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl KeyMap {
    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key).ok_or_else(|| config_err(format!("missing required key {key:?}")))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| config_err(format!("bad value for {key:?}: {raw:?}"))),
        }
    }

    fn parse_required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| config_err(format!("bad value for {key:?}: {raw:?}")))
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(|raw| {
            let p = PathBuf::from(raw);
            if p.is_absolute() {
                p
            } else {
                self.base_dir.join(p)
            }
        })
    }
}

pub fn parse_text(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let mut values = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => raw[..i].trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(config_err(format!("line {}: empty value for {key:?}", lineno + 1)));
        }
        if values.insert(key.clone(), value).is_some() {
            return Err(config_err(format!("duplicate key {key:?}")));
        }
    }
    let mut map = KeyMap { values, base_dir: base_dir.to_path_buf() };

    let family = match map.require("model.family")?.as_str() {
        "discrete" | "discrete-masked" => Family::Discrete,
        "continuous" | "continuous-1d" => Family::Continuous,
        other => return Err(config_err(format!("unknown model.family {other:?}"))),
    };
    let k: Option<usize> = map.parse("model.K")?;
    let len: Option<usize> = map.parse("model.L")?;
    let horizon: usize = map.parse_required("model.T")?;
    let schedule = map.take("model.schedule").unwrap_or_else(|| "linear".into());
    let alphabet = map.take("model.alphabet");
    let data_path = map
        .path("model.data")
        .ok_or_else(|| config_err("missing required key \"model.data\""))?;

    match family {
        Family::Discrete => {
            let k = k.ok_or_else(|| config_err("discrete family needs model.K"))?;
            len.ok_or_else(|| config_err("discrete family needs model.L"))?;
            let alphabet =
                alphabet.as_deref().ok_or_else(|| config_err("discrete family needs model.alphabet"))?;
            if alphabet.chars().count() != k {
                return Err(config_err("model.K does not match the alphabet size"));
            }
        }
        Family::Continuous => {
            if k.is_some() || len.is_some() || alphabet.is_some() {
                return Err(config_err(
                    "model.K/model.L/model.alphabet do not apply to the continuous family",
                ));
            }
        }
    }

    let reward_name = map.require("reward")?;
    let reward_params = RewardParams {
        gc_set: map.take("reward.gc_set"),
        motif: map.take("reward.motif"),
        center: map.parse("reward.center")?,
    };

    let decoder = match map.take("decoder") {
        None => None,
        Some(name) => Some(match name.as_str() {
            "pretrained" => DecoderName::Pretrained,
            "best-of-n" => DecoderName::BestOfN,
            "svdd-mc" => DecoderName::SvddMc,
            "svdd-pm" => DecoderName::SvddPm,
            "smc" => DecoderName::Smc,
            "exact-policy" => DecoderName::ExactPolicy,
            other => return Err(config_err(format!("unknown decoder {other:?}"))),
        }),
    };
    let alpha: f64 = map.parse("decoder.alpha")?.unwrap_or(0.0);
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(config_err("decoder.alpha must be finite and >= 0"));
    }
    let candidates: Option<usize> = map.parse("decoder.M")?;
    let particles: Option<usize> = map.parse("decoder.N")?;
    let mode = match map.take("decoder.mode").as_deref() {
        None => None,
        Some("categorical") => Some(SelectionMode::Categorical),
        Some("argmax") => Some(SelectionMode::Argmax),
        Some(other) => return Err(config_err(format!("unknown decoder.mode {other:?}"))),
    };
    let num_samples: usize = map.parse_required("decoder.num_samples")?;
    if num_samples == 0 {
        return Err(config_err("decoder.num_samples must be >= 1"));
    }
    let audit = match map.take("decoder.audit").as_deref() {
        None => false,
        Some("true") => true,
        Some("false") => false,
        Some(other) => return Err(config_err(format!("bad decoder.audit {other:?}"))),
    };

    let value_kind = match map.take("value.kind").as_deref() {
        None => None,
        Some("exact") => Some(ValueKindName::Exact),
        Some("mc") => Some(ValueKindName::Mc),
        Some("softq") => Some(ValueKindName::SoftQ),
        Some("pm") => Some(ValueKindName::Pm),
        Some(other) => return Err(config_err(format!("unknown value.kind {other:?}"))),
    };
    let value_s: Option<usize> = map.parse("value.S")?;
    let value_j: Option<usize> = map.parse("value.J")?;
    let value_class = match map.take("value.class").as_deref() {
        None => None,
        Some("tabular") => Some(FunctionClass::Tabular),
        Some("linear") => Some(FunctionClass::Linear),
        Some(other) => return Err(config_err(format!("unknown value.class {other:?}"))),
    };
    let value_load = map.path("value.load");
    let value = match value_kind {
        Some(kind) => Some(ValueSpec {
            kind,
            sample_count: value_s.unwrap_or(10_000),
            iterations: value_j.unwrap_or(3),
            class: value_class.unwrap_or(FunctionClass::Tabular),
            load: value_load,
        }),
        None => {
            if value_s.is_some() || value_j.is_some() || value_class.is_some() || value_load.is_some()
            {
                return Err(config_err("value.* keys need value.kind"));
            }
            None
        }
    };

    let seed: u64 = map.parse_required("seed")?;
    let out = map.path("out").ok_or_else(|| config_err("missing required key \"out\""))?;
    let budget: usize = map.parse("budget")?.unwrap_or(DEFAULT_ENUM_BUDGET);

    if let Some(stray) = map.values.keys().next() {
        return Err(config_err(format!("unknown key {stray:?}")));
    }

    let cfg = ExperimentConfig {
        family,
        k,
        len,
        horizon,
        schedule,
        alphabet,
        data_path,
        reward_name,
        reward_params,
        decoder,
        alpha,
        candidates,
        particles,
        mode,
        num_samples,
        audit,
        value,
        seed,
        out,
        budget,
    };
    validate_decoder_rules(&cfg)?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_text(&text, base)
}

/// Decoder/value compatibility rules. `decoder` may be absent for configs
/// used only by `train-value` or `oracle`.
fn validate_decoder_rules(cfg: &ExperimentConfig) -> Result<()> {
    let Some(decoder) = cfg.decoder else {
        return Ok(());
    };
    match decoder {
        DecoderName::Pretrained => {
            forbid(cfg.value.is_some(), "pretrained sampling uses no value function")?;
            forbid(cfg.candidates.is_some(), "decoder.M does not apply to pretrained")?;
            forbid(cfg.particles.is_some(), "decoder.N only applies to smc")?;
        }
        DecoderName::BestOfN => {
            forbid(cfg.value.is_some(), "best-of-n uses no value function")?;
            forbid(cfg.particles.is_some(), "decoder.N only applies to smc")?;
        }
        DecoderName::SvddPm => {
            // posterior-mean guidance trains nothing; a value spec here is a
            // configuration mistake
            forbid(cfg.value.is_some(), "svdd-pm requires no value spec")?;
            forbid(cfg.particles.is_some(), "decoder.N only applies to smc")?;
        }
        DecoderName::SvddMc => {
            let value = cfg
                .value
                .as_ref()
                .ok_or_else(|| config_err("svdd-mc requires a value spec (value.kind)"))?;
            forbid(
                value.kind == ValueKindName::Pm,
                "value.kind=pm is svdd-pm; use that decoder",
            )?;
            forbid(cfg.particles.is_some(), "decoder.N only applies to smc")?;
        }
        DecoderName::Smc => {
            forbid(cfg.alpha <= 0.0, "smc requires decoder.alpha > 0")?;
            let particles =
                cfg.particles.ok_or_else(|| config_err("smc requires decoder.N"))?;
            forbid(particles < 2, "smc needs decoder.N >= 2")?;
            forbid(cfg.candidates.is_some(), "decoder.M does not apply to smc")?;
            cfg.value
                .as_ref()
                .ok_or_else(|| config_err("smc requires a value spec (value.kind)"))?;
        }
        DecoderName::ExactPolicy => {
            forbid(cfg.alpha <= 0.0, "exact-policy requires decoder.alpha > 0")?;
            forbid(cfg.value.is_some(), "exact-policy builds its exact value internally")?;
            forbid(cfg.candidates.is_some(), "decoder.M does not apply to exact-policy")?;
            forbid(cfg.particles.is_some(), "decoder.N only applies to smc")?;
            forbid(
                cfg.family == Family::Continuous,
                "exact-policy needs the enumerable discrete family",
            )?;
        }
    }
    if cfg.family == Family::Continuous && decoder == DecoderName::SvddMc {
        if let Some(v) = &cfg.value {
            forbid(
                v.kind == ValueKindName::Exact,
                "exact values need the enumerable discrete family",
            )?;
            forbid(
                v.class == FunctionClass::Tabular,
                "the tabular class needs the discrete family; use value.class = linear",
            )?;
        }
    }
    Ok(())
}

fn forbid(cond: bool, msg: &str) -> Result<()> {
    if cond {
        return Err(config_err(msg));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "\
model.family = discrete
model.K = 2
model.L = 2
model.T = 2
model.alphabet = AC
model.data = data.txt
reward = motif_count
reward.motif = A
decoder = pretrained
decoder.num_samples = 100
seed = 7
out = out
";

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_text(text, Path::new("/tmp/cfgdir"))
    }

    #[test]
    fn parses_a_minimal_config() {
        let cfg = parse(TINY).unwrap();
        assert_eq!(cfg.family, Family::Discrete);
        assert_eq!(cfg.k, Some(2));
        assert_eq!(cfg.decoder, Some(DecoderName::Pretrained));
        assert_eq!(cfg.data_path, Path::new("/tmp/cfgdir/data.txt"));
        assert_eq!(cfg.out, Path::new("/tmp/cfgdir/out"));
        assert_eq!(cfg.alpha, 0.0);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        assert!(parse(&format!("{TINY}typo.key = 3\n")).is_err());
        assert!(parse(&format!("{TINY}seed = 8\n")).is_err());
    }

    #[test]
    fn svdd_mc_needs_a_value_spec() {
        let text = TINY.replace("decoder = pretrained", "decoder = svdd-mc\ndecoder.M = 4");
        assert!(parse(&text).is_err());
        let with_value = format!("{}value.kind = mc\n", text);
        assert!(parse(&with_value).is_ok());
    }

    #[test]
    fn svdd_pm_rejects_a_value_spec() {
        let text = TINY.replace(
            "decoder = pretrained",
            "decoder = svdd-pm\ndecoder.M = 4\nvalue.kind = mc",
        );
        assert!(parse(&text).is_err());
    }

    #[test]
    fn smc_needs_particles_and_positive_alpha() {
        let base = TINY.replace("decoder = pretrained", "decoder = smc\nvalue.kind = exact");
        assert!(parse(&base).is_err());
        let with_n = base.replace("decoder = smc", "decoder = smc\ndecoder.N = 64");
        assert!(parse(&with_n).is_err());
        let ok = with_n.replace("decoder.N = 64", "decoder.N = 64\ndecoder.alpha = 1.0");
        assert!(parse(&ok).is_ok());
    }

    #[test]
    fn family_key_applicability() {
        let cont = "\
model.family = continuous
model.T = 8
model.data = mix.txt
reward = quadratic_1d
reward.center = 1.0
decoder = svdd-pm
decoder.M = 10
decoder.num_samples = 50
seed = 1
out = out
";
        assert!(parse(cont).is_ok());
        assert!(parse(&cont.replace("model.T = 8", "model.T = 8\nmodel.K = 2")).is_err());
        assert!(parse(&TINY.replace("model.K = 2", "model.K = 3")).is_err());
    }
}
