//! Experiment orchestration: build the model and reward from a config,
//! train or load the value function a decoder needs, generate samples, and
//! write the CSV artifacts.
//!
//! The orchestrator itself is single-threaded; sample generation delegates
//! to the decoders' parallel contract. Artifacts contain no wall-clock
//! data, so re-running a command with the same config yields byte-identical
//! files regardless of worker count; timings go to stdout only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use svdd_core::decoders::{
    best_of_n_generate, exact_policy_generate, pretrained_generate, smc_generate, svdd_generate,
    DecoderConfig, GeneratedSample, SelectionMode,
};
use svdd_core::error::{Error, Result};
use svdd_core::model::{ContinuousModel, DiffusionModel, DiscreteModel};
use svdd_core::oracle::{quantile_summary, target_distribution, tv_distance, TargetSpec};
use svdd_core::rewards::{self, Quadratic1d, Reward};
use svdd_core::rng::{domain, Stream};
use svdd_core::schedule::{GaussianSchedule, MaskedSchedule};
use svdd_core::state::Sample;
use svdd_core::table::{Alphabet, DistributionTable, GaussianMixture};
use svdd_core::values::{
    exact_mean_value, exact_soft_value, mc_train, pm_value, soft_q_train, FitOptions,
    SoftValueFunction, PM_DEFAULT_DECODES,
};

use crate::config::{
    DecoderName, ExperimentConfig, Family, ValueKindName, ValueSpec, DEFAULT_CANDIDATES,
};

/// Beta range of the continuous family's `linear` schedule.
const LINEAR_BETA: (f64, f64) = (1e-4, 0.25);

pub struct Experiment {
    pub model: DiffusionModel,
    pub reward: Arc<dyn Reward>,
    pub alphabet: Option<Alphabet>,
    pub mixture: Option<GaussianMixture>,
}

pub fn build(cfg: &ExperimentConfig) -> Result<Experiment> {
    match cfg.family {
        Family::Discrete => {
            let alphabet = Alphabet::new(cfg.alphabet.as_deref().unwrap())?;
            let data = DistributionTable::load(&cfg.data_path, &alphabet)?;
            if data.seq_len() != cfg.len.unwrap() {
                return Err(Error::invalid("model.L does not match the data table"));
            }
            let schedule = match cfg.schedule.as_str() {
                "linear" => MaskedSchedule::linear(cfg.horizon)?,
                other => return Err(Error::invalid(format!("unknown schedule {other:?}"))),
            };
            let reward = rewards::build(
                &cfg.reward_name,
                &cfg.reward_params,
                Some(&alphabet),
                Some(data.seq_len()),
            )?;
            let model = DiffusionModel::Discrete(DiscreteModel::exact(data, schedule)?);
            Ok(Experiment { model, reward, alphabet: Some(alphabet), mixture: None })
        }
        Family::Continuous => {
            let mixture = GaussianMixture::load(&cfg.data_path)?;
            let schedule = match cfg.schedule.as_str() {
                "linear" => {
                    GaussianSchedule::linear_beta(cfg.horizon, LINEAR_BETA.0, LINEAR_BETA.1)?
                }
                other => return Err(Error::invalid(format!("unknown schedule {other:?}"))),
            };
            let reward = rewards::build(&cfg.reward_name, &cfg.reward_params, None, None)?;
            let model =
                DiffusionModel::Continuous(ContinuousModel::exact(mixture.clone(), schedule));
            Ok(Experiment { model, reward, alphabet: None, mixture: Some(mixture) })
        }
    }
}

fn build_value_from_spec(
    spec: &ValueSpec,
    cfg: &ExperimentConfig,
    exp: &Experiment,
) -> Result<SoftValueFunction> {
    if let Some(path) = &spec.load {
        return SoftValueFunction::load(path, exp.alphabet.as_ref());
    }
    let opts = FitOptions { class: spec.class, ..Default::default() };
    let stream = Stream::new(cfg.seed).derive(domain::VALUE, 0);
    match spec.kind {
        ValueKindName::Exact => {
            if cfg.alpha > 0.0 {
                exact_soft_value(&exp.model, exp.reward.as_ref(), cfg.alpha, cfg.budget)
            } else {
                exact_mean_value(&exp.model, exp.reward.as_ref(), cfg.budget)
            }
        }
        ValueKindName::Mc => {
            mc_train(&exp.model, exp.reward.as_ref(), spec.sample_count, &opts, &stream)
        }
        ValueKindName::SoftQ => soft_q_train(
            &exp.model,
            exp.reward.as_ref(),
            spec.sample_count,
            spec.iterations,
            &opts,
            &stream,
        ),
        ValueKindName::Pm => {
            pm_value(&exp.model, exp.reward.clone(), PM_DEFAULT_DECODES, cfg.seed)
        }
    }
}

fn build_value(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Option<SoftValueFunction>> {
    match cfg.decoder.unwrap() {
        DecoderName::SvddPm => {
            Ok(Some(pm_value(&exp.model, exp.reward.clone(), PM_DEFAULT_DECODES, cfg.seed)?))
        }
        DecoderName::SvddMc | DecoderName::Smc => {
            Ok(Some(build_value_from_spec(cfg.value.as_ref().unwrap(), cfg, exp)?))
        }
        DecoderName::ExactPolicy => Ok(Some(exact_soft_value(
            &exp.model,
            exp.reward.as_ref(),
            cfg.alpha,
            cfg.budget,
        )?)),
        DecoderName::Pretrained | DecoderName::BestOfN => Ok(None),
    }
}

pub struct AuditRow {
    pub sample_id: usize,
    pub t: usize,
    pub candidate: usize,
    pub value: f64,
    pub weight: f64,
    pub chosen: bool,
}

pub struct Generation {
    pub samples: Vec<Sample>,
    pub rewards: Vec<f64>,
    pub audits: Vec<AuditRow>,
}

fn collect_audits(samples: &[GeneratedSample], audits: &mut Vec<AuditRow>) {
    for s in samples {
        let Some(batches) = &s.batches else { continue };
        for b in batches {
            for m in 0..b.candidates.len() {
                audits.push(AuditRow {
                    sample_id: s.sample_id,
                    t: b.t_next + 1,
                    candidate: m,
                    value: b.values[m],
                    weight: b.weights[m],
                    chosen: m == b.chosen,
                });
            }
        }
    }
}

pub fn generate(
    cfg: &ExperimentConfig,
    exp: &Experiment,
    value: Option<&SoftValueFunction>,
) -> Result<Generation> {
    let mut audits = Vec::new();
    let samples: Vec<Sample> = match cfg.decoder.unwrap() {
        DecoderName::Pretrained => pretrained_generate(&exp.model, cfg.num_samples, cfg.seed)?
            .into_iter()
            .map(|s| s.terminal)
            .collect(),
        DecoderName::BestOfN => {
            let m = cfg.candidates.unwrap_or(DEFAULT_CANDIDATES);
            let pool = m * cfg.num_samples;
            let kept = best_of_n_generate(
                &exp.model,
                exp.reward.as_ref(),
                pool,
                1.0 / m as f64,
                cfg.seed,
            )?;
            // ceil(pool / M) can overshoot by one through rounding; the pool
            // is reward-sorted, so truncation keeps the top samples
            kept.into_iter().take(cfg.num_samples).map(|s| s.terminal).collect()
        }
        DecoderName::SvddMc | DecoderName::SvddPm => {
            let dc = DecoderConfig::new(
                cfg.alpha,
                cfg.candidates.unwrap_or(DEFAULT_CANDIDATES),
                cfg.mode.unwrap_or(SelectionMode::Categorical),
                cfg.seed,
                cfg.num_samples,
            )?
            .with_audit(cfg.audit);
            let out = svdd_generate(&exp.model, value.unwrap(), &dc)?;
            collect_audits(&out, &mut audits);
            out.into_iter().map(|s| s.terminal).collect()
        }
        DecoderName::Smc => {
            let particles = cfg.particles.unwrap();
            let runs = cfg.num_samples.div_ceil(particles);
            let root = Stream::new(cfg.seed);
            let mut all = Vec::with_capacity(runs * particles);
            for r in 0..runs {
                let out = smc_generate(
                    &exp.model,
                    value.unwrap(),
                    cfg.alpha,
                    particles,
                    root.child_seed(domain::RUN, r as u64),
                )?;
                all.extend(out.samples);
            }
            all.truncate(cfg.num_samples);
            all
        }
        DecoderName::ExactPolicy => exact_policy_generate(
            &exp.model,
            value.unwrap(),
            cfg.alpha,
            cfg.num_samples,
            cfg.seed,
            cfg.budget,
        )?
        .into_iter()
        .map(|s| s.terminal)
        .collect(),
    };
    let rewards =
        samples.iter().map(|s| exp.reward.eval(s)).collect::<Result<Vec<_>>>()?;
    Ok(Generation { samples, rewards, audits })
}

/// The distribution a decoder's empirical output should approach, when one
/// is exactly computable: the tilted target for guided decoders with
/// alpha > 0, the model marginal for plain pre-trained sampling.
fn oracle_table(cfg: &ExperimentConfig, exp: &Experiment) -> Result<Option<DistributionTable>> {
    if cfg.family != Family::Discrete {
        return Ok(None);
    }
    let wants_target = matches!(
        cfg.decoder.unwrap(),
        DecoderName::SvddMc | DecoderName::SvddPm | DecoderName::Smc | DecoderName::ExactPolicy
    ) && cfg.alpha > 0.0;
    let wants_marginal = cfg.decoder == Some(DecoderName::Pretrained);
    if !wants_target && !wants_marginal {
        return Ok(None);
    }
    let marginal = match exp.model.exact_marginal(cfg.budget) {
        Ok(m) => m,
        // the oracle is an optional extra everywhere except exact-policy,
        // which has already enumerated by now
        Err(Error::Budget(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if wants_marginal {
        return Ok(Some(marginal));
    }
    let spec = TargetSpec { base: &marginal, reward: exp.reward.as_ref(), alpha: cfg.alpha };
    Ok(Some(target_distribution(&spec)?.table))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub decoder: &'static str,
    pub alpha: f64,
    /// The decoder's width parameter as reported in CSVs: M for candidate
    /// selection and best-of-n, N for smc, 1 for single-proposal decoders.
    pub width: usize,
    pub num_samples: usize,
    pub mean_reward: f64,
    pub top10: f64,
    pub top20: f64,
    pub tv_to_oracle: Option<f64>,
    pub wall_secs: f64,
}

impl RunSummary {
    pub fn stdout_line(&self) -> String {
        let tv = match self.tv_to_oracle {
            Some(tv) => format!("{tv}"),
            None => "-".into(),
        };
        format!(
            "decoder={} alpha={} M={} samples={} mean={} top20={} top10={} tv={} wall={:.3}s",
            self.decoder,
            self.alpha,
            self.width,
            self.num_samples,
            self.mean_reward,
            self.top20,
            self.top10,
            tv,
            self.wall_secs
        )
    }
}

fn width_of(cfg: &ExperimentConfig) -> usize {
    match cfg.decoder.unwrap() {
        DecoderName::SvddMc | DecoderName::SvddPm | DecoderName::BestOfN => {
            cfg.candidates.unwrap_or(DEFAULT_CANDIDATES)
        }
        DecoderName::Smc => cfg.particles.unwrap(),
        DecoderName::Pretrained | DecoderName::ExactPolicy => 1,
    }
}

fn summarize(
    cfg: &ExperimentConfig,
    gen: &Generation,
    tv: Option<f64>,
    wall_secs: f64,
) -> Result<RunSummary> {
    let q = quantile_summary(&gen.rewards, &[0.1, 0.2])?;
    Ok(RunSummary {
        decoder: cfg.decoder.unwrap().as_str(),
        alpha: cfg.alpha,
        width: width_of(cfg),
        num_samples: gen.samples.len(),
        mean_reward: q.mean,
        top10: q.levels[0].1,
        top20: q.levels[1].1,
        tv_to_oracle: tv,
        wall_secs,
    })
}

fn empirical_table(cfg: &ExperimentConfig, gen: &Generation) -> Result<DistributionTable> {
    let seqs: Vec<&[u8]> =
        gen.samples.iter().map(|s| s.as_seq()).collect::<Result<Vec<_>>>()?;
    DistributionTable::from_samples(cfg.k.unwrap(), cfg.len.unwrap(), seqs)
}

// ---------------------------------------------------------------------------
// csv artifacts

fn render_sample(s: &Sample, alphabet: Option<&Alphabet>) -> Result<String> {
    match s {
        Sample::Seq(tokens) => alphabet
            .ok_or_else(|| Error::invalid("sequence samples need an alphabet"))?
            .decode(tokens),
        Sample::Scalar(v) => Ok(format!("{v}")),
    }
}

fn fmt_tv(tv: Option<f64>) -> String {
    tv.map(|v| v.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn samples_csv(cfg: &ExperimentConfig, exp: &Experiment, gen: &Generation) -> Result<String> {
    let value_col = match cfg.family {
        Family::Discrete => "sequence",
        Family::Continuous => "value",
    };
    let mut out = format!("sample_id,decoder,alpha,M,reward,{value_col}\n");
    let decoder = cfg.decoder.unwrap().as_str();
    let width = width_of(cfg);
    for (i, (s, r)) in gen.samples.iter().zip(gen.rewards.iter()).enumerate() {
        let rendered = render_sample(s, exp.alphabet.as_ref())?;
        let _ = writeln!(out, "{i},{decoder},{},{width},{r},{rendered}", cfg.alpha);
    }
    Ok(out)
}

fn summary_csv(summary: &RunSummary) -> String {
    format!(
        "decoder,alpha,M,num_samples,mean_reward,top20,top10,tv_to_oracle\n{},{},{},{},{},{},{},{}\n",
        summary.decoder,
        summary.alpha,
        summary.width,
        summary.num_samples,
        summary.mean_reward,
        summary.top20,
        summary.top10,
        fmt_tv(summary.tv_to_oracle)
    )
}

const HIST_BINS: usize = 32;

fn hist_csv(rewards: &[f64], declared: (f64, f64)) -> String {
    let finite_min =
        rewards.iter().copied().fold(f64::INFINITY, f64::min);
    let finite_max =
        rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = if declared.0.is_finite() { declared.0 } else { finite_min };
    let hi = if declared.1.is_finite() { declared.1 } else { finite_max };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
    let w = (hi - lo) / HIST_BINS as f64;
    let mut counts = [0usize; HIST_BINS];
    for &r in rewards {
        let bin = (((r - lo) / w) as usize).min(HIST_BINS - 1);
        counts[bin] += 1;
    }
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{c}", lo + i as f64 * w, lo + (i + 1) as f64 * w);
    }
    out
}

fn audit_csv(audits: &[AuditRow]) -> String {
    let mut out = String::from("sample_id,t,m,value,weight,chosen\n");
    for a in audits {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            a.sample_id, a.t, a.candidate, a.value, a.weight, a.chosen as u8
        );
    }
    out
}

fn oracle_csv(
    alphabet: &Alphabet,
    oracle: &DistributionTable,
    empirical: &DistributionTable,
) -> Result<String> {
    let mut out = String::from("sequence,oracle_prob,empirical_prob\n");
    for (seq, p) in oracle.entries() {
        let _ = writeln!(out, "{},{p},{}", alphabet.decode(seq)?, empirical.prob(seq));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// commands

/// `run <config>`: generate samples with the configured decoder and write
/// samples.csv, summary.csv, hist.csv, and (when available) oracle.csv and
/// audit.csv into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    if cfg.decoder.is_none() {
        return Err(Error::invalid("run needs a decoder"));
    }
    let start = Instant::now();
    let exp = build(cfg)?;
    let value = build_value(cfg, &exp)?;
    let gen = generate(cfg, &exp, value.as_ref())?;
    let oracle = oracle_table(cfg, &exp)?;
    let (tv, oracle_file) = match &oracle {
        Some(table) => {
            let empirical = empirical_table(cfg, &gen)?;
            (
                Some(tv_distance(&empirical, table)?),
                Some(oracle_csv(exp.alphabet.as_ref().unwrap(), table, &empirical)?),
            )
        }
        None => (None, None),
    };
    let summary = summarize(cfg, &gen, tv, start.elapsed().as_secs_f64())?;

    std::fs::create_dir_all(&cfg.out)?;
    write_file(&cfg.out.join("samples.csv"), &samples_csv(cfg, &exp, &gen)?)?;
    write_file(&cfg.out.join("summary.csv"), &summary_csv(&summary))?;
    write_file(&cfg.out.join("hist.csv"), &hist_csv(&gen.rewards, exp.reward.range()))?;
    if let Some(text) = oracle_file {
        write_file(&cfg.out.join("oracle.csv"), &text)?;
    }
    if cfg.audit {
        write_file(&cfg.out.join("audit.csv"), &audit_csv(&gen.audits))?;
    }
    Ok(summary)
}

/// `sweep-m <config> --m ...`: one run per candidate count, seeds derived
/// from `(base seed, M)`, emitting sweep.csv.
pub fn sweep_m(cfg: &ExperimentConfig, ms: &[usize]) -> Result<Vec<RunSummary>> {
    if ms.is_empty() {
        return Err(Error::invalid("empty M list"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &m in ms {
        if m == 0 {
            return Err(Error::invalid("M must be >= 1"));
        }
        if !seen.insert(m) {
            return Err(Error::invalid(format!("duplicate M value {m}")));
        }
    }
    if !matches!(cfg.decoder, Some(DecoderName::SvddMc | DecoderName::SvddPm)) {
        return Err(Error::invalid("sweep-m applies to svdd-mc and svdd-pm"));
    }
    let root = Stream::new(cfg.seed);
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let mut sub = cfg.clone();
        sub.candidates = Some(m);
        sub.seed = root.child_seed(domain::RUN, m as u64);
        let start = Instant::now();
        let exp = build(&sub)?;
        let value = build_value(&sub, &exp)?;
        let gen = generate(&sub, &exp, value.as_ref())?;
        let tv = match oracle_table(&sub, &exp)? {
            Some(table) => Some(tv_distance(&empirical_table(&sub, &gen)?, &table)?),
            None => None,
        };
        rows.push(summarize(&sub, &gen, tv, start.elapsed().as_secs_f64())?);
    }
    let mut out = String::from("M,mean_reward,top10,top20,tv_to_oracle\n");
    for (row, &m) in rows.iter().zip(ms.iter()) {
        let _ = writeln!(
            out,
            "{m},{},{},{},{}",
            row.mean_reward,
            row.top10,
            row.top20,
            fmt_tv(row.tv_to_oracle)
        );
    }
    std::fs::create_dir_all(&cfg.out)?;
    write_file(&cfg.out.join("sweep.csv"), &out)?;
    Ok(rows)
}

/// `compare <config...>`: run every config (same model, reward, and sample
/// count) and emit one comparison row per decoder plus each decoder's
/// samples file.
pub fn compare(cfgs: &[ExperimentConfig]) -> Result<Vec<RunSummary>> {
    if cfgs.is_empty() {
        return Err(Error::invalid("compare needs at least one config"));
    }
    let first = &cfgs[0];
    let mut decoders = std::collections::BTreeSet::new();
    for cfg in cfgs {
        let decoder = cfg.decoder.ok_or_else(|| Error::invalid("compare needs decoders"))?;
        if !decoders.insert(decoder.as_str()) {
            return Err(Error::invalid(format!("duplicate decoder {}", decoder.as_str())));
        }
        let shared = cfg.family == first.family
            && cfg.k == first.k
            && cfg.len == first.len
            && cfg.horizon == first.horizon
            && cfg.schedule == first.schedule
            && cfg.alphabet == first.alphabet
            && cfg.data_path == first.data_path
            && cfg.reward_name == first.reward_name
            && cfg.reward_params.gc_set == first.reward_params.gc_set
            && cfg.reward_params.motif == first.reward_params.motif
            && cfg.reward_params.center == first.reward_params.center
            && cfg.num_samples == first.num_samples
            && cfg.out == first.out;
        if !shared {
            return Err(Error::invalid(
                "compare configs must share model, reward, num_samples, and out",
            ));
        }
    }
    std::fs::create_dir_all(&first.out)?;
    let mut rows = Vec::with_capacity(cfgs.len());
    let mut table = String::from("decoder,alpha,M,mean_reward,top20,top10,tv_to_oracle\n");
    for cfg in cfgs {
        let start = Instant::now();
        let exp = build(cfg)?;
        let value = build_value(cfg, &exp)?;
        let gen = generate(cfg, &exp, value.as_ref())?;
        let tv = match oracle_table(cfg, &exp)? {
            Some(t) => Some(tv_distance(&empirical_table(cfg, &gen)?, &t)?),
            None => None,
        };
        let summary = summarize(cfg, &gen, tv, start.elapsed().as_secs_f64())?;
        let name = cfg.decoder.unwrap().as_str();
        write_file(
            &first.out.join(format!("samples_{name}.csv")),
            &samples_csv(cfg, &exp, &gen)?,
        )?;
        let _ = writeln!(
            table,
            "{name},{},{},{},{},{},{}",
            summary.alpha,
            summary.width,
            summary.mean_reward,
            summary.top20,
            summary.top10,
            fmt_tv(summary.tv_to_oracle)
        );
        rows.push(summary);
    }
    write_file(&first.out.join("compare.csv"), &table)?;
    Ok(rows)
}

/// `oracle <config>`: emit exact reference tables. Discrete instances get
/// the model marginal and, at alpha > 0, the tilted target in the data
/// table text format; the continuous family gets closed-form and quadrature
/// moments of the tilted density.
pub fn oracle_cmd(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let exp = build(cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut written = Vec::new();
    match cfg.family {
        Family::Discrete => {
            let alphabet = exp.alphabet.as_ref().unwrap();
            let marginal = exp.model.exact_marginal(cfg.budget)?;
            let path = cfg.out.join("marginal.txt");
            marginal.save(&path, alphabet)?;
            written.push(path);
            if cfg.alpha > 0.0 {
                let spec = TargetSpec {
                    base: &marginal,
                    reward: exp.reward.as_ref(),
                    alpha: cfg.alpha,
                };
                let target = target_distribution(&spec)?;
                let path = cfg.out.join("target.txt");
                target.table.save(&path, alphabet)?;
                written.push(path);
            }
        }
        Family::Continuous => {
            if cfg.alpha <= 0.0 {
                return Err(Error::invalid("continuous oracle needs decoder.alpha > 0"));
            }
            let center = cfg
                .reward_params
                .center
                .ok_or_else(|| Error::invalid("continuous oracle needs reward.center"))?;
            if cfg.reward_name != "quadratic_1d" {
                return Err(Error::Unsupported(
                    "closed-form moments cover the quadratic_1d reward".into(),
                ));
            }
            let reward = Quadratic1d::new(center)?;
            let mixture = exp.mixture.as_ref().unwrap();
            let (mean, var) =
                svdd_core::oracle::continuous_target_moments(mixture, &reward, cfg.alpha)?;
            let (qmean, qvar) = svdd_core::oracle::continuous_target_moments_quadrature(
                mixture, &reward, cfg.alpha,
            )?;
            let path = cfg.out.join("target_moments.csv");
            write_file(
                &path,
                &format!(
                    "alpha,mean,variance,quadrature_mean,quadrature_variance\n{},{mean},{var},{qmean},{qvar}\n",
                    cfg.alpha
                ),
            )?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `train-value <config>`: fit the configured estimator and serialize it to
/// `value.txt` in the output directory.
pub fn train_value_cmd(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let spec = cfg
        .value
        .as_ref()
        .ok_or_else(|| Error::invalid("train-value needs value.kind"))?;
    if spec.kind == ValueKindName::Pm {
        return Err(Error::invalid("posterior-mean values need no training"));
    }
    if spec.load.is_some() {
        return Err(Error::invalid("value.load conflicts with train-value"));
    }
    let exp = build(cfg)?;
    let value = build_value_from_spec(spec, cfg, &exp)?;
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("value.txt");
    value.save(&path, exp.alphabet.as_ref())?;
    Ok(path)
}
