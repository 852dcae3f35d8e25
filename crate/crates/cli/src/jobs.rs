use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use risdeploy::channel::{export_cir, import_cir, synth_channel_set, ChannelSet, SynthModel};
use risdeploy::optimizer::{run_threshold_sweep, FppConfig, FppError, P3Form};
use risdeploy::radio::{evaluate_solution, random_phases, DeploymentSolution, PhaseConfig};
use risdeploy::report::{convergence_rows, write_csv, SolutionDocument, SweepRow};
use risdeploy::scene::{build_cabin_section, build_default_cabin, RadioConfig, ScenarioDocument};

use crate::manifest::{RunManifest, RunStatus};

pub const ENV_PREFIX: &str = "RISDEPLOY_";

/// Marks an error caused by bad input (exit code 3).
#[derive(Debug)]
pub struct InputError;

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("input error")
    }
}

pub trait InputContext<T> {
    fn input(self) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for std::result::Result<T, E> {
    fn input(self) -> Result<T> {
        self.map_err(|e| e.into().context(InputError))
    }
}

pub fn input_error(msg: String) -> anyhow::Error {
    anyhow!(msg).context(InputError)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthJob {
    pub scenario: ScenarioDocument,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeJob {
    pub channels: PathBuf,
    pub radio: RadioConfig,
    pub thresholds_bps: Vec<f64>,
    pub ris_elements: Option<usize>,
    pub epsilon: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub omega: f64,
    pub form: P3Form,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SnrSource {
    Solution { path: PathBuf },
    NoRis { solution: Option<PathBuf> },
    RandomPhase { solution: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrmapJob {
    pub channels: PathBuf,
    pub radio: RadioConfig,
    pub source: SnrSource,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "command")]
pub enum Job {
    Synth(SynthJob),
    Optimize(OptimizeJob),
    Snrmap(SnrmapJob),
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some sweep thresholds failed.
    Partial,
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Synth(_) => "synth",
            Job::Optimize(_) => "optimize",
            Job::Snrmap(_) => "snrmap",
        }
    }

    /// One manifest per command (and per SNR map source) in an output
    /// directory.
    pub fn manifest_name(&self) -> String {
        match self {
            Job::Snrmap(j) => format!(
                "manifest_{}.json",
                snr_file_name(&j.source, j.seed).trim_end_matches(".csv")
            ),
            other => format!("manifest_{}.json", other.name()),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::Synth(j) => j.scenario.synth.as_ref().map(|s| s.seed),
            Job::Optimize(j) => Some(j.seed),
            Job::Snrmap(j) => Some(j.seed),
        }
    }

    pub fn out_dir(&self) -> &Path {
        match self {
            Job::Synth(j) => &j.out,
            Job::Optimize(j) => &j.out,
            Job::Snrmap(j) => &j.out,
        }
    }

    pub fn set_out_dir(&mut self, out: PathBuf) {
        match self {
            Job::Synth(j) => j.out = out,
            Job::Optimize(j) => j.out = out,
            Job::Snrmap(j) => j.out = out,
        }
    }

    /// Writes the manifest, runs the job and finalises the manifest.
    pub fn execute(self) -> Result<Outcome> {
        let out = self.out_dir().to_path_buf();
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let mut manifest = RunManifest::new(self.clone());
        manifest.write()?;
        let result = match &self {
            Job::Synth(j) => run_synth(j, &mut manifest),
            Job::Optimize(j) => run_optimize(j, &mut manifest),
            Job::Snrmap(j) => run_snrmap(j, &mut manifest),
        };
        manifest.status = match &result {
            Ok(Outcome::Success) => RunStatus::Success,
            Ok(Outcome::Partial) => RunStatus::Partial,
            Err(e) => {
                manifest.message = Some(format!("{e:#}"));
                RunStatus::Failed
            }
        };
        manifest.write()?;
        result
    }
}

/// Overrides top-level scalar keys of a scenario (and keys of its `synth`
/// and `layout` tables) from `RISDEPLOY_<KEY>`, `RISDEPLOY_SYNTH_<KEY>` and
/// `RISDEPLOY_LAYOUT_<KEY>` variables. Variables that name no key are ignored.
pub fn apply_env_overrides<I>(doc: ScenarioDocument, vars: I) -> Result<ScenarioDocument>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut value = toml::Value::try_from(&doc)?;
    let root = value.as_table_mut().expect("scenario serialises to a table");
    for (name, raw) in vars {
        let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
        let key = key.to_ascii_lowercase();
        let (table, field) = match key.split_once('_') {
            Some((t @ ("synth" | "layout"), rest)) => (Some(t), rest.to_string()),
            _ => (None, key.clone()),
        };
        let target = match table {
            Some(t) => root.get_mut(t).and_then(|v| v.as_table_mut()),
            None => Some(&mut *root),
        };
        let Some(slot) = target.and_then(|t| t.get_mut(&field)) else { continue };
        let parsed = match slot {
            toml::Value::Integer(_) => raw.trim().parse::<i64>().map(toml::Value::Integer).ok(),
            toml::Value::Float(_) => raw.trim().parse::<f64>().map(toml::Value::Float).ok(),
            toml::Value::Boolean(_) => raw.trim().parse::<bool>().map(toml::Value::Boolean).ok(),
            toml::Value::String(_) => Some(toml::Value::String(raw.clone())),
            _ => bail!("{name}: only scalar keys can be overridden"),
        };
        *slot = parsed.ok_or_else(|| anyhow!("{name}: cannot parse {raw:?}"))?;
    }
    Ok(value.try_into()?)
}

pub fn env_vars() -> Vec<(String, String)> {
    std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect()
}

/// Loads `config` (or the default cabin) and applies environment overrides.
pub fn resolve_scenario(config: Option<&Path>, ris_elements: usize, rows: Option<(usize, usize)>) -> Result<ScenarioDocument> {
    let doc = match config {
        Some(path) => ScenarioDocument::load(path).input()?,
        None => {
            let scene = match rows {
                Some((first, count)) => build_cabin_section(ris_elements, first, count),
                None => build_default_cabin(ris_elements),
            }
            .input()?;
            ScenarioDocument::new(&scene, &RadioConfig::default(), Some(SynthModel::default()))
        }
    };
    apply_env_overrides(doc, env_vars()).input()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_channels(path: &Path, radio: &RadioConfig) -> Result<ChannelSet> {
    let set = import_cir(path).input()?;
    let n = radio.num_bs_antennas();
    if set.dims().n != n {
        return Err(input_error(format!(
            "{}: channels have N={} BS antennas, radio configuration has {n}",
            path.display(),
            set.dims().n
        )));
    }
    Ok(set)
}

fn run_synth(job: &SynthJob, manifest: &mut RunManifest) -> Result<Outcome> {
    let scene = job.scenario.scene();
    let radio = job.scenario.radio();
    let model = job.scenario.synth.clone().unwrap_or_default();
    let set = manifest.stage("synthesize", || synth_channel_set(&scene, &radio, &model)).input()?;
    let cir = job.out.join("channels.cir");
    let scenario = job.out.join("scenario.toml");
    manifest.stage("write", || -> Result<()> {
        export_cir(&set, &cir)?;
        let text = job.scenario.to_toml()?;
        std::fs::write(&scenario, text).with_context(|| format!("writing {}", scenario.display()))?;
        Ok(())
    })?;
    manifest.outputs.extend([cir, scenario]);
    Ok(Outcome::Success)
}

pub fn threshold_tag(t: f64) -> String {
    format!("t{t:.0}")
}

fn fpp_config(job: &OptimizeJob) -> FppConfig {
    FppConfig {
        epsilon: job.epsilon,
        max_iters: job.max_iters,
        seed: job.seed,
        omega: job.omega,
        form: job.form,
        ..FppConfig::default()
    }
}

fn run_optimize(job: &OptimizeJob, manifest: &mut RunManifest) -> Result<Outcome> {
    let set = manifest.stage("load", || load_channels(&job.channels, &job.radio))?;
    let dims = set.dims();
    if let Some(e) = job.ris_elements {
        if e * e != dims.m {
            return Err(input_error(format!(
                "--ris-elements {e} implies M={}, channels have M={}",
                e * e,
                dims.m
            )));
        }
    }
    let config = fpp_config(job);
    let entries = manifest
        .stage("optimize", || run_threshold_sweep(&set, &job.thresholds_bps, &job.radio, &config))
        .input()?;

    let mut rows = Vec::with_capacity(entries.len());
    let mut failed = false;
    let mut solver_failed = false;
    let t0 = std::time::Instant::now();
    for e in &entries {
        let tag = threshold_tag(e.threshold_bps);
        rows.push(SweepRow::from_entry(e));
        let state = match &e.result {
            Ok(o) => Some(&o.state),
            Err(err) => err.state(),
        };
        if let Some(state) = state {
            let path = job.out.join(format!("convergence_{tag}.csv"));
            write_csv(&convergence_rows(state), create(&path)?)?;
            manifest.outputs.push(path);
        }
        match &e.result {
            Ok(o) => {
                let thresholds = vec![e.threshold_bps; dims.k];
                let doc = SolutionDocument::new(&o.solution, &thresholds);
                let path = job.out.join(format!("solution_{tag}.json"));
                std::fs::write(&path, doc.to_json()?).with_context(|| format!("writing {}", path.display()))?;
                manifest.outputs.push(path);
                let report = evaluate_solution(&set, &o.solution, &job.radio, &thresholds)?;
                let path = job.out.join(format!("ue_{tag}.csv"));
                write_csv(&report, create(&path)?)?;
                manifest.outputs.push(path);
            }
            Err(err) => {
                failed = true;
                solver_failed |= matches!(
                    err,
                    FppError::Solver { .. } | FppError::Conic(_) | FppError::Subproblem(_) | FppError::Radio(_)
                );
                eprintln!("threshold {} bit/s failed: {err}", e.threshold_bps);
            }
        }
    }
    let path = job.out.join("sweep.csv");
    write_csv(&rows, create(&path)?)?;
    manifest.outputs.push(path);
    manifest.stages.push(crate::manifest::Stage {
        name: "write".into(),
        seconds: t0.elapsed().as_secs_f64(),
    });
    for r in &rows {
        match r.num_ris {
            Some(n) => println!(
                "{:>12.0} bit/s  {n:>3} RIS  [{}]  min rate {:.3e}  {} iters",
                r.threshold_bps, r.selected_indices, r.min_rate_bps, r.iters
            ),
            None => println!("{:>12.0} bit/s  failed after {} iters", r.threshold_bps, r.iters),
        }
    }
    if solver_failed {
        bail!("solver failure on at least one threshold");
    }
    Ok(if failed { Outcome::Partial } else { Outcome::Success })
}

fn load_solution(path: &Path, set: &ChannelSet, radio: &RadioConfig) -> Result<(DeploymentSolution, Vec<f64>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).input()?;
    let doc = SolutionDocument::from_json(&text).input()?;
    let sol = doc.to_solution(set, radio).input()?;
    Ok((sol, doc.thresholds_bps))
}

pub fn snr_file_name(source: &SnrSource, seed: u64) -> String {
    match source {
        SnrSource::Solution { .. } => "snr_optimized.csv".into(),
        SnrSource::NoRis { .. } => "snr_no_ris.csv".into(),
        SnrSource::RandomPhase { .. } => format!("snr_random_phase_s{seed}.csv"),
    }
}

fn run_snrmap(job: &SnrmapJob, manifest: &mut RunManifest) -> Result<Outcome> {
    let set = manifest.stage("load", || load_channels(&job.channels, &job.radio))?;
    let d = set.dims();
    let solution = match &job.source {
        SnrSource::Solution { path } | SnrSource::RandomPhase { solution: path } | SnrSource::NoRis { solution: Some(path) } => {
            Some(load_solution(path, &set, &job.radio)?)
        }
        SnrSource::NoRis { solution: None } => None,
    };
    let (alpha, phases, tau, thresholds) = match (&job.source, solution) {
        (SnrSource::Solution { .. }, Some((s, t))) => (s.alpha, s.phases, s.tau, t),
        (SnrSource::RandomPhase { .. }, Some((s, t))) => (s.alpha, random_phases(job.seed, d), s.tau, t),
        (SnrSource::NoRis { .. }, Some((s, t))) => (vec![false; d.l], s.phases, s.tau, t),
        (_, _) => (
            vec![false; d.l],
            PhaseConfig::identity(d.l, d.k, d.m),
            vec![1.0 / d.k as f64; d.k],
            vec![0.0; d.k],
        ),
    };
    let sol = DeploymentSolution::certify(&set, &job.radio, alpha, phases, tau).input()?;
    let report = manifest.stage("evaluate", || evaluate_solution(&set, &sol, &job.radio, &thresholds)).input()?;
    let path = job.out.join(snr_file_name(&job.source, job.seed));
    write_csv(&report, create(&path)?)?;
    manifest.outputs.push(path);
    Ok(Outcome::Success)
}
