//! Command-line pipelines. Every run resolves a JSON config (file, then flags),
//! writes its outputs into one directory together with a manifest holding the
//! resolved config, and can be replayed from that manifest.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_replicates, write_replicates_csv, BootstrapPlan, Scheme};
use crate::ergm::{simulate, sufficient_stats, ErgmModel, SimulationControl};
use crate::error::{Error, Result};
use crate::estimators::{
    delta_ci_total, sh_summary, total_from_known, CiMethod, EstimateWithCi, EstimationSettings, ResultRecord,
    SampleView,
};
use crate::graph::{AttributedNetwork, Group, GROUP_ATTR};
use crate::pipeline::{demographics, estimate_total, LevelEstimate};
use crate::power::{
    run_power_sweep, seed_sensitivity, write_power_csv, PowerSweepConfig, SensitivityProtocol, DEFAULT_FRACTIONS,
};
use crate::rds::{cross_recruit_counts, simulate_rds, RdsDesign, RdsSample, SeedRule};
use crate::reference::{nashville_attributes, nashville_model, reference_network, Margins};
use crate::rng::derive_seed;
use crate::timeseries::{
    fit_arima010_with_covariate, forecast, select_model, ArimaFit, CandidateFit, PitSeries, VarianceDivisor,
};

pub const MANIFEST: &str = "manifest.json";
pub const WORKERS_ENV: &str = "RDSNET_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "rdsnet",
    version,
    about = "Respondent-driven sampling simulation and estimation"
)]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an attributed network from an ERGM.
    SimulateNetwork(SimulateNetworkArgs),
    /// Simulate RDS recruitment on a network.
    SimulateRds(SimulateRdsArgs),
    /// Estimate the unsheltered share and total from an RDS sample.
    Estimate(EstimateArgs),
    /// Bias and interval width against sample fraction.
    Power(PowerArgs),
    /// Fit the PIT-count time series and forecast.
    Forecast(ForecastArgs),
    /// Re-run a pipeline from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedRuleName {
    DegreeProportional,
    Uniform,
    FixedList,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeName {
    Tree,
    RespondentIid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DivisorName {
    Unbiased,
    Ml,
}

// ---------------------------------------------------------------- configs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateNetworkConfig {
    /// Model JSON; the reference Nashville model when absent.
    pub model: Option<PathBuf>,
    /// Margins CSV; the reference margins when absent.
    pub margins: Option<PathBuf>,
    pub unsheltered: usize,
    pub sheltered: usize,
    /// Metropolis proposals before the draw; ten sweeps of all dyads when absent.
    pub burn_in: Option<u64>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for SimulateNetworkConfig {
    fn default() -> Self {
        SimulateNetworkConfig {
            model: None,
            margins: None,
            unsheltered: crate::reference::REFERENCE_UNSHELTERED,
            sheltered: crate::reference::REFERENCE_SHELTERED,
            burn_in: None,
            seed: 1,
            out_dir: PathBuf::from("."),
        }
    }
}

/// Where the population network comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSource {
    /// Edge and node CSVs; the reference network simulated from `network_seed` when absent.
    pub edges: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
    pub network_seed: u64,
}

impl Default for NetworkSource {
    fn default() -> Self {
        NetworkSource {
            edges: None,
            nodes: None,
            network_seed: 1,
        }
    }
}

impl NetworkSource {
    fn load(&self) -> Result<AttributedNetwork> {
        match (&self.edges, &self.nodes) {
            (Some(e), Some(n)) => AttributedNetwork::read_csv(e, n),
            (None, None) => reference_network(self.network_seed),
            _ => Err(Error::input("give both an edge file and a node file, or neither")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateRdsConfig {
    pub network: NetworkSource,
    pub n_seeds: usize,
    pub seed_rule: SeedRuleName,
    pub seed_list: Vec<usize>,
    pub coupons: u32,
    pub target_n: usize,
    pub degree_noise_sd: Option<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for SimulateRdsConfig {
    fn default() -> Self {
        SimulateRdsConfig {
            network: NetworkSource::default(),
            n_seeds: 10,
            seed_rule: SeedRuleName::DegreeProportional,
            seed_list: Vec::new(),
            coupons: 3,
            target_n: 246,
            degree_noise_sd: None,
            seed: 1,
            out_dir: PathBuf::from("."),
        }
    }
}

impl SimulateRdsConfig {
    fn design(&self) -> RdsDesign {
        RdsDesign {
            n_seeds: self.n_seeds,
            seed_rule: match self.seed_rule {
                SeedRuleName::DegreeProportional => SeedRule::DegreeProportional,
                SeedRuleName::Uniform => SeedRule::Uniform,
                SeedRuleName::FixedList => SeedRule::FixedList(self.seed_list.clone()),
            },
            coupon_limit: self.coupons,
            target_n: self.target_n,
            rng_seed: self.seed,
            degree_noise_sd: self.degree_noise_sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub sample: PathBuf,
    /// Known sheltered count N_B.
    pub shelter_count: u64,
    pub coupons: u32,
    pub replicates: usize,
    pub level: f64,
    pub scheme: Scheme,
    pub exclude_seeds: bool,
    pub drop_waves: u32,
    /// Attributes to break down; every non-group attribute of the sample when empty.
    pub demographics: Vec<String>,
    /// Externally obtained SE of μ_A for an additional delta-method interval.
    pub mu_se: Option<f64>,
    /// Also re-estimate without seeds and without waves 0 and 0–1.
    pub sensitivity: bool,
    /// Write `replicates.csv` with the bootstrap totals.
    pub write_replicates: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            sample: PathBuf::from("sample.csv"),
            shelter_count: crate::reference::NASHVILLE_SHELTER_COUNT,
            coupons: 3,
            replicates: 1000,
            level: 0.95,
            scheme: Scheme::Tree,
            exclude_seeds: false,
            drop_waves: 0,
            demographics: Vec::new(),
            mu_se: None,
            sensitivity: false,
            write_replicates: false,
            seed: 1,
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub network: NetworkSource,
    pub fractions: Vec<f64>,
    pub replicates: usize,
    pub bootstrap_replicates: usize,
    pub n_seeds: usize,
    pub seed_rule: SeedRuleName,
    pub coupons: u32,
    /// Known sheltered count; the network's sheltered size when absent.
    pub known_b: Option<u64>,
    /// Truth scored against; the network's unsheltered size when absent.
    pub truth_a: Option<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            network: NetworkSource::default(),
            fractions: DEFAULT_FRACTIONS.to_vec(),
            replicates: 100,
            bootstrap_replicates: 500,
            n_seeds: 10,
            seed_rule: SeedRuleName::DegreeProportional,
            coupons: 3,
            known_b: None,
            truth_a: None,
            seed: 1,
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub drift: f64,
    pub beta_log_shelter: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub series: PathBuf,
    /// Sheltered counts for the years after the last observation.
    pub future_sheltered: Vec<f64>,
    pub level: f64,
    pub divisor: VarianceDivisor,
    /// Forecast from these instead of fitting the series.
    pub coefficients: Option<Coefficients>,
    /// Also fit the 32-candidate order grid.
    pub select: bool,
    pub out_dir: PathBuf,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            series: PathBuf::from("pit.csv"),
            future_sheltered: Vec::new(),
            level: 0.95,
            divisor: VarianceDivisor::Unbiased,
            coefficients: None,
            select: false,
            out_dir: PathBuf::from("."),
        }
    }
}

/// A fully resolved pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum RunConfig {
    SimulateNetwork(SimulateNetworkConfig),
    SimulateRds(SimulateRdsConfig),
    Estimate(EstimateConfig),
    Power(PowerConfig),
    Forecast(ForecastConfig),
}

impl RunConfig {
    pub fn out_dir(&self) -> &Path {
        match self {
            RunConfig::SimulateNetwork(c) => &c.out_dir,
            RunConfig::SimulateRds(c) => &c.out_dir,
            RunConfig::Estimate(c) => &c.out_dir,
            RunConfig::Power(c) => &c.out_dir,
            RunConfig::Forecast(c) => &c.out_dir,
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            RunConfig::SimulateNetwork(c) => c.out_dir = dir,
            RunConfig::SimulateRds(c) => c.out_dir = dir,
            RunConfig::Estimate(c) => c.out_dir = dir,
            RunConfig::Power(c) => c.out_dir = dir,
            RunConfig::Forecast(c) => c.out_dir = dir,
        }
    }

    /// Master seed, for the manifest header. Forecasting draws no random numbers.
    pub fn seed(&self) -> Option<u64> {
        match self {
            RunConfig::SimulateNetwork(c) => Some(c.seed),
            RunConfig::SimulateRds(c) => Some(c.seed),
            RunConfig::Estimate(c) => Some(c.seed),
            RunConfig::Power(c) => Some(c.seed),
            RunConfig::Forecast(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub run: RunConfig,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

// ---------------------------------------------------------------- flags

#[derive(Debug, Args)]
pub struct SimulateNetworkArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub margins: Option<PathBuf>,
    #[arg(long)]
    pub unsheltered: Option<usize>,
    #[arg(long)]
    pub sheltered: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Seed of the reference network used when no files are given.
    #[arg(long)]
    pub network_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateRdsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[arg(long)]
    pub n_seeds: Option<usize>,
    #[arg(long, value_enum)]
    pub seed_rule: Option<SeedRuleName>,
    /// Node indices of the seeds for `--seed-rule fixed-list`.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<usize>>,
    #[arg(long)]
    pub coupons: Option<u32>,
    #[arg(long)]
    pub target_n: Option<usize>,
    #[arg(long)]
    pub degree_noise_sd: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[arg(long)]
    pub shelter_count: Option<u64>,
    #[arg(long)]
    pub coupons: Option<u32>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeName>,
    #[arg(long)]
    pub exclude_seeds: bool,
    #[arg(long)]
    pub drop_waves: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub demographics: Option<Vec<String>>,
    #[arg(long)]
    pub mu_se: Option<f64>,
    #[arg(long)]
    pub sensitivity: bool,
    #[arg(long)]
    pub write_replicates: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub bootstrap_replicates: Option<usize>,
    #[arg(long)]
    pub n_seeds: Option<usize>,
    #[arg(long, value_enum)]
    pub seed_rule: Option<SeedRuleName>,
    #[arg(long)]
    pub coupons: Option<u32>,
    #[arg(long)]
    pub known_b: Option<u64>,
    #[arg(long)]
    pub truth_a: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub future_sheltered: Option<Vec<f64>>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    pub divisor: Option<DivisorName>,
    /// JSON file with `drift`, `beta_log_shelter`, `sigma2`; skips fitting.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    #[arg(long)]
    pub select: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

// ---------------------------------------------------------------- resolution

fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn absolute(p: &mut PathBuf) -> Result<()> {
    *p = std::path::absolute(&*p)?;
    Ok(())
}

fn absolute_opt(p: &mut Option<PathBuf>) -> Result<()> {
    if let Some(p) = p {
        absolute(p)?;
    }
    Ok(())
}

fn resolve_network(n: &mut NetworkSource, a: NetworkArgs) -> Result<()> {
    if a.edges.is_some() {
        n.edges = a.edges;
    }
    if a.nodes.is_some() {
        n.nodes = a.nodes;
    }
    set(&mut n.network_seed, a.network_seed);
    absolute_opt(&mut n.edges)?;
    absolute_opt(&mut n.nodes)
}

/// Config file, then flags; paths made absolute so the manifest replays from anywhere.
pub fn resolve(cmd: Command) -> Result<RunConfig> {
    Ok(match cmd {
        Command::SimulateNetwork(a) => {
            let mut c: SimulateNetworkConfig = load_config(a.config.as_deref())?;
            if a.model.is_some() {
                c.model = a.model;
            }
            if a.margins.is_some() {
                c.margins = a.margins;
            }
            set(&mut c.unsheltered, a.unsheltered);
            set(&mut c.sheltered, a.sheltered);
            if a.burn_in.is_some() {
                c.burn_in = a.burn_in;
            }
            set(&mut c.seed, a.seed);
            set(&mut c.out_dir, a.out_dir);
            absolute_opt(&mut c.model)?;
            absolute_opt(&mut c.margins)?;
            absolute(&mut c.out_dir)?;
            RunConfig::SimulateNetwork(c)
        }
        Command::SimulateRds(a) => {
            let mut c: SimulateRdsConfig = load_config(a.config.as_deref())?;
            resolve_network(&mut c.network, a.network)?;
            set(&mut c.n_seeds, a.n_seeds);
            set(&mut c.seed_rule, a.seed_rule);
            set(&mut c.seed_list, a.seed_list);
            set(&mut c.coupons, a.coupons);
            set(&mut c.target_n, a.target_n);
            if a.degree_noise_sd.is_some() {
                c.degree_noise_sd = a.degree_noise_sd;
            }
            set(&mut c.seed, a.seed);
            set(&mut c.out_dir, a.out_dir);
            absolute(&mut c.out_dir)?;
            RunConfig::SimulateRds(c)
        }
        Command::Estimate(a) => {
            let mut c: EstimateConfig = load_config(a.config.as_deref())?;
            set(&mut c.sample, a.sample);
            set(&mut c.shelter_count, a.shelter_count);
            set(&mut c.coupons, a.coupons);
            set(&mut c.replicates, a.replicates);
            set(&mut c.level, a.level);
            set(
                &mut c.scheme,
                a.scheme.map(|s| match s {
                    SchemeName::Tree => Scheme::Tree,
                    SchemeName::RespondentIid => Scheme::RespondentIid,
                }),
            );
            c.exclude_seeds |= a.exclude_seeds;
            set(&mut c.drop_waves, a.drop_waves);
            set(&mut c.demographics, a.demographics);
            if a.mu_se.is_some() {
                c.mu_se = a.mu_se;
            }
            c.sensitivity |= a.sensitivity;
            c.write_replicates |= a.write_replicates;
            set(&mut c.seed, a.seed);
            set(&mut c.out_dir, a.out_dir);
            absolute(&mut c.sample)?;
            absolute(&mut c.out_dir)?;
            RunConfig::Estimate(c)
        }
        Command::Power(a) => {
            let mut c: PowerConfig = load_config(a.config.as_deref())?;
            resolve_network(&mut c.network, a.network)?;
            set(&mut c.fractions, a.fractions);
            set(&mut c.replicates, a.replicates);
            set(&mut c.bootstrap_replicates, a.bootstrap_replicates);
            set(&mut c.n_seeds, a.n_seeds);
            set(&mut c.seed_rule, a.seed_rule);
            set(&mut c.coupons, a.coupons);
            if a.known_b.is_some() {
                c.known_b = a.known_b;
            }
            if a.truth_a.is_some() {
                c.truth_a = a.truth_a;
            }
            set(&mut c.seed, a.seed);
            set(&mut c.out_dir, a.out_dir);
            absolute(&mut c.out_dir)?;
            RunConfig::Power(c)
        }
        Command::Forecast(a) => {
            let mut c: ForecastConfig = load_config(a.config.as_deref())?;
            set(&mut c.series, a.series);
            set(&mut c.future_sheltered, a.future_sheltered);
            set(&mut c.level, a.level);
            set(
                &mut c.divisor,
                a.divisor.map(|d| match d {
                    DivisorName::Unbiased => VarianceDivisor::Unbiased,
                    DivisorName::Ml => VarianceDivisor::Ml,
                }),
            );
            if let Some(p) = a.coefficients {
                c.coefficients = Some(
                    load_config::<Option<Coefficients>>(Some(&p))?.ok_or_else(|| Error::Config {
                        path: p.clone(),
                        message: "expected an object with drift, beta_log_shelter and sigma2".into(),
                    })?,
                );
            }
            c.select |= a.select;
            set(&mut c.out_dir, a.out_dir);
            absolute(&mut c.series)?;
            absolute(&mut c.out_dir)?;
            RunConfig::Forecast(c)
        }
        Command::Replay(a) => {
            let mut m = Manifest::read(&a.manifest)?;
            if let Some(mut d) = a.out_dir {
                absolute(&mut d)?;
                m.run.set_out_dir(d);
            }
            m.run
        }
    })
}

// ---------------------------------------------------------------- execution

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs a resolved pipeline and writes its manifest. Returns the files written.
pub fn execute(run: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = run.out_dir().to_path_buf();
    std::fs::create_dir_all(&dir)?;
    let outputs = match run {
        RunConfig::SimulateNetwork(c) => simulate_network_cmd(c, &dir)?,
        RunConfig::SimulateRds(c) => simulate_rds_cmd(c, &dir)?,
        RunConfig::Estimate(c) => estimate_cmd(c, &dir)?,
        RunConfig::Power(c) => power_cmd(c, &dir)?,
        RunConfig::Forecast(c) => forecast_cmd(c, &dir)?,
    };
    let manifest = Manifest {
        tool: "rdsnet".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: run.seed(),
        run: run.clone(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    let mut paths: Vec<PathBuf> = outputs.iter().map(|f| dir.join(f)).collect();
    paths.push(dir.join(MANIFEST));
    Ok(paths)
}

/// Resolves the command and runs it on a pool of `workers` threads.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let run = resolve(cli.command)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::input("worker count must be at least 1"));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::input(format!("cannot start workers: {e}")))?;
    pool.install(|| execute(&run))
}

/// 0 success, 2 invalid input, 3 estimator undefined, 1 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Undefined(_) => 3,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
        e if e.is_validation() => 2,
        _ => 1,
    }
}

#[derive(Serialize)]
struct NetworkStats {
    nodes: usize,
    edges: usize,
    unsheltered: usize,
    sheltered: usize,
    cross_ties: usize,
    mean_degree: f64,
    isolates: usize,
    connected: bool,
    subgroup_counts: std::collections::BTreeMap<String, std::collections::BTreeMap<String, usize>>,
    sufficient_statistics: Vec<(String, f64)>,
}

fn simulate_network_cmd(c: &SimulateNetworkConfig, dir: &Path) -> Result<Vec<&'static str>> {
    let model = match &c.model {
        Some(p) => ErgmModel::read_json(p)?,
        None => nashville_model(),
    };
    let margins = match &c.margins {
        Some(p) => Margins::read_csv(p)?,
        None => Margins::nashville(),
    };
    let attrs = nashville_attributes(&margins, [c.unsheltered, c.sheltered], c.seed)?;
    model.check_schema(attrs.schema())?;
    let mut ctl = SimulationControl::for_nodes(attrs.len(), derive_seed(c.seed, &[0xE96]));
    if let Some(b) = c.burn_in {
        ctl.burn_in = b;
    }
    let net = simulate(&model, &attrs, &ctl)?;
    net.write_csv(&dir.join("edges.csv"), &dir.join("nodes.csv"))?;
    let stats = sufficient_stats(&net, &model.terms)?;
    let mut subgroup_counts = std::collections::BTreeMap::new();
    for spec in net.schema().attributes() {
        subgroup_counts.insert(spec.name.clone(), net.subgroup_counts(&spec.name)?);
    }
    let [u, s] = net.group_sizes();
    let out = NetworkStats {
        nodes: net.node_count(),
        edges: net.edge_count(),
        unsheltered: u,
        sheltered: s,
        cross_ties: net.cross_tie_total(),
        mean_degree: 2.0 * net.edge_count() as f64 / net.node_count() as f64,
        isolates: net.isolates().len(),
        connected: net.is_connected(),
        subgroup_counts,
        sufficient_statistics: model.terms.iter().map(|t| t.label()).zip(stats).collect(),
    };
    write_json(&dir.join("stats.json"), &out)?;
    Ok(vec!["edges.csv", "nodes.csv", "stats.json"])
}

#[derive(Serialize)]
struct SampleSummary {
    n: usize,
    seeds: usize,
    target_n: usize,
    shortfall: bool,
    max_wave: u32,
    wave_counts: Vec<usize>,
    /// `[from][to]` with index 0 unsheltered.
    cross_recruitments: [[u64; 2]; 2],
}

fn simulate_rds_cmd(c: &SimulateRdsConfig, dir: &Path) -> Result<Vec<&'static str>> {
    let net = c.network.load()?;
    let design = c.design();
    let sample = simulate_rds(&net, &design)?;
    sample.write_csv(&dir.join("sample.csv"))?;
    let mut wave_counts = vec![0usize; sample.max_wave() as usize + 1];
    for r in sample.respondents() {
        wave_counts[r.wave as usize] += 1;
    }
    let summary = SampleSummary {
        n: sample.len(),
        seeds: sample.seed_ids().len(),
        target_n: design.target_n,
        shortfall: sample.shortfall(),
        max_wave: sample.max_wave(),
        wave_counts,
        cross_recruitments: cross_recruit_counts(&sample),
    };
    write_json(&dir.join("sample_summary.json"), &summary)?;
    Ok(vec!["sample.csv", "sample_summary.json"])
}

#[derive(Serialize)]
struct DemographicRecord {
    attribute: String,
    group: Group,
    level: String,
    point: f64,
    se: f64,
    ci: [f64; 2],
    absent: bool,
}

impl From<LevelEstimate> for DemographicRecord {
    fn from(l: LevelEstimate) -> Self {
        DemographicRecord {
            attribute: l.attribute,
            group: l.group,
            level: l.level,
            point: l.estimate.point,
            se: l.estimate.se,
            ci: [l.estimate.ci_low, l.estimate.ci_high],
            absent: l.absent,
        }
    }
}

#[derive(Serialize)]
struct EstimateOutput {
    shelter_count: u64,
    estimates: Vec<ResultRecord>,
    group_summary: crate::estimators::GroupSummary,
    dropped_replicates: usize,
    demographics: Vec<DemographicRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sensitivity: Option<Vec<crate::power::SensitivityRow>>,
}

fn estimate_cmd(c: &EstimateConfig, dir: &Path) -> Result<Vec<&'static str>> {
    let sample = RdsSample::read_csv(&c.sample, c.coupons)?;
    let plan = BootstrapPlan {
        replicates: c.replicates,
        level: c.level,
        rng_seed: derive_seed(c.seed, &[1]),
        scheme: c.scheme,
    };
    let settings = EstimationSettings {
        exclude_seeds: c.exclude_seeds,
        drop_waves: c.drop_waves,
    };
    let est = estimate_total(&sample, c.shelter_count, &plan, settings)?;
    let mut estimates = est.records();
    if let Some(se) = c.mu_se {
        let mu = EstimateWithCi::normal(est.summary.mu_a, se, c.level, CiMethod::Analytic)?;
        let total = delta_ci_total(&mu, c.shelter_count)?;
        estimates.push(ResultRecord::new("mu_unsheltered", &mu, est.n, settings));
        estimates.push(ResultRecord::new("total_unsheltered", &total, est.n, settings));
    }

    let attrs: Vec<String> = if c.demographics.is_empty() {
        sample
            .schema()
            .attributes()
            .iter()
            .map(|a| a.name.clone())
            .filter(|n| n != GROUP_ATTR)
            .collect()
    } else {
        c.demographics.clone()
    };
    let mut demo = Vec::new();
    for (k, a) in attrs.iter().enumerate() {
        let p = BootstrapPlan {
            rng_seed: derive_seed(c.seed, &[2, k as u64]),
            ..plan
        };
        demo.extend(
            demographics(&sample, a, &p, settings)?
                .into_iter()
                .map(DemographicRecord::from),
        );
    }

    let sensitivity = if c.sensitivity {
        let p = BootstrapPlan {
            rng_seed: derive_seed(c.seed, &[3]),
            ..plan
        };
        let protocol = SensitivityProtocol {
            drop_seeds: true,
            drop_waves: vec![1, 2],
        };
        let prepared = settings.prepare(&sample)?;
        Some(seed_sensitivity(&prepared, c.shelter_count, &p, &protocol)?)
    } else {
        None
    };

    let mut files = vec!["results.json"];
    if c.write_replicates {
        let prepared = settings.prepare(&sample)?;
        let n_b = c.shelter_count;
        let reps = bootstrap_replicates(&prepared, &plan, 1, |v: &SampleView| {
            Ok(vec![total_from_known(
                sh_summary(v, settings.exclude_seeds)?.mu_a,
                n_b,
            )?])
        })?;
        write_replicates_csv(&dir.join("replicates.csv"), &reps, 0)?;
        files.push("replicates.csv");
    }
    let out = EstimateOutput {
        shelter_count: c.shelter_count,
        estimates,
        group_summary: est.summary,
        dropped_replicates: est.dropped_replicates,
        demographics: demo,
        sensitivity,
    };
    write_json(&dir.join("results.json"), &out)?;
    Ok(files)
}

fn power_cmd(c: &PowerConfig, dir: &Path) -> Result<Vec<&'static str>> {
    let net = c.network.load()?;
    let mut cfg = PowerSweepConfig::for_network(&net, c.seed);
    cfg.fractions = c.fractions.clone();
    cfg.replicates = c.replicates;
    cfg.bootstrap.replicates = c.bootstrap_replicates;
    cfg.design.n_seeds = c.n_seeds;
    cfg.design.coupon_limit = c.coupons;
    cfg.design.seed_rule = match c.seed_rule {
        SeedRuleName::DegreeProportional => SeedRule::DegreeProportional,
        SeedRuleName::Uniform => SeedRule::Uniform,
        SeedRuleName::FixedList => {
            return Err(Error::input(
                "power sweeps draw their own seeds; use degree-proportional or uniform",
            ))
        }
    };
    set(&mut cfg.known_b, c.known_b);
    set(&mut cfg.truth_a, c.truth_a);
    let points = run_power_sweep(&net, &cfg)?;
    write_power_csv(&dir.join("power.csv"), &points)?;
    Ok(vec!["power.csv"])
}

#[derive(Serialize)]
struct ForecastRecord {
    year: i32,
    horizon: usize,
    point: f64,
    se: f64,
    ci: [f64; 2],
    level: f64,
}

#[derive(Serialize)]
struct ForecastOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<ArimaFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<Coefficients>,
    gaps: Vec<i32>,
    forecasts: Vec<ForecastRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidates: Option<Vec<CandidateFit>>,
}

fn forecast_cmd(c: &ForecastConfig, dir: &Path) -> Result<Vec<&'static str>> {
    let series = PitSeries::read_csv(&c.series)?;
    if series.is_empty() {
        return Err(Error::input("series has no observations"));
    }
    let (fit, coefficients, model) = match c.coefficients {
        Some(k) => {
            if !(k.sigma2.is_finite() && k.sigma2 >= 0.0) {
                return Err(Error::input("sigma2 must be finite and non-negative"));
            }
            let m = ArimaFit {
                drift: k.drift,
                beta_log_shelter: k.beta_log_shelter,
                se_drift: f64::NAN,
                se_beta: f64::NAN,
                sigma2: k.sigma2,
                divisor: c.divisor,
                sigma2_ml: f64::NAN,
                sigma2_unbiased: f64::NAN,
                rss: f64::NAN,
                log_likelihood: f64::NAN,
                log_likelihood_unbiased: f64::NAN,
                aic: f64::NAN,
                n_obs: 0,
            };
            (None, Some(k), m)
        }
        None => {
            let f = fit_arima010_with_covariate(&series, c.divisor)?;
            (Some(f.clone()), None, f)
        }
    };
    if c.future_sheltered.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::input("future sheltered counts must be positive"));
    }
    let future: Vec<f64> = c.future_sheltered.iter().map(|x| x.ln()).collect();
    let t = series.len() - 1;
    let fc = forecast(
        &model,
        series.unsheltered[t],
        series.sheltered[t].ln(),
        &future,
        c.level,
    )?;
    let last_year = series.years[t];
    let forecasts = fc
        .into_iter()
        .map(|f| ForecastRecord {
            year: last_year + f.horizon as i32,
            horizon: f.horizon,
            point: f.estimate.point,
            se: f.estimate.se,
            ci: [f.estimate.ci_low, f.estimate.ci_high],
            level: f.estimate.level,
        })
        .collect();
    let candidates = if c.select { Some(select_model(&series)?) } else { None };
    let out = ForecastOutput {
        fit,
        coefficients,
        gaps: series.gaps(),
        forecasts,
        candidates,
    };
    write_json(&dir.join("forecast.json"), &out)?;
    Ok(vec!["forecast.json"])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"target_n": 50, "coupons": 2, "seed": 9}"#).unwrap();
        let cli = Cli::try_parse_from([
            "rdsnet",
            "simulate-rds",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "4",
        ])
        .unwrap();
        match resolve(cli.command).unwrap() {
            RunConfig::SimulateRds(c) => {
                assert_eq!((c.target_n, c.coupons, c.seed), (50, 2, 4));
                assert!(c.out_dir.is_absolute());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_config_keys_are_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, "{\n  \"target\": 50\n}").unwrap();
        let cli = Cli::try_parse_from(["rdsnet", "simulate-rds", "--config", cfg.to_str().unwrap()]).unwrap();
        let err = resolve(cli.command).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn manifest_round_trips() {
        let run = RunConfig::Forecast(ForecastConfig::default());
        let m = Manifest {
            tool: "rdsnet".into(),
            version: "0".into(),
            seed: run.seed(),
            run,
            outputs: vec!["forecast.json".into()],
        };
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains(r#""command":"forecast""#));
        assert_eq!(serde_json::from_str::<Manifest>(&text).unwrap(), m);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::undefined("x")), 3);
        assert_eq!(exit_code(&Error::input("x")), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 1);
    }
}
