//! Command-line front end for the cantorset library.
//!
//! Every subcommand emits a versioned JSON report (`"schema": 1`) carrying
//! the parsed flag values verbatim, an optional timestamp, and the result.
//! Tabular reports can be emitted as CSV instead; the column layout is
//! documented in each subcommand's `--help`. Exit codes: 0 on success with
//! all checks CONSISTENT, 1 on usage or input errors, 2 when a statistical
//! check reports VIOLATION.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use cantorset::measure::{capacity_constant, energy, gamma_weight, EnergyCertificate};
use cantorset::moments::{moment_report, HittingTarget};
use cantorset::sampler::{reconstruct_prefix, subset_to_integers, SubsetWitness};
use cantorset::{
    parse_rational, rational_to_f64, run_beam_splitter, run_hitting_check, run_pair_prob_check,
    run_pipeline_demo, run_survival_curve, BitString, ClopenSet, DyadicMeasure, KString, Params,
    SampledTree, Verdict,
};

/// Beam-splitter observation lists are capped at this many entries unless
/// `--full-observations` is passed.
const OBSERVATION_CAP: usize = 10_000;

#[derive(Parser)]
#[command(
    name = "cantorset",
    version,
    about = "Random closed subsets of Cantor space: sampling, exact energy and \
             hitting bounds, and reproducible Monte Carlo checks",
    after_help = "Reports are JSON objects {schema, command, config, timestamp, \
                  runtime_ms, result}; pass --no-timestamp to drop the two varying \
                  fields so identical runs are byte-identical. --format csv is \
                  available for the tabular subcommands and is documented per \
                  subcommand."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format; csv only for tabular reports
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write the report here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Omit the timestamp and runtime fields (byte-identical reruns)
    #[arg(long, global = true)]
    no_timestamp: bool,

    /// Worker threads for sampling; affects speed only, never results
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one random tree and emit it as JSON
    #[command(after_help = "JSON only. The result is the tree serialization \
                            {k, ell, depth, seed, levels} accepted by extract.")]
    Sample(SampleArgs),

    /// Survival probabilities by depth: exact recursion vs Monte Carlo
    #[command(after_help = "CSV columns: depth, trials, successes, estimate, \
                            standard_error, reference, verdict")]
    Survival(SurvivalArgs),

    /// Co-membership probability of a chain pair vs the exact product formula
    #[command(after_help = "CSV columns: label, trials, successes, estimate, \
                            standard_error, reference, verdict")]
    Pairprob(PairprobArgs),

    /// Exact gamma-energy of a dyadic measure, with optional certificate bound
    #[command(after_help = "CSV columns: gamma, depth, split_sum, leaf_sum, total, \
                            divergent, bound (decimal values; exact surds are in \
                            the JSON report)")]
    Energy(EnergyArgs),

    /// Smallest c with mass(cylinder) <= c * 2^(-beta * length) everywhere
    #[command(after_help = "CSV columns: beta, c_r_exact, c_r")]
    Capacity(CapacityArgs),

    /// gamma-weight of a cylinder list: sum of 2^(-gamma * length)
    #[command(after_help = "CSV columns: gamma, strings, weight_exact, weight")]
    Weight(WeightArgs),

    /// Monte Carlo hitting frequency against the energy lower bound
    #[command(after_help = "CSV columns: k, ell, gamma, depth, level, target_mass, \
                            energy_total, bound, pz_bound, trials, successes, \
                            estimate, standard_error, verdict")]
    Hitprob(HitprobArgs),

    /// Exact first/second moments of the hitting statistic and the PZ bound
    #[command(after_help = "CSV columns: k, ell, gamma, level, target_mass, \
                            first_moment, second_moment, second_moment_upper, \
                            diagonal_term, pz_bound, pz_clamped")]
    Moments(MomentsArgs),

    /// End-to-end demonstration: hit the diluted support, extract a member
    /// chain, convert to integers, reconstruct the branch
    #[command(after_help = "CSV columns: k, ell, gamma, depth, level, \
                            dilution_period, target_cylinders, target_mass, bound, \
                            pz_bound, trials, successes, estimate, verdict, \
                            first_hit_trial, round_trip_ok")]
    Pipeline(PipelineArgs),

    /// Photon stream through a half-silvered mirror with Bernoulli detection
    #[command(after_help = "CSV columns: eta, photons, detected, detected_ones, \
                            detection_estimate, detection_reference, \
                            detection_verdict, ones_estimate, ones_reference, \
                            ones_verdict")]
    Beamsplitter(BeamsplitterArgs),

    /// Members of a sampled tree lying along a binary branch
    #[command(after_help = "JSON only. The result carries the witness \
                            {k, strings} and its integer positions in the \
                            length-then-lexicographic enumeration.")]
    Extract(ExtractArgs),

    /// Rebuild a branch prefix from a witness chain
    #[command(after_help = "JSON only. The result carries the branch prefix and \
                            the witness's integer positions.")]
    Reconstruct(ReconstructArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Bits per symbol; the tree is 2^k-ary
    #[arg(long)]
    k: u32,
    /// Membership exponent: each string kept with probability 2^-ell ("1", "3/2")
    #[arg(long)]
    ell: String,
    /// Tree depth in symbols
    #[arg(long)]
    depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SurvivalArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    ell: String,
    /// Deepest level to check
    #[arg(long)]
    depth: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PairprobArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    ell: String,
    /// First chain endpoint, comma-separated symbols ("3,2,1")
    #[arg(long)]
    sigma: String,
    /// Second chain endpoint
    #[arg(long)]
    tau: String,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MeasureSource {
    /// Built-in measure: uniform | diluted
    #[arg(long, conflicts_with = "measure_file", value_name = "NAME")]
    measure: Option<String>,
    /// Measure file: {"depth": N, "masses": {"<bits>": "p/q" | decimal, ...}}
    #[arg(long, value_name = "PATH")]
    measure_file: Option<PathBuf>,
    /// Zero-forcing period for the diluted measure
    #[arg(long, default_value_t = 2)]
    dilution_period: usize,
}

#[derive(Args)]
struct EnergyArgs {
    #[command(flatten)]
    source: MeasureSource,
    /// Binary depth for built-in measures (measure files carry their own)
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// Energy exponent as a rational ("1/2")
    #[arg(long)]
    gamma: String,
    /// Certificate exponent; adds the capacity bound c_R/(2^beta - 2^gamma)
    #[arg(long)]
    beta: Option<String>,
}

#[derive(Args)]
struct CapacityArgs {
    #[command(flatten)]
    source: MeasureSource,
    /// Binary depth for built-in measures (measure files carry their own)
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// Decay exponent to certify
    #[arg(long)]
    beta: String,
}

#[derive(Args)]
struct WeightArgs {
    /// Cylinder list file: {"cylinders": ["110", ...]}; weighed as given,
    /// duplicates dropped, no antichain reduction
    #[arg(long, value_name = "PATH")]
    target_file: PathBuf,
    #[arg(long)]
    gamma: String,
}

#[derive(Args)]
struct HitprobArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    ell: String,
    /// Tree depth in symbols; the frontier has k*depth bits
    #[arg(long)]
    depth: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    source: MeasureSource,
    /// Target clopen set: {"cylinders": [...]}
    #[arg(long, value_name = "PATH")]
    target_file: PathBuf,
}

#[derive(Args)]
struct MomentsArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    ell: String,
    /// Binary frontier length n (must be a multiple of k)
    #[arg(long)]
    level: usize,
    #[command(flatten)]
    source: MeasureSource,
    /// Target clopen set: {"cylinders": [...]}
    #[arg(long, value_name = "PATH")]
    target_file: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Bits per symbol; gamma = 1/k, so k >= 3
    #[arg(long, default_value_t = 4)]
    k: u32,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 1_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BeamsplitterArgs {
    /// Detection probability in (0, 1], rational or decimal
    #[arg(long)]
    eta: String,
    #[arg(long, default_value_t = 100_000)]
    photons: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep every observation instead of the first 10000
    #[arg(long)]
    full_observations: bool,
}

#[derive(Args)]
struct ExtractArgs {
    /// Tree JSON as emitted by `sample`
    #[arg(long, value_name = "PATH")]
    tree_file: PathBuf,
    /// Binary branch, length a multiple of k ("011011")
    #[arg(long)]
    branch: String,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Witness JSON: {"k": 2, "strings": ["3", "3,2"]}
    #[arg(long, value_name = "PATH")]
    witness_file: PathBuf,
    /// Binary prefix length to rebuild (a multiple of k)
    #[arg(long)]
    length: usize,
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema: u32,
    command: &'a str,
    config: &'a serde_json::Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_ms: Option<u64>,
    result: Value,
}

struct CsvTable {
    headers: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

struct RunOutput {
    result: Value,
    csv: Option<CsvTable>,
    violation: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help and version requests are not failures
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let started = Instant::now();
    let timestamp = (!cli.no_timestamp)
        .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));

    let (name, config, out) = match cli.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .context("building the worker pool")?;
            pool.install(|| dispatch(&cli))?
        }
        None => dispatch(&cli)?,
    };

    let bytes = match cli.format {
        Format::Json => {
            let envelope = Envelope {
                schema: 1,
                command: name,
                config: &config,
                timestamp,
                runtime_ms: (!cli.no_timestamp)
                    .then(|| u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX)),
                result: out.result,
            };
            let mut text = serde_json::to_string_pretty(&envelope)?;
            text.push('\n');
            text.into_bytes()
        }
        Format::Csv => {
            let table = out.csv.ok_or_else(|| {
                anyhow!("{name} emits structured JSON only; csv is for tabular reports")
            })?;
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(&table.headers)?;
            for row in &table.rows {
                writer.write_record(row)?;
            }
            writer.into_inner().context("finishing csv output")?
        }
    };

    match &cli.output {
        Some(path) => fs::write(path, &bytes)
            .with_context(|| format!("writing report to {}", path.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(out.violation)
}

type Dispatched = (&'static str, serde_json::Map<String, Value>, RunOutput);

fn dispatch(cli: &Cli) -> Result<Dispatched> {
    let csv = cli.format == Format::Csv;
    match &cli.command {
        Command::Sample(args) => {
            if csv {
                bail!("sample emits structured JSON only; csv is for tabular reports");
            }
            cmd_sample(args)
        }
        Command::Survival(args) => cmd_survival(args),
        Command::Pairprob(args) => cmd_pairprob(args),
        Command::Energy(args) => cmd_energy(args),
        Command::Capacity(args) => cmd_capacity(args),
        Command::Weight(args) => cmd_weight(args),
        Command::Hitprob(args) => cmd_hitprob(args),
        Command::Moments(args) => cmd_moments(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Beamsplitter(args) => cmd_beamsplitter(args),
        Command::Extract(args) => {
            if csv {
                bail!("extract emits structured JSON only; csv is for tabular reports");
            }
            cmd_extract(args)
        }
        Command::Reconstruct(args) => {
            if csv {
                bail!("reconstruct emits structured JSON only; csv is for tabular reports");
            }
            cmd_reconstruct(args)
        }
    }
}

fn parse_params(k: u32, ell: &str) -> Result<Params> {
    let ell = parse_rational(ell).with_context(|| format!("parsing --ell {ell:?}"))?;
    Ok(Params::new(k, ell)?)
}

fn parse_gamma(text: &str, flag: &str) -> Result<BigRational> {
    parse_rational(text).with_context(|| format!("parsing {flag} {text:?}"))
}

fn parse_kstring(text: &str, flag: &str) -> Result<KString> {
    text.parse()
        .with_context(|| format!("parsing {flag} {text:?}"))
}

fn read_to_string(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Build the measure a subcommand asked for; `depth` is the binary depth used
/// for the built-in names (files carry their own depth).
fn build_measure(source: &MeasureSource, depth: usize) -> Result<DyadicMeasure> {
    if let Some(path) = &source.measure_file {
        let text = read_to_string(path)?;
        return Ok(DyadicMeasure::from_json_str(&text)?);
    }
    match source.measure.as_deref() {
        Some("uniform") => Ok(DyadicMeasure::uniform(depth)?),
        Some("diluted") => Ok(DyadicMeasure::diluted(depth, source.dilution_period)?),
        Some(other) => bail!("unknown measure {other:?}; the built-ins are uniform and diluted"),
        None => bail!("one of --measure or --measure-file is required"),
    }
}

fn measure_config(config: &mut serde_json::Map<String, Value>, source: &MeasureSource) {
    if let Some(name) = &source.measure {
        config.insert("measure".into(), json!(name));
        if name == "diluted" {
            config.insert("dilution_period".into(), json!(source.dilution_period));
        }
    }
    if let Some(path) = &source.measure_file {
        config.insert("measure_file".into(), json!(path.display().to_string()));
    }
}

fn read_target(path: &PathBuf) -> Result<ClopenSet> {
    Ok(ClopenSet::from_json_str(&read_to_string(path)?)?)
}

fn verdict_str(v: Verdict) -> &'static str {
    if v.is_violation() {
        "VIOLATION"
    } else {
        "CONSISTENT"
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_surd(s: &cantorset::Surd) -> String {
    fmt_f64(s.to_f64())
}

fn cmd_sample(args: &SampleArgs) -> Result<Dispatched> {
    let params = parse_params(args.k, &args.ell)?;
    let tree = SampledTree::sample(&params, args.depth, args.seed)?;
    let mut config = serde_json::Map::new();
    config.insert("k".into(), json!(args.k));
    config.insert("ell".into(), json!(args.ell));
    config.insert("depth".into(), json!(args.depth));
    config.insert("seed".into(), json!(args.seed));
    let result: Value = serde_json::from_str(&tree.to_json_string())?;
    Ok((
        "sample",
        config,
        RunOutput {
            result,
            csv: None,
            violation: false,
        },
    ))
}

fn cmd_survival(args: &SurvivalArgs) -> Result<Dispatched> {
    let params = parse_params(args.k, &args.ell)?;
    let reports = run_survival_curve(&params, args.depth, args.trials, args.seed)?;
    let mut config = serde_json::Map::new();
    config.insert("k".into(), json!(args.k));
    config.insert("ell".into(), json!(args.ell));
    config.insert("depth".into(), json!(args.depth));
    config.insert("trials".into(), json!(args.trials));
    config.insert("seed".into(), json!(args.seed));
    let violation = reports.iter().any(|r| r.verdict.is_violation());
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                r.trials.to_string(),
                r.successes.to_string(),
                fmt_f64(r.estimate),
                fmt_f64(r.standard_error),
                fmt_f64(r.reference),
                verdict_str(r.verdict).to_string(),
            ]
        })
        .collect();
    Ok((
        "survival",
        config,
        RunOutput {
            result: json!({ "reports": reports }),
            csv: Some(CsvTable {
                headers: vec![
                    "depth",
                    "trials",
                    "successes",
                    "estimate",
                    "standard_error",
                    "reference",
                    "verdict",
                ],
                rows,
            }),
            violation,
        },
    ))
}

fn cmd_pairprob(args: &PairprobArgs) -> Result<Dispatched> {
    let params = parse_params(args.k, &args.ell)?;
    let sigma = parse_kstring(&args.sigma, "--sigma")?;
    let tau = parse_kstring(&args.tau, "--tau")?;
    let report = run_pair_prob_check(&params, &sigma, &tau, args.trials, args.seed)?;
    let mut config = serde_json::Map::new();
    config.insert("k".into(), json!(args.k));
    config.insert("ell".into(), json!(args.ell));
    config.insert("sigma".into(), json!(args.sigma));
    config.insert("tau".into(), json!(args.tau));
    config.insert("trials".into(), json!(args.trials));
    config.insert("seed".into(), json!(args.seed));
    let row = vec![
        report.label.clone(),
        report.trials.to_string(),
        report.successes.to_string(),
        fmt_f64(report.estimate),
        fmt_f64(report.standard_error),
        fmt_f64(report.reference),
        verdict_str(report.verdict).to_string(),
    ];
    Ok((
        "pairprob",
        config,
        RunOutput {
            violation: report.verdict.is_violation(),
            result: serde_json::to_value(&report)?,
            csv: Some(CsvTable {
                headers: vec![
                    "label",
                    "trials",
                    "successes",
                    "estimate",
                    "standard_error",
                    "reference",
                    "verdict",
                ],
                rows: vec![row],
            }),
        },
    ))
}

fn cmd_energy(args: &EnergyArgs) -> Result<Dispatched> {
    let mu = build_measure(&args.source, args.depth)?;
    let gamma = parse_gamma(&args.gamma, "--gamma")?;
    let certificate = match &args.beta {
        Some(text) => {
            let beta = parse_gamma(text, "--beta")?;
            let c_r = capacity_constant(&mu, &beta)?;
            Some(EnergyCertificate { beta, c_r })
        }
        None => None,
    };
    let report = energy(&mu, &gamma, certificate)?;
    let mut config = serde_json::Map::new();
    measure_config(&mut config, &args.source);
    config.insert("depth".into(), json!(args.depth));
    config.insert("gamma".into(), json!(args.gamma));
    if let Some(beta) = &args.beta {
        config.insert("beta".into(), json!(beta));
    }
    let row = vec![
        args.gamma.clone(),
        report.depth.to_string(),
        fmt_surd(&report.split_sum),
        report.leaf_sum.as_ref().map(fmt_surd).unwrap_or_default(),
        report.total.as_ref().map(fmt_surd).unwrap_or_default(),
        report.divergent.to_string(),
        report.bound.as_ref().map(fmt_surd).unwrap_or_default(),
    ];
    Ok((
        "energy",
        config,
        RunOutput {
            result: serde_json::to_value(&report)?,
            csv: Some(CsvTable {
                headers: vec![
                    "gamma",
                    "depth",
                    "split_sum",
                    "leaf_sum",
                    "total",
                    "divergent",
                    "bound",
                ],
                rows: vec![row],
            }),
            violation: false,
        },
    ))
}

fn cmd_capacity(args: &CapacityArgs) -> Result<Dispatched> {
    let mu = build_measure(&args.source, args.depth)?;
    let beta = parse_gamma(&args.beta, "--beta")?;
    let c_r = capacity_constant(&mu, &beta)?;
    let mut config = serde_json::Map::new();
    measure_config(&mut config, &args.source);
    config.insert("depth".into(), json!(args.depth));
    config.insert("beta".into(), json!(args.beta));
    let row = vec![args.beta.clone(), c_r.exact_string(), fmt_surd(&c_r)];
    Ok((
        "capacity",
        config,
        RunOutput {
            result: json!({ "beta": args.beta, "c_r": c_r }),
            csv: Some(CsvTable {
                headers: vec!["beta", "c_r_exact", "c_r"],
                rows: vec![row],
            }),
            violation: false,
        },
    ))
}

fn cmd_weight(args: &WeightArgs) -> Result<Dispatched> {
    // weigh the list as given: parse the cylinders without the antichain
    // canonicalization a ClopenSet would apply
    let text = read_to_string(&args.target_file)?;
    let value: Value = serde_json::from_str(&text).context("parsing the target file")?;
    let obj = value
        .as_object()
        .ok_or_else(|| anyhow!("target file must be an object with a \"cylinders\" array"))?;
    if let Some(key) = obj.keys().find(|k| k.as_str() != "cylinders") {
        bail!("unknown key {key:?} in target file");
    }
    let arr = obj
        .get("cylinders")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("missing \"cylinders\" array"))?;
    let mut strings = Vec::with_capacity(arr.len());
    for v in arr {
        let s = v
            .as_str()
            .ok_or_else(|| anyhow!("cylinders must be strings"))?;
        strings.push(s.parse::<BitString>()?);
    }
    let gamma = parse_gamma(&args.gamma, "--gamma")?;
    let weight = gamma_weight(&strings, &gamma)?;
    let mut config = serde_json::Map::new();
    config.insert(
        "target_file".into(),
        json!(args.target_file.display().to_string()),
    );
    config.insert("gamma".into(), json!(args.gamma));
    let row = vec![
        args.gamma.clone(),
        strings.len().to_string(),
        weight.exact_string(),
        fmt_surd(&weight),
    ];
    Ok((
        "weight",
        config,
        RunOutput {
            result: json!({
                "gamma": args.gamma,
                "strings": strings.len(),
                "weight": weight,
            }),
            csv: Some(CsvTable {
                headers: vec!["gamma", "strings", "weight_exact", "weight"],
                rows: vec![row],
            }),
            violation: false,
        },
    ))
}

fn cmd_hitprob(args: &HitprobArgs) -> Result<Dispatched> {
    let params = parse_params(args.k, &args.ell)?;
    // built-in measures live at the frontier's binary depth so the exact
    // moments line up with the sampled trees
    let mu = build_measure(&args.source, args.k as usize * args.depth)?;
    let target = HittingTarget::new(read_target(&args.target_file)?);
    let report = run_hitting_check(&params, args.depth, args.trials, args.seed, &mu, &target)?;
    let mut config = serde_json::Map::new();
    config.insert("k".into(), json!(args.k));
    config.insert("ell".into(), json!(args.ell));
    config.insert("depth".into(), json!(args.depth));
    config.insert("trials".into(), json!(args.trials));
    config.insert("seed".into(), json!(args.seed));
    measure_config(&mut config, &args.source);
    config.insert(
        "target_file".into(),
        json!(args.target_file.display().to_string()),
    );
    let row = vec![
        report.k.to_string(),
        args.ell.clone(),
        cantorset::format_rational(&report.gamma),
        report.depth.to_string(),
        report.level.to_string(),
        fmt_f64(report.target_mass),
        fmt_surd(&report.energy_total),
        fmt_surd(&report.bound_exact),
        fmt_f64(report.pz_bound),
        report.check.trials.to_string(),
        report.check.successes.to_string(),
        fmt_f64(report.check.estimate),
        fmt_f64(report.check.standard_error),
        verdict_str(report.check.verdict).to_string(),
    ];
    Ok((
        "hitprob",
        config,
        RunOutput {
            violation: report.check.verdict.is_violation(),
            result: serde_json::to_value(&report)?,
            csv: Some(CsvTable {
                headers: vec![
                    "k",
                    "ell",
                    "gamma",
                    "depth",
                    "level",
                    "target_mass",
                    "energy_total",
                    "bound",
                    "pz_bound",
                    "trials",
                    "successes",
                    "estimate",
                    "standard_error",
                    "verdict",
                ],
                rows: vec![row],
            }),
        },
    ))
}

fn cmd_moments(args: &MomentsArgs) -> Result<Dispatched> {
    let params = parse_params(args.k, &args.ell)?;
    let mu = build_measure(&args.source, args.level)?;
    let target = HittingTarget::new(read_target(&args.target_file)?);
    let report = moment_report(&mu, &target, args.level, &params)?;
    let mut config = serde_json::Map::new();
    config.insert("k".into(), json!(args.k));
    config.insert("ell".into(), json!(args.ell));
    config.insert("level".into(), json!(args.level));
    measure_config(&mut config, &args.source);
    config.insert(
        "target_file".into(),
        json!(args.target_file.display().to_string()),
    );
    let row = vec![
        report.k.to_string(),
        args.ell.clone(),
        cantorset::format_rational(&report.gamma),
        report.level.to_string(),
        fmt_f64(report.target_mass),
        fmt_f64(report.first_moment),
        fmt_surd(&report.second_moment),
        fmt_surd(&report.second_moment_upper),
        fmt_surd(&report.diagonal_term),
        fmt_surd(&report.pz_bound),
        report.pz_clamped.to_string(),
    ];
    Ok((
        "moments",
        config,
        RunOutput {
            result: serde_json::to_value(&report)?,
            csv: Some(CsvTable {
                headers: vec![
                    "k",
                    "ell",
                    "gamma",
                    "level",
                    "target_mass",
                    "first_moment",
                    "second_moment",
                    "second_moment_upper",
                    "diagonal_term",
                    "pz_bound",
                    "pz_clamped",
                ],
                rows: vec![row],
            }),
            violation: false,
        },
    ))
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<Dispatched> {
    let report = run_pipeline_demo(args.k, args.depth, args.trials, args.seed)?;
    let mut config = serde_json::Map::new();
    config.insert("k".into(), json!(args.k));
    config.insert("depth".into(), json!(args.depth));
    config.insert("trials".into(), json!(args.trials));
    config.insert("seed".into(), json!(args.seed));
    let row = vec![
        report.k.to_string(),
        cantorset::format_rational(&report.ell),
        cantorset::format_rational(&report.gamma),
        report.depth.to_string(),
        report.level.to_string(),
        report.dilution_period.to_string(),
        report.target_cylinders.to_string(),
        report.target_mass_exact.clone(),
        fmt_f64(report.bound),
        fmt_f64(report.pz_bound),
        report.check.trials.to_string(),
        report.check.successes.to_string(),
        fmt_f64(report.check.estimate),
        verdict_str(report.check.verdict).to_string(),
        report
            .first_hit_trial
            .map(|t| t.to_string())
            .unwrap_or_default(),
        report
            .round_trip_ok
            .map(|b| b.to_string())
            .unwrap_or_default(),
    ];
    Ok((
        "pipeline",
        config,
        RunOutput {
            violation: report.check.verdict.is_violation(),
            result: serde_json::to_value(&report)?,
            csv: Some(CsvTable {
                headers: vec![
                    "k",
                    "ell",
                    "gamma",
                    "depth",
                    "level",
                    "dilution_period",
                    "target_cylinders",
                    "target_mass",
                    "bound",
                    "pz_bound",
                    "trials",
                    "successes",
                    "estimate",
                    "verdict",
                    "first_hit_trial",
                    "round_trip_ok",
                ],
                rows: vec![row],
            }),
        },
    ))
}

fn cmd_beamsplitter(args: &BeamsplitterArgs) -> Result<Dispatched> {
    let eta_rat = parse_gamma(&args.eta, "--eta")?;
    let eta = rational_to_f64(&eta_rat);
    let cap = if args.full_observations {
        usize::MAX
    } else {
        OBSERVATION_CAP
    };
    let report = run_beam_splitter(eta, args.photons, args.seed, cap)?;
    let mut config = serde_json::Map::new();
    config.insert("eta".into(), json!(args.eta));
    config.insert("photons".into(), json!(args.photons));
    config.insert("seed".into(), json!(args.seed));
    config.insert("full_observations".into(), json!(args.full_observations));
    let violation =
        report.detection_check.verdict.is_violation() || report.ones_check.verdict.is_violation();
    let row = vec![
        fmt_f64(report.eta),
        report.photons.to_string(),
        report.detected.to_string(),
        report.detected_ones.to_string(),
        fmt_f64(report.detection_check.estimate),
        fmt_f64(report.detection_check.reference),
        verdict_str(report.detection_check.verdict).to_string(),
        fmt_f64(report.ones_check.estimate),
        fmt_f64(report.ones_check.reference),
        verdict_str(report.ones_check.verdict).to_string(),
    ];
    Ok((
        "beamsplitter",
        config,
        RunOutput {
            violation,
            result: serde_json::to_value(&report)?,
            csv: Some(CsvTable {
                headers: vec![
                    "eta",
                    "photons",
                    "detected",
                    "detected_ones",
                    "detection_estimate",
                    "detection_reference",
                    "detection_verdict",
                    "ones_estimate",
                    "ones_reference",
                    "ones_verdict",
                ],
                rows: vec![row],
            }),
        },
    ))
}

fn cmd_extract(args: &ExtractArgs) -> Result<Dispatched> {
    let tree = SampledTree::from_json_str(&read_to_string(&args.tree_file)?)?;
    let branch: BitString = args
        .branch
        .parse()
        .with_context(|| format!("parsing --branch {:?}", args.branch))?;
    let witness = tree.extract(&branch)?;
    let integers: Vec<String> = subset_to_integers(&witness)
        .iter()
        .map(|n| n.to_string())
        .collect();
    let mut config = serde_json::Map::new();
    config.insert(
        "tree_file".into(),
        json!(args.tree_file.display().to_string()),
    );
    config.insert("branch".into(), json!(args.branch));
    let witness_json: Value = serde_json::from_str(&witness.to_json_string())?;
    Ok((
        "extract",
        config,
        RunOutput {
            result: json!({ "witness": witness_json, "integers": integers }),
            csv: None,
            violation: false,
        },
    ))
}

fn cmd_reconstruct(args: &ReconstructArgs) -> Result<Dispatched> {
    let witness = SubsetWitness::from_json_str(&read_to_string(&args.witness_file)?)?;
    let branch = reconstruct_prefix(&witness, args.length)?;
    let integers: Vec<String> = subset_to_integers(&witness)
        .iter()
        .map(|n| n.to_string())
        .collect();
    let mut config = serde_json::Map::new();
    config.insert(
        "witness_file".into(),
        json!(args.witness_file.display().to_string()),
    );
    config.insert("length".into(), json!(args.length));
    Ok((
        "reconstruct",
        config,
        RunOutput {
            result: json!({ "branch": branch.to_string(), "integers": integers }),
            csv: None,
            violation: false,
        },
    ))
}
