use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use irs_core::experiments::{parse_law, ExperimentConfig, Outcome};
use irs_core::walks::LawFamily;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

const RESULTS_COLUMNS: &str = "Every experiment writes <out>/<experiment>.csv with columns
  quantity,parameter,estimate,ci,samples,seed
(ci is a 95% half-width, 0 for exact values; samples is 0 for exact values)
and <out>/<experiment>.manifest.json with
  {experiment, config, config_hash, seed, version, started, elapsed, threads, results_summary}.";

#[derive(Parser, Debug)]
#[command(name = "irs-lab", version, about = "Random-walk entropy, Schreier graph and IRS experiments", after_help = RESULTS_COLUMNS)]
struct Cli {
    /// TOML file with experiment parameters (flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    #[command(subcommand)]
    experiment: Experiment,
}

fn law(s: &str) -> std::result::Result<LawFamily, String> {
    parse_law(s).map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// δ_t from exact convolution, the prefix-conditional lower bound, and the speed.
    #[command(after_help = "quantity: entropy (H_t, parameter t), delta (δ_t), prefix_lower, prefix_excluded, speed, target")]
    EntropyBracket(EntropyBracketFlags),
    /// Properness, rad and locality of the glued Schreier graphs.
    #[command(after_help = "quantity: properness_window, ball_size (parameter n), locality_checked, locality_violations")]
    GlueVerify(GlueVerifyFlags),
    /// ĥ(p) for the intersectional IRS over a finite window.
    #[command(after_help = "quantity: h (parameter p), walk_rate (H(X_t)/t), delta\nextra file sweep.csv: p,h,ci,empty_draws,mean_roots,mean_classes")]
    IrsSweep(IrsSweepFlags),
    /// Truncated norms ||g||_K and the core marginal law.
    #[command(after_help = "quantity: norm (parameter word), core_marginal (parameter word;p)\nextra files norm_count.csv: word,R,count,inner_count,stabilized,certified\n            core_marginal.csv: word,p,norm,expected,empirical,sigma,z")]
    NormCount(NormCountFlags),
    /// Prefix disagreement between the free walk and the coset walk at the exit time.
    #[command(after_help = "quantity: differs_at_exit, dominating, changed_after_exit, excluded (parameter n;depth;r)")]
    PrefixFlip(PrefixFlipFlags),
    /// Both sides of the component-crossing inequality on a glued graph.
    #[command(after_help = "quantity: lhs, rhs (parameter law)")]
    Stankov(StankovFlags),
    /// Visit counts in balls and a root-to-root Green function estimate.
    #[command(after_help = "quantity: visits (parameter r), exponent, green_root")]
    Green(GreenFlags),
    /// Return times and hitting measure of the Sanov subgroup of SL2(Z).
    #[command(name = "sl2-hitting", after_help = "quantity: coset_index, return_time, tail_slope, fourth_moment, symmetry_max_z\nextra files mu_f.csv: word,a,b,c,d,count,probability\n            survival.csv: t,survival")]
    Sl2Hitting(Sl2HittingFlags),
    /// Entropy ratio between G and the Sanov subgroup under the hitting walk.
    #[command(after_help = "quantity: h_g, h_f, ratio, entropy, return_time_ratio, quotient_g_delta, quotient_f_delta")]
    Abramov(AbramovFlags),
    /// Exact entropy increments on the free nilpotent quotient and on F_d.
    #[command(after_help = "quantity: lambda_delta (parameter t), free_delta")]
    NilDecay(NilDecayFlags),
}

#[derive(Args, Debug, Serialize)]
struct EntropyBracketFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    /// srw, lazy:ALPHA or tail:BETA:LMAX
    #[arg(long, value_parser = law)]
    #[serde(skip_serializing_if = "Option::is_none")]
    law: Option<LawFamily>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lower_t: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    speed_t: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    speed_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    slack: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct GlueVerifyFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    /// Depths, comma separated.
    #[arg(long = "n", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct IrsSweepFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long, value_parser = law)]
    #[serde(skip_serializing_if = "Option::is_none")]
    law: Option<LawFamily>,
    /// Window radius.
    #[arg(long = "R")]
    #[serde(skip_serializing_if = "Option::is_none")]
    window_radius: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<usize>,
    /// Inclusion probabilities, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    walk_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    core_samples: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct NormCountFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long = "R")]
    #[serde(skip_serializing_if = "Option::is_none")]
    window_radius: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<usize>,
    /// Words such as "a a b A B B A b", comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    words: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_len: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    calibrated_p: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    draws: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct PrefixFlipFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[arg(long, value_parser = law)]
    #[serde(skip_serializing_if = "Option::is_none")]
    law: Option<LawFamily>,
    /// Exit radii, comma separated; the graph depth is n^3.
    #[arg(long = "n", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct StankovFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    /// Radius of the removed ball A.
    #[arg(long = "a")]
    #[serde(skip_serializing_if = "Option::is_none")]
    a_radius: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    /// Laws, comma separated.
    #[arg(long = "law", value_parser = law, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    laws: Option<Vec<LawFamily>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct GreenFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[arg(long, value_parser = law)]
    #[serde(skip_serializing_if = "Option::is_none")]
    law: Option<LawFamily>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_max: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct Sl2HittingFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    step_cap: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    top: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct AbramovFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    resamples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    long_k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    long_runs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<u32>,
}

#[derive(Args, Debug, Serialize)]
struct NilDecayFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    free_t: Option<usize>,
}

impl Experiment {
    fn name(&self) -> &'static str {
        match self {
            Experiment::EntropyBracket(_) => "entropy-bracket",
            Experiment::GlueVerify(_) => "glue-verify",
            Experiment::IrsSweep(_) => "irs-sweep",
            Experiment::NormCount(_) => "norm-count",
            Experiment::PrefixFlip(_) => "prefix-flip",
            Experiment::Stankov(_) => "stankov",
            Experiment::Green(_) => "green",
            Experiment::Sl2Hitting(_) => "sl2-hitting",
            Experiment::Abramov(_) => "abramov",
            Experiment::NilDecay(_) => "nil-decay",
        }
    }

    fn overrides(&self) -> Result<Value> {
        Ok(match self {
            Experiment::EntropyBracket(f) => serde_json::to_value(f)?,
            Experiment::GlueVerify(f) => serde_json::to_value(f)?,
            Experiment::IrsSweep(f) => serde_json::to_value(f)?,
            Experiment::NormCount(f) => serde_json::to_value(f)?,
            Experiment::PrefixFlip(f) => serde_json::to_value(f)?,
            Experiment::Stankov(f) => serde_json::to_value(f)?,
            Experiment::Green(f) => serde_json::to_value(f)?,
            Experiment::Sl2Hitting(f) => serde_json::to_value(f)?,
            Experiment::Abramov(f) => serde_json::to_value(f)?,
            Experiment::NilDecay(f) => serde_json::to_value(f)?,
        })
    }
}

/// Parameters from the config file, with its `seed` split off.
fn read_config_file(path: &Path, experiment: &str, known: &Map<String, Value>) -> Result<(Map<String, Value>, Option<u64>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let mut map = match serde_json::to_value(table)? {
        Value::Object(m) => m,
        _ => bail!("config {} is not a table", path.display()),
    };
    if let Some(name) = map.remove("experiment") {
        if name.as_str() != Some(experiment) {
            bail!("config {} is for experiment {name}, not {experiment}", path.display());
        }
    }
    let seed = match map.remove("seed") {
        None => None,
        Some(v) => Some(v.as_u64().with_context(|| format!("seed {v} is not a non-negative integer"))?),
    };
    if let Some(k) = map.keys().find(|k| !known.contains_key(*k)) {
        bail!("unknown key {k:?} for {experiment}; known keys: {}", known.keys().cloned().collect::<Vec<_>>().join(", "));
    }
    Ok((map, seed))
}

fn resolve(cli: &Cli) -> Result<(ExperimentConfig, u64)> {
    let name = cli.experiment.name();
    let mut config = match serde_json::to_value(ExperimentConfig::default_for(name)?)? {
        Value::Object(m) => m,
        _ => unreachable!("configs serialize to objects"),
    };
    let mut seed = None;
    if let Some(path) = &cli.config {
        let (file, file_seed) = read_config_file(path, name, &config)?;
        config.extend(file);
        seed = file_seed;
    }
    if let Value::Object(flags) = cli.experiment.overrides()? {
        config.extend(flags);
    }
    let resolved: ExperimentConfig = serde_json::from_value(Value::Object(config)).context("invalid parameters")?;
    Ok((resolved, cli.seed.or(seed).unwrap_or(1)))
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn emit(cli: &Cli, config: &ExperimentConfig, seed: u64, out: &Outcome, started: &str, elapsed: f64) -> Result<Vec<String>> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating output directory {}", cli.out.display()))?;
    let name = config.name();
    let mut files = vec![format!("{name}.csv")];
    write(&cli.out.join(&files[0]), &out.results.to_csv()?)?;
    for a in &out.artifacts {
        let file = format!("{name}.{}", a.file);
        write(&cli.out.join(&file), &a.content)?;
        files.push(file);
    }
    let config_json = serde_json::to_value(config)?;
    let config_hash = hex::encode(Sha256::digest(serde_json::to_vec(&config_json)?));
    let manifest = json!({
        "experiment": name,
        "config": config_json,
        "config_hash": config_hash,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "started": started,
        "elapsed": elapsed,
        "threads": rayon::current_num_threads(),
        "results_summary": {
            "passed": out.passed(),
            "checks": out.checks,
            "summary": out.summary,
            "files": files,
        },
    });
    let manifest_file = format!("{name}.manifest.json");
    write(&cli.out.join(&manifest_file), &serde_json::to_string_pretty(&manifest)?)?;
    files.push(manifest_file);
    Ok(files)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    let (config, seed) = resolve(cli)?;
    let started = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();
    let out = config.run(seed)?;
    let elapsed = clock.elapsed().as_secs_f64();
    let files = emit(cli, &config, seed, &out, &started, elapsed)?;
    for c in &out.checks {
        let tag = match (c.passed, c.informational) {
            (true, _) => "ok",
            (false, true) => "info",
            (false, false) => "FAIL",
        };
        println!("{tag:>4}  {}: {}", c.name, c.detail);
    }
    println!("{} finished in {elapsed:.1}s; wrote {} to {}", config.name(), files.join(", "), cli.out.display());
    Ok(out.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
