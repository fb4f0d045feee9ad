//! Named experiments shared by the command-line runner and the acceptance
//! harness. A run is a pure function of `(config, seed)`; the defaults are
//! the desk-scale parameters used by the acceptance checks.

use std::fmt::Display;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::entropy::{
    exact_coset_entropy, exact_convolution_entropy, increments, irs_entropy_sweep, prefix_conditional_rate,
    prefix_flip_rate, stankov_check, DEFAULT_SUPPORT_CAP,
};
use crate::error::{Error, Result};
use crate::irs::{norm_on_window, MovedTable, NormCount};
use crate::nilquot::nil_project;
use crate::schreier::{
    bfs_ball, green_estimate, verify_locality, verify_properness, verify_rad, visit_count_profile, Free, Glued,
    GraphOracle, Lambda, LocalityReport, ReferenceSet, VertexAddr, BFS_CAP,
};
use crate::sl2::{
    abramov_check, finite_quotient_decay, kac_check, mu_f_csv, return_time_ratio, CosetTable, DEFAULT_STEP_CAP,
};
use crate::stats::Proportion;
use crate::walks::{speed_estimate, stream_rng, LawFamily, StepLaw};
use crate::words::{ball, ball_size, sphere_size, Letter, ReducedWord};

/// One pass/fail verdict. Informational checks never affect the exit status.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub informational: bool,
}

/// A CSV table held as strings.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Resource(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Resource(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Resource(format!("csv: {e}")))
    }
}

/// A data file produced by a run besides the main results table.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub file: String,
    pub content: String,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub experiment: String,
    pub seed: u64,
    /// Columns `quantity,parameter,estimate,ci,samples,seed`.
    pub results: Table,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub summary: Value,
}

impl Outcome {
    fn new(experiment: &str, seed: u64) -> Outcome {
        Outcome {
            experiment: experiment.to_string(),
            seed,
            results: Table::new(&["quantity", "parameter", "estimate", "ci", "samples", "seed"]),
            artifacts: Vec::new(),
            checks: Vec::new(),
            summary: json!({}),
        }
    }

    fn row(&mut self, quantity: &str, parameter: impl Display, estimate: f64, ci: f64, samples: usize) {
        let seed = self.seed.to_string();
        self.results.push(vec![
            quantity.to_string(),
            parameter.to_string(),
            estimate.to_string(),
            ci.to_string(),
            samples.to_string(),
            seed,
        ]);
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail, informational: false });
    }

    fn note(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail, informational: true });
    }

    fn artifact(&mut self, file: &str, content: String) {
        self.artifacts.push(Artifact { file: file.to_string(), content });
    }

    /// Every non-informational check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| !c.informational).all(|c| c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `srw`, `lazy:ALPHA` or `tail:BETA:LMAX`.
pub fn parse_law(text: &str) -> Result<LawFamily> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Input(format!("bad number {s:?} in law {text:?}")));
    match parts.as_slice() {
        ["srw"] => Ok(LawFamily::Srw),
        ["lazy", a] => Ok(LawFamily::Lazy { alpha: num(a)? }),
        ["tail", b, l] => Ok(LawFamily::GeodesicTail {
            beta: num(b)?,
            l_max: l.parse().map_err(|_| Error::Input(format!("bad l_max {l:?} in law {text:?}")))?,
        }),
        _ => Err(Error::Input(format!("unknown law {text:?}; expected srw, lazy:ALPHA or tail:BETA:LMAX"))),
    }
}

fn law_id(law: &LawFamily) -> String {
    match law {
        LawFamily::Srw => "srw".into(),
        LawFamily::Lazy { alpha } => format!("lazy:{alpha}"),
        LawFamily::GeodesicTail { beta, l_max } => format!("tail:{beta}:{l_max}"),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropyBracketConfig {
    pub d: usize,
    pub law: LawFamily,
    /// Exact convolution depth; the upper estimate is `δ_t`.
    pub t: usize,
    pub lower_t: usize,
    pub r: usize,
    pub n: usize,
    pub samples: usize,
    pub horizon: usize,
    pub speed_t: usize,
    pub speed_samples: usize,
    /// Allowed `(upper - lower) / target`.
    pub slack: f64,
    pub support_cap: usize,
}

impl Default for EntropyBracketConfig {
    fn default() -> Self {
        EntropyBracketConfig {
            d: 2,
            law: LawFamily::Srw,
            t: 12,
            lower_t: 6,
            r: 3,
            n: 60,
            samples: 100_000,
            horizon: 100_000,
            speed_t: 1000,
            speed_samples: 100_000,
            slack: 0.05,
            support_cap: DEFAULT_SUPPORT_CAP,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GlueVerifyConfig {
    pub d: usize,
    pub n_values: Vec<usize>,
    /// Locality radius; vertices farther than `n + 2` from the root are tested.
    pub r: usize,
    /// Far vertices to test per depth.
    pub samples: usize,
}

impl Default for GlueVerifyConfig {
    fn default() -> Self {
        GlueVerifyConfig { d: 2, n_values: vec![2, 3, 4, 5, 6], r: 2, samples: 1000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct IrsSweepConfig {
    pub d: usize,
    pub n: usize,
    pub law: LawFamily,
    pub window_radius: usize,
    pub t: usize,
    pub p: Vec<f64>,
    pub walk_samples: usize,
    pub core_samples: usize,
    pub window_cap: usize,
}

impl Default for IrsSweepConfig {
    fn default() -> Self {
        let mut p = vec![0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05];
        p.extend((1..=10).map(|i| i as f64 / 10.0));
        IrsSweepConfig {
            d: 2,
            n: 4,
            law: LawFamily::Srw,
            window_radius: 8,
            t: 6,
            p,
            walk_samples: 100_000,
            core_samples: 100,
            window_cap: BFS_CAP,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct NormCountConfig {
    pub d: usize,
    pub n: usize,
    pub window_radius: usize,
    pub delta: usize,
    /// Words to test; when empty, `count` words of `N = [F,[F,F]]` are taken from the ball of radius `max_len`.
    pub words: Vec<String>,
    pub count: usize,
    pub max_len: usize,
    pub p: Vec<f64>,
    /// Also test at `p = 1 / median norm`, where the marginal is far from 0 and 1.
    pub calibrated_p: bool,
    pub draws: usize,
    pub window_cap: usize,
}

impl Default for NormCountConfig {
    fn default() -> Self {
        NormCountConfig {
            d: 2,
            n: 4,
            window_radius: 15,
            delta: 2,
            words: Vec::new(),
            count: 20,
            max_len: 10,
            p: vec![0.1, 0.5, 0.9],
            calibrated_p: true,
            draws: 10_000,
            window_cap: BFS_CAP,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PrefixFlipConfig {
    pub d: usize,
    pub law: LawFamily,
    /// Exit radii; the oracle for radius `n` is the glued graph of depth `n^3`.
    pub n_values: Vec<usize>,
    pub r: usize,
    pub samples: usize,
    pub horizon: usize,
}

impl Default for PrefixFlipConfig {
    fn default() -> Self {
        PrefixFlipConfig {
            d: 2,
            law: LawFamily::GeodesicTail { beta: 2.5, l_max: 100_000 },
            n_values: vec![8, 16, 32],
            r: 4,
            samples: 100_000,
            horizon: 1000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct StankovConfig {
    pub d: usize,
    pub n: usize,
    pub a_radius: usize,
    pub m: usize,
    pub laws: Vec<LawFamily>,
    pub samples: usize,
    pub horizon: usize,
}

impl Default for StankovConfig {
    fn default() -> Self {
        StankovConfig {
            d: 2,
            n: 4,
            a_radius: 2,
            m: 0,
            laws: vec![LawFamily::Srw, LawFamily::GeodesicTail { beta: 6.0, l_max: 16 }],
            samples: 20_000,
            horizon: 2000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GreenConfig {
    pub d: usize,
    pub law: LawFamily,
    pub r_max: usize,
    /// Allowed growth exponent of the visit counts in `r`.
    pub exponent_bound: f64,
    /// Depth of the glued graph for the root-to-root Green estimate.
    pub n: usize,
    pub samples: usize,
    pub horizon: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig { d: 2, law: LawFamily::Srw, r_max: 8, exponent_bound: 3.0, n: 4, samples: 20_000, horizon: 2000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Sl2HittingConfig {
    pub samples: usize,
    pub step_cap: usize,
    /// Relative tolerance on `E[T] = [G:F]`.
    pub tolerance: f64,
    /// Heaviest atoms used in the symmetry check.
    pub top: usize,
}

impl Default for Sl2HittingConfig {
    fn default() -> Self {
        Sl2HittingConfig { samples: 1_000_000, step_cap: DEFAULT_STEP_CAP, tolerance: 0.01, top: 20 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AbramovConfig {
    /// Block index for the matched increments.
    pub k: usize,
    pub samples: usize,
    pub resamples: usize,
    pub tolerance: f64,
    /// Returns per run for `T_k / k`.
    pub long_k: usize,
    pub long_runs: usize,
    pub long_tolerance: f64,
    /// Modulus for the finite-quotient case.
    pub q: u32,
    pub quotient_t: usize,
    pub quotient_k: usize,
}

impl Default for AbramovConfig {
    fn default() -> Self {
        AbramovConfig {
            k: 3,
            samples: 1_000_000,
            resamples: 20,
            tolerance: 0.1,
            long_k: 1000,
            long_runs: 1000,
            long_tolerance: 0.1,
            q: 3,
            quotient_t: 12,
            quotient_k: 6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct NilDecayConfig {
    pub d: usize,
    pub t_max: usize,
    pub free_t: usize,
    /// The free-group increments must stay above this many nats.
    pub free_floor: f64,
    pub support_cap: usize,
}

impl Default for NilDecayConfig {
    fn default() -> Self {
        NilDecayConfig { d: 2, t_max: 20, free_t: 12, free_floor: 0.5, support_cap: DEFAULT_SUPPORT_CAP }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    EntropyBracket(EntropyBracketConfig),
    GlueVerify(GlueVerifyConfig),
    IrsSweep(IrsSweepConfig),
    NormCount(NormCountConfig),
    PrefixFlip(PrefixFlipConfig),
    Stankov(StankovConfig),
    Green(GreenConfig),
    #[serde(rename = "sl2-hitting")]
    Sl2Hitting(Sl2HittingConfig),
    Abramov(AbramovConfig),
    NilDecay(NilDecayConfig),
}

pub const EXPERIMENTS: [&str; 10] = [
    "entropy-bracket",
    "glue-verify",
    "irs-sweep",
    "norm-count",
    "prefix-flip",
    "stankov",
    "green",
    "sl2-hitting",
    "abramov",
    "nil-decay",
];

impl ExperimentConfig {
    pub fn default_for(name: &str) -> Result<ExperimentConfig> {
        Ok(match name {
            "entropy-bracket" => ExperimentConfig::EntropyBracket(Default::default()),
            "glue-verify" => ExperimentConfig::GlueVerify(Default::default()),
            "irs-sweep" => ExperimentConfig::IrsSweep(Default::default()),
            "norm-count" => ExperimentConfig::NormCount(Default::default()),
            "prefix-flip" => ExperimentConfig::PrefixFlip(Default::default()),
            "stankov" => ExperimentConfig::Stankov(Default::default()),
            "green" => ExperimentConfig::Green(Default::default()),
            "sl2-hitting" => ExperimentConfig::Sl2Hitting(Default::default()),
            "abramov" => ExperimentConfig::Abramov(Default::default()),
            "nil-decay" => ExperimentConfig::NilDecay(Default::default()),
            _ => return Err(Error::Input(format!("unknown experiment {name:?}; known: {}", EXPERIMENTS.join(", ")))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::EntropyBracket(_) => "entropy-bracket",
            ExperimentConfig::GlueVerify(_) => "glue-verify",
            ExperimentConfig::IrsSweep(_) => "irs-sweep",
            ExperimentConfig::NormCount(_) => "norm-count",
            ExperimentConfig::PrefixFlip(_) => "prefix-flip",
            ExperimentConfig::Stankov(_) => "stankov",
            ExperimentConfig::Green(_) => "green",
            ExperimentConfig::Sl2Hitting(_) => "sl2-hitting",
            ExperimentConfig::Abramov(_) => "abramov",
            ExperimentConfig::NilDecay(_) => "nil-decay",
        }
    }

    pub fn run(&self, seed: u64) -> Result<Outcome> {
        match self {
            ExperimentConfig::EntropyBracket(c) => entropy_bracket(c, seed),
            ExperimentConfig::GlueVerify(c) => glue_verify(c, seed),
            ExperimentConfig::IrsSweep(c) => irs_sweep(c, seed),
            ExperimentConfig::NormCount(c) => norm_count(c, seed),
            ExperimentConfig::PrefixFlip(c) => prefix_flip(c, seed),
            ExperimentConfig::Stankov(c) => stankov(c, seed),
            ExperimentConfig::Green(c) => green(c, seed),
            ExperimentConfig::Sl2Hitting(c) => sl2_hitting(c, seed),
            ExperimentConfig::Abramov(c) => abramov(c, seed),
            ExperimentConfig::NilDecay(c) => nil_decay(c, seed),
        }
    }
}

pub fn entropy_bracket(c: &EntropyBracketConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("entropy-bracket", seed);
    let law = StepLaw::new(c.law, c.d)?;
    if c.t == 0 {
        return Err(Error::Input("entropy-bracket needs t >= 1".into()));
    }
    let h = exact_convolution_entropy(&law, c.t, c.support_cap)?;
    let delta = increments(&h);
    for (t, &x) in h.iter().enumerate() {
        out.row("entropy", t, x, 0.0, 0);
    }
    for (t, &x) in delta.iter().enumerate() {
        out.row("delta", t + 1, x, 0.0, 0);
    }
    let worst_rise = delta.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    out.check(
        "increments non-increasing",
        worst_rise <= 1e-12,
        format!("max δ_(t+1) - δ_t = {worst_rise:.3e} over t <= {}", c.t),
    );

    let lower = prefix_conditional_rate(&law, c.r, c.lower_t, c.n, c.samples, c.horizon, seed)?;
    out.row("prefix_lower", format!("t={};r={};n={}", c.lower_t, c.r, c.n), lower.value, lower.ci_halfwidth, c.samples);
    out.row("prefix_excluded", format!("n={}", c.n), lower.exclusion_rate, 0.0, c.samples);
    let upper = delta[c.t - 1];

    // at t = 1 the mutual information with the exit prefix is the whole entropy rate
    let kv = prefix_conditional_rate(&law, c.r, 1, c.n, c.samples, c.horizon, seed ^ 0x4b56)?;
    out.row("prefix_lower", format!("t=1;r={};n={}", c.r, c.n), kv.value, kv.ci_halfwidth, c.samples);

    let (speed, speed_ci) = speed_estimate(&law, c.speed_t, c.speed_samples, seed ^ 0x5eed)?;
    out.row("speed", c.speed_t, speed, speed_ci, c.speed_samples);
    out.summary = json!({
        "upper": upper, "lower": lower.value, "lower_ci": lower.ci_halfwidth,
        "speed": speed, "speed_ci": speed_ci, "law": law_id(&c.law),
    });

    if c.law == LawFamily::Srw {
        // |X_t| is a birth-death chain with drift (2d-1)/(2d) - 1/(2d) off the root
        let drift = (c.d as f64 - 1.0) / c.d as f64;
        let growth = (sphere_size(c.d, 11) as f64 / sphere_size(c.d, 10) as f64).ln();
        let target = drift * growth;
        out.row("target", "speed*log_growth", target, 0.0, 0);
        out.check(
            "speed",
            (speed - drift).abs() <= 0.005,
            format!("mean |X_{}|/{} = {speed:.5} ± {speed_ci:.5}, drift {drift:.5}, tolerance 0.005", c.speed_t, c.speed_t),
        );
        let contains = lower.value - lower.ci_halfwidth <= target && target <= upper;
        out.check(
            "bracket contains target",
            contains,
            format!("{:.4} ± {:.4} <= {target:.4} <= {upper:.4}", lower.value, lower.ci_halfwidth),
        );
        let slack = (upper - lower.value) / target;
        out.check(
            "bracket slack",
            contains && slack <= c.slack,
            format!(
                "(δ_{} - lower) / target = {:.1}% (upper {:+.1}%, lower {:+.1}%), allowed {:.1}%",
                c.t,
                100.0 * slack,
                100.0 * (upper - target) / target,
                100.0 * (lower.value - target) / target,
                100.0 * c.slack
            ),
        );
        out.note(
            "one-step prefix information",
            (kv.value - target).abs() <= kv.ci_halfwidth.max(0.01 * target),
            format!("I(X_1; pref_{}(X_T)) = {:.4} ± {:.4} vs {target:.4}", c.r, kv.value, kv.ci_halfwidth),
        );
        out.summary["target"] = json!(target);
        out.summary["slack"] = json!(slack);
    }
    Ok(out)
}

fn far_vertex<O: GraphOracle + ?Sized>(oracle: &O, min_len: usize, max_len: usize, seed: u64, stream: u64) -> Result<VertexAddr> {
    let mut rng = stream_rng(seed, stream);
    let len = rng.random_range(min_len..=max_len);
    let mut v = oracle.root();
    for _ in 0..len {
        let i = rng.random_range(0..2 * oracle.rank());
        let x = if i < oracle.rank() { Letter::gen(i + 1) } else { Letter::gen_inv(i - oracle.rank() + 1) };
        oracle.step(&mut v, x)?;
    }
    Ok(v)
}

pub fn glue_verify(c: &GlueVerifyConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("glue-verify", seed);
    let refs = ReferenceSet::for_glued(c.d, c.r)?;
    let mut summary = Vec::new();
    for &n in &c.n_values {
        let g = Glued::new(n, c.d)?;
        let window: Vec<VertexAddr> = bfs_ball(&g, &g.root(), n + 3, BFS_CAP)?.into_iter().map(|x| x.0).collect();
        let proper = verify_properness(&g, &window);
        out.row("properness_window", n, window.len() as f64, 0.0, window.len());
        out.check(
            &format!("properness n={n}"),
            proper.passed(),
            format!("{} vertices of the radius-{} ball, {} defects", window.len(), n + 3, proper.violations.len()),
        );

        let rad = verify_rad(&g, n)?;
        let size = bfs_ball(&g, &g.root(), n, BFS_CAP)?.len();
        let expected = ball_size(c.d, n);
        out.row("ball_size", n, size as f64, 0.0, 0);
        out.check(&format!("rad n={n}"), rad && size as u128 == expected, format!("ball of radius {n} has {size} vertices, free ball {expected}"));

        let big_r = n + 2;
        let mut report = LocalityReport::default();
        let mut stream = 0u64;
        let batch = c.samples.max(1);
        while report.checked < c.samples && stream < 50 * batch as u64 {
            let vs: Vec<VertexAddr> = (stream..stream + batch as u64)
                .into_par_iter()
                .map(|i| far_vertex(&g, big_r + 1, 20 * big_r, seed, ((n as u64) << 40) | i))
                .collect::<Result<_>>()?;
            stream += batch as u64;
            let part = verify_locality(&g, c.r, big_r, &refs, &vs)?;
            report.checked += part.checked;
            report.excluded += part.excluded;
            report.violation_count += part.violation_count;
            for (k, v) in part.matched {
                *report.matched.entry(k).or_default() += v;
            }
            report.violations.extend(part.violations);
        }
        out.row("locality_checked", format!("n={n};r={};R={big_r}", c.r), report.checked as f64, 0.0, report.checked);
        out.row("locality_violations", format!("n={n};r={};R={big_r}", c.r), report.violation_count as f64, 0.0, report.checked);
        out.check(
            &format!("locality n={n}"),
            report.passed() && report.checked >= c.samples,
            format!(
                "{} far vertices (R={big_r}), {} violations, classes {:?}{}",
                report.checked,
                report.violation_count,
                report.matched,
                report.violations.first().map(|v| format!(", first {} {}", v.0, v.1)).unwrap_or_default()
            ),
        );
        summary.push(json!({"n": n, "proper": proper.passed(), "rad": rad, "ball": size,
            "locality_checked": report.checked, "locality_violations": report.violation_count}));
    }
    out.summary = json!({ "depths": summary });
    Ok(out)
}

pub fn irs_sweep(c: &IrsSweepConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("irs-sweep", seed);
    let g = Glued::new(c.n, c.d)?;
    let law = StepLaw::new(c.law, c.d)?;
    let rep = irs_entropy_sweep(&g, &law, c.window_radius, &c.p, c.t, c.walk_samples, c.core_samples, seed, c.window_cap)?;
    for row in &rep.rows {
        out.row("h", row.p, row.h, row.ci, c.core_samples);
    }
    let (rate, rate_ci) = rep.walk_rate();
    out.row("walk_rate", c.t, rate, rate_ci, c.walk_samples);
    let mut table = Table::new(&["p", "h", "ci", "empty_draws", "mean_roots", "mean_classes"]);
    for r in &rep.rows {
        table.push(vec![
            r.p.to_string(),
            r.h.to_string(),
            r.ci.to_string(),
            r.empty_draws.to_string(),
            r.mean_roots.to_string(),
            r.mean_classes.to_string(),
        ]);
    }
    out.artifact("sweep.csv", table.to_csv()?);

    if let Some(zero) = rep.rows.iter().find(|r| r.p == 0.0) {
        out.check("h(0) = 0", zero.h == 0.0, format!("ĥ(0) = {}", zero.h));
    }
    out.check(
        "refinement monotone",
        rep.refinement_violations == 0,
        format!("{} of {} draws lost entropy when roots were added", rep.refinement_violations, c.core_samples),
    );
    let top = rep.rows.last().expect("non-empty grid");
    out.check(
        "h(1) <= h(F)",
        top.h <= rate + rate_ci,
        format!("ĥ({}) = {:.5} vs H(X_{})/{} = {:.5} ± {:.5} on the same walks", top.p, top.h, c.t, c.t, rate, rate_ci),
    );
    let mut summary = json!({
        "window_size": rep.window_size, "distinct_columns": rep.distinct_columns,
        "distinct_words": rep.distinct_words, "walk_rate": rate, "h_top": top.h,
    });
    if let Ok(h) = exact_convolution_entropy(&law, c.t, DEFAULT_SUPPORT_CAP) {
        let delta = h[c.t] - h[c.t - 1];
        out.row("delta", c.t, delta, 0.0, 0);
        out.note(
            "h(1) vs δ_t",
            top.h <= delta,
            format!("ĥ({}) = {:.5}, δ_{} = {delta:.5} (a finite-t rate and an increment are not ordered)", top.p, top.h, c.t),
        );
        summary["delta"] = json!(delta);
    }
    out.summary = summary;
    Ok(out)
}

/// `count` words of `N` spread over the sorted ball, or the configured list.
fn norm_words(c: &NormCountConfig) -> Result<Vec<ReducedWord>> {
    if !c.words.is_empty() {
        return c.words.iter().map(|s| ReducedWord::parse(s, c.d)).collect();
    }
    let mut pool: Vec<ReducedWord> = ball(c.d, c.max_len, BFS_CAP)?
        .into_iter()
        .filter(|w| !w.is_identity() && nil_project(w, c.d).is_identity())
        .collect();
    pool.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    if pool.len() < c.count {
        return Err(Error::Domain(format!("only {} words of N in the ball of radius {}", pool.len(), c.max_len)));
    }
    Ok((0..c.count).map(|i| pool[i * pool.len() / c.count].clone()).collect())
}

pub fn norm_count(c: &NormCountConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("norm-count", seed);
    let g = Glued::new(c.n, c.d)?;
    let words = norm_words(c)?;
    let window = bfs_ball(&g, &g.root(), c.window_radius, c.window_cap)?;
    let norms: Vec<NormCount> =
        words.par_iter().map(|w| norm_on_window(&g, w, &window, c.window_radius, c.delta)).collect::<Result<_>>()?;
    let mut table = Table::new(&["word", "R", "count", "inner_count", "stabilized", "certified"]);
    for nc in &norms {
        table.push(vec![
            nc.word.clone(),
            nc.radius.to_string(),
            nc.count.to_string(),
            nc.inner_count.to_string(),
            nc.stabilized.to_string(),
            nc.certified.to_string(),
        ]);
        out.row("norm", &nc.word, nc.count as f64, 0.0, window.len());
    }
    out.artifact("norm_count.csv", table.to_csv()?);
    let unstable: Vec<&str> = norms.iter().filter(|n| !n.stabilized).map(|n| n.word.as_str()).collect();
    out.check("words stabilized", unstable.is_empty(), format!("{} of {} words stabilized at R={}", norms.len() - unstable.len(), norms.len(), c.window_radius));

    let vertices: Vec<VertexAddr> = window.into_iter().map(|x| x.0).collect();
    let mut p_values = c.p.clone();
    if c.calibrated_p {
        let mut counts: Vec<usize> = norms.iter().map(|n| n.count).collect();
        counts.sort_unstable();
        if let Some(&median) = counts.get(counts.len() / 2).filter(|&&m| m > 0) {
            p_values.push(1.0 / median as f64);
        }
    }
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut marginal = Table::new(&["word", "p", "norm", "expected", "empirical", "sigma", "z"]);
    let mut pairs = 0;
    for chunk_start in (0..words.len()).step_by(64) {
        let chunk = &words[chunk_start..(chunk_start + 64).min(words.len())];
        let moved = MovedTable::build(&g, &vertices, chunk)?;
        for (pi, &p) in p_values.iter().enumerate() {
            let hits: Vec<u64> = (0..c.draws as u64)
                .into_par_iter()
                .map(|j| moved.draw_contains(p, &mut stream_rng(seed, ((pi as u64) << 32) | (chunk_start as u64) << 48 | j)))
                .collect();
            for (i, w) in chunk.iter().enumerate() {
                let norm = norms[chunk_start + i].count;
                let events = hits.iter().filter(|&&h| h & (1 << i) != 0).count();
                let expected = (1.0 - p).powi(norm as i32);
                let emp = Proportion::new(events as u64, c.draws as u64);
                let sigma = (expected * (1.0 - expected) / c.draws as f64).sqrt();
                let dev = (emp.estimate - expected).abs();
                let z = if sigma > 0.0 { dev / sigma } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
                worst = worst.max(z);
                pairs += 1;
                if z > 3.0 {
                    failures.push(format!("{} at p={p}: {} vs {expected:.4e}", w.render(c.d), emp.estimate));
                }
                marginal.push(vec![
                    w.render(c.d),
                    p.to_string(),
                    norm.to_string(),
                    expected.to_string(),
                    emp.estimate.to_string(),
                    sigma.to_string(),
                    z.to_string(),
                ]);
                out.row("core_marginal", format!("{};p={p}", w.render(c.d)), emp.estimate, emp.ci_halfwidth, c.draws);
            }
        }
    }
    out.artifact("core_marginal.csv", marginal.to_csv()?);
    let norm_range = (
        norms.iter().map(|n| n.count).min().unwrap_or(0),
        norms.iter().map(|n| n.count).max().unwrap_or(0),
    );
    out.check(
        "core marginal law",
        failures.is_empty(),
        format!(
            "{pairs} (word, p) pairs, p in {:?}, norms {}..{}, max |z| = {worst:.2}{}",
            p_values,
            norm_range.0,
            norm_range.1,
            failures.first().map(|f| format!(", first failure {f}")).unwrap_or_default()
        ),
    );
    out.summary = json!({ "words": norms.len(), "window_size": vertices.len(), "max_z": worst,
        "norm_min": norm_range.0, "norm_max": norm_range.1, "p": p_values });
    Ok(out)
}

pub fn prefix_flip(c: &PrefixFlipConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("prefix-flip", seed);
    let law = StepLaw::new(c.law, c.d)?;
    let mut rates: Vec<(usize, Proportion, Proportion)> = Vec::new();
    let mut summary = Vec::new();
    for &n in &c.n_values {
        let depth = n.checked_pow(3).ok_or_else(|| Error::Input(format!("depth {n}^3 overflows")))?;
        let g = Glued::new(depth, c.d)?;
        let rep = prefix_flip_rate(&g, &law, c.r, n, c.samples, c.horizon, seed ^ n as u64)?;
        let param = format!("n={n};depth={depth};r={}", c.r);
        out.row("differs_at_exit", &param, rep.differs_at_exit.estimate, rep.differs_at_exit.ci_halfwidth, c.samples);
        out.row("dominating", &param, rep.dominating.estimate, rep.dominating.ci_halfwidth, c.samples);
        out.row("changed_after_exit", &param, rep.changed_after_exit.estimate, rep.changed_after_exit.ci_halfwidth, c.samples);
        out.row("excluded", &param, rep.excluded as f64, 0.0, c.samples);
        summary.push(json!({"n": n, "differs": rep.differs_at_exit.events, "dominating": rep.dominating.events,
            "changed": rep.changed_after_exit.events, "kept": rep.differs_at_exit.trials, "excluded": rep.excluded}));
        rates.push((n, rep.differs_at_exit, rep.dominating));
    }
    let non_increasing = |sel: fn(&(usize, Proportion, Proportion)) -> &Proportion| {
        rates.windows(2).all(|w| {
            let (a, b) = (sel(&w[0]), sel(&w[1]));
            b.estimate <= a.estimate + a.ci_halfwidth.hypot(b.ci_halfwidth)
        })
    };
    let fmt = |sel: fn(&(usize, Proportion, Proportion)) -> &Proportion| {
        rates.iter().map(|r| format!("n={}: {}/{}", r.0, sel(r).events, sel(r).trials)).collect::<Vec<_>>().join(", ")
    };
    out.check("prefix flip decreasing", non_increasing(|r| &r.1), format!("pref_r(X_T) ≠ pref_r(K X_T): {}", fmt(|r| &r.1)));
    let strict = rates.windows(2).all(|w| w[1].2.events < w[0].2.events || w[0].2.events == 0);
    // the first event is contained in the second, which is the one that carries the decay at desk scale
    out.check(
        "dominating event decreasing",
        non_increasing(|r| &r.2) && strict,
        format!("|X_T| > depth: {}", fmt(|r| &r.2)),
    );
    out.summary = json!({ "law": law_id(&c.law), "rates": summary });
    Ok(out)
}

pub fn stankov(c: &StankovConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("stankov", seed);
    let g = Glued::new(c.n, c.d)?;
    let mut summary = Vec::new();
    for (i, fam) in c.laws.iter().enumerate() {
        let law = StepLaw::new(*fam, c.d)?;
        let rep = stankov_check(&g, c.a_radius, c.m, &law, c.samples, c.horizon, seed.wrapping_add(i as u64))?;
        let id = law_id(fam);
        out.row("lhs", &id, rep.lhs, rep.lhs_ci, c.samples);
        out.row("rhs", &id, rep.rhs, rep.rhs_ci, c.samples);
        out.check(
            &format!("stankov {id}"),
            rep.holds,
            format!(
                "LHS {:.4e} ± {:.1e} <= RHS {:.4} ± {:.4} (|A| = {}){}",
                rep.lhs,
                rep.lhs_ci,
                rep.rhs,
                rep.rhs_ci,
                rep.a_size,
                rep.warning.as_ref().map(|w| format!("; {w}")).unwrap_or_default()
            ),
        );
        summary.push(json!({"law": id, "lhs": rep.lhs, "rhs": rep.rhs, "holds": rep.holds}));
    }
    out.summary = json!({ "laws": summary, "a_radius": c.a_radius, "m": c.m });
    Ok(out)
}

pub fn green(c: &GreenConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("green", seed);
    let law = StepLaw::new(c.law, c.d)?;
    let free = Free::new(c.d);
    let rs: Vec<usize> = (1..=c.r_max).collect();
    let prof = visit_count_profile(&law, &free, &rs, c.samples, c.horizon, seed)?;
    for &(r, m, ci) in &prof.rows {
        out.row("visits", r, m, ci, c.samples);
    }
    out.row("exponent", format!("r=1..{}", c.r_max), prof.exponent, 0.0, c.samples);
    out.check(
        "visit-count exponent",
        prof.exponent <= c.exponent_bound,
        format!("fitted exponent {:.3} <= {}, tail share {:.4}", prof.exponent, c.exponent_bound, prof.tail_share),
    );
    let g = Glued::new(c.n, c.d)?;
    let root = g.root();
    let est = green_estimate(&g, &root, |v: &VertexAddr| *v == root, 0, &law, c.samples, c.horizon, seed ^ 1)?;
    out.row("green_root", format!("glued n={}", c.n), est.mean, est.ci, c.samples);
    out.note(
        "green stabilized",
        est.stabilized,
        format!("G(root, root) = {:.4} ± {:.4}, tail share {:.4}", est.mean, est.ci, est.tail_share),
    );
    out.summary = json!({ "exponent": prof.exponent, "green_root": est.mean, "green_stabilized": est.stabilized });
    Ok(out)
}

pub fn sl2_hitting(c: &Sl2HittingConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("sl2-hitting", seed);
    let table = CosetTable::build()?;
    out.row("coset_index", "sanov", table.index as f64, 0.0, 0);
    out.check(
        "coset enumeration",
        table.index == 12 && table.is_transitive(),
        format!("index {}, transitive {}", table.index, table.is_transitive()),
    );
    let law = StepLaw::srw(2);
    let rep = kac_check(&table, &law, c.samples, c.step_cap, seed)?;
    out.row("return_time", "E[T]", rep.mean_time, rep.ci, c.samples);
    out.row("tail_slope", "log Pr[T>t]", rep.tail_slope, 0.0, c.samples);
    out.row("fourth_moment", "half", rep.fourth_moment_half, 0.0, c.samples / 2);
    out.row("fourth_moment", "all", rep.fourth_moment, 0.0, c.samples);
    out.row("symmetry_max_z", format!("top={}", c.top), rep.symmetry_max_z, 0.0, c.samples);
    let target = table.index as f64;
    out.check(
        "kac",
        (rep.mean_time - target).abs() <= c.tolerance * target && rep.censored == 0,
        format!("E[T] = {:.4} ± {:.4} vs {target}, censored {}", rep.mean_time, rep.ci, rep.censored),
    );
    let (z, pairs) = crate::sl2::symmetry_z(&rep.atoms, c.top);
    out.check("mu_F symmetric", z <= 3.0, format!("max |z| = {z:.2} over {pairs} heaviest atoms"));
    out.check("witnesses", rep.witness_failures == 0, format!("{} returns without a Sanov witness", rep.witness_failures));
    out.artifact("mu_f.csv", mu_f_csv(&rep.atoms));
    let mut surv = Table::new(&["t", "survival"]);
    for (t, s) in &rep.survival {
        surv.push(vec![t.to_string(), s.to_string()]);
    }
    out.artifact("survival.csv", surv.to_csv()?);
    out.summary = json!({ "index": table.index, "mean_time": rep.mean_time, "ci": rep.ci,
        "symmetry_max_z": z, "atoms": rep.atoms.len() });
    Ok(out)
}

pub fn abramov(c: &AbramovConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("abramov", seed);
    let table = CosetTable::build()?;
    let law = StepLaw::srw(2);
    let rep = abramov_check(&table, &law, c.k, c.samples, c.resamples, seed)?;
    let idx = table.index as f64;
    out.row("h_g", format!("k={}", c.k), rep.h_g, rep.h_g_ci, c.samples);
    out.row("h_f", format!("k={}", c.k), rep.h_f, rep.h_f_ci, c.samples);
    out.row("ratio", format!("k={}", c.k), rep.ratio, rep.ratio_ci, c.samples);
    for (name, e) in &rep.entropies {
        out.row("entropy", name, e.value, e.ci_halfwidth, c.samples);
    }
    out.check(
        "entropy ratio",
        (rep.ratio - idx).abs() <= c.tolerance * idx,
        format!("ĥ_F/ĥ_G = {:.3} ± {:.3} vs [G:F] = {idx} ± {:.0}%", rep.ratio, rep.ratio_ci, 100.0 * c.tolerance),
    );
    let (tk, tk_ci) = return_time_ratio(&table, &law, c.long_k, c.long_runs, seed ^ 0xab);
    out.row("return_time_ratio", format!("k={}", c.long_k), tk, tk_ci, c.long_runs);
    out.check(
        "T_k / k",
        (tk - idx).abs() <= c.long_tolerance,
        format!("T_{}/{} = {tk:.4} ± {tk_ci:.4} vs {idx} ± {}", c.long_k, c.long_k, c.long_tolerance),
    );
    let quot = finite_quotient_decay(&table, &law, c.q, c.quotient_t, c.quotient_k)?;
    let gi = quot.g_increments();
    let fi = quot.f_increments();
    for (t, x) in gi.iter().enumerate() {
        out.row("quotient_g_delta", format!("q={};t={}", c.q, t + 1), *x, 0.0, 0);
    }
    for (k, x) in fi.iter().enumerate() {
        out.row("quotient_f_delta", format!("q={};k={}", c.q, k + 1), *x, 0.0, 0);
    }
    let h_max = (quot.g_support as f64).ln();
    let near = |h: &[f64]| h.last().is_some_and(|x| (x - h_max).abs() < 0.02);
    let settled = near(&quot.g_entropy) && near(&quot.f_entropy);
    out.note(
        "finite quotient",
        settled,
        format!(
            "SL2(Z/{}) image of order {}: H_G({}) = {:.4}, H_F({}) = {:.4}, log order {h_max:.4}",
            c.q,
            quot.g_support,
            c.quotient_t,
            quot.g_entropy.last().copied().unwrap_or(0.0),
            c.quotient_k,
            quot.f_entropy.last().copied().unwrap_or(0.0)
        ),
    );
    out.summary = json!({ "ratio": rep.ratio, "ratio_ci": rep.ratio_ci, "h_g": rep.h_g, "h_f": rep.h_f,
        "return_time_ratio": tk, "censored": rep.censored });
    Ok(out)
}

pub fn nil_decay(c: &NilDecayConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("nil-decay", seed);
    let law = StepLaw::srw(c.d);
    if c.t_max < 2 || c.free_t < 1 {
        return Err(Error::Input("nil-decay needs t_max >= 2 and free_t >= 1".into()));
    }
    let lam = Lambda::new(c.d);
    let nil = increments(&exact_coset_entropy(&lam, &law, c.t_max, c.support_cap)?);
    for (t, x) in nil.iter().enumerate() {
        out.row("lambda_delta", t + 1, *x, 0.0, 0);
    }
    let (d2, dt) = (nil[1], nil[c.t_max - 1]);
    out.check("nilpotent decay", dt < d2 / 2.0, format!("δ_{} = {dt:.4} < δ_2/2 = {:.4}", c.t_max, d2 / 2.0));
    let free = increments(&exact_convolution_entropy(&law, c.free_t, c.support_cap)?);
    for (t, x) in free.iter().enumerate() {
        out.row("free_delta", t + 1, *x, 0.0, 0);
    }
    let min = free.iter().copied().fold(f64::INFINITY, f64::min);
    out.check(
        "free control",
        min > c.free_floor,
        format!("min δ_t over t <= {} is {min:.4} > {}; δ_{} = {:.4}", c.free_t, c.free_floor, c.free_t, free[c.free_t - 1]),
    );
    out.summary = json!({ "lambda_delta_2": d2, "lambda_delta_last": dt, "free_delta_last": free[c.free_t - 1] });
    Ok(out)
}
