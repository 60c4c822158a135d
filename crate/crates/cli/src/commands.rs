use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rss_core::bounds::{bound_report, chebyshev_check, required_n_single, TheoremConstants};
use rss_core::experiments::{
    estimate_joint_prob, estimate_moments, sweep, verify_appendix_claims, write_summaries_csv, SweepAxis,
    SweepExperiment, TrialSummary,
};
use rss_core::nne::{
    find_genotype, forward, genotype_tensor, output_deviation_bound, required_genes, sample_genes, NetTensor,
};
use rss_core::sampler::{
    quantize, read_binary, read_csv, sample_affine_normal, sample_containment, sample_standard_normal, write_binary,
    write_csv, ContainmentSpec, DistributionTag,
};
use rss_core::search::{cover_grid, search, write_coverage_csv, CoverageOptions};
use rss_core::walks::{run_walk, write_trajectory_csv, DEFAULT_FRONTIER_BUDGET};
use rss_core::{build_family, derive_seed, Engine, ProblemParams, SampleMatrix};

use crate::config::{parse_params, CliError, RunConfig};
use crate::output::Artifact;
use crate::Command;

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> rss_core::Result<()>) -> Result<String, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))
}

fn artifact<P: Serialize, R: Serialize>(
    params: &P,
    result: &R,
    csv: String,
    violation: bool,
) -> Result<Artifact, CliError> {
    Ok(Artifact {
        params: to_value(params)?,
        result: to_value(result)?,
        csv,
        raw: None,
        violation,
    })
}

/// `(d, n, ε, α)` as written in a config; validated after parsing so that a
/// bad value is a parameter error rather than a config error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub d: usize,
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
}

impl RawParams {
    fn validate(&self) -> Result<ProblemParams, CliError> {
        Ok(ProblemParams::new(self.d, self.n, self.epsilon, self.alpha)?)
    }
}

/// Where a command gets its sample matrix: a file (binary, or CSV when the
/// extension is `.csv`), inline rows, or a fresh standard-normal draw.
fn load_matrix(
    matrix: &Option<PathBuf>,
    rows: &Option<Vec<Vec<f64>>>,
    generate: Option<(usize, usize, u64)>,
) -> Result<SampleMatrix, CliError> {
    match (matrix, rows) {
        (Some(_), Some(_)) => Err(CliError::Config("params: give `matrix` or `rows`, not both".into())),
        (Some(path), None) => {
            let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
            let file = std::io::BufReader::new(std::fs::File::open(path).map_err(io)?);
            let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            Ok(if is_csv { read_csv(file)? } else { read_binary(file)? })
        }
        (None, Some(rows)) => Ok(SampleMatrix::from_rows(rows, 0, DistributionTag::Imported)?),
        (None, None) => match generate {
            Some((n, d, seed)) => Ok(sample_standard_normal(n, d, seed)?),
            None => Err(CliError::Config("params: one of `matrix` or `rows` is required".into())),
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SampleParams {
    n: usize,
    d: usize,
    /// Affine Gaussian `mean + σ·G`; both or neither.
    mean: Option<Vec<f64>>,
    sigma: Option<f64>,
    containment: Option<ContainmentSpec>,
    quantize_delta: Option<f64>,
    /// Emit the sampler's binary format instead of CSV/JSON.
    binary: bool,
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            n: 20,
            d: 1,
            mean: None,
            sigma: None,
            containment: None,
            quantize_delta: None,
            binary: false,
        }
    }
}

fn cmd_sample(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p: SampleParams = parse_params(&cfg.params)?;
    let mut m = match (&p.containment, &p.mean, p.sigma) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(CliError::Config("params: `containment` excludes `mean`/`sigma`".into()))
        }
        (Some(spec), None, None) => sample_containment(p.n, p.d, spec, cfg.seed)?,
        (None, None, None) => sample_standard_normal(p.n, p.d, cfg.seed)?,
        (None, mean, sigma) => {
            let mean = mean.clone().unwrap_or_else(|| vec![0.0; p.d]);
            sample_affine_normal(p.n, p.d, &mean, sigma.unwrap_or(1.0), cfg.seed)?
        }
    };
    if let Some(delta) = p.quantize_delta {
        m = quantize(&m, delta)?;
    }
    let mut a = artifact(&p, &m, csv_string(|b| write_csv(&m, b))?, false)?;
    if p.binary {
        let mut raw = Vec::new();
        write_binary(&m, &mut raw)?;
        a.raw = Some(raw);
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ConstantsChoice {
    #[default]
    UnitCube,
    Generalized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BoundsParams {
    d: usize,
    alpha: f64,
    epsilon: f64,
    /// Defaults to the single-target sample size.
    n: Option<usize>,
    log2_family_size: f64,
    constants: ConstantsChoice,
}

impl Default for BoundsParams {
    fn default() -> Self {
        Self {
            d: 1,
            alpha: 1.0 / 6.0,
            epsilon: 0.5,
            n: None,
            log2_family_size: 0.0,
            constants: ConstantsChoice::UnitCube,
        }
    }
}

fn cmd_bounds(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let mut p: BoundsParams = parse_params(&cfg.params)?;
    if p.n.is_none() {
        let r = required_n_single(p.d, p.alpha, p.epsilon);
        if !(r.is_finite() && r >= 1.0) {
            return Err(CliError::Param(format!(
                "invalid `n`: default sample size {r} is not usable"
            )));
        }
        p.n = Some(r.ceil() as usize);
    }
    let params = ProblemParams::new(p.d, p.n.unwrap_or(1), p.epsilon, p.alpha)?;
    let constants = match p.constants {
        ConstantsChoice::UnitCube => TheoremConstants::unit_cube(),
        ConstantsChoice::Generalized => TheoremConstants::generalized(),
    };
    let report = bound_report(&params, p.log2_family_size, constants);
    let cheb = chebyshev_check(&params, p.log2_family_size);
    let mut csv = String::from("name,value,scale\n");
    for (k, e) in &report.entries {
        let scale = to_value(&e.scale)?;
        csv.push_str(&format!("{k},{},{}\n", e.value, scale.as_str().unwrap_or_default()));
    }
    let result = json!({ "report": report, "chebyshev": cheb });
    artifact(&p, &result, csv, false)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveParams {
    #[serde(default)]
    matrix: Option<PathBuf>,
    #[serde(default)]
    rows: Option<Vec<Vec<f64>>>,
    z: Vec<f64>,
    epsilon: f64,
    #[serde(default = "default_engine")]
    engine: Engine,
    #[serde(default)]
    cardinality: Option<usize>,
}

fn default_engine() -> Engine {
    Engine::MeetInMiddle
}

fn subset_field(s: &[usize]) -> String {
    s.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn cmd_solve(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p: SolveParams = parse_params(&cfg.params)?;
    let m = load_matrix(&p.matrix, &p.rows, None)?;
    let r = search(p.engine, &m, &p.z, p.epsilon, p.cardinality)?;
    let achieved = r.achieved.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    let csv = format!(
        "found,error,subset,achieved,candidates_examined\n{},{},{},{},{}\n",
        r.found,
        r.error,
        subset_field(&r.subset),
        achieved,
        r.stats.candidates_examined
    );
    artifact(&p, &r, csv, false)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverParams {
    #[serde(default)]
    matrix: Option<PathBuf>,
    #[serde(default)]
    rows: Option<Vec<Vec<f64>>>,
    /// Shape of a generated standard-normal matrix when no matrix is given.
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    d: Option<usize>,
    epsilon: f64,
    #[serde(default)]
    options: CoverageOptions,
}

fn cmd_cover(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p: CoverParams = parse_params(&cfg.params)?;
    let generate = match (p.n, p.d) {
        (Some(n), Some(d)) => Some((n, d, cfg.seed)),
        (None, None) => None,
        _ => return Err(CliError::Config("params: `n` and `d` go together".into())),
    };
    let m = load_matrix(&p.matrix, &p.rows, generate)?;
    let report = cover_grid(&m, p.epsilon, &p.options)?;
    let csv = csv_string(|b| write_coverage_csv(&report, b))?;
    artifact(&p, &report, csv, false)
}

fn summaries(params: &impl Serialize, rows: Vec<TrialSummary>) -> Result<Artifact, CliError> {
    let violation = rows.iter().any(|r| r.verdict.is_violation());
    let csv = csv_string(|b| write_summaries_csv(&rows, b))?;
    artifact(params, &rows, csv, violation)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MomentsParams {
    params: RawParams,
    family_size: usize,
    max_attempts: usize,
    z: Option<Vec<f64>>,
    trials: u64,
}

impl Default for MomentsParams {
    fn default() -> Self {
        Self {
            params: RawParams {
                d: 1,
                n: 729,
                epsilon: 0.5,
                alpha: 1.0 / 6.0,
            },
            family_size: 64,
            max_attempts: 1000,
            z: None,
            trials: 100_000,
        }
    }
}

fn cmd_moments(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p: MomentsParams = parse_params(&cfg.params)?;
    let params = p.params.validate()?;
    let fam = build_family(
        params.n(),
        params.alpha(),
        p.family_size,
        derive_seed(cfg.seed, 0),
        p.max_attempts,
    )?;
    let z = p.z.clone().unwrap_or_else(|| vec![0.0; params.d()]);
    let (mean, var) = estimate_moments(&params, &fam, &z, p.trials, derive_seed(cfg.seed, 1))?;
    summaries(&p, vec![mean, var])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct JointParams {
    params: RawParams,
    /// Defaults to the family intersection cap `floor(2α²n)`.
    intersection: Option<usize>,
    z: Option<Vec<f64>>,
    trials: u64,
}

impl Default for JointParams {
    fn default() -> Self {
        Self {
            params: MomentsParams::default().params,
            intersection: None,
            z: None,
            trials: 1_000_000,
        }
    }
}

fn cmd_joint(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let mut p: JointParams = parse_params(&cfg.params)?;
    let params = p.params.validate()?;
    let k = *p.intersection.get_or_insert(params.intersection_cap());
    let z = p.z.clone().unwrap_or_else(|| vec![0.0; params.d()]);
    let s = estimate_joint_prob(&params, k, &z, p.trials, cfg.seed)?;
    summaries(&p, vec![s])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepParams {
    axis: SweepAxis,
    grid: Vec<f64>,
    base: RawParams,
    #[serde(default = "default_sweep_experiment")]
    experiment: SweepExperiment,
    #[serde(default = "default_sweep_trials")]
    trials: u64,
}

fn default_sweep_experiment() -> SweepExperiment {
    SweepExperiment::SingleSubset { z: None }
}

fn default_sweep_trials() -> u64 {
    10_000
}

fn cmd_sweep(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p: SweepParams = parse_params(&cfg.params)?;
    let base = p.base.validate()?;
    let rows = sweep(p.axis, &p.grid, &base, &p.experiment, p.trials, cfg.seed)?;
    summaries(&p, rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ClaimsParams {
    draws: u64,
    quadrature_points: usize,
}

impl Default for ClaimsParams {
    fn default() -> Self {
        Self {
            draws: 10_000,
            quadrature_points: 64,
        }
    }
}

fn cmd_claims(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p: ClaimsParams = parse_params(&cfg.params)?;
    let reports = verify_appendix_claims(p.draws, cfg.seed, p.quadrature_points)?;
    let mut csv = String::from("claim_id,draws,violations,worst_margin\n");
    for r in &reports {
        let id = to_value(&r.claim_id)?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            id.as_str().unwrap_or_default(),
            r.draws,
            r.violations,
            r.worst_margin
        ));
    }
    let violation = reports.iter().any(|r| r.violations > 0);
    artifact(&p, &reports, csv, violation)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NneParams {
    l: usize,
    d: usize,
    n: usize,
    epsilon: f64,
    engine: Engine,
    /// Target weights as `l` square matrices. Defaults to a random network
    /// with entries `0.5·tanh(g)`, `g` standard normal.
    target: Option<Vec<Vec<Vec<f64>>>>,
    inputs: Vec<Vec<f64>>,
    sample_constant: f64,
}

impl Default for NneParams {
    fn default() -> Self {
        Self {
            l: 1,
            d: 2,
            n: 20,
            epsilon: 0.1,
            engine: Engine::MeetInMiddle,
            target: None,
            inputs: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, -0.5]],
            sample_constant: TheoremConstants::unit_cube().sample,
        }
    }
}

fn cmd_nne(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p: NneParams = parse_params(&cfg.params)?;
    let bank = sample_genes(p.n, p.l, p.d, derive_seed(cfg.seed, 0))?;
    let target = match &p.target {
        Some(layers) => NetTensor::from_layers(layers)?,
        None => {
            let g = sample_standard_normal(1, p.l * p.d * p.d, derive_seed(cfg.seed, 1))?;
            NetTensor::new(p.l, p.d, g.values().iter().map(|v| 0.5 * v.tanh()).collect())?
        }
    };
    let found = find_genotype(&bank, &target, p.epsilon, p.engine)?;
    let approx = genotype_tensor(&bank, &found.genotype)?;
    let mut csv = String::from("input,target_output,approx_output,deviation,deviation_bound\n");
    let mut comparisons = Vec::with_capacity(p.inputs.len());
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    for y in &p.inputs {
        let f = forward(&target, y)?;
        let g = forward(&approx, y)?;
        let dev = rss_core::linf_distance(&f, &g)?;
        let bound = output_deviation_bound(&target, &approx, y)?;
        csv.push_str(&format!("{},{},{},{dev},{bound}\n", join(y), join(&f), join(&g)));
        comparisons.push(json!({
            "input": y,
            "target_output": f,
            "approx_output": g,
            "deviation": dev,
            "deviation_bound": bound,
        }));
    }
    let result = json!({
        "found": found.found,
        "genotype": found.genotype.active(),
        "max_entry_error": found.max_entry_error,
        "target_in_range": found.target_in_range,
        "required_genes": required_genes(p.l, p.d, p.epsilon, p.sample_constant),
        "target": target,
        "approximation": approx,
        "comparisons": comparisons,
    });
    artifact(&p, &result, csv, false)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct WalkParams {
    d: usize,
    steps: usize,
    /// 0 tracks the frontier exactly.
    dedup_cell: f64,
    targets: Vec<Vec<f64>>,
    budget: usize,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            d: 1,
            steps: 16,
            dedup_cell: 0.0,
            targets: vec![vec![0.5]],
            budget: DEFAULT_FRONTIER_BUDGET,
        }
    }
}

fn cmd_walk(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let p: WalkParams = parse_params(&cfg.params)?;
    let traj = run_walk(p.d, p.steps, cfg.seed, p.dedup_cell, &p.targets, p.budget)?;
    let csv = csv_string(|b| write_trajectory_csv(&traj, b))?;
    artifact(&p, &traj, csv, false)
}

pub fn dispatch(cfg: &RunConfig) -> Result<Artifact, CliError> {
    match cfg.kind {
        Command::Sample => cmd_sample(cfg),
        Command::Bounds => cmd_bounds(cfg),
        Command::Solve => cmd_solve(cfg),
        Command::Cover => cmd_cover(cfg),
        Command::Moments => cmd_moments(cfg),
        Command::Joint => cmd_joint(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Claims => cmd_claims(cfg),
        Command::NneDemo => cmd_nne(cfg),
        Command::Walk => cmd_walk(cfg),
    }
}
