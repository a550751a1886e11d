//! Seeded experiment runner behind the `fakgr` CLI.
//!
//! Configuration is a TOML document; every section and key is optional and
//! unknown keys are rejected:
//!
//! ```toml
//! [scenario]
//! n_antennas = 4
//! region = { x = [0.0, 20.0], y = [0.0, 20.0] }
//!
//! [experiment]
//! methods = ["joint_pso", "ao", "upa", "random"]
//! seeds = [1, 2, 3, 4, 5]
//! sweep = [4, 6, 8, 10]
//! covariance = "analytic"
//!
//! [pso]
//! n_particles = 50
//!
//! [ao]
//! n_rounds = 1
//! pgd.max_steps = 100
//! ```
//!
//! For each seed the scenario seed is replaced by that seed, the path set is
//! drawn once, and every method runs against the same environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ao::{run_ao, AoConfig};
use crate::baselines::{run_random_baseline, run_upa_baseline, upa_layout};
use crate::channel::{distance, sample_paths, CovarianceMode, CovarianceModel, Layout, Scenario};
use crate::constraints::PenaltyConfig;
use crate::error::{Error, Result};
use crate::pso::run_pso;
use crate::rng::Streams;
use crate::swarm::PsoConfig;
use crate::trace::{csv_header, fmt_float, write_file, SolutionSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    JointPso,
    Ao,
    Upa,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::JointPso, Method::Ao, Method::Upa, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::JointPso => "joint_pso",
            Method::Ao => "ao",
            Method::Upa => "upa",
            Method::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub sweep: Option<Vec<usize>>,
    pub covariance: CovarianceMode,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            sweep: Some(vec![4, 6, 8, 10]),
            covariance: CovarianceMode::Analytic,
            output_dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySection {
    pub coefficient: f64,
}

impl Default for PenaltySection {
    fn default() -> Self {
        Self { coefficient: PenaltyConfig::default().coefficient }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomSection {
    /// Defaults to the joint swarm's evaluation budget `M * T_max`.
    pub n_trials: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub experiment: ExperimentSection,
    pub pso: PsoConfig,
    pub ao: AoConfig,
    pub penalty: PenaltySection,
    pub random: RandomSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.pso.validate()?;
        self.ao.pgd.validate()?;
        self.ao.pso.validate()?;
        let e = &self.experiment;
        if e.methods.is_empty() {
            return Err(Error::InvalidConfig("method set is empty".into()));
        }
        if e.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed list is empty".into()));
        }
        if let Some(sweep) = &e.sweep {
            if sweep.contains(&0) {
                return Err(Error::InvalidConfig("sweep values must be >= 1".into()));
            }
        }
        if !(self.penalty.coefficient >= 0.0) {
            return Err(Error::InvalidConfig("penalty coefficient must be >= 0".into()));
        }
        if self.random.n_trials == Some(0) {
            return Err(Error::InvalidConfig("random.n_trials must be >= 1".into()));
        }
        Ok(())
    }

    pub fn penalty(&self) -> PenaltyConfig {
        PenaltyConfig { coefficient: self.penalty.coefficient, d_min: self.scenario.d_min }
    }

    pub fn random_trials(&self) -> usize {
        self.random.n_trials.unwrap_or(self.pso.n_particles * self.pso.max_iters.max(1))
    }

    /// Resolved configuration as JSON, for embedding in output files.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is serializable")
    }

    fn scenario_for(&self, seed: u64) -> Scenario {
        Scenario { seed, ..self.scenario.clone() }
    }
}

/// Final numbers of one (method, seed) run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub method: Method,
    pub seed: u64,
    pub n_paths: usize,
    pub solution: SolutionSummary,
    /// Wall-clock of the optimizer itself.
    pub elapsed_ms: f64,
}

/// Runs one method for one seed and writes its trace files into `dir`.
pub fn run_method(cfg: &ExperimentConfig, method: Method, scenario: &Scenario, dir: &Path, stem: &str) -> Result<RunOutcome> {
    let seed = scenario.seed;
    let paths = sample_paths(scenario);
    let model = CovarianceModel::new(scenario, paths.clone(), cfg.experiment.covariance);
    let streams = Streams::new(seed).fork(method.name(), 0);
    let penalty = cfg.penalty();
    let header = csv_header(&json!({
        "method": method.name(),
        "seed": seed,
        "n_paths": scenario.n_paths,
        "config": cfg.to_json(),
    }));

    let (solution, elapsed_ms) = match method {
        Method::JointPso | Method::Upa => {
            let trace = if method == Method::JointPso {
                run_pso(scenario, &model, &cfg.pso, penalty, streams)?
            } else {
                run_upa_baseline(scenario, &model, &cfg.pso, penalty, streams)?
            };
            write_file(&dir.join(format!("{stem}.csv")), &trace.to_csv(&header))?;
            (SolutionSummary::from(&trace), trace.elapsed_ms())
        }
        Method::Random => {
            let run = run_random_baseline(scenario, &model, cfg.random_trials(), streams)?;
            write_file(&dir.join(format!("{stem}.csv")), &run.trace.to_csv(&header))?;
            let mut per_trial = header.clone();
            per_trial.push_str("trial,kgr\n");
            for (i, v) in run.per_trial.iter().enumerate() {
                per_trial.push_str(&format!("{i},{}\n", fmt_float(*v)));
            }
            write_file(&dir.join(format!("{stem}_trials.csv")), &per_trial)?;
            (SolutionSummary::from(&run.trace), run.trace.elapsed_ms())
        }
        Method::Ao => {
            let res = run_ao(scenario, &model, &cfg.ao, penalty, streams)?;
            write_file(&dir.join(format!("{stem}.csv")), &res.to_csv(&header))?;
            let summary = SolutionSummary {
                best_kgr: res.best.raw_kgr,
                best_fitness: res.best.fitness,
                penalty: res.best.penalty,
                precoder: res.best_precoder.to_parts(),
                layout: res.best_layout.clone(),
            };
            (summary, res.elapsed_ms)
        }
    };

    let outcome = RunOutcome { method, seed, n_paths: scenario.n_paths, solution, elapsed_ms };
    let doc = json!({
        "config": cfg.to_json(),
        "seed": seed,
        "paths": paths,
        "outcome": outcome,
    });
    write_file(&dir.join(format!("{stem}.json")), &serde_json::to_string_pretty(&doc)?)?;
    Ok(outcome)
}

/// Median and spread of a set of converged rates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Stats { n, median, min: v.first().copied().unwrap_or(f64::NAN), max: v.last().copied().unwrap_or(f64::NAN) }
    }
}

#[derive(Debug, Clone)]
pub struct CompareSummary {
    pub runs: Vec<RunOutcome>,
    pub per_method: BTreeMap<Method, Stats>,
    /// `median(method) / median(upa) - 1` for the two fluid-antenna optimizers.
    pub improvement_over_upa: BTreeMap<Method, f64>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn stats_csv(header: &str, key: &str, rows: &[(String, Stats)]) -> String {
    let mut out = String::from(header);
    out.push_str(&format!("{key},n_seeds,median_kgr,min_kgr,max_kgr\n"));
    for (k, s) in rows {
        out.push_str(&format!("{k},{},{},{},{}\n", s.n, fmt_float(s.median), fmt_float(s.min), fmt_float(s.max)));
    }
    out
}

/// Every configured method on every seed, plus cross-seed summaries.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<CompareSummary> {
    cfg.validate()?;
    let dir = cfg.experiment.output_dir.join("compare");
    ensure_dir(&dir)?;
    let jobs: Vec<(Method, u64)> =
        cfg.experiment.methods.iter().flat_map(|&m| cfg.experiment.seeds.iter().map(move |&s| (m, s))).collect();
    let runs: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(m, seed)| run_method(cfg, m, &cfg.scenario_for(seed), &dir, &format!("{}_seed{seed}", m.name())))
        .collect::<Result<_>>()?;

    let mut per_method = BTreeMap::new();
    for &m in &cfg.experiment.methods {
        let vals: Vec<f64> = runs.iter().filter(|r| r.method == m).map(|r| r.solution.best_kgr).collect();
        per_method.insert(m, Stats::of(&vals));
    }
    let mut improvement_over_upa = BTreeMap::new();
    if let Some(upa) = per_method.get(&Method::Upa) {
        for m in [Method::JointPso, Method::Ao] {
            if let Some(s) = per_method.get(&m) {
                improvement_over_upa.insert(m, s.median / upa.median - 1.0);
            }
        }
    }

    let header = csv_header(&json!({ "seeds": cfg.experiment.seeds, "config": cfg.to_json() }));
    let rows: Vec<(String, Stats)> = per_method.iter().map(|(m, s)| (m.name().to_string(), s.clone())).collect();
    write_file(&dir.join("summary.csv"), &stats_csv(&header, "method", &rows))?;

    let mut per_seed = header.clone();
    per_seed.push_str("method,seed,final_kgr,final_fitness,penalty\n");
    for r in &runs {
        per_seed.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method.name(),
            r.seed,
            fmt_float(r.solution.best_kgr),
            fmt_float(r.solution.best_fitness),
            fmt_float(r.solution.penalty)
        ));
    }
    write_file(&dir.join("per_seed.csv"), &per_seed)?;

    let mut imp = header;
    imp.push_str("method,improvement_over_upa\n");
    for (m, v) in &improvement_over_upa {
        imp.push_str(&format!("{},{}\n", m.name(), fmt_float(*v)));
    }
    write_file(&dir.join("improvement.csv"), &imp)?;

    Ok(CompareSummary { runs, per_method, improvement_over_upa })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodLayout {
    pub positions: Layout,
    /// `|t_opt,n - t_upa,n|` per antenna index.
    pub displacement: Vec<f64>,
    pub kgr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutReport {
    pub seed: u64,
    pub upa: Layout,
    pub methods: BTreeMap<Method, MethodLayout>,
}

/// UPA positions next to the optimized positions of the fluid-antenna
/// optimizers, one JSON file per seed. Methods other than `joint_pso` and
/// `ao` are ignored.
pub fn cmd_layout(cfg: &ExperimentConfig) -> Result<Vec<LayoutReport>> {
    cfg.validate()?;
    let methods: Vec<Method> =
        cfg.experiment.methods.iter().copied().filter(|m| matches!(m, Method::JointPso | Method::Ao)).collect();
    if methods.is_empty() {
        return Err(Error::InvalidConfig("layout needs joint_pso and/or ao in the method set".into()));
    }
    let dir = cfg.experiment.output_dir.join("layout");
    ensure_dir(&dir)?;
    cfg.experiment
        .seeds
        .par_iter()
        .map(|&seed| {
            let scenario = cfg.scenario_for(seed);
            let upa = upa_layout(&scenario)?;
            let mut report = LayoutReport { seed, upa: upa.clone(), methods: BTreeMap::new() };
            for &m in &methods {
                let out = run_method(cfg, m, &scenario, &dir, &format!("{}_seed{seed}", m.name()))?;
                let displacement =
                    out.solution.layout.positions.iter().zip(&upa.positions).map(|(a, b)| distance(*a, *b)).collect();
                report.methods.insert(
                    m,
                    MethodLayout { positions: out.solution.layout.clone(), displacement, kgr: out.solution.best_kgr },
                );
            }
            let doc = json!({ "config": cfg.to_json(), "report": report });
            write_file(&dir.join(format!("layout_seed{seed}.json")), &serde_json::to_string_pretty(&doc)?)?;
            Ok(report)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub runs: Vec<RunOutcome>,
    pub per_paths: BTreeMap<usize, Stats>,
}

/// Joint swarm convergence for each path count in the sweep list.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    cfg.validate()?;
    let sweep = cfg.experiment.sweep.clone().ok_or_else(|| Error::InvalidConfig("sweep list missing".into()))?;
    if sweep.is_empty() {
        return Err(Error::InvalidConfig("sweep list is empty".into()));
    }
    let dir = cfg.experiment.output_dir.join("sweep");
    ensure_dir(&dir)?;
    let jobs: Vec<(usize, u64)> = sweep.iter().flat_map(|&l| cfg.experiment.seeds.iter().map(move |&s| (l, s))).collect();
    let runs: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(l, seed)| {
            let scenario = Scenario { n_paths: l, ..cfg.scenario_for(seed) };
            run_method(cfg, Method::JointPso, &scenario, &dir, &format!("L{l}_seed{seed}"))
        })
        .collect::<Result<_>>()?;

    let mut per_paths = BTreeMap::new();
    for &l in &sweep {
        let vals: Vec<f64> = runs.iter().filter(|r| r.n_paths == l).map(|r| r.solution.best_kgr).collect();
        per_paths.insert(l, Stats::of(&vals));
    }
    let header = csv_header(&json!({ "seeds": cfg.experiment.seeds, "config": cfg.to_json() }));
    let rows: Vec<(String, Stats)> = per_paths.iter().map(|(l, s)| (l.to_string(), s.clone())).collect();
    write_file(&dir.join("sweep_summary.csv"), &stats_csv(&header, "n_paths", &rows))?;
    Ok(SweepSummary { runs, per_paths })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_dotted_keys() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            scenario.n_paths = 6
            scenario.region = { x = [0.0, 10.0], y = [0.0, 10.0] }
            [experiment]
            methods = ["random", "upa"]
            seeds = [7]
            covariance = "monte_carlo"
            [pso]
            n_particles = 12
            [ao]
            n_rounds = 2
            pgd.max_steps = 7
            "#,
        )
        .unwrap();
        assert_eq!(cfg.scenario.n_paths, 6);
        assert_eq!(cfg.scenario.region.x, (0.0, 10.0));
        assert_eq!(cfg.experiment.methods, vec![Method::Random, Method::Upa]);
        assert_eq!(cfg.experiment.covariance, CovarianceMode::MonteCarlo);
        assert_eq!(cfg.pso.n_particles, 12);
        assert_eq!(cfg.ao.n_rounds, 2);
        assert_eq!(cfg.ao.pgd.max_steps, 7);
        assert_eq!(cfg.ao.pso, PsoConfig::layout_phase());
        assert_eq!(cfg.random_trials(), 12 * 200);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(ExperimentConfig::from_toml("[scenario]\nn_antenas = 4\n"), Err(Error::Parse(_))));
        assert!(matches!(ExperimentConfig::from_toml("bogus = 1\n"), Err(Error::Parse(_))));
        assert!(ExperimentConfig::from_toml("[experiment]\nmethods = []\n").is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nseeds = []\n").is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nsweep = [0, 4]\n").is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nmethods = [\"ris\"]\n").is_err());
        assert!(ExperimentConfig::from_toml("[scenario]\nnoise_var = -1.0\n").is_err());
    }

    #[test]
    fn defaults_match_reference_setup() {
        let cfg = ExperimentConfig::default();
        let s = &cfg.scenario;
        assert_eq!((s.n_antennas, s.n_pilots, s.n_paths), (4, 4, 8));
        assert_eq!((s.p_max, s.noise_var), (1.0, 0.1));
        assert_eq!(s.d_min, s.wavelength / 2.0);
        assert_eq!(s.region.x, (0.0, 20.0 * s.wavelength));
        assert_eq!(cfg.random_trials(), 50 * 200);
        assert_eq!((cfg.ao.pso.n_particles, cfg.ao.pso.max_iters), (30, 150));
        assert!(cfg.to_json().get("experiment").unwrap().get("output_dir").is_none());
    }

    #[test]
    fn stats_median() {
        assert_eq!(Stats::of(&[3.0, 1.0, 2.0]).median, 2.0);
        assert_eq!(Stats::of(&[4.0, 1.0, 2.0, 3.0]).median, 2.5);
        let s = Stats::of(&[5.0]);
        assert_eq!((s.n, s.min, s.max), (1, 5.0, 5.0));
    }
}
