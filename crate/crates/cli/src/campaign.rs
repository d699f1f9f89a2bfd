use crate::output::{csv_writer, fmt_float};
use anyhow::{bail, ensure, Context, Result};
use bocoa::bo::{self, Method, Provenance, RunResult, CONFIG_NAMES, DEFAULT_BUDGET_MULTIPLIER, RANDOM_SEARCH};
use bocoa::metrics;
use bocoa::rng::{self, Stream};
use bocoa::testbed::{make_instance, TestFunctionId, TARGET_PRECISIONS};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

/// Subset label for the ERTD over every function of a campaign.
pub const ALL_SUBSET: &str = "all";

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    /// Registered configuration names, plus `random` for the baseline.
    pub configs: Vec<String>,
    pub functions: Vec<TestFunctionId>,
    pub dims: Vec<usize>,
    pub instances: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    pub budget_multiplier: usize,
    pub precisions: Vec<f64>,
}

impl CampaignSpec {
    pub fn new(configs: Vec<String>, functions: Vec<TestFunctionId>, dims: Vec<usize>, instances: usize, out: PathBuf) -> Self {
        Self {
            configs,
            functions,
            dims,
            instances,
            seed: 0,
            out,
            jobs: 0,
            budget_multiplier: DEFAULT_BUDGET_MULTIPLIER,
            precisions: TARGET_PRECISIONS.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.instances >= 1, "instance count must be at least 1");
        ensure!(self.budget_multiplier >= 1, "budget multiplier must be at least 1");
        ensure!(!self.configs.is_empty(), "no configuration given");
        ensure!(!self.functions.is_empty(), "no function given");
        ensure!(!self.dims.is_empty(), "no dimension given");
        ensure!(!self.precisions.is_empty(), "no target precision given");
        for &d in &self.dims {
            make_instance(TestFunctionId::Sphere, d, 0)?;
            for c in &self.configs {
                if c != RANDOM_SEARCH {
                    bo::config_from_name(c, d)?;
                }
            }
        }
        Ok(())
    }
}

/// One executed run.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignRun {
    pub run_id: String,
    pub config: String,
    pub function: TestFunctionId,
    pub dim: usize,
    /// 1-based instance index within the campaign.
    pub instance: usize,
    pub result: RunResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErtdRow {
    pub config: String,
    /// `all`, a function group name, or a function id such as `f3`.
    pub function_group: String,
    pub d: usize,
    pub evals: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoptRow {
    pub config: String,
    pub function_group: String,
    pub d: usize,
    /// Final ERTD value at the full budget.
    pub ertd: f64,
    /// `None` when the reference and the random baseline coincide.
    pub popt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    /// Sorted by run id.
    pub runs: Vec<CampaignRun>,
    pub ertd: Vec<ErtdRow>,
    pub popt: Vec<PoptRow>,
}

impl Campaign {
    /// Final ERTD of `config` on a subset in dimension `d`.
    pub fn final_ertd(&self, config: &str, subset: &str, d: usize) -> Option<f64> {
        self.ertd
            .iter()
            .filter(|r| r.config == config && r.function_group == subset && r.d == d)
            .max_by_key(|r| r.evals)
            .map(|r| r.proportion)
    }
}

pub fn run_id(config: &str, fid: TestFunctionId, d: usize, instance: usize) -> String {
    format!("{config}_{fid}_d{d}_i{instance}")
}

/// `all` expands to the registry; other entries must be registered names
/// or `random`.
pub fn parse_configs(s: &str) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if tok == "all" {
            out.extend(CONFIG_NAMES.iter().map(|n| n.to_string()));
        } else if tok == RANDOM_SEARCH || CONFIG_NAMES.contains(&tok) {
            out.push(tok.to_string());
        } else {
            bail!("unknown configuration `{tok}`");
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|c| seen.insert(c.clone()));
    ensure!(!out.is_empty(), "no configuration given");
    Ok(out)
}

pub fn parse_functions(s: &str) -> Result<Vec<TestFunctionId>> {
    if s.trim() == "all" {
        return Ok(TestFunctionId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let f: TestFunctionId = tok.parse()?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    ensure!(!out.is_empty(), "no function given");
    Ok(out)
}

pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let d: usize = tok.parse().with_context(|| format!("bad dimension `{tok}`"))?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    ensure!(!out.is_empty(), "no dimension given");
    Ok(out)
}

struct Job {
    config: String,
    fid: TestFunctionId,
    d: usize,
    instance: usize,
    instance_seed: u64,
    run_seed: u64,
}

fn jobs_for(spec: &CampaignSpec) -> Vec<Job> {
    let mut inst_rng = rng::stream(spec.seed, Stream::Instance);
    let instance_seeds: Vec<u64> = (0..spec.instances).map(|_| rng::child_seed(&mut inst_rng)).collect();
    let mut jobs = Vec::new();
    for &fid in &spec.functions {
        for &d in &spec.dims {
            for (k, &instance_seed) in instance_seeds.iter().enumerate() {
                // Every configuration sees the same run seed on a given problem.
                let key = u64::from(fid.number()) * 1_000_000 + d as u64 * 1_000 + k as u64;
                let run_seed = rng::child_seed(&mut rng::substream(spec.seed, key));
                for config in &spec.configs {
                    jobs.push(Job {
                        config: config.clone(),
                        fid,
                        d,
                        instance: k + 1,
                        instance_seed,
                        run_seed,
                    });
                }
            }
        }
    }
    jobs
}

fn execute(job: &Job, budget_multiplier: usize) -> Result<(CampaignRun, Provenance)> {
    let instance = make_instance(job.fid, job.d, job.instance_seed)?;
    let budget = budget_multiplier * job.d;
    let (method, result) = if job.config == RANDOM_SEARCH {
        (Method::RandomSearch { budget }, bo::random_search_baseline(&instance, budget, job.run_seed))
    } else {
        let mut config = bo::config_from_name(&job.config, job.d)?;
        config.budget_multiplier = budget_multiplier;
        let result = bo::run(&config, &instance, job.run_seed);
        (Method::Bo { config }, result)
    };
    let id = run_id(&job.config, job.fid, job.d, job.instance);
    let prov = Provenance::new(id.clone(), method, &result);
    let run = CampaignRun {
        run_id: id,
        config: job.config.clone(),
        function: job.fid,
        dim: job.d,
        instance: job.instance,
        result,
    };
    Ok((run, prov))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot start worker pool")
}

/// Runs every (config, function, dimension, instance) combination and
/// writes `runs/<run_id>.json`, `evals.csv`, `ertd.csv` and, when the
/// random baseline is part of the campaign, `popt.csv`.
pub fn cmd_run(spec: &CampaignSpec) -> Result<Campaign> {
    spec.validate()?;
    let runs_dir = spec.out.join("runs");
    fs::create_dir_all(&runs_dir).with_context(|| format!("cannot create {}", runs_dir.display()))?;

    let jobs = jobs_for(spec);
    let done: Vec<Result<(CampaignRun, Provenance)>> =
        pool(spec.jobs)?.install(|| jobs.par_iter().map(|j| execute(j, spec.budget_multiplier)).collect());

    let mut runs = Vec::with_capacity(done.len());
    for item in done {
        let (run, prov) = item?;
        let path = runs_dir.join(format!("{}.json", run.run_id));
        let json = serde_json::to_string_pretty(&prov)?;
        fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))?;
        runs.push(run);
    }
    runs.sort_by(|a, b| a.run_id.cmp(&b.run_id));

    write_evals(&spec.out.join("evals.csv"), runs.iter().map(|r| (r.run_id.as_str(), &r.result)))?;
    let (ertd, popt) = aggregate(spec, &runs)?;
    write_ertd(&spec.out.join("ertd.csv"), &ertd)?;
    if spec.configs.iter().any(|c| c == RANDOM_SEARCH) {
        write_popt(&spec.out.join("popt.csv"), &popt)?;
    }
    Ok(Campaign { runs, ertd, popt })
}

/// Re-executes every provenance record in `runs_dir` and writes the
/// resulting `evals.csv` to `out`.
pub fn cmd_replay(runs_dir: &Path, out: &Path, jobs: usize) -> Result<Vec<(String, RunResult)>> {
    let mut provs = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(runs_dir)
        .with_context(|| format!("cannot read {}", runs_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    ensure!(!entries.is_empty(), "no provenance records in {}", runs_dir.display());
    for p in &entries {
        let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        let prov: Provenance =
            serde_json::from_str(&text).with_context(|| format!("malformed provenance record {}", p.display()))?;
        provs.push(prov);
    }
    let replayed: Vec<bocoa::Result<RunResult>> = pool(jobs)?.install(|| provs.par_iter().map(|p| p.replay()).collect());
    let mut results = Vec::with_capacity(provs.len());
    for (p, r) in provs.iter().zip(replayed) {
        results.push((p.run_id.clone(), r?));
    }
    results.sort_by(|a, b| a.0.cmp(&b.0));
    write_evals(out, results.iter().map(|(id, r)| (id.as_str(), r)))?;
    Ok(results)
}

fn write_evals<'a>(path: &Path, runs: impl Iterator<Item = (&'a str, &'a RunResult)>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["run_id", "eval_index", "f", "best_so_far"])?;
    for (id, r) in runs {
        for (i, ((_, f), best)) in r.evaluations.iter().zip(&r.best_so_far).enumerate() {
            w.write_record([id.to_string(), (i + 1).to_string(), fmt_float(*f), fmt_float(*best)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_ertd(path: &Path, rows: &[ErtdRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["config", "function_group", "d", "evals", "proportion"])?;
    for r in rows {
        w.write_record([
            r.config.clone(),
            r.function_group.clone(),
            r.d.to_string(),
            r.evals.to_string(),
            fmt_float(r.proportion),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_popt(path: &Path, rows: &[PoptRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["config", "function_group", "d", "ertd", "popt"])?;
    for r in rows {
        w.write_record([
            r.config.clone(),
            r.function_group.clone(),
            r.d.to_string(),
            fmt_float(r.ertd),
            r.popt.map(fmt_float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Subsets a function belongs to, in output order.
fn subsets(functions: &[TestFunctionId]) -> Vec<(String, Vec<TestFunctionId>)> {
    let mut out = vec![(ALL_SUBSET.to_string(), functions.to_vec())];
    let groups: BTreeSet<_> = functions.iter().map(|f| f.group()).collect();
    for g in groups {
        out.push((g.name().to_string(), functions.iter().copied().filter(|f| f.group() == g).collect()));
    }
    let mut sorted = functions.to_vec();
    sorted.sort();
    for f in sorted {
        out.push((f.to_string(), vec![f]));
    }
    out
}

fn aggregate(spec: &CampaignSpec, runs: &[CampaignRun]) -> Result<(Vec<ErtdRow>, Vec<PoptRow>)> {
    // Hits per (config, d, function), ordered by instance then precision so
    // that problems line up across configurations.
    let mut hits: BTreeMap<(&str, usize, TestFunctionId), Vec<(usize, Vec<Option<usize>>)>> = BTreeMap::new();
    for r in runs {
        hits.entry((r.config.as_str(), r.dim, r.function))
            .or_default()
            .push((r.instance, metrics::run_hits(&r.result, &spec.precisions)));
    }
    for v in hits.values_mut() {
        v.sort_by_key(|(k, _)| *k);
    }
    let collect = |config: &str, d: usize, fns: &[TestFunctionId]| -> Vec<Option<usize>> {
        fns.iter()
            .flat_map(|f| hits.get(&(config, d, *f)).into_iter().flatten())
            .flat_map(|(_, h)| h.iter().copied())
            .collect()
    };

    let mut ertd_rows = Vec::new();
    let mut popt_rows = Vec::new();
    for &d in &spec.dims {
        let max_evals = spec.budget_multiplier * d;
        for (label, fns) in subsets(&spec.functions) {
            let mut finals = Vec::new();
            for config in &spec.configs {
                let curve = metrics::ertd_from_hits(&collect(config, d, &fns), max_evals)?;
                finals.push(curve.final_value());
                for (n, p) in curve.evals.iter().zip(&curve.proportion) {
                    ertd_rows.push(ErtdRow {
                        config: config.clone(),
                        function_group: label.clone(),
                        d,
                        evals: *n,
                        proportion: *p,
                    });
                }
            }
            let Some(rand_idx) = spec.configs.iter().position(|c| c == RANDOM_SEARCH) else {
                continue;
            };
            let per_method: Vec<Vec<Option<usize>>> = spec
                .configs
                .iter()
                .filter(|c| *c != RANDOM_SEARCH)
                .map(|c| collect(c, d, &fns))
                .collect();
            let reference = if per_method.is_empty() {
                finals[rand_idx]
            } else {
                metrics::ertd_from_hits(&metrics::virtual_best_hits(&per_method), max_evals)?.final_value()
            };
            for (config, value) in spec.configs.iter().zip(&finals) {
                popt_rows.push(PoptRow {
                    config: config.clone(),
                    function_group: label.clone(),
                    d,
                    ertd: *value,
                    popt: metrics::popt(*value, reference, finals[rand_idx]).ok(),
                });
            }
        }
    }
    Ok((ertd_rows, popt_rows))
}
