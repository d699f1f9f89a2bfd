use crate::output::{csv_writer, fmt_float};
use anyhow::{bail, ensure, Context, Result};
use bocoa::metrics::{self, GpVariant, RankedEntry, RegressionReport};
use bocoa::testbed::TestFunctionId;
use rayon::prelude::*;
use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressSpec {
    pub variants: Vec<GpVariant>,
    pub functions: Vec<TestFunctionId>,
    pub dims: Vec<usize>,
    pub instances: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    /// Campaign `ertd.csv` used to fill `rank_ertd`.
    pub ertd: Option<PathBuf>,
}

/// Instances lost to training failures for one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub variant: GpVariant,
    pub function: TestFunctionId,
    pub dim: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressOutcome {
    pub report: RegressionReport,
    /// Parallel to `report.entries`.
    pub rank_ertd: Vec<Option<usize>>,
    pub skipped: Vec<Skipped>,
}

impl RegressOutcome {
    pub fn summary(&self) -> String {
        let total: usize = self.skipped.iter().map(|s| s.count).sum();
        let mut s = format!("{total} instance(s) skipped after training failures:");
        for k in &self.skipped {
            s.push_str(&format!("\n  {} {} d={}: {}", k.variant.name(), k.function, k.dim, k.count));
        }
        s
    }
}

/// Campaign configuration whose run results stand for a regression variant.
pub fn config_for_variant(v: GpVariant) -> &'static str {
    match v {
        GpVariant::Default => "M",
        GpVariant::Quadratic => "QuadM",
        GpVariant::Scaling => "ScalM",
        GpVariant::Warping => "WarpM",
        GpVariant::Exponential => "ExpM",
    }
}

pub fn parse_variants(s: &str) -> Result<Vec<GpVariant>> {
    if s.trim() == "all" {
        return Ok(GpVariant::ALL.to_vec());
    }
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let v = GpVariant::from_name(tok)?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    ensure!(!out.is_empty(), "no variant given");
    Ok(out)
}

/// Final ERTD per (config, function label, d), from the largest `evals` row.
fn read_final_ertd(path: &PathBuf) -> Result<HashMap<(String, String, usize), f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: missing column `{name}`", path.display()))
    };
    let (c, g, d, e, p) = (col("config")?, col("function_group")?, col("d")?, col("evals")?, col("proportion")?);
    let mut best: HashMap<(String, String, usize), (usize, f64)> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let key = (rec[c].to_string(), rec[g].to_string(), rec[d].parse()?);
        let evals: usize = rec[e].parse()?;
        let prop: f64 = rec[p].parse()?;
        let slot = best.entry(key).or_insert((0, 0.0));
        if evals >= slot.0 {
            *slot = (evals, prop);
        }
    }
    Ok(best.into_iter().map(|(k, (_, v))| (k, v)).collect())
}

fn ertd_ranks(entries: &[RankedEntry], finals: &HashMap<(String, String, usize), f64>) -> Vec<Option<usize>> {
    let value = |e: &RankedEntry| {
        finals
            .get(&(
                config_for_variant(e.entry.variant).to_string(),
                e.entry.function.to_string(),
                e.entry.dim,
            ))
            .copied()
    };
    let mut ranks = vec![None; entries.len()];
    let mut i = 0;
    while i < entries.len() {
        let key = (entries[i].entry.function, entries[i].entry.dim);
        let mut j = i;
        while j < entries.len() && (entries[j].entry.function, entries[j].entry.dim) == key {
            j += 1;
        }
        let present: Vec<(usize, f64)> = (i..j).filter_map(|k| value(&entries[k]).map(|v| (k, v))).collect();
        let r = metrics::ranks_descending(&present.iter().map(|p| p.1).collect::<Vec<_>>());
        for ((k, _), rank) in present.iter().zip(r) {
            ranks[*k] = Some(rank);
        }
        i = j;
    }
    ranks
}

/// Runs the regression grid and writes `q2.csv`. Cells where every
/// instance failed are left out of the report and listed in `skipped`.
pub fn cmd_regress(spec: &RegressSpec) -> Result<RegressOutcome> {
    ensure!(spec.instances >= 1, "instance count must be at least 1");
    ensure!(!spec.variants.is_empty() && !spec.functions.is_empty() && !spec.dims.is_empty(), "empty grid");
    fs::create_dir_all(&spec.out).with_context(|| format!("cannot create {}", spec.out.display()))?;
    let finals = spec.ertd.as_ref().map(read_final_ertd).transpose()?;

    let mut grid = Vec::new();
    for &f in &spec.functions {
        for &d in &spec.dims {
            for &v in &spec.variants {
                grid.push((v, f, d));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .context("cannot start worker pool")?;
    let results: Vec<_> = pool.install(|| {
        grid.par_iter()
            .map(|&(v, f, d)| metrics::regression_experiment(v, f, d, spec.instances, spec.seed))
            .collect()
    });

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (&(variant, function, dim), res) in grid.iter().zip(results) {
        match res {
            Ok(e) => {
                if e.instances_skipped > 0 {
                    skipped.push(Skipped { variant, function, dim, count: e.instances_skipped });
                }
                entries.push(e);
            }
            Err(bocoa::Error::Training(_)) => skipped.push(Skipped { variant, function, dim, count: spec.instances }),
            Err(e) => bail!(e),
        }
    }
    let report = RegressionReport::new(entries);
    let rank_ertd = match &finals {
        Some(f) => ertd_ranks(&report.entries, f),
        None => vec![None; report.entries.len()],
    };

    let path = spec.out.join("q2.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["variant", "fid", "d", "q2_mean", "q2_sd", "ks_mean", "ks_sd", "rank_q2", "rank_ertd"])?;
    for (r, re) in report.entries.iter().zip(&rank_ertd) {
        let e = &r.entry;
        w.write_record([
            e.variant.name().to_string(),
            e.function.to_string(),
            e.dim.to_string(),
            fmt_float(e.q2_mean),
            fmt_float(e.q2_sd),
            fmt_float(e.ks_mean),
            fmt_float(e.ks_sd),
            r.rank_q2.to_string(),
            re.map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(RegressOutcome { report, rank_ertd, skipped })
}
