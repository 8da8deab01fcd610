//! Replicated model-selection experiments: simulate, fit every candidate,
//! select by QBIC and QAIC, tabulate.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{Candidate, ExperimentConfig};
use crate::criteria::{self, Criterion, CriterionValue, Selection};
use crate::estimation::{self, FitConfig, FitError, FitResult};
use crate::quasi_lik::{PathData, TruncationRule, TruncationStats};
use crate::simulator::{self, SimConfig, SimError};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at sample size `n`. Each replication's stream
/// depends only on `(master, n, rep)`, so results do not depend on thread
/// count or scheduling.
pub fn replication_seed(master: u64, n: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ n as u64) ^ rep as u64)
}

/// Every candidate fitted to one data set, plus the selections.
#[derive(Debug, Clone)]
pub struct ModelComparison {
    pub fits: Vec<Result<FitResult, FitError>>,
    /// Criterion values of the candidates that fitted, by candidate index.
    pub values: Vec<CriterionValue>,
    /// `None` when any candidate failed to fit.
    pub qbic: Option<Selection>,
    pub qaic: Option<Selection>,
    pub n: usize,
    pub n_kept: usize,
}

impl ModelComparison {
    pub fn selection(&self, criterion: Criterion) -> Option<Selection> {
        match criterion {
            Criterion::Qbic => self.qbic,
            Criterion::Qaic => self.qaic,
        }
    }

    pub fn failed(&self) -> bool {
        self.fits.iter().any(Result::is_err)
    }
}

/// Fits each candidate to the same truncation statistics and selects.
pub fn compare_models(candidates: &[Candidate], stats: &TruncationStats, fit_cfg: &FitConfig) -> ModelComparison {
    let fits: Vec<_> = candidates
        .iter()
        .map(|c| {
            let cfg = FitConfig {
                init: c.init.clone(),
                ..fit_cfg.clone()
            };
            estimation::fit(&c.spec, stats, &cfg)
        })
        .collect();
    let n = stats.n();
    let values: Vec<CriterionValue> = fits
        .iter()
        .enumerate()
        .filter_map(|(id, f)| {
            f.as_ref()
                .ok()
                .map(|f| CriterionValue::new(id, f.h_value, candidates[id].spec.q(), n, f.converged))
        })
        .collect();
    let all_ok = values.len() == fits.len();
    let pick = |c| all_ok.then(|| criteria::select(&values, c).ok()).flatten();
    ModelComparison {
        qbic: pick(Criterion::Qbic),
        qaic: pick(Criterion::Qaic),
        fits,
        values,
        n,
        n_kept: stats.n_kept(),
    }
}

pub fn compare_on_path(
    candidates: &[Candidate],
    path: &PathData,
    rule: &TruncationRule,
    fit_cfg: &FitConfig,
) -> ModelComparison {
    compare_models(candidates, &TruncationStats::compute(path, rule), fit_cfg)
}

#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub rep: usize,
    pub seed: u64,
    pub comparison: ModelComparison,
}

pub fn run_replication(cfg: &ExperimentConfig, n: usize, rep: usize) -> Result<ReplicationOutcome, SimError> {
    let seed = replication_seed(cfg.master_seed, n, rep);
    let path = simulator::simulate_observations(&cfg.true_model, &SimConfig { n, t_end: cfg.t_end, seed })?;
    Ok(ReplicationOutcome {
        rep,
        seed,
        comparison: compare_on_path(&cfg.candidates, &path, &cfg.rule, &cfg.fit),
    })
}

/// Selection frequencies for each criterion and sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTable {
    pub model_names: Vec<String>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    /// `counts[c][i][m]`: replications at `n_grid[i]` where criterion
    /// `Criterion::ALL[c]` picked model `m`.
    pub counts: Vec<Vec<Vec<usize>>>,
    /// Replications at `n_grid[i]` where some candidate failed to fit; these
    /// are excluded from `counts`.
    pub failed: Vec<usize>,
    /// `nonconverged[i][m]`: fits of model `m` that stopped without meeting
    /// the convergence test (still included in selection).
    pub nonconverged: Vec<Vec<usize>>,
    /// `ties[c][i]`: selections decided by the tie-break rule.
    pub ties: Vec<Vec<usize>>,
    pub runtime_secs: f64,
}

impl SelectionTable {
    fn criterion_index(c: Criterion) -> usize {
        Criterion::ALL.iter().position(|&x| x == c).expect("listed")
    }

    pub fn count(&self, criterion: Criterion, n_index: usize, model: usize) -> usize {
        self.counts[Self::criterion_index(criterion)][n_index][model]
    }

    /// Selection frequency over all `R` replications (failures count as
    /// not selecting anything).
    pub fn frequency(&self, criterion: Criterion, n_index: usize, model: usize) -> f64 {
        self.count(criterion, n_index, model) as f64 / self.replications as f64
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "replications = {}, master seed = {}, runtime = {:.1} s",
            self.replications, self.master_seed, self.runtime_secs
        );
        let width = self.model_names.iter().map(String::len).max().unwrap_or(0).max(8);
        for (ci, c) in Criterion::ALL.iter().enumerate() {
            let _ = writeln!(s, "\n{c}");
            let _ = write!(s, "{:>10}", "n");
            for name in &self.model_names {
                let _ = write!(s, " {name:>width$}");
            }
            let _ = writeln!(s, " {:>8} {:>6}", "failed", "ties");
            for (i, n) in self.n_grid.iter().enumerate() {
                let _ = write!(s, "{n:>10}");
                for m in 0..self.model_names.len() {
                    let _ = write!(s, " {:>width$}", self.counts[ci][i][m]);
                }
                let _ = writeln!(s, " {:>8} {:>6}", self.failed[i], self.ties[ci][i]);
            }
        }
        if self.nonconverged.iter().flatten().any(|&k| k > 0) {
            let _ = writeln!(s, "\nnon-converged fits (included above)");
            for (i, n) in self.n_grid.iter().enumerate() {
                let _ = write!(s, "{n:>10}");
                for m in 0..self.model_names.len() {
                    let _ = write!(s, " {:>width$}", self.nonconverged[i][m]);
                }
                let _ = writeln!(s);
            }
        }
        s
    }

    /// Long format: `criterion,n,model,count,replications`, plus `failed`
    /// rows under the model name `(failed)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("criterion,n,model,count,replications\n");
        for (ci, c) in Criterion::ALL.iter().enumerate() {
            for (i, n) in self.n_grid.iter().enumerate() {
                for (m, name) in self.model_names.iter().enumerate() {
                    let _ = writeln!(s, "{c},{n},{name},{},{}", self.counts[ci][i][m], self.replications);
                }
                let _ = writeln!(s, "{c},{n},(failed),{},{}", self.failed[i], self.replications);
            }
        }
        s
    }
}

/// Runs all replications for every `n` in the grid, in parallel on the
/// current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SelectionTable, SimError> {
    run_experiment_with(cfg, |_, _| {})
}

/// As [`run_experiment`], calling `on_done(n, outcome)` for each finished
/// replication (in completion order).
pub fn run_experiment_with<F>(cfg: &ExperimentConfig, on_done: F) -> Result<SelectionTable, SimError>
where
    F: Fn(usize, &ReplicationOutcome) + Sync,
{
    cfg.validate().map_err(SimError::InvalidConfig)?;
    let start = Instant::now();
    let m = cfg.candidates.len();
    let g = cfg.n_grid.len();
    let mut table = SelectionTable {
        model_names: cfg.candidates.iter().map(|c| c.name.clone()).collect(),
        n_grid: cfg.n_grid.clone(),
        replications: cfg.replications,
        master_seed: cfg.master_seed,
        counts: vec![vec![vec![0; m]; g]; Criterion::ALL.len()],
        failed: vec![0; g],
        nonconverged: vec![vec![0; m]; g],
        ties: vec![vec![0; g]; Criterion::ALL.len()],
        runtime_secs: 0.0,
    };
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let outcomes: Vec<ReplicationOutcome> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let out = run_replication(cfg, n, rep)?;
                on_done(n, &out);
                Ok(out)
            })
            .collect::<Result<_, SimError>>()?;
        for out in &outcomes {
            let cmp = &out.comparison;
            for (mi, f) in cmp.fits.iter().enumerate() {
                if matches!(f, Ok(r) if !r.converged) {
                    table.nonconverged[i][mi] += 1;
                }
            }
            if cmp.failed() {
                table.failed[i] += 1;
                continue;
            }
            for (ci, &c) in Criterion::ALL.iter().enumerate() {
                if let Some(sel) = cmp.selection(c) {
                    table.counts[ci][i][sel.model_id] += 1;
                    table.ties[ci][i] += usize::from(sel.tie);
                }
            }
        }
    }
    table.runtime_secs = start.elapsed().as_secs_f64();
    Ok(table)
}
