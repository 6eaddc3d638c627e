//! Model selection: grid search over the factor count R or the sparsity
//! penalty γ scored by PRESS or full LOOCV, and the Monte Carlo sensitivity
//! harness that compares the two criteria against simulation ground truth.

use std::time::Instant;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::numkernel::Vector;
use crate::pls::{fit_pls, DataBlock};
use crate::press::{loo_residuals_fixed_factors, loocv_pls_full, press_pls};
use crate::simgen::{draw_j, draw_r, simulate_with_rng, trial_rng, SimConfig};
use crate::sparse::{
    gamma_max_from, sparse_beta_centered, sparse_rank_one_from, warm_start, SparseFit,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::{Error, Result};

/// Scoring rule for a selection grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    /// Analytic PRESS from a single fit.
    Press,
    /// Full leave-one-out refits.
    LoocvFull,
}

impl std::fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScoreMethod::Press => write!(f, "press"),
            ScoreMethod::LoocvFull => write!(f, "loocv_full"),
        }
    }
}

/// A scored grid and its argmin. Ties break to the smaller candidate, i.e.
/// the simpler model.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    /// Candidate values (factor counts as floats, or penalties).
    pub grid: Vec<f64>,
    /// PRESS/LOOCV score per candidate; failed candidates carry infinity.
    pub scores: Vec<f64>,
    pub chosen_index: usize,
    pub chosen: f64,
    pub method: ScoreMethod,
    pub elapsed: f64,
    /// `(grid index, diagnostic)` for every candidate that failed.
    pub failures: Vec<(usize, String)>,
}

impl SelectionResult {
    /// The chosen candidate as a factor count (for R grids).
    pub fn chosen_r(&self) -> usize {
        self.chosen as usize
    }
}

fn argmin(scores: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidConfig("every candidate in the grid failed".into()))
}

/// Scores R = 1..=r_max and picks the factor count minimizing the chosen
/// criterion.
pub fn select_r(data: &DataBlock, r_max: usize, method: ScoreMethod) -> Result<SelectionResult> {
    let started = Instant::now();
    if r_max < 1 || r_max > data.p().min(data.q()) {
        return Err(Error::InvalidConfig(format!(
            "r_max = {r_max} out of range for p = {}, q = {}",
            data.p(),
            data.q()
        )));
    }
    let mut scores = Vec::with_capacity(r_max);
    let mut failures = Vec::new();
    for r in 1..=r_max {
        let outcome = match method {
            ScoreMethod::Press => fit_pls(data, r).and_then(|fit| press_pls(&fit, data)),
            ScoreMethod::LoocvFull => loocv_pls_full(data, r),
        };
        match outcome {
            Ok(res) => scores.push(res.press_value),
            Err(e) => {
                failures.push((r - 1, e.to_string()));
                scores.push(f64::INFINITY);
            }
        }
    }
    let chosen_index = argmin(&scores)?;
    Ok(SelectionResult {
        grid: (1..=r_max).map(|r| r as f64).collect(),
        scores,
        chosen_index,
        chosen: (chosen_index + 1) as f64,
        method,
        elapsed: started.elapsed().as_secs_f64(),
        failures,
    })
}

fn delete_row(m: &ndarray::ArrayView2<'_, f64>, i: usize) -> Array2<f64> {
    let (n, p) = m.dim();
    let mut out = Array2::zeros((n - 1, p));
    let mut rr = 0;
    for o in 0..n {
        if o != i {
            out.row_mut(rr).assign(&m.row(o));
            rr += 1;
        }
    }
    out
}

/// PRESS score of a one-component sparse fit, holding the (normalized)
/// sparse weights fixed across deletions.
fn press_score_sparse(data: &DataBlock, fit: &SparseFit) -> Result<f64> {
    let unorm = fit.u_sparse.dot(&fit.u_sparse).sqrt();
    let u_hat = fit.u_sparse.mapv(|x| x / unorm);
    let t = data.x().dot(&u_hat).insert_axis(Axis(1));
    let s = data.y().dot(&fit.v_unit).insert_axis(Axis(1));
    let loo = loo_residuals_fixed_factors(&t.view(), &s.view(), &data.y())?;
    let n = loo.nrows();
    let mut total = 0.0;
    for row in loo.axis_iter(Axis(0)) {
        total += row.dot(&row);
    }
    Ok(total / n as f64)
}

/// Builds the γ grid on the full data, fits the sparse model per candidate
/// and scores its predictive error with the chosen criterion.
///
/// With [`ScoreMethod::Press`] the sparse weights are held fixed across
/// deletions; with [`ScoreMethod::LoocvFull`] every deletion re-centers the
/// remaining rows and re-solves the sparse problem from that deletion's own
/// SVD warm start. Candidates whose fit is fully shrunk (on the full data
/// or in any deletion) score infinity.
pub fn select_gamma(
    data: &DataBlock,
    grid_size: usize,
    method: ScoreMethod,
) -> Result<SelectionResult> {
    let started = Instant::now();
    if grid_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "gamma grid needs at least 2 points, got {grid_size}"
        )));
    }
    let m = data.x().t().dot(&data.y());
    let warm = warm_start(&m.view())?;
    let gmax = gamma_max_from(&m.view(), &warm.v1);
    let grid = crate::sparse::evenly_spaced(gmax, grid_size);

    let mut scores = vec![f64::INFINITY; grid_size];
    let mut failures: Vec<(usize, String)> = Vec::new();

    match method {
        ScoreMethod::Press => {
            for (gi, &gamma) in grid.iter().enumerate() {
                let fit = sparse_rank_one_from(&warm, &m.view(), gamma, DEFAULT_TOL,
                    DEFAULT_MAX_ITER)?;
                if fit.nnz == 0 {
                    failures.push((gi, "fully shrunk".into()));
                    continue;
                }
                match press_score_sparse(data, &fit) {
                    Ok(score) => scores[gi] = score,
                    Err(e) => failures.push((gi, e.to_string())),
                }
            }
        }
        ScoreMethod::LoocvFull => {
            let n = data.n();
            // per deletion: one re-centering, one SVD warm start, then one
            // sparse solve per grid point
            let per_deletion: Vec<Result<Vec<Option<Vector>>>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let xd = delete_row(&data.x(), i);
                    let yd = delete_row(&data.y(), i);
                    let mean_x = xd.mean_axis(Axis(0)).expect("n >= 2");
                    let mean_y = yd.mean_axis(Axis(0)).expect("n >= 2");
                    let xc = xd - &mean_x;
                    let yc = yd - &mean_y;
                    let md = xc.t().dot(&yc);
                    let warm_d = warm_start(&md.view()).map_err(|e| Error::DeletionFit {
                        index: i,
                        source: Box::new(e),
                    })?;
                    let x_held = &data.x().row(i) - &mean_x;
                    let mut rows: Vec<Option<Vector>> = Vec::with_capacity(grid.len());
                    for &gamma in &grid {
                        let fit = sparse_rank_one_from(
                            &warm_d,
                            &md.view(),
                            gamma,
                            DEFAULT_TOL,
                            DEFAULT_MAX_ITER,
                        )
                        .map_err(|e| Error::DeletionFit {
                            index: i,
                            source: Box::new(e),
                        })?;
                        if fit.nnz == 0 {
                            rows.push(None);
                            continue;
                        }
                        match sparse_beta_centered(&xc.view(), &yc.view(), &fit) {
                            Ok(beta) => {
                                let pred = x_held.dot(&beta) + &mean_y;
                                rows.push(Some(&data.y().row(i) - &pred));
                            }
                            Err(_) => rows.push(None),
                        }
                    }
                    Ok(rows)
                })
                .collect();

            let mut totals = vec![0.0f64; grid_size];
            let mut shrunk = vec![false; grid_size];
            for rows in per_deletion {
                let rows = rows?;
                for (gi, row) in rows.into_iter().enumerate() {
                    match row {
                        Some(e) => totals[gi] += e.dot(&e),
                        None => shrunk[gi] = true,
                    }
                }
            }
            for gi in 0..grid_size {
                if shrunk[gi] {
                    failures.push((gi, "fully shrunk in a deletion refit".into()));
                } else {
                    scores[gi] = totals[gi] / n as f64;
                }
            }
        }
    }

    let chosen_index = argmin(&scores)?;
    Ok(SelectionResult {
        chosen: grid[chosen_index],
        grid,
        scores,
        chosen_index,
        method,
        elapsed: started.elapsed().as_secs_f64(),
        failures,
    })
}

/// What a sensitivity experiment varies per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Draw the true factor count from {2..8} and select R.
    SelectR,
    /// Fix R = 1, draw the sparsity divisor j from [1, 2] and select γ.
    SelectGamma,
}

/// Monte Carlo experiment recipe.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub trials: usize,
    pub seed: u64,
    /// Grid 1..=r_max for R selection.
    pub r_max: usize,
    /// Number of γ grid points.
    pub grid_size: usize,
    /// Noise level handed to the generator.
    pub noise_sd: f64,
    /// Covariance of the single latent pair in sparse (γ) mode.
    pub sparse_cov: f64,
    /// Leading covariance and decay of the schedule in R mode:
    /// `cov_base · cov_decay^(r−1)`.
    pub cov_base: f64,
    pub cov_decay: f64,
    /// Latent pair correlation handed to the generator in R mode.
    pub latent_corr: f64,
}

impl ExperimentConfig {
    pub fn new(
        kind: ExperimentKind,
        n: usize,
        p: usize,
        q: usize,
        trials: usize,
        seed: u64,
    ) -> Self {
        ExperimentConfig {
            kind,
            n,
            p,
            q,
            trials,
            seed,
            r_max: 10,
            grid_size: 100,
            noise_sd: 1.0,
            sparse_cov: 250.0,
            cov_base: 100.0,
            cov_decay: 0.8,
            latent_corr: 0.7,
        }
    }
}

/// Per-trial record of what each criterion chose and how it scored against
/// the ground truth.
#[derive(Debug, Clone, Serialize)]
pub struct TrialDetail {
    pub trial: usize,
    /// `r_true` (R mode) or the drawn sparsity divisor j (γ mode).
    pub truth_value: f64,
    pub chosen_press: f64,
    pub chosen_loocv: f64,
    pub hit_press: bool,
    pub hit_loocv: bool,
    /// Support-recovery scores against the true support (γ mode only).
    pub f1_press: Option<f64>,
    pub f1_loocv: Option<f64>,
    /// Agreement between the two methods' selected supports (γ mode only).
    pub f1_between: Option<f64>,
    pub recall_press: Option<f64>,
    pub recall_loocv: Option<f64>,
}

/// Aggregate of a sensitivity experiment: hit counts for both criteria, the
/// sensitivity ratio π_PRESS/π_LOOCV and its Monte Carlo standard error
/// (standard deviation of per-batch ratios over 10 trial batches).
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityRecord {
    pub trials: usize,
    /// Trials that errored; they are excluded from the counts below.
    pub failures: usize,
    /// Diagnostics for the failed trials.
    pub failure_messages: Vec<String>,
    pub hits_press: usize,
    pub hits_loocv: usize,
    /// `hits_press / hits_loocv`; undefined (None) when no LOOCV hit.
    pub ratio: Option<f64>,
    pub se: Option<f64>,
    pub mean_recall_press: Option<f64>,
    pub mean_recall_loocv: Option<f64>,
    pub details: Vec<TrialDetail>,
}

/// F1 overlap between two index sets.
pub fn f1_score(selected: &[usize], truth: &[usize]) -> f64 {
    if selected.is_empty() || truth.is_empty() {
        return 0.0;
    }
    let truth_set: std::collections::HashSet<usize> = truth.iter().copied().collect();
    let inter = selected.iter().filter(|j| truth_set.contains(j)).count() as f64;
    let precision = inter / selected.len() as f64;
    let recall = inter / truth.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Recall (sensitivity) of a selected index set against the truth.
pub fn recall_score(selected: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let truth_set: std::collections::HashSet<usize> = truth.iter().copied().collect();
    selected.iter().filter(|j| truth_set.contains(j)).count() as f64 / truth.len() as f64
}

/// An F1 at or above this threshold counts a γ-selection trial as a hit.
pub const GAMMA_HIT_F1: f64 = 0.9;

enum TrialOutcome {
    Ok(TrialDetail),
    Failed(String),
}

fn support_of(fit: &SparseFit) -> Vec<usize> {
    fit.u_sparse
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialDetail> {
    let mut rng = trial_rng(config.seed, trial as u64);
    match config.kind {
        ExperimentKind::SelectR => {
            let r_true = draw_r(&mut rng);
            let schedule: Vec<f64> = (0..r_true)
                .map(|k| config.cov_base * config.cov_decay.powi(k as i32))
                .collect();
            let sim_cfg = SimConfig::new(config.n, config.p, config.q, r_true, config.seed)
                .with_noise_sd(config.noise_sd)
                .with_cov_schedule(schedule)
                .with_latent_corr(config.latent_corr);
            let sim = simulate_with_rng(&sim_cfg, &mut rng)?;
            let press = select_r(&sim.data, config.r_max, ScoreMethod::Press)?;
            let loocv = select_r(&sim.data, config.r_max, ScoreMethod::LoocvFull)?;
            Ok(TrialDetail {
                trial,
                truth_value: r_true as f64,
                chosen_press: press.chosen,
                chosen_loocv: loocv.chosen,
                hit_press: press.chosen_r() == r_true,
                hit_loocv: loocv.chosen_r() == r_true,
                f1_press: None,
                f1_loocv: None,
                f1_between: None,
                recall_press: None,
                recall_loocv: None,
            })
        }
        ExperimentKind::SelectGamma => {
            let j = draw_j(&mut rng);
            let sim_cfg = SimConfig::new(config.n, config.p, config.q, 1, config.seed)
                .with_noise_sd(config.noise_sd)
                .with_sparsity(j)
                .with_cov_schedule(vec![config.sparse_cov]);
            let sim = simulate_with_rng(&sim_cfg, &mut rng)?;
            let press = select_gamma(&sim.data, config.grid_size, ScoreMethod::Press)?;
            let loocv = select_gamma(&sim.data, config.grid_size, ScoreMethod::LoocvFull)?;

            // selected supports come from the full-data solve at each
            // chosen penalty
            let m = sim.data.x().t().dot(&sim.data.y());
            let warm = warm_start(&m.view())?;
            let fit_p = sparse_rank_one_from(
                &warm,
                &m.view(),
                press.chosen,
                DEFAULT_TOL,
                DEFAULT_MAX_ITER,
            )?;
            let fit_l = sparse_rank_one_from(
                &warm,
                &m.view(),
                loocv.chosen,
                DEFAULT_TOL,
                DEFAULT_MAX_ITER,
            )?;
            let sup_p = support_of(&fit_p);
            let sup_l = support_of(&fit_l);
            let truth = &sim.truth.support_true;
            let f1_p = f1_score(&sup_p, truth);
            let f1_l = f1_score(&sup_l, truth);
            Ok(TrialDetail {
                trial,
                truth_value: j,
                chosen_press: press.chosen,
                chosen_loocv: loocv.chosen,
                hit_press: f1_p >= GAMMA_HIT_F1,
                hit_loocv: f1_l >= GAMMA_HIT_F1,
                f1_press: Some(f1_p),
                f1_loocv: Some(f1_l),
                f1_between: Some(f1_score(&sup_p, &sup_l)),
                recall_press: Some(recall_score(&sup_p, truth)),
                recall_loocv: Some(recall_score(&sup_l, truth)),
            })
        }
    }
}

/// Runs `trials` independent simulate-and-select trials and aggregates the
/// sensitivity of PRESS against LOOCV. Failed trials are recorded and
/// excluded; parallel execution is deterministic because every trial owns a
/// seeded RNG stream and aggregation is in trial order.
pub fn sensitivity_experiment(config: &ExperimentConfig) -> Result<SensitivityRecord> {
    if config.trials < 1 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|t| match run_trial(config, t) {
            Ok(detail) => TrialOutcome::Ok(detail),
            Err(e) => TrialOutcome::Failed(e.to_string()),
        })
        .collect();

    let mut details = Vec::new();
    let mut failure_messages = Vec::new();
    for outcome in outcomes {
        match outcome {
            TrialOutcome::Ok(d) => details.push(d),
            TrialOutcome::Failed(msg) => failure_messages.push(msg),
        }
    }
    let hits_press = details.iter().filter(|d| d.hit_press).count();
    let hits_loocv = details.iter().filter(|d| d.hit_loocv).count();
    let ratio = if hits_loocv > 0 {
        Some(hits_press as f64 / hits_loocv as f64)
    } else {
        None
    };

    // Monte Carlo standard error: standard deviation of per-batch ratios
    // over up to 10 consecutive batches of successful trials.
    let se = {
        let n_ok = details.len();
        let batches = n_ok.min(10);
        let mut batch_ratios = Vec::new();
        if batches >= 2 {
            for b in 0..batches {
                let lo = b * n_ok / batches;
                let hi = (b + 1) * n_ok / batches;
                let hp = details[lo..hi].iter().filter(|d| d.hit_press).count();
                let hl = details[lo..hi].iter().filter(|d| d.hit_loocv).count();
                if hl > 0 {
                    batch_ratios.push(hp as f64 / hl as f64);
                }
            }
        }
        if batch_ratios.len() >= 2 {
            let mean = batch_ratios.iter().sum::<f64>() / batch_ratios.len() as f64;
            let var = batch_ratios
                .iter()
                .map(|r| (r - mean) * (r - mean))
                .sum::<f64>()
                / (batch_ratios.len() - 1) as f64;
            Some(var.sqrt())
        } else {
            None
        }
    };

    let mean_of = |get: fn(&TrialDetail) -> Option<f64>| {
        let vals: Vec<f64> = details.iter().filter_map(get).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };

    Ok(SensitivityRecord {
        trials: config.trials,
        failures: failure_messages.len(),
        failure_messages,
        hits_press,
        hits_loocv,
        ratio,
        se,
        mean_recall_press: mean_of(|d| d.recall_press),
        mean_recall_loocv: mean_of(|d| d.recall_loocv),
        details,
    })
}
