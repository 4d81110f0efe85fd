//! Pool-based active learning with minimum-|score| queries.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::metrics::prbp;
use super::svm::{model_from_members, Kernel, KernelRows, SmoState, SvmModel};
use crate::error::{Error, Result};
use crate::oscillator::Label;
use crate::stats::quantile;

/// Source of ground-truth labels.
pub trait LabelOracle {
    fn label(&mut self, index: usize) -> Result<Label>;
}

/// Oracle backed by precomputed labels.
#[derive(Debug, Clone)]
pub struct LookupOracle<'a>(pub &'a [Label]);

impl LabelOracle for LookupOracle<'_> {
    fn label(&mut self, index: usize) -> Result<Label> {
        self.0.get(index).copied().ok_or_else(|| Error::Oracle {
            index,
            reason: "index outside the label table".into(),
        })
    }
}

impl<F: FnMut(usize) -> Result<Label>> LabelOracle for F {
    fn label(&mut self, index: usize) -> Result<Label> {
        self(index)
    }
}

/// Unlabeled instances with a label cache in front of the oracle.
pub struct Pool<O> {
    /// Transformed features seen by the classifier.
    pub features: Vec<Vec<f64>>,
    /// Raw PGA and linear displacement, used to pick starting points.
    pub pga: Vec<f64>,
    pub lin_disp: Vec<f64>,
    oracle: O,
    cache: Vec<Option<Label>>,
    oracle_calls: usize,
}

impl<O> Pool<O> {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn oracle_calls(&self) -> usize {
        self.oracle_calls
    }
}

impl<O: LabelOracle> Pool<O> {
    pub fn new(features: Vec<Vec<f64>>, pga: Vec<f64>, lin_disp: Vec<f64>, oracle: O) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::invalid("pool is empty"));
        }
        if pga.len() != n || lin_disp.len() != n {
            return Err(Error::invalid("pool columns differ in length"));
        }
        Ok(Self {
            features,
            pga,
            lin_disp,
            oracle,
            cache: vec![None; n],
            oracle_calls: 0,
        })
    }

    /// Label of `index`, asking the oracle at most once.
    pub fn label(&mut self, index: usize) -> Result<Label> {
        if let Some(l) = self.cache[index] {
            return Ok(l);
        }
        let l = self.oracle.label(index)?;
        self.oracle_calls += 1;
        self.cache[index] = Some(l);
        Ok(l)
    }
}

/// Candidate sets for the two starting points: below both medians, and
/// above both 9th deciles, of PGA and L.
pub fn start_candidates<O>(pool: &Pool<O>) -> (Vec<usize>, Vec<usize>) {
    let (p5, p9) = (quantile(&pool.pga, 0.5), quantile(&pool.pga, 0.9));
    let (l5, l9) = (quantile(&pool.lin_disp, 0.5), quantile(&pool.lin_disp, 0.9));
    let low = (0..pool.len())
        .filter(|&i| pool.pga[i] < p5 && pool.lin_disp[i] < l5)
        .collect();
    let high = (0..pool.len())
        .filter(|&i| pool.pga[i] > p9 && pool.lin_disp[i] > l9)
        .collect();
    (low, high)
}

fn draw_with_label<O: LabelOracle, R: Rng + ?Sized>(
    pool: &mut Pool<O>,
    mut candidates: Vec<usize>,
    wanted: Label,
    which: &'static str,
    rng: &mut R,
) -> Result<usize> {
    loop {
        let &j = candidates.choose(rng).ok_or(Error::CandidatesExhausted(which))?;
        if pool.label(j)? == wanted {
            return Ok(j);
        }
        candidates.retain(|&c| c != j);
    }
}

/// A safe instance `j1` and a failing instance `j2`; a candidate with the
/// unexpected label is discarded and redrawn.
pub fn select_start_points<O: LabelOracle, R: Rng + ?Sized>(
    pool: &mut Pool<O>,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let (low, high) = start_candidates(pool);
    let j1 = draw_with_label(pool, low, Label::Negative, "j1", rng)?;
    let j2 = draw_with_label(pool, high, Label::Positive, "j2", rng)?;
    Ok((j1, j2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Labeled-set size after this step.
    pub n: usize,
    pub queried: usize,
    pub label: Label,
    /// |score| of the query under the model that chose it (zero for the
    /// starting points).
    pub query_abs_score: f64,
    /// Smallest |score| among the other unlabeled instances at that time.
    pub runner_up_abs_score: f64,
    /// PRBP over the whole pool of the model trained after this step, when
    /// evaluation labels were given.
    pub prbp: Option<f64>,
    /// Primal weights after this step (linear kernel).
    pub weights: Option<Vec<f64>>,
    pub bias: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub n: usize,
    pub model: SvmModel,
    /// Decision values on every pool instance.
    pub pool_scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ActiveConfig {
    pub kernel: Kernel,
    pub cost: f64,
    pub tolerance: f64,
    pub budget: usize,
    /// Labeled-set sizes at which models are kept.
    pub snapshots: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ActiveState {
    pub labeled: Vec<(usize, Label)>,
    pub model: SvmModel,
    pub history: Vec<IterationRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Decision values of the final model on the pool.
    pub pool_scores: Vec<f64>,
}

impl ActiveState {
    pub fn snapshot(&self, n: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.n == n)
    }
}

/// Query with the smallest |score| among unlabeled instances, ties to the
/// lowest index; also returns the runner-up |score|.
fn next_query(scores: &[f64], labeled: &[bool]) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64)> = None;
    let mut second = f64::INFINITY;
    for (i, s) in scores.iter().enumerate() {
        if labeled[i] {
            continue;
        }
        let a = s.abs();
        match best {
            Some((_, b)) if a >= b => second = second.min(a),
            Some((_, b)) => {
                second = second.min(b);
                best = Some((i, a));
            }
            None => best = Some((i, a)),
        }
    }
    best.map(|(i, a)| (i, a, second))
}

/// Runs the learner from a random start pair until `budget` labels.
/// `evaluation` (the full pool labels) enables PRBP in the history.
pub fn active_learn<O: LabelOracle, R: Rng + ?Sized>(
    pool: &mut Pool<O>,
    config: &ActiveConfig,
    evaluation: Option<&[Label]>,
    rng: &mut R,
) -> Result<ActiveState> {
    let start = select_start_points(pool, rng)?;
    active_learn_from(pool, config, start, evaluation)
}

pub fn active_learn_from<O: LabelOracle>(
    pool: &mut Pool<O>,
    config: &ActiveConfig,
    (j1, j2): (usize, usize),
    evaluation: Option<&[Label]>,
) -> Result<ActiveState> {
    config.kernel.validate()?;
    if config.budget < 2 {
        return Err(Error::invalid("budget must be at least 2"));
    }
    if config.budget > pool.len() {
        return Err(Error::invalid(format!(
            "budget {} exceeds pool size {}",
            config.budget,
            pool.len()
        )));
    }
    if let Some(e) = evaluation {
        if e.len() != pool.len() {
            return Err(Error::invalid("evaluation labels do not cover the pool"));
        }
    }
    let n_pool = pool.len();
    let mut rows = KernelRows::new(pool.features.clone(), config.kernel);
    let mut state = SmoState::new(config.cost, config.tolerance)?;
    // raw[p] = sum_k alpha_k y_k K(x_k, x_p)
    let mut raw = vec![0.0; n_pool];
    let mut is_labeled = vec![false; n_pool];
    let mut labeled = Vec::with_capacity(config.budget);
    let mut history = Vec::with_capacity(config.budget);
    let mut snapshots = Vec::new();
    let mut pending: Vec<(usize, Label, f64, f64)> = Vec::new();

    for j in [j1, j2] {
        let l = pool.label(j)?;
        pending.push((j, l, 0.0, 0.0));
    }
    loop {
        let batch_start = history.len();
        for &(j, l, qa, ra) in &pending {
            state.push(j, l, raw[j]);
            is_labeled[j] = true;
            labeled.push((j, l));
            history.push(IterationRecord {
                n: labeled.len(),
                queried: j,
                label: l,
                query_abs_score: qa,
                runner_up_abs_score: ra,
                prbp: None,
                weights: None,
                bias: 0.0,
            });
        }
        pending.clear();
        for (k, delta) in state.solve(&mut rows) {
            let p = state.members[k];
            rows.ensure(p);
            for (r, kv) in raw.iter_mut().zip(rows.get(p)) {
                *r += delta * kv;
            }
        }
        let n = labeled.len();
        let scores: Vec<f64> = raw.iter().map(|r| r + state.bias).collect();
        let weights = match config.kernel {
            Kernel::Linear => model_from_members(&state, &rows).weights,
            Kernel::Rbf { .. } => None,
        };
        let step_prbp = match evaluation {
            Some(e) if e.iter().any(|l| l.is_positive()) => Some(prbp(&scores, e)?),
            _ => None,
        };
        // both starting points share the first model
        for rec in history.iter_mut().skip(batch_start) {
            rec.bias = state.bias;
            rec.weights = weights.clone();
            rec.prbp = step_prbp;
        }
        let done = n >= config.budget;
        if config.snapshots.contains(&n) || done {
            let model = model_from_members(&state, &rows);
            snapshots.push(Snapshot {
                n,
                model,
                pool_scores: scores.clone(),
            });
        }
        if done {
            let model = snapshots.last().expect("pushed above").model.clone();
            return Ok(ActiveState {
                labeled,
                model,
                history,
                snapshots: snapshots
                    .into_iter()
                    .filter(|s| config.snapshots.contains(&s.n) || s.n == n)
                    .collect(),
                pool_scores: scores,
            });
        }
        let (q, qa, ra) = next_query(&scores, &is_labeled).expect("budget <= pool size");
        let l = pool.label(q)?;
        pending.push((q, l, qa, ra));
    }
}

/// Primal weights per iteration of a linear-kernel history.
pub fn weight_trace(history: &[IterationRecord]) -> Result<Vec<Vec<f64>>> {
    history
        .iter()
        .map(|h| {
            h.weights
                .clone()
                .ok_or_else(|| Error::invalid("weight trace needs a linear-kernel history"))
        })
        .collect()
}

/// Log-spaced labeled-set sizes from `lo` to `hi` (inclusive, rounded,
/// deduplicated), `per_decade` points per factor of ten.
pub fn log_schedule(lo: usize, hi: usize, per_decade: usize) -> Vec<usize> {
    let (a, b) = ((lo.max(2)) as f64, hi as f64);
    if b < a {
        return vec![];
    }
    let steps = ((b / a).log10() * per_decade as f64).ceil().max(1.0) as usize;
    let mut out: Vec<usize> = (0..=steps)
        .map(|k| (a * (b / a).powf(k as f64 / steps as f64)).round() as usize)
        .collect();
    out.dedup();
    out
}
