//! Soft-margin support vector machines trained by SMO with maximal
//! violating pair selection.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::Table;
use crate::oscillator::Label;

pub const DEFAULT_COST: f64 = 10.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    /// RBF with the default width `1/d`.
    pub fn rbf_default(dim: usize) -> Self {
        Kernel::Rbf {
            gamma: 1.0 / dim as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::domain(format!("rbf gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf { .. } => "rbf",
        }
    }

    /// `linear` or `rbf`; the RBF width defaults to `1/dim`.
    pub fn parse(s: &str, gamma: Option<f64>, dim: usize) -> Result<Self> {
        let k = match s.to_ascii_lowercase().as_str() {
            "linear" => Kernel::Linear,
            "rbf" => Kernel::Rbf {
                gamma: gamma.unwrap_or(1.0 / dim as f64),
            },
            _ => return Err(Error::Config(format!("unknown kernel `{s}` (linear|rbf)"))),
        };
        k.validate()?;
        Ok(k)
    }
}

/// Lazily computed rows of the Gram matrix of a fixed point set.
#[derive(Debug, Clone)]
pub struct KernelRows {
    points: Vec<Vec<f64>>,
    kernel: Kernel,
    rows: Vec<Option<Vec<f64>>>,
}

impl KernelRows {
    pub fn new(points: Vec<Vec<f64>>, kernel: Kernel) -> Self {
        let n = points.len();
        Self {
            points,
            kernel,
            rows: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn ensure(&mut self, i: usize) {
        if self.rows[i].is_none() {
            let p = &self.points[i];
            let row = self.points.iter().map(|q| self.kernel.eval(p, q)).collect();
            self.rows[i] = Some(row);
        }
    }

    /// Row `i`; must have been computed with [`ensure`](Self::ensure).
    pub fn get(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("row requested before ensure")
    }
}

/// Dual state over a growing subset of a [`KernelRows`] point set.
#[derive(Debug, Clone)]
pub struct SmoState {
    pub cost: f64,
    pub tolerance: f64,
    /// Point indices of the training members, in insertion order.
    pub members: Vec<usize>,
    pub y: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Gradient of `½ aᵀQa - eᵀa`.
    grad: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_iterations: usize,
}

impl SmoState {
    pub fn new(cost: f64, tolerance: f64) -> Result<Self> {
        if !(cost > 0.0 && cost.is_finite()) {
            return Err(Error::domain("cost must be positive"));
        }
        if !(tolerance > 0.0) {
            return Err(Error::domain("tolerance must be positive"));
        }
        Ok(Self {
            cost,
            tolerance,
            members: Vec::new(),
            y: Vec::new(),
            alpha: Vec::new(),
            grad: Vec::new(),
            bias: 0.0,
            iterations: 0,
            converged: false,
            max_iterations: 10_000_000,
        })
    }

    /// Adds a member with zero multiplier. `raw_score` is
    /// `sum_k alpha_k y_k K(x_k, x)` under the current multipliers.
    pub fn push(&mut self, point: usize, label: Label, raw_score: f64) {
        let y = label.sign();
        self.members.push(point);
        self.y.push(y);
        self.alpha.push(0.0);
        self.grad.push(y * raw_score - 1.0);
        self.converged = false;
    }

    /// Signed coefficients `alpha_k y_k`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.y).map(|(a, y)| a * y).collect()
    }

    /// `sum(alpha) - ½ aᵀQa`, computed from the maintained gradient.
    pub fn dual_objective(&self) -> f64 {
        // with G = Qa - e, aᵀQa = aᵀ(G + e)
        self.alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| a - 0.5 * a * (g + 1.0))
            .sum()
    }

    fn in_up(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] < self.cost) || (self.y[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] > 0.0) || (self.y[t] < 0.0 && self.alpha[t] < self.cost)
    }

    fn select_pair(&self) -> Option<(usize, usize, f64)> {
        let mut i = None;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = None;
        let mut gmin = f64::INFINITY;
        for t in 0..self.members.len() {
            let v = -self.y[t] * self.grad[t];
            if self.in_up(t) && v > gmax {
                gmax = v;
                i = Some(t);
            }
            if self.in_low(t) && v < gmin {
                gmin = v;
                j = Some(t);
            }
        }
        match (i, j) {
            (Some(i), Some(j)) => Some((i, j, gmax - gmin)),
            _ => None,
        }
    }

    /// Runs SMO to the tolerance and returns the multiplier changes as
    /// `(member position, delta alpha_k y_k)`.
    pub fn solve(&mut self, rows: &mut KernelRows) -> Vec<(usize, f64)> {
        let before = self.coefficients();
        let c = self.cost;
        self.converged = false;
        let mut iters = 0;
        while iters < self.max_iterations {
            let Some((i, j, gap)) = self.select_pair() else {
                self.converged = true;
                break;
            };
            if gap < self.tolerance {
                self.converged = true;
                break;
            }
            iters += 1;
            let (pi, pj) = (self.members[i], self.members[j]);
            rows.ensure(pi);
            rows.ensure(pj);
            let (kii, kjj, kij) = (rows.get(pi)[pi], rows.get(pj)[pj], rows.get(pi)[pj]);
            let (yi, yj) = (self.y[i], self.y[j]);
            let (ai, aj) = (self.alpha[i], self.alpha[j]);
            let (mut ni, mut nj);
            if yi != yj {
                let quad = (kii + kjj - 2.0 * kij).max(TAU);
                let delta = (-self.grad[i] - self.grad[j]) / quad;
                let diff = ai - aj;
                ni = ai + delta;
                nj = aj + delta;
                if diff > 0.0 {
                    if nj < 0.0 {
                        nj = 0.0;
                        ni = diff;
                    }
                } else if ni < 0.0 {
                    ni = 0.0;
                    nj = -diff;
                }
                if diff > 0.0 {
                    if ni > c {
                        ni = c;
                        nj = c - diff;
                    }
                } else if nj > c {
                    nj = c;
                    ni = c + diff;
                }
            } else {
                let quad = (kii + kjj - 2.0 * kij).max(TAU);
                let delta = (self.grad[i] - self.grad[j]) / quad;
                let sum = ai + aj;
                ni = ai - delta;
                nj = aj + delta;
                if sum > c {
                    if ni > c {
                        ni = c;
                        nj = sum - c;
                    }
                } else if nj < 0.0 {
                    nj = 0.0;
                    ni = sum;
                }
                if sum > c {
                    if nj > c {
                        nj = c;
                        ni = sum - c;
                    }
                } else if ni < 0.0 {
                    ni = 0.0;
                    nj = sum;
                }
            }
            let (dai, daj) = (ni - ai, nj - aj);
            self.alpha[i] = ni;
            self.alpha[j] = nj;
            let (ri, rj) = (rows.get(pi), rows.get(pj));
            for t in 0..self.members.len() {
                let pt = self.members[t];
                let yt = self.y[t];
                self.grad[t] += yt * (yi * ri[pt] * dai + yj * rj[pt] * daj);
            }
        }
        self.iterations += iters;
        self.bias = self.compute_bias();
        self.coefficients()
            .into_iter()
            .zip(before.into_iter().chain(std::iter::repeat(0.0)))
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(k, (a, b))| (k, a - b))
            .collect()
    }

    fn compute_bias(&self) -> f64 {
        let (mut free_sum, mut free_n) = (0.0, 0usize);
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in 0..self.members.len() {
            let yg = self.y[t] * self.grad[t];
            let a = self.alpha[t];
            if a > 0.0 && a < self.cost {
                free_sum += yg;
                free_n += 1;
            } else if (self.y[t] > 0.0 && a >= self.cost) || (self.y[t] < 0.0 && a <= 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
        let rho = if free_n > 0 {
            free_sum / free_n as f64
        } else {
            0.5 * (ub + lb)
        };
        -rho
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: Kernel,
    /// Training points with nonzero coefficient.
    pub support: Vec<Vec<f64>>,
    /// Signed coefficients `alpha_k y_k` of the support points.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    /// Caller-side identifiers of the support points.
    pub labeled_refs: Vec<usize>,
    /// Primal weights, linear kernel only.
    pub weights: Option<Vec<f64>>,
}

impl SvmModel {
    pub fn from_parts(
        kernel: Kernel,
        support: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
        bias: f64,
        labeled_refs: Vec<usize>,
    ) -> Self {
        let weights = match kernel {
            Kernel::Linear => {
                let d = support.first().map(Vec::len).unwrap_or(0);
                let mut w = vec![0.0; d];
                for (x, c) in support.iter().zip(&coefficients) {
                    for (wk, xk) in w.iter_mut().zip(x) {
                        *wk += c * xk;
                    }
                }
                Some(w)
            }
            Kernel::Rbf { .. } => None,
        };
        Self {
            kernel,
            support,
            coefficients,
            bias,
            labeled_refs,
            weights,
        }
    }

    /// Linear model given directly by its weights.
    pub fn linear(weights: Vec<f64>, bias: f64) -> Self {
        Self {
            kernel: Kernel::Linear,
            support: Vec::new(),
            coefficients: Vec::new(),
            bias,
            labeled_refs: Vec::new(),
            weights: Some(weights),
        }
    }

    fn from_state(state: &SmoState, rows: &KernelRows, refs: Option<&[usize]>) -> Self {
        let coef = state.coefficients();
        let mut support = Vec::new();
        let mut coefficients = Vec::new();
        let mut labeled_refs = Vec::new();
        for (k, &c) in coef.iter().enumerate() {
            if c != 0.0 {
                let p = state.members[k];
                support.push(rows.points()[p].clone());
                coefficients.push(c);
                labeled_refs.push(refs.map_or(p, |r| r[p]));
            }
        }
        Self::from_parts(rows.kernel(), support, coefficients, state.bias, labeled_refs)
    }

    /// Decision value; uses the primal weights when available.
    pub fn score(&self, x: &[f64]) -> f64 {
        if let Some(w) = &self.weights {
            return w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.bias;
        }
        self.kernel_score(x)
    }

    /// Decision value from the kernel expansion.
    pub fn kernel_score(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coefficients)
            .map(|(s, c)| c * self.kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        Label::from_sign(self.score(x) > 0.0)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.kernel {
            Kernel::Linear => {
                let _ = writeln!(s, "# kernel=linear");
            }
            Kernel::Rbf { gamma } => {
                let _ = writeln!(s, "# kernel=rbf");
                let _ = writeln!(s, "# gamma={gamma}");
            }
        }
        let _ = writeln!(s, "# bias={}", self.bias);
        if let Some(w) = &self.weights {
            let w: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "# weights={}", w.join(" "));
        }
        let d = self.support.first().map(Vec::len).unwrap_or(0);
        let mut header = vec!["id".to_string(), "coef".to_string()];
        header.extend((0..d).map(|k| format!("x{k}")));
        let _ = writeln!(s, "{}", header.join(","));
        for ((x, c), id) in self.support.iter().zip(&self.coefficients).zip(&self.labeled_refs) {
            let mut row = vec![id.to_string(), c.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut meta = std::collections::HashMap::new();
        for line in text.lines() {
            if let Some(rest) = line.trim().strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }
        let num = |k: &str| -> Result<f64> {
            meta.get(k)
                .ok_or_else(|| Error::invalid(format!("missing `{k}`")))?
                .parse()
                .map_err(|e| Error::invalid(format!("`{k}`: {e}")))
        };
        let kernel = match meta.get("kernel").map(String::as_str) {
            Some("linear") => Kernel::Linear,
            Some("rbf") => Kernel::Rbf { gamma: num("gamma")? },
            _ => return Err(Error::invalid("missing or unknown kernel")),
        };
        let bias = num("bias")?;
        let t = Table::parse(text)?;
        let ids = t.column_usize("id")?;
        let coefficients = t.column_f64("coef")?;
        let d = t.header.len() - 2;
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|k| t.column_f64(&format!("x{k}")))
            .collect::<Result<_>>()?;
        let support = (0..ids.len())
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        let mut m = Self::from_parts(kernel, support, coefficients, bias, ids);
        if let (Some(w), Kernel::Linear) = (meta.get("weights"), kernel) {
            if m.support.is_empty() {
                let w = w
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|e| Error::invalid(e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                m.weights = Some(w);
            }
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Trained model plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct TrainedSvm {
    pub model: SvmModel,
    pub state: SmoState,
}

/// Solves the dual from zero multipliers. Labels must include both classes.
pub fn train_svm(xs: &[Vec<f64>], labels: &[Label], kernel: Kernel, cost: f64) -> Result<TrainedSvm> {
    train_svm_with(xs, labels, kernel, cost, DEFAULT_TOLERANCE)
}

pub fn train_svm_with(
    xs: &[Vec<f64>],
    labels: &[Label],
    kernel: Kernel,
    cost: f64,
    tolerance: f64,
) -> Result<TrainedSvm> {
    kernel.validate()?;
    if xs.len() != labels.len() {
        return Err(Error::invalid("points and labels differ in length"));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("need at least 2 training points"));
    }
    let d = xs[0].len();
    if xs.iter().any(|x| x.len() != d) {
        return Err(Error::invalid("training points differ in dimension"));
    }
    let pos = labels.iter().any(|l| l.is_positive());
    let neg = labels.iter().any(|l| !l.is_positive());
    if !(pos && neg) {
        return Err(Error::invalid("training set must contain both classes"));
    }
    let mut rows = KernelRows::new(xs.to_vec(), kernel);
    let mut state = SmoState::new(cost, tolerance)?;
    for (i, &l) in labels.iter().enumerate() {
        state.push(i, l, 0.0);
    }
    state.solve(&mut rows);
    let model = SvmModel::from_state(&state, &rows, None);
    Ok(TrainedSvm { model, state })
}

pub(crate) fn model_from_members(state: &SmoState, rows: &KernelRows) -> SvmModel {
    SvmModel::from_state(state, rows, None)
}

/// Dual objective `sum(a) - ½ sum_ij a_i a_j y_i y_j K_ij` computed
/// directly from the Gram matrix.
pub fn dual_objective(xs: &[Vec<f64>], labels: &[Label], kernel: Kernel, alpha: &[f64]) -> f64 {
    let n = xs.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * labels[i].sign() * labels[j].sign() * kernel.eval(&xs[i], &xs[j]);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}
