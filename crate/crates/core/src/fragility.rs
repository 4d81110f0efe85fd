//! Fragility curves from classifier scores: logistic calibration, 1-D
//! k-means binning, bin-wise reference and estimated probabilities, and the
//! distance and steepness diagnostics.

use rand::Rng;

use crate::error::{Error, Result};
use crate::io::Table;
use crate::oscillator::Label;

/// Slope bound used when the labeled scores are perfectly separated.
pub const MAX_SLOPE: f64 = 1e3;
pub const DEFAULT_BINS: usize = 20;

/// `p(f) = 1 / (1 + exp(-a f + b))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticCalibration {
    pub slope: f64,
    pub intercept: f64,
    /// The slope hit [`MAX_SLOPE`].
    pub capped: bool,
    pub converged: bool,
}

impl LogisticCalibration {
    pub fn probability(&self, score: f64) -> f64 {
        logistic(self.slope * score - self.intercept)
    }

    /// A non-positive slope means higher scores are not riskier.
    pub fn is_sane(&self) -> bool {
        self.slope > 0.0
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood, stable for large |z|.
fn nll(scores: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(y)
        .map(|(&f, &t)| {
            let z = a * f - b;
            // log(1 + e^z) - t z
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - t * z
        })
        .sum()
}

/// Maximum-likelihood calibration by damped Newton steps.
pub fn fit_logistic(scores: &[f64], labels: &[Label]) -> Result<LogisticCalibration> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if !(labels.iter().any(|l| l.is_positive()) && labels.iter().any(|l| !l.is_positive())) {
        return Err(Error::invalid("calibration needs both classes"));
    }
    let y: Vec<f64> = labels.iter().map(|l| if l.is_positive() { 1.0 } else { 0.0 }).collect();
    // Perfect separation: the likelihood keeps growing with the slope, so fix
    // it at the cap and fit the intercept alone.
    let max_neg = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| !l.is_positive())
        .map(|(s, _)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_pos = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.is_positive())
        .map(|(s, _)| *s)
        .fold(f64::INFINITY, f64::min);
    let mut capped = max_neg < min_pos;
    let (mut a, mut b) = if capped {
        (MAX_SLOPE, MAX_SLOPE * 0.5 * (max_neg + min_pos))
    } else {
        (0.0, 0.0)
    };
    let mut converged = false;
    for _ in 0..500 {
        // gradient and Hessian of the NLL in (a, b)
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&f, &t) in scores.iter().zip(&y) {
            let p = logistic(a * f - b);
            let w = p * (1.0 - p);
            ga += (p - t) * f;
            gb -= p - t;
            haa += w * f * f;
            hab -= w * f;
            hbb += w;
        }
        let gnorm = if capped { gb.abs() } else { ga.hypot(gb) };
        if gnorm < 1e-6 {
            converged = true;
            break;
        }
        let (da, db) = if capped {
            (0.0, -gb / hbb.max(1e-12))
        } else {
            let ridge = 1e-12 * (haa + hbb).max(1e-300);
            let (haa, hbb) = (haa + ridge, hbb + ridge);
            let det = haa * hbb - hab * hab;
            if det <= 0.0 {
                (-ga / haa, -gb / hbb)
            } else {
                (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
            }
        };
        let f0 = nll(scores, &y, a, b);
        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            if nll(scores, &y, na, nb) <= f0 || step < 1e-10 {
                a = na;
                b = nb;
                break;
            }
            step *= 0.5;
        }
        if a > MAX_SLOPE {
            // separated data: the likelihood keeps growing with the slope
            b *= MAX_SLOPE / a;
            a = MAX_SLOPE;
            capped = true;
        }
    }
    Ok(LogisticCalibration {
        slope: a,
        intercept: b,
        capped,
        converged,
    })
}

/// Result of 1-D k-means: groups are numbered by increasing center.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    pub assignment: Vec<usize>,
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Binning {
    /// Sum of squared distances to the assigned centers.
    pub fn objective(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.assignment)
            .map(|(v, &g)| (v - self.centers[g]).powi(2))
            .sum()
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

/// Cost of assigning sorted values to the nearest of `centers`.
pub fn assignment_cost(values: &[f64], centers: &[f64]) -> f64 {
    values
        .iter()
        .map(|v| {
            centers
                .iter()
                .map(|c| (v - c).powi(2))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

fn lloyd(sorted: &[f64], prefix: &[f64], mut centers: Vec<f64>) -> (Vec<usize>, Vec<f64>) {
    let n = sorted.len();
    let k = centers.len();
    // boundaries[g] = first sorted index of group g
    let mut bounds = vec![0usize; k + 1];
    for _ in 0..1000 {
        centers.sort_by(f64::total_cmp);
        bounds[0] = 0;
        bounds[k] = n;
        for g in 1..k {
            let mid = 0.5 * (centers[g - 1] + centers[g]);
            bounds[g] = sorted.partition_point(|&v| v <= mid).max(bounds[g - 1]);
        }
        let mut moved = false;
        for g in 0..k {
            let (lo, hi) = (bounds[g], bounds[g + 1]);
            if hi > lo {
                let c = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
                if c != centers[g] {
                    moved = true;
                    centers[g] = c;
                }
            }
        }
        if !moved {
            break;
        }
    }
    (bounds, centers)
}

fn kmeanspp<R: Rng + ?Sized>(distinct: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut centers = vec![distinct[rng.random_range(0..distinct.len())]];
    let mut d2: Vec<f64> = distinct.iter().map(|v| (v - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = d2.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..distinct.len())
        };
        let c = distinct[pick];
        centers.push(c);
        for (d, v) in d2.iter_mut().zip(distinct) {
            *d = d.min((v - c).powi(2));
        }
    }
    centers
}

/// Best of `restarts` k-means++ seeded Lloyd runs on 1-D data. Groups are
/// contiguous in value and never empty.
pub fn bin_by_projection<R: Rng + ?Sized>(
    values: &[f64],
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<Binning> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("projection values must be finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if k < 1 || k > distinct.len() {
        return Err(Error::invalid(format!(
            "need 1 <= K <= {} distinct values, got K = {k}",
            distinct.len()
        )));
    }
    let mut prefix = vec![0.0; sorted.len() + 1];
    for (i, v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for _ in 0..restarts.max(1) {
        let (bounds, centers) = if k == distinct.len() {
            lloyd(&sorted, &prefix, distinct.clone())
        } else {
            lloyd(&sorted, &prefix, kmeanspp(&distinct, k, rng))
        };
        if (0..k).any(|g| bounds[g + 1] == bounds[g]) {
            continue;
        }
        let cost: f64 = (0..k)
            .map(|g| {
                sorted[bounds[g]..bounds[g + 1]]
                    .iter()
                    .map(|v| (v - centers[g]).powi(2))
                    .sum::<f64>()
            })
            .sum();
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, bounds, centers));
        }
        if k == distinct.len() {
            break;
        }
    }
    let (_, bounds, centers) =
        best.ok_or_else(|| Error::invalid("k-means produced an empty group on every restart"))?;
    // map each value to its group through the sorted boundaries
    let assignment = values
        .iter()
        .map(|v| {
            let pos = sorted.partition_point(|s| s < v);
            (0..k).find(|&g| pos < bounds[g + 1]).expect("value inside range")
        })
        .collect();
    let counts = (0..k).map(|g| bounds[g + 1] - bounds[g]).collect();
    Ok(Binning {
        assignment,
        centers,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Score,
    Pga,
    LinDisp,
    /// The combined probability itself, for the linear/RBF hybrid.
    Hybrid,
}

impl Projection {
    pub fn name(self) -> &'static str {
        match self {
            Projection::Score => "score",
            Projection::Pga => "pga",
            Projection::LinDisp => "linDisp",
            Projection::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub center: f64,
    pub n: usize,
    pub p_ref: f64,
    pub p_est: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragilityCurve {
    pub projection: Projection,
    pub bins: Vec<Bin>,
    pub delta_l2: f64,
    pub entropy: f64,
    pub uncertain_fraction: f64,
}

/// `sqrt(sum n_k (pRef - pEst)^2 / N)`.
pub fn delta_l2(bins: &[Bin]) -> f64 {
    let total: usize = bins.iter().map(|b| b.n).sum();
    if total == 0 {
        return 0.0;
    }
    (bins
        .iter()
        .map(|b| b.n as f64 * (b.p_ref - b.p_est).powi(2))
        .sum::<f64>()
        / total as f64)
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Steepness {
    /// `phi(p) = -p ln p`.
    Entropy,
    /// `phi(p) = 1` for `p` in `[0.1, 0.9]`.
    UncertainBand,
}

impl Steepness {
    pub fn phi(self, p: f64) -> f64 {
        match self {
            Steepness::Entropy if p <= 0.0 => 0.0,
            Steepness::Entropy => -p * p.ln(),
            Steepness::UncertainBand => {
                if (0.1..=0.9).contains(&p) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Bin-weighted mean of `phi(pEst)`.
pub fn steepness(bins: &[Bin], phi: Steepness) -> f64 {
    let total: usize = bins.iter().map(|b| b.n).sum();
    if total == 0 {
        return 0.0;
    }
    bins.iter().map(|b| b.n as f64 * phi.phi(b.p_est)).sum::<f64>() / total as f64
}

/// Bins the pool by `values` and compares the mean calibrated probability
/// with the empirical failure fraction per bin.
pub fn curve<R: Rng + ?Sized>(
    projection: Projection,
    labels: &[Label],
    probabilities: &[f64],
    values: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<FragilityCurve> {
    let n = labels.len();
    if probabilities.len() != n || values.len() != n {
        return Err(Error::invalid("curve inputs differ in length"));
    }
    if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("probabilities must lie in [0, 1]"));
    }
    let binning = bin_by_projection(values, k, 10, rng)?;
    let k = binning.k();
    let mut pos = vec![0usize; k];
    let mut psum = vec![0.0; k];
    for i in 0..n {
        let g = binning.assignment[i];
        if labels[i].is_positive() {
            pos[g] += 1;
        }
        psum[g] += probabilities[i];
    }
    let bins: Vec<Bin> = (0..k)
        .filter(|&g| binning.counts[g] > 0)
        .map(|g| {
            let c = binning.counts[g] as f64;
            Bin {
                center: binning.centers[g],
                n: binning.counts[g],
                p_ref: pos[g] as f64 / c,
                p_est: psum[g] / c,
            }
        })
        .collect();
    Ok(FragilityCurve {
        projection,
        delta_l2: delta_l2(&bins),
        entropy: steepness(&bins, Steepness::Entropy),
        uncertain_fraction: steepness(&bins, Steepness::UncertainBand),
        bins,
    })
}

/// Linear probability when it is decisive, RBF probability otherwise.
pub fn hybrid_probability(p_lin: f64, p_rbf: f64) -> f64 {
    if !(0.05..=0.95).contains(&p_lin) {
        p_lin
    } else {
        p_rbf
    }
}

/// Positive fraction per k-means bin of the labeled PGA values only. This
/// ignores how the labeled set was chosen and is misleading for actively
/// selected sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOnlyCurve {
    /// `(center, n, positive fraction)`, sorted by center.
    pub bins: Vec<(f64, usize, f64)>,
}

impl LabeledOnlyCurve {
    /// Unweighted mean of the bin fractions.
    pub fn mean_probability(&self) -> f64 {
        self.bins.iter().map(|b| b.2).sum::<f64>() / self.bins.len() as f64
    }

    /// Fraction of the bin whose center is nearest to `value`.
    pub fn probability_at(&self, value: f64) -> f64 {
        self.bins
            .iter()
            .min_by(|a, b| (a.0 - value).abs().total_cmp(&(b.0 - value).abs()))
            .map(|b| b.2)
            .unwrap_or(0.0)
    }
}

pub fn labeled_only_diagnostic<R: Rng + ?Sized>(
    pga: &[f64],
    labels: &[Label],
    k: usize,
    rng: &mut R,
) -> Result<LabeledOnlyCurve> {
    if pga.len() != labels.len() || pga.is_empty() {
        return Err(Error::invalid("labeled PGA and labels must be non-empty and equal length"));
    }
    let binning = bin_by_projection(pga, k, 10, rng)?;
    let mut pos = vec![0usize; binning.k()];
    for (g, l) in binning.assignment.iter().zip(labels) {
        if l.is_positive() {
            pos[*g] += 1;
        }
    }
    Ok(LabeledOnlyCurve {
        bins: (0..binning.k())
            .map(|g| {
                (
                    binning.centers[g],
                    binning.counts[g],
                    pos[g] as f64 / binning.counts[g] as f64,
                )
            })
            .collect(),
    })
}

pub const CURVE_COLUMNS: [&str; 5] = ["projection", "center", "n", "pRef", "pEst"];

pub fn curves_table(curves: &[&FragilityCurve]) -> Table {
    let mut t = Table::new(CURVE_COLUMNS);
    for c in curves {
        for b in &c.bins {
            t.push([
                c.projection.name().to_string(),
                b.center.to_string(),
                b.n.to_string(),
                b.p_ref.to_string(),
                b.p_est.to_string(),
            ]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    const P: Label = Label::Positive;
    const N: Label = Label::Negative;

    #[test]
    fn logistic_at_zero() {
        let c = LogisticCalibration {
            slope: 3.0,
            intercept: 0.0,
            capped: false,
            converged: true,
        };
        assert_eq!(c.probability(0.0), 0.5);
    }

    #[test]
    fn symmetric_set_has_no_intercept() {
        let scores = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, -0.3, 0.3];
        let labels = [N, N, P, N, P, P, N, P];
        let c = fit_logistic(&scores, &labels).unwrap();
        assert!(c.intercept.abs() < 1e-6, "{c:?}");
        assert!(c.converged && c.is_sane());
    }

    #[test]
    fn separated_scores_cap_the_slope() {
        let c = fit_logistic(&[-1.0, -0.5, 0.4, 2.0], &[N, N, P, P]).unwrap();
        assert!(c.capped);
        assert_eq!(c.slope, MAX_SLOPE);
        assert!(c.probability(1.0) > 0.99 && c.probability(-1.0) < 0.01);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(fit_logistic(&[1.0, 2.0], &[P, P]).is_err());
    }

    #[test]
    fn calibration_matches_grid_search() {
        let mut rng = stream(1, "logit", 0);
        let scores: Vec<f64> = (0..50).map(|_| rng.random_range(-3.0..3.0)).collect();
        let labels: Vec<Label> = scores
            .iter()
            .map(|&s| Label::from_sign(rng.random::<f64>() < 1.0 / (1.0 + (-1.5 * s + 0.4f64).exp())))
            .collect();
        let c = fit_logistic(&scores, &labels).unwrap();
        let y: Vec<f64> = labels.iter().map(|l| if l.is_positive() { 1.0 } else { 0.0 }).collect();
        let loglik = |a: f64, b: f64| -> f64 {
            scores
                .iter()
                .zip(&y)
                .map(|(&f, &t)| {
                    let p = 1.0 / (1.0 + (-a * f + b).exp());
                    t * p.ln() + (1.0 - t) * (1.0 - p).ln()
                })
                .sum()
        };
        let h = 0.01;
        let (mut best, mut ba, mut bb) = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..=500 {
            for j in 0..=400 {
                let (a, b) = (i as f64 * h, -2.0 + j as f64 * h);
                let v = loglik(a, b);
                if v > best {
                    (best, ba, bb) = (v, a, b);
                }
            }
        }
        assert!((c.slope - ba).abs() <= h, "{} vs {ba}", c.slope);
        assert!((c.intercept - bb).abs() <= h, "{} vs {bb}", c.intercept);
    }

    #[test]
    fn singleton_groups_when_k_equals_distinct_count() {
        let v = [3.0, 1.0, 2.0, 5.0];
        let b = bin_by_projection(&v, 4, 1, &mut stream(0, "km", 0)).unwrap();
        assert_eq!(b.counts, vec![1, 1, 1, 1]);
        assert_eq!(b.centers, vec![1.0, 2.0, 3.0, 5.0]);
        assert_eq!(b.assignment, vec![2, 0, 1, 3]);
        assert!(bin_by_projection(&v, 5, 1, &mut stream(0, "km", 0)).is_err());
    }

    #[test]
    fn well_separated_clusters_recovered() {
        let v = [0.1, 0.2, 0.0, 10.0, 10.3, 9.9, 0.15];
        let b = bin_by_projection(&v, 2, 3, &mut stream(1, "km", 0)).unwrap();
        assert_eq!(b.assignment, vec![0, 0, 0, 1, 1, 1, 0]);
    }

    #[test]
    fn lloyd_beats_random_seedings() {
        let mut rng = stream(2, "km-data", 0);
        let v: Vec<f64> = (0..400).map(|_| rng.random::<f64>().powi(3) * 10.0).collect();
        let b = bin_by_projection(&v, 20, 10, &mut stream(3, "km", 0)).unwrap();
        let obj = b.objective(&v);
        for _ in 0..100 {
            let centers: Vec<f64> = (0..20).map(|_| v[rng.random_range(0..v.len())]).collect();
            assert!(obj <= assignment_cost(&v, &centers));
        }
    }

    fn bins(p_ref: &[f64], p_est: &[f64], n: &[usize]) -> Vec<Bin> {
        (0..n.len())
            .map(|k| Bin {
                center: k as f64,
                n: n[k],
                p_ref: p_ref[k],
                p_est: p_est[k],
            })
            .collect()
    }

    #[test]
    fn distance_and_steepness_identities() {
        let b = bins(&[0.1, 0.5, 0.9], &[0.1, 0.5, 0.9], &[3, 4, 5]);
        assert_eq!(delta_l2(&b), 0.0);
        let perfect = bins(&[0.0, 1.0], &[0.0, 1.0], &[5, 5]);
        assert_eq!(steepness(&perfect, Steepness::Entropy), 0.0);
        assert_eq!(steepness(&perfect, Steepness::UncertainBand), 0.0);
        let half = bins(&[0.5, 0.5], &[0.5, 0.5], &[2, 7]);
        assert_eq!(steepness(&half, Steepness::UncertainBand), 1.0);
        assert!((steepness(&half, Steepness::Entropy) - 0.5 * 2f64.ln()).abs() < 1e-15);
        let off = bins(&[0.0, 1.0], &[0.5, 0.5], &[1, 3]);
        assert!((delta_l2(&off) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_negative_pool_gives_a_flat_zero_curve() {
        let v: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let c = curve(Projection::Pga, &[N; 50], &[0.0; 50], &v, 5, &mut stream(0, "c", 0)).unwrap();
        assert!(c.bins.iter().all(|b| b.p_ref == 0.0 && b.p_est == 0.0));
        assert_eq!(c.delta_l2, 0.0);
        assert_eq!(c.bins.iter().map(|b| b.n).sum::<usize>(), 50);
    }

    #[test]
    fn hybrid_branches() {
        assert_eq!(hybrid_probability(0.01, 0.4), 0.01);
        assert_eq!(hybrid_probability(0.97, 0.4), 0.97);
        assert_eq!(hybrid_probability(0.5, 0.3), 0.3);
    }

    #[test]
    fn single_bin_diagnostic_is_the_positive_fraction() {
        let d = labeled_only_diagnostic(&[1.0, 2.0, 3.0, 4.0], &[P, N, N, N], 1, &mut stream(0, "d", 0))
            .unwrap();
        assert_eq!(d.bins.len(), 1);
        assert_eq!(d.mean_probability(), 0.25);
    }

    proptest! {
        #[test]
        fn groups_are_contiguous_intervals(
            v in prop::collection::vec(-100.0f64..100.0, 5..80),
            k in 1usize..6,
            seed in 0u64..1000,
        ) {
            let mut d = v.clone();
            d.sort_by(f64::total_cmp);
            d.dedup();
            prop_assume!(k <= d.len());
            let b = bin_by_projection(&v, k, 2, &mut stream(seed, "km", 0)).unwrap();
            prop_assert_eq!(b.counts.iter().sum::<usize>(), v.len());
            prop_assert!(b.counts.iter().all(|&c| c > 0));
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(b.assignment[i] <= b.assignment[j]);
                    }
                }
            }
        }

        #[test]
        fn score_curve_is_monotone(seed in 0u64..200, a in 0.1f64..5.0, bias in -2.0f64..2.0) {
            let mut rng = stream(seed, "mono", 0);
            let s: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
            let cal = LogisticCalibration { slope: a, intercept: bias, capped: false, converged: true };
            let p: Vec<f64> = s.iter().map(|&x| cal.probability(x)).collect();
            let labels: Vec<Label> = p.iter().map(|&q| Label::from_sign(rng.random::<f64>() < q)).collect();
            let c = curve(Projection::Score, &labels, &p, &s, 10, &mut rng).unwrap();
            prop_assert!(c.bins.windows(2).all(|w| w[1].p_est >= w[0].p_est));
            prop_assert!((0.0..=1.0).contains(&c.delta_l2));
        }
    }
}
