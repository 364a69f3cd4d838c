use ftsbench_numeric::DenseMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::{correlation_values, lower_triangle_len, ConditionalSampler, EvalError};
use crate::generators::{percentile, WINDOW};
use crate::panel::window_of;
use crate::rng;

pub const DEFAULT_BOOTSTRAPS: usize = 100;

/// Undirected graph stored as its lower-triangle edge indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationNetwork {
    pub instruments: usize,
    /// Edge indicators ordered `(1,0), (2,0), (2,1), …`.
    pub edges: Vec<bool>,
    pub percentile: f64,
    pub window: usize,
    pub bootstraps: usize,
}

impl CorrelationNetwork {
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (hi, lo) = if i > j { (i, j) } else { (j, i) };
        self.edges[hi * (hi - 1) / 2 + lo]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    /// Dense symmetric adjacency with zero diagonal.
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.instruments;
        (0..n).map(|i| (0..n).map(|j| self.has_edge(i, j)).collect()).collect()
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Uniform draws shared across windows; index `k` of resample `b` is
/// `⌊u·len⌋`, so windows of different length share the same resampling.
struct Resamples {
    draws: Vec<Vec<f64>>,
    wanted: usize,
}

impl Resamples {
    fn new(wanted: usize, len: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed);
        // up to 3B attempts, drawn up front so every window sees the same sequence
        let draws = (0..3 * wanted).map(|_| (0..len).map(|_| r.random::<f64>()).collect()).collect();
        Self { draws, wanted }
    }

    /// Correlation vectors of the first `B` non-degenerate resamples.
    fn correlations(&self, window: &DenseMatrix, out: &mut [Vec<f64>]) -> usize {
        let (n, t) = window.shape();
        let mut used = 0;
        for u in &self.draws {
            if used == self.wanted {
                break;
            }
            let idx: Vec<usize> = u.iter().take(t).map(|&x| ((x * t as f64) as usize).min(t - 1)).collect();
            let resample = DenseMatrix::from_fn(n, t, |i, k| window[(i, idx[k])]);
            if let Ok(c) = correlation_values(&resample) {
                for (slot, v) in out.iter_mut().zip(c) {
                    slot.push(v);
                }
                used += 1;
            }
        }
        used
    }
}

/// Per-edge median bootstrap correlation over one or more windows.
fn median_correlations(windows: &[DenseMatrix], resamples: &Resamples) -> Result<Vec<f64>, EvalError> {
    let n = windows.first().ok_or(EvalError::Empty("windows"))?.rows();
    let mut samples = vec![Vec::new(); lower_triangle_len(n)];
    let mut used = 0;
    for w in windows {
        used += resamples.correlations(w, &mut samples);
    }
    if used == 0 {
        return Err(EvalError::Invalid("every bootstrap resample was degenerate".into()));
    }
    Ok(samples.iter_mut().map(|s| median(s)).collect())
}

fn threshold_network(medians: &[f64], n: usize, pct: f64, window: usize, bootstraps: usize) -> CorrelationNetwork {
    let threshold = percentile(medians, pct).unwrap_or(f64::INFINITY);
    CorrelationNetwork {
        instruments: n,
        edges: medians.iter().map(|&m| m >= threshold - 1e-12).collect(),
        percentile: pct,
        window,
        bootstraps,
    }
}

/// Network of an `N × T` window: edge where the median bootstrap correlation
/// reaches the `percentile` of those medians.
pub fn bootstrap_network(window: &DenseMatrix, pct: f64, bootstraps: usize, seed: u64) -> Result<CorrelationNetwork, EvalError> {
    if bootstraps == 0 {
        return Err(EvalError::Invalid("bootstrap count must be positive".into()));
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(EvalError::Invalid(format!("percentile {pct} outside [0, 100]")));
    }
    let resamples = Resamples::new(bootstraps, window.cols(), seed);
    let medians = median_correlations(std::slice::from_ref(window), &resamples)?;
    Ok(threshold_network(&medians, window.rows(), pct, window.cols(), bootstraps))
}

/// Intersection over union of edge sets; two empty graphs score 1.
pub fn jaccard(a: &CorrelationNetwork, b: &CorrelationNetwork) -> Result<f64, EvalError> {
    if a.instruments != b.instruments {
        return Err(EvalError::SizeMismatch(a.instruments, b.instruments));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.edges.iter().zip(&b.edges) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JaccardConfig {
    pub condition: usize,
    pub horizon: usize,
    pub bootstraps: usize,
    pub batch: usize,
    pub stride: usize,
    pub percentiles: Vec<f64>,
    pub seed: u64,
}

impl Default for JaccardConfig {
    fn default() -> Self {
        Self {
            condition: WINDOW,
            horizon: WINDOW,
            bootstraps: DEFAULT_BOOTSTRAPS,
            batch: 10,
            stride: 1,
            percentiles: (1..=19).map(|k| 5.0 * k as f64).collect(),
            seed: 0,
        }
    }
}

/// Mean daily Jaccard against the future network, per percentile.
#[derive(Debug, Clone, PartialEq)]
pub struct JaccardCurve {
    pub percentiles: Vec<f64>,
    pub past: Vec<f64>,
    pub generated: Vec<f64>,
    pub days: usize,
}

impl JaccardCurve {
    pub fn to_csv(&self, model: &str) -> String {
        let mut s = format!("percentile,past,{model}\n");
        for ((p, a), g) in self.percentiles.iter().zip(&self.past).zip(&self.generated) {
            s.push_str(&format!("{p},{a:.10},{g:.10}\n"));
        }
        s
    }
}

/// For each day builds past-window, future-window and generated-batch
/// networks (sharing bootstrap draws) and averages their Jaccard index
/// against the future network.
pub fn jaccard_curve(returns: &DenseMatrix, sampler: &dyn ConditionalSampler, cfg: &JaccardConfig) -> Result<JaccardCurve, EvalError> {
    let t = returns.rows();
    if t < cfg.condition + cfg.horizon {
        return Err(EvalError::TooShort { len: t, needed: cfg.condition + cfg.horizon });
    }
    let n = returns.cols();
    let days: Vec<usize> = (cfg.condition..=t - cfg.horizon).step_by(cfg.stride.max(1)).collect();
    let len = cfg.condition.max(cfg.horizon);
    let per_day: Vec<Result<(Vec<f64>, Vec<f64>), EvalError>> = days
        .par_iter()
        .map(|&day| {
            let resamples = Resamples::new(cfg.bootstraps, len, rng::derive(cfg.seed, &["network", &day.to_string()]));
            let past = window_of(returns, day - cfg.condition, cfg.condition);
            let future = window_of(returns, day, cfg.horizon);
            let batch = sampler
                .sample(day - cfg.condition, &past, cfg.horizon, cfg.batch, rng::split(cfg.seed, day as u64))
                .map_err(|e| EvalError::Invalid(format!("sampler failed on day {day}: {e}")))?;
            let m_past = median_correlations(std::slice::from_ref(&past), &resamples)?;
            let m_future = median_correlations(std::slice::from_ref(&future), &resamples)?;
            let m_gen = median_correlations(&batch, &resamples)?;
            let mut a = Vec::with_capacity(cfg.percentiles.len());
            let mut g = Vec::with_capacity(cfg.percentiles.len());
            for &p in &cfg.percentiles {
                let f = threshold_network(&m_future, n, p, cfg.horizon, cfg.bootstraps);
                a.push(jaccard(&threshold_network(&m_past, n, p, cfg.condition, cfg.bootstraps), &f)?);
                g.push(jaccard(&threshold_network(&m_gen, n, p, cfg.horizon, cfg.bootstraps), &f)?);
            }
            Ok((a, g))
        })
        .collect();
    let k = cfg.percentiles.len();
    let (mut past, mut generated) = (vec![0.0; k], vec![0.0; k]);
    for day in per_day {
        let (a, g) = day?;
        for i in 0..k {
            past[i] += a[i];
            generated[i] += g[i];
        }
    }
    let d = days.len() as f64;
    past.iter_mut().chain(generated.iter_mut()).for_each(|v| *v /= d);
    Ok(JaccardCurve { percentiles: cfg.percentiles.clone(), past, generated, days: days.len() })
}
