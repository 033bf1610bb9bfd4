//! Estimators connecting simulations to the analytic predictions: weighted
//! histograms, Kolmogorov–Smirnov distances, moments with jackknife errors,
//! and mean-squared-displacement fits.
//!
//! Reductions are plain left-to-right sums; partitioned inputs reassemble to
//! the same values up to floating-point reassociation (tested to 1e-10
//! relative).

use crate::error::{Error, Result};
use crate::geometry;

/// Sample values with nonnegative weights (for example holding times
/// `ell_star/|p|` when converting per-collision statistics to time
/// statistics).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::DegenerateSample(
                "values and weights must have equal length".into(),
            ));
        }
        if values.is_empty() {
            return Err(Error::DegenerateSample("empty sample".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::DegenerateSample(
                "weights must be finite and >= 0".into(),
            ));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::DegenerateSample(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(WeightedSample { values, weights })
    }

    pub fn unweighted(values: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; values.len()];
        WeightedSample::new(values, weights)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Histogram masses plus out-of-range mass on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    pub underflow: f64,
    pub overflow: f64,
}

impl Histogram {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.underflow + self.overflow
    }
}

/// Bins the weighted sample into `[e_i, e_{i+1})` cells; values below the
/// first edge count as underflow, values at or above the last as overflow.
pub fn weighted_histogram(sample: &WeightedSample, edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 {
        return Err(Error::BadEdges("need at least two edges".into()));
    }
    if edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::BadEdges("edges must be strictly increasing".into()));
    }
    let mut masses = vec![0.0; edges.len() - 1];
    let mut underflow = 0.0;
    let mut overflow = 0.0;
    for (&x, &w) in sample.values().iter().zip(sample.weights()) {
        if !x.is_finite() || x < edges[0] {
            underflow += w;
        } else if x >= edges[edges.len() - 1] {
            overflow += w;
        } else {
            // partition_point gives the first edge > x; bin index is one less.
            let idx = edges.partition_point(|e| *e <= x) - 1;
            masses[idx] += w;
        }
    }
    Ok(Histogram {
        edges: edges.to_vec(),
        masses,
        underflow,
        overflow,
    })
}

/// Weighted empirical distribution function: sorted support points with
/// normalized cumulative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    points: Vec<f64>,
    /// Cumulative weight *after* each point, normalized; ends at 1.
    cum: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_sample(sample: &WeightedSample) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = sample
            .values()
            .iter()
            .copied()
            .zip(sample.weights().iter().copied())
            .collect();
        if pairs.iter().any(|(v, _)| !v.is_finite()) {
            return Err(Error::DegenerateSample("non-finite value".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|(_, w)| w).sum();
        let mut cum = Vec::with_capacity(pairs.len());
        let mut acc = 0.0;
        for (_, w) in &pairs {
            acc += w;
            cum.push(acc / total);
        }
        // Normalization closes at exactly 1.
        *cum.last_mut().unwrap() = 1.0;
        Ok(EmpiricalCdf {
            points: pairs.into_iter().map(|(v, _)| v).collect(),
            cum,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Value of the empirical CDF at `x` (right-continuous).
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|p| *p <= x);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// Kolmogorov–Smirnov distance to a model CDF, taking both one-sided
    /// gaps at every jump point.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, model_cdf: F) -> f64 {
        let mut d = 0.0f64;
        let mut prev = 0.0;
        for (i, &x) in self.points.iter().enumerate() {
            let m = model_cdf(x);
            d = d.max((self.cum[i] - m).abs());
            d = d.max((prev - m).abs());
            prev = self.cum[i];
        }
        d.min(1.0)
    }
}

/// Sup-norm KS distance between a weighted sample and a model CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &WeightedSample, model_cdf: F) -> Result<f64> {
    Ok(EmpiricalCdf::from_sample(sample)?.ks_distance(model_cdf))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub order: u32,
    pub value: f64,
    pub std_error: f64,
}

/// Weighted raw moments with block-deleted jackknife standard errors.
///
/// `block_len` groups consecutive entries so autocorrelated chains get
/// honest errors; the sample must span at least two blocks.
pub fn moments(
    sample: &WeightedSample,
    orders: &[u32],
    block_len: usize,
) -> Result<Vec<MomentEstimate>> {
    if orders.iter().any(|&k| k == 0) {
        return Err(Error::InvalidParam("moment orders must be >= 1".into()));
    }
    let n = sample.len();
    if block_len == 0 || n < 2 * block_len {
        return Err(Error::DegenerateSample(format!(
            "need at least two blocks of {block_len}, have {n} entries"
        )));
    }
    let n_blocks = n.div_ceil(block_len);
    let mut out = Vec::with_capacity(orders.len());
    for &k in orders {
        let pow = |x: f64| x.powi(k as i32);
        // Per-block sums of w x^k and w.
        let mut bw = vec![0.0; n_blocks];
        let mut bwx = vec![0.0; n_blocks];
        for (i, (&x, &w)) in sample.values().iter().zip(sample.weights()).enumerate() {
            let blk = i / block_len;
            bw[blk] += w;
            bwx[blk] += w * pow(x);
        }
        let tot_w: f64 = bw.iter().sum();
        let tot_wx: f64 = bwx.iter().sum();
        let value = tot_wx / tot_w;
        // Delete-one-block estimates.
        let mut deleted = Vec::with_capacity(n_blocks);
        for j in 0..n_blocks {
            let w = tot_w - bw[j];
            if w > 0.0 {
                deleted.push((tot_wx - bwx[j]) / w);
            }
        }
        let b = deleted.len() as f64;
        if deleted.len() < 2 {
            return Err(Error::DegenerateSample(
                "all weight concentrated in one block".into(),
            ));
        }
        let mean: f64 = deleted.iter().sum::<f64>() / b;
        let ss: f64 = deleted.iter().map(|d| (d - mean) * (d - mean)).sum();
        let std_error = ((b - 1.0) / b * ss).sqrt();
        out.push(MomentEstimate {
            order: k,
            value,
            std_error,
        });
    }
    Ok(out)
}

/// Mean-squared displacement curve with its log-log fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdFit {
    pub lags: Vec<f64>,
    pub msd: Vec<f64>,
    /// Log-log slope fitted over the top decade of lags.
    pub exponent: f64,
    /// `MSD = 2 d D t` estimate averaged over the top decade.
    pub diffusion_const: f64,
}

/// Time-averaged mean-squared displacement of a piecewise-linear trajectory
/// over the given physical time lags, plus a log-log fit over the top decade.
///
/// Positions between recorded states are interpolated linearly, which is
/// exact for ballistic flights.
pub fn msd_fit(times: &[f64], positions: &[Vec<f64>], lags: &[f64]) -> Result<MsdFit> {
    if times.len() != positions.len() {
        return Err(Error::InvalidParam(
            "times and positions must have equal length".into(),
        ));
    }
    if times.len() < 1000 {
        return Err(Error::TooShort(format!(
            "need at least 1000 recorded states, have {}",
            times.len()
        )));
    }
    if lags.is_empty() || lags.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidParam("lags must be positive".into()));
    }
    let dim = positions[0].len();
    let t0 = times[0];
    let t1 = *times.last().unwrap();
    let max_lag = lags.iter().cloned().fold(f64::MIN, f64::max);
    if max_lag >= t1 - t0 {
        return Err(Error::TooShort(
            "largest lag exceeds the trajectory span".into(),
        ));
    }

    let eval = |t: f64| -> Vec<f64> {
        let idx = times.partition_point(|&u| u <= t).clamp(1, times.len() - 1);
        let (ta, tb) = (times[idx - 1], times[idx]);
        let frac = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
        positions[idx - 1]
            .iter()
            .zip(&positions[idx])
            .map(|(a, b)| a + frac * (b - a))
            .collect()
    };

    const N_ORIGINS: usize = 400;
    let mut msd = Vec::with_capacity(lags.len());
    for &lag in lags {
        let span = t1 - t0 - lag;
        let mut acc = 0.0;
        for i in 0..N_ORIGINS {
            let s = t0 + span * i as f64 / N_ORIGINS as f64;
            let a = eval(s);
            let b = eval(s + lag);
            let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
            acc += geometry::norm_sq(&d);
        }
        msd.push(acc / N_ORIGINS as f64);
    }

    // Log-log least squares over the top decade of lags.
    let cut = max_lag / 10.0;
    let pts: Vec<(f64, f64)> = lags
        .iter()
        .zip(&msd)
        .filter(|(&l, &m)| l >= cut && m > 0.0)
        .map(|(&l, &m)| (l.ln(), m.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::TooShort(
            "not enough lags in the top decade for a fit".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;

    let diffusion_const = lags
        .iter()
        .zip(&msd)
        .filter(|(&l, _)| l >= cut)
        .map(|(&l, &m)| m / (2.0 * dim as f64 * l))
        .sum::<f64>()
        / pts.len() as f64;

    Ok(MsdFit {
        lags: lags.to_vec(),
        msd,
        exponent,
        diffusion_const,
    })
}

/// Logarithmically spaced lags in `[lo, hi]`.
pub fn log_lags(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
