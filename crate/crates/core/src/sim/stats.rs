use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Running sums of one statistic within one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Acc {
    pub n: u64,
    pub sum: f64,
    pub sum2: f64,
}

impl Acc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum2 += x * x;
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }

    fn sd(&self) -> Option<f64> {
        (self.n > 1).then(|| {
            let m = self.sum / self.n as f64;
            let var = (self.sum2 - self.n as f64 * m * m) / (self.n - 1) as f64;
            var.max(0.0).sqrt()
        })
    }
}

/// Batch-means estimate of a mean (and, for per-customer statistics, of a
/// standard deviation) with 95% Student-t confidence half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStat {
    pub mean: f64,
    /// Standard error of `mean`.
    pub se: f64,
    pub ci_half: f64,
    pub sd: Option<f64>,
    pub sd_se: Option<f64>,
    pub sd_ci_half: Option<f64>,
    pub batches: usize,
    pub observations: u64,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

fn t_quantile(batches: usize) -> f64 {
    StudentsT::new(0.0, 1.0, (batches - 1) as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::NAN)
}

/// Combines all batches of all replications. At least two non-empty
/// batches are needed; the sd is estimated only when at least two batches
/// hold two or more observations.
pub(crate) fn estimate(batches: &[Acc]) -> Option<SimStat> {
    let means: Vec<f64> = batches.iter().filter_map(Acc::mean).collect();
    if means.len() < 2 {
        return None;
    }
    let (mean, se) = mean_and_se(&means);
    let sds: Vec<f64> = batches.iter().filter_map(Acc::sd).collect();
    let (sd, sd_se, sd_ci_half) = if sds.len() >= 2 {
        let (s, s_se) = mean_and_se(&sds);
        (Some(s), Some(s_se), Some(t_quantile(sds.len()) * s_se))
    } else {
        (None, None, None)
    };
    Some(SimStat {
        mean,
        se,
        ci_half: t_quantile(means.len()) * se,
        sd,
        sd_se,
        sd_ci_half,
        batches: means.len(),
        observations: batches.iter().map(|a| a.n).sum(),
    })
}

/// Standardized difference `(analytic - simulated) / se`; a zero standard
/// error gives 0 for an exact match and an infinite score otherwise.
pub fn z_score(analytic: f64, simulated: f64, se: f64) -> f64 {
    let diff = analytic - simulated;
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 * analytic.abs().max(1.0) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}
