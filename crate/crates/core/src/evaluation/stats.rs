use super::EvalError;
use crate::estimation::FrontEstimate;
use crate::groundtruth::FrontTruth;

/// `(t, Δx)` pairs, Δx = estimate − truth (positive: estimate downstream).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrontErrorSeries {
    pub samples: Vec<(f64, f64)>,
    /// Ticks where the truth had a front but the estimator was degraded.
    pub excluded: usize,
}

/// Upstream-front errors at the estimate times. A tick counts only when the
/// truth bin holding it has an upstream front and the estimate is not
/// degraded.
pub fn front_error(estimates: &[FrontEstimate], truth: &FrontTruth) -> Result<FrontErrorSeries, EvalError> {
    let mut out = FrontErrorSeries::default();
    for e in estimates {
        let Some(x_true) = truth.at(e.t).and_then(|s| s.x_up) else {
            continue;
        };
        match e.x_up {
            Some(x) if !e.degraded => out.samples.push((e.t, x - x_true)),
            _ => out.excluded += 1,
        }
    }
    if out.samples.is_empty() {
        return Err(EvalError::EmptyWindow { excluded: out.excluded });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontErrorStats {
    pub mean: f64,
    /// Population standard deviation (1/n).
    pub std: f64,
    pub n: usize,
    pub excluded: usize,
}

pub fn error_stats(series: &FrontErrorSeries) -> Result<FrontErrorStats, EvalError> {
    let n = series.samples.len();
    if n == 0 {
        return Err(EvalError::EmptyWindow { excluded: series.excluded });
    }
    let (mean, std) = mean_std(series.samples.iter().map(|s| s.1));
    Ok(FrontErrorStats { mean, std, n, excluded: series.excluded })
}

/// Mean and population standard deviation; NaN for an empty input.
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
