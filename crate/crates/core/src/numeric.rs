//! Small numerical helpers shared across modules.

use rayon::prelude::*;

/// Chunk length for parallel reductions. Partial sums are formed over fixed
/// chunks and combined in index order, so the result does not depend on the
/// number of worker threads.
pub(crate) const REDUCE_CHUNK: usize = 4096;

/// Sum of `f` over a slice, bit-stable for any thread count.
pub(crate) fn stable_sum<T, F>(values: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync,
{
    if values.len() <= REDUCE_CHUNK {
        return values.iter().map(&f).sum();
    }
    let partials: Vec<f64> = values
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| chunk.iter().map(&f).sum::<f64>())
        .collect();
    partials.iter().sum()
}

/// Maximum of `f` over a slice (order independent).
pub(crate) fn stable_max<T, F>(values: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync,
{
    values
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| chunk.iter().map(&f).fold(0.0_f64, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// Ordinary least squares fit `y = slope * x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub r2: f64,
}

/// Weighted least squares; `weights` may be `None` for unit weights.
/// Returns `None` with fewer than two points or a degenerate abscissa.
pub fn linear_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    if !(sw > 0.0) {
        return None;
    }
    let mx = (0..n).map(|i| w(i) * xs[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| w(i) * ys[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w(i) * (xs[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w(i) * (xs[i] - mx) * (ys[i] - my)).sum();
    let syy: f64 = (0..n).map(|i| w(i) * (ys[i] - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = (0..n)
        .map(|i| w(i) * (ys[i] - slope * xs[i] - intercept).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Some(LinearFit {
        slope,
        intercept,
        residual: (sse / sw).sqrt(),
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let fit = linear_fit(&xs, &ys, None).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept + 1.0).abs() < 1e-14);
        assert!((fit.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_abscissa_is_rejected() {
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0], None).is_none());
        assert!(linear_fit(&[1.0], &[0.0], None).is_none());
    }

    #[test]
    fn stable_sum_matches_serial() {
        let v: Vec<f64> = (0..20_000).map(|i| (i as f64).sin()).collect();
        let serial: f64 = v
            .chunks(REDUCE_CHUNK)
            .map(|c| c.iter().sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum();
        assert_eq!(stable_sum(&v, |x| *x), serial);
    }
}
