//! Small descriptive-statistics helpers shared across modules.

use alloc::vec::Vec;
use libm::{fabs, floor, sqrt};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

fn sorted_finite(xs: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolation quantile of already sorted data, `q` in [0, 1].
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Quantile ignoring NaNs.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted_finite(xs), q)
}

/// Median ignoring NaNs; NaN when nothing is left.
pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

pub fn iqr(xs: &[f64]) -> f64 {
    let s = sorted_finite(xs);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// Symmetric trimmed mean: drops `floor(fraction * n)` values from each tail.
pub fn trimmed_mean(xs: &[f64], fraction: f64) -> f64 {
    let s = sorted_finite(xs);
    if s.is_empty() {
        return f64::NAN;
    }
    let cut = floor(fraction * s.len() as f64) as usize;
    let kept = if 2 * cut >= s.len() { &s[..] } else { &s[cut..s.len() - cut] };
    // Shifted so a constant trace aggregates to exactly that constant.
    let shift = kept[0];
    shift + kept.iter().map(|v| v - shift).sum::<f64>() / kept.len() as f64
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / sqrt(saa * sbb)).clamp(-1.0, 1.0)
}

pub fn relative_error(estimate: f64, truth: f64) -> f64 {
    fabs(estimate - truth) / fabs(truth)
}
