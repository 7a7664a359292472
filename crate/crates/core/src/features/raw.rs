use super::names::RAW_GPS;
use crate::geo::GpsFix;

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn stats(mut xs: Vec<f64>) -> [f64; 5] {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    // shifted by the first sample so identical inputs give exact results
    let shift = xs[0];
    let dev_mean = xs.iter().map(|x| x - shift).sum::<f64>() / n;
    let mean = shift + dev_mean;
    let std = (xs.iter().map(|x| (x - shift - dev_mean).powi(2)).sum::<f64>() / n).sqrt();
    let iqr = quantile_sorted(&xs, 0.75) - quantile_sorted(&xs, 0.25);
    [mean, xs[xs.len() - 1], xs[0], std, iqr]
}

/// Mean, max, min, population std and IQR of the day's latitudes, then longitudes.
/// `None` for a day without fixes.
pub fn raw_gps_features(fixes: &[GpsFix]) -> Option<Vec<(&'static str, f64)>> {
    if fixes.is_empty() {
        return None;
    }
    let lat = stats(fixes.iter().map(|f| f.lat).collect());
    let lon = stats(fixes.iter().map(|f| f.lon).collect());
    Some(RAW_GPS.iter().copied().zip(lat.into_iter().chain(lon)).collect())
}
