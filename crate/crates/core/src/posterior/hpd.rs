use crate::error::{Error, Result};

/// Number of sorted draws an HPD window at `level` must hold: `⌈level·n⌉`.
/// A small slack absorbs representation error in products like `0.95 * 100`.
pub fn hpd_window_size(n: usize, level: f64) -> usize {
    (((level * n as f64) - 1e-9).ceil() as usize).clamp(1, n)
}

/// Shortest contiguous window of the sorted draws that holds
/// `⌈level·n⌉` points. Ties go to the lowest window.
pub fn hpd_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "HPD needs at least 2 draws, got {}",
            draws.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "HPD level {level} outside (0, 1)"
        )));
    }
    if draws.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("HPD draws contain NaN".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(hpd_sorted(&sorted, level))
}

/// As [`hpd_interval`] on draws already sorted ascending.
pub fn hpd_sorted(sorted: &[f64], level: f64) -> (f64, f64) {
    let k = hpd_window_size(sorted.len(), level);
    let (best, _) = sorted
        .windows(k)
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bw), (i, w)| {
            let width = w[k - 1] - w[0];
            if width < bw {
                (i, width)
            } else {
                (bi, bw)
            }
        });
    (sorted[best], sorted[best + k - 1])
}
