/// Result of a peak search.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSearch {
    /// Refined peak locations in degrees, ascending.
    pub angles: Vec<f64>,
    /// `false` when fewer than the requested number of local maxima exist.
    pub complete: bool,
}

/// Keeps the `l` largest interior local maxima of `spectrum` and refines each
/// by a three-point parabola through the log-spectrum.
pub fn find_peaks(spectrum: &[f64], grid_deg: &[f64], l: usize) -> PeakSearch {
    assert_eq!(spectrum.len(), grid_deg.len(), "spectrum and grid lengths differ");
    let n = spectrum.len();
    let mut maxima: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| spectrum[i] > spectrum[i - 1] && spectrum[i] >= spectrum[i + 1])
        .collect();
    // Stable: equal heights keep grid order.
    maxima.sort_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]));
    maxima.truncate(l);
    let mut angles: Vec<f64> = maxima
        .iter()
        .map(|&i| {
            let (y0, y1, y2) = (spectrum[i - 1].ln(), spectrum[i].ln(), spectrum[i + 1].ln());
            let curvature = y0 - 2.0 * y1 + y2;
            let offset = if curvature < 0.0 && curvature.is_finite() {
                (0.5 * (y0 - y2) / curvature).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let step = if offset >= 0.0 {
                grid_deg[i + 1] - grid_deg[i]
            } else {
                grid_deg[i] - grid_deg[i - 1]
            };
            grid_deg[i] + offset * step
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    PeakSearch {
        complete: angles.len() == l,
        angles,
    }
}
