//! Piecewise-linear lookup on sorted abscissae.

/// Linear interpolation with constant extrapolation beyond the end points.
/// `xs` must be strictly increasing and the same length as `ys`.
pub fn interp1(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n == 1 || x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let hi = xs.partition_point(|&xi| xi <= x);
    let lo = hi - 1;
    let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + w * (ys[hi] - ys[lo])
}

/// Index of the last knot not greater than `x`, clamped so that `i + 1` is valid.
pub(crate) fn bracket(xs: &[f64], x: f64) -> (usize, f64) {
    let n = xs.len();
    if n < 2 || x <= xs[0] {
        return (0, 0.0);
    }
    if x >= xs[n - 1] {
        return (n - 2, 1.0);
    }
    let hi = xs.partition_point(|&xi| xi <= x);
    let lo = hi - 1;
    (lo, (x - xs[lo]) / (xs[hi] - xs[lo]))
}

pub(crate) fn is_strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [0.0, 10.0, 30.0];
        assert_eq!(interp1(&xs, &ys, -1.0), 0.0);
        assert_eq!(interp1(&xs, &ys, 0.5), 5.0);
        assert_eq!(interp1(&xs, &ys, 1.0), 10.0);
        assert_eq!(interp1(&xs, &ys, 2.0), 20.0);
        assert_eq!(interp1(&xs, &ys, 9.0), 30.0);
    }

    #[test]
    fn bracket_stays_in_range() {
        let xs = [0.0, 1.0, 2.0];
        assert_eq!(bracket(&xs, -1.0), (0, 0.0));
        assert_eq!(bracket(&xs, 2.0), (1, 1.0));
        assert_eq!(bracket(&xs, 1.5), (1, 0.5));
    }
}
