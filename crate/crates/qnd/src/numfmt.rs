//! Deterministic number formatting for file and terminal output.

/// Round to `digits` significant digits.
pub(crate) fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 {
        return 0.0; // normalizes -0.0 as well
    }
    if !x.is_finite() {
        return x;
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("scientific notation round-trips");
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}

/// Shortest decimal form of `x` rounded to `digits` significant digits.
pub(crate) fn sig(x: f64, digits: usize) -> String {
    format!("{}", round_sig(x, digits))
}
