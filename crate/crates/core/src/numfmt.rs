//! Number parsing and formatting for config files and CSV output.

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Parses a real number. Besides plain literals accepts a ratio `a/b`,
/// `exp(e)` and `sqrt(e)` where `e` is itself one of these forms, so
/// `gamma = exp(1/3)` can be written exactly as in the literature.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix("exp(").and_then(|r| r.strip_suffix(')')) {
        return parse_real(inner).map(f64::exp);
    }
    if let Some(inner) = s.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        return parse_real(inner).map(f64::sqrt);
    }
    if let Some((a, b)) = s.split_once('/') {
        return Some(parse_real(a)? / parse_real(b)?);
    }
    match s {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse::<f64>().ok().filter(|v| !v.is_nan()),
    }
}

pub fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(parse_real).collect()
}
