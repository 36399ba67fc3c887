//! Fixed-precision decimal rendering for CSV and state files.

/// Significant digits used for every machine-readable float.
pub const CSV_DIGITS: usize = 17;

/// Renders `x` with exactly `digits` significant digits in positional
/// notation (scientific only for very large or very small magnitudes).
///
/// 17 digits round-trip any `f64` exactly through `str::parse`.
pub fn sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        let zeros = "0".repeat(digits - 1);
        let sign = if x.is_sign_negative() { "-" } else { "" };
        return if zeros.is_empty() {
            format!("{sign}0")
        } else {
            format!("{sign}0.{zeros}")
        };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-7..21).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits_only: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits_only)
    } else if point as usize >= digits_only.len() {
        let pad = "0".repeat(point as usize - digits_only.len());
        format!("{digits_only}{pad}")
    } else {
        let (int, frac) = digits_only.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}

/// Shorthand for [`sig`] at [`CSV_DIGITS`].
pub fn csv(x: f64) -> String {
    sig(x, CSV_DIGITS)
}
