//! Number formatting shared by the CSV and table writers.

/// Twelve significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::sci;

    #[test]
    fn twelve_digits() {
        assert_eq!(sci(0.25), "2.50000000000e-1");
        assert_eq!(sci(-1.0 / 3.0), "-3.33333333333e-1");
        assert_eq!(sci(f64::NAN), "NaN");
        assert_eq!(sci(0.25).parse::<f64>().unwrap(), 0.25);
    }
}
