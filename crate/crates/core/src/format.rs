//! Text output shared by the CSV and JSON writers.

use crate::scalar::Scalar;

/// Scientific notation with 17 significant digits, enough to round-trip a
/// binary64 value.
pub fn sig17<T: Scalar>(x: T) -> String {
    let v = x.to_f64().unwrap_or(f64::NAN);
    format!("{v:.16e}")
}

/// Appends one CSV line: `lead` verbatim, then `values` via [`sig17`].
pub fn csv_row<T: Scalar>(out: &mut String, lead: &[String], values: &[T]) {
    let mut first = true;
    for s in lead.iter().cloned().chain(values.iter().map(|&v| sig17(v))) {
        if !first {
            out.push(',');
        }
        out.push_str(&s);
        first = false;
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        let x = 0.1f64 + 0.2;
        let s = sig17(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(s.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    }

    #[test]
    fn row_layout() {
        let mut s = String::new();
        csv_row(&mut s, &["3".to_string()], &[1.0f64, -2.5]);
        assert_eq!(s, "3,1.0000000000000000e0,-2.5000000000000000e0\n");
    }
}
