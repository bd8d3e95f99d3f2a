//! Number rendering shared by the CSV, JSON and CLI outputs.

/// `x` with 15 significant digits, trailing zeros removed. Plain notation
/// for magnitudes in `[1e-5, 1e15)`, scientific otherwise.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_string()
    } else {
        t.to_string()
    }
}

/// `x` with exactly 12 significant digits, zeros kept (`0.250000000000`).
/// Used for values printed on the terminal.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return num(x);
    }
    if x == 0.0 {
        return format!("{:.11}", 0.0);
    }
    let sci = format!("{x:.11e}");
    let (_, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

/// Empty for `None`.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::{num, sig12};

    #[test]
    fn renders() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-0.25), "-0.25");
        assert_eq!(num(1.0 / 3.0), "0.333333333333333");
        assert_eq!(num(2.0 / 3.0 * 100.0), "66.6666666666667");
        assert_eq!(num(123456789012345.0), "123456789012345");
        assert_eq!(num(1e20), "1e20");
        assert_eq!(num(-1.5e-7), "-1.5e-7");
        assert_eq!(num(0.1 + 0.2), "0.3");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn keeps_zeros() {
        assert_eq!(sig12(0.25), "0.250000000000");
        assert_eq!(sig12(0.0), "0.00000000000");
        assert_eq!(sig12(-12.5), "-12.5000000000");
        assert_eq!(sig12(1e-7), "1.00000000000e-7");
    }
}
