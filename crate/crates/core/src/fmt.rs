//! Number formatting shared by every CSV writer.

/// Formats like C's `%.12g`: twelve significant digits, trailing zeros
/// trimmed, exponent notation outside `[1e-5, 1e12)`. Non-finite values
/// print as `nan`, `inf` or `-inf`.
pub fn g12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-5..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::g12;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(-2.5), "-2.5");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(2.0 / 3.0), "0.666666666667");
        assert_eq!(g12(123456.789), "123456.789");
        assert_eq!(g12(1e-7), "1e-07");
        assert_eq!(g12(1.5e13), "1.5e+13");
        assert_eq!(g12(0.0001234), "0.0001234");
        assert_eq!(g12(f64::NAN), "nan");
    }

    #[test]
    fn round_trips_to_twelve_digits() {
        for &x in &[std::f64::consts::PI, -1e-3 / 7.0, 98765.4321e3, 4.0e-9] {
            let back: f64 = g12(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11, "{x} -> {}", g12(x));
        }
    }
}
