//! Number formatting shared by files and reports.

/// 17 significant digits, round-trips any `f64` exactly.
pub fn machine(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    format!("{x:.16e}")
}

/// 6 significant digits for human-readable reports.
pub fn human(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machine_roundtrips() {
        for &x in &[0.1, 1.0 / 3.0, -2.0e-300, 1.7976931348623157e308, 100.0 / 101.0] {
            assert_eq!(machine(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(machine(0.0), "0");
    }

    #[test]
    fn human_six_digits() {
        assert_eq!(human(100.0 / 101.0), "0.990099");
        assert_eq!(human(0.004975), "0.004975");
        assert_eq!(human(100.0), "100");
        assert_eq!(human(1.0e-7), "1.00000e-7");
        assert_eq!(human(28.3612), "28.3612");
    }
}
