//! Physical quantities on the command line always carry a unit suffix.

fn split(s: &str) -> Result<(f64, &str), String> {
    let s = s.trim();
    let end = s
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .ok_or_else(|| format!("{s:?} has no unit suffix"))?;
    // An exponent marker followed by a letter belongs to the unit, not the number.
    let (mut num, mut unit) = s.split_at(end);
    if num.ends_with(['e', 'E']) {
        num = &num[..num.len() - 1];
        unit = &s[num.len()..];
    }
    let value: f64 = num.parse().map_err(|_| format!("{s:?} does not start with a number"))?;
    if !value.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok((value, unit.trim()))
}

/// Length in meters from `650nm`, `5.9mm`, `2um`, `0.075m`, ...
pub fn parse_length(s: &str) -> Result<f64, String> {
    let (v, unit) = split(s)?;
    let scale = match unit {
        "m" => 1.0,
        "cm" => 1e-2,
        "mm" => 1e-3,
        "um" | "µm" => 1e-6,
        "nm" => 1e-9,
        "pm" => 1e-12,
        other => return Err(format!("unknown length unit {other:?} in {s:?} (use m, cm, mm, um, nm or pm)")),
    };
    Ok(v * scale)
}

/// Angle in radians from `0.25deg`, `5mrad`, `0.1rad`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let (v, unit) = split(s)?;
    match unit {
        "deg" | "°" => Ok(v.to_radians()),
        "rad" => Ok(v),
        "mrad" => Ok(v * 1e-3),
        "urad" | "µrad" => Ok(v * 1e-6),
        other => Err(format!("unknown angle unit {other:?} in {s:?} (use deg, rad, mrad or urad)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        assert!((parse_length("650nm").unwrap() - 650e-9).abs() < 1e-21);
        assert!((parse_length("5.9mm").unwrap() - 5.9e-3).abs() < 1e-15);
        assert!((parse_length("2um").unwrap() - 2e-6).abs() < 1e-18);
        assert!((parse_length("2µm").unwrap() - 2e-6).abs() < 1e-18);
        assert!((parse_length("1e2nm").unwrap() - 1e-7).abs() < 1e-19);
        assert_eq!(parse_length("0.075m").unwrap(), 0.075);
    }

    #[test]
    fn angles() {
        assert!((parse_angle("180deg").unwrap() - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(parse_angle("0.5rad").unwrap(), 0.5);
        assert!((parse_angle("5mrad").unwrap() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn unitless_or_unknown_rejected() {
        assert!(parse_length("650").is_err());
        assert!(parse_length("650furlongs").is_err());
        assert!(parse_length("nm").is_err());
        assert!(parse_angle("3").is_err());
        assert!(parse_angle("3nm").is_err());
    }
}
