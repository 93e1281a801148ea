//! Value parsers for command-line arguments.

use std::f64::consts::PI;

/// Angles such as `pi`, `0.25pi`, `pi/4`, `3pi/4`, `-pi` or plain radians.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase().replace(' ', "").replace('π', "pi");
    let bad = || format!("cannot read angle `{s}` (try `0.25pi`, `pi/4` or radians)");
    let Some(pos) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| bad());
    };
    let (coef, rest) = (&t[..pos], &t[pos + 2..]);
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?,
    };
    let denom = match rest {
        "" => 1.0,
        r => r.strip_prefix('/').and_then(|d| d.parse::<f64>().ok()).filter(|d| *d != 0.0).ok_or_else(bad)?,
    };
    Ok(coef * PI / denom)
}

/// `lo:hi` with 0 < lo < hi.
pub fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("bracket `{s}` must look like lo:hi"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad bracket start `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad bracket end `{b}`"))?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("bracket `{s}` must satisfy 0 < lo < hi"));
    }
    Ok((lo, hi))
}

/// `lo:hi:points` or a single value.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |x: &str| x.parse::<f64>().map_err(|_| format!("bad grid value `{x}`"));
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n.parse().map_err(|_| format!("bad point count `{n}`"))?;
            if n == 0 || !(hi >= lo) || (n > 1 && hi == lo) {
                return Err(format!("grid `{s}` needs lo < hi and at least one point"));
            }
            Ok(dtc_core::spectrum::uniform_grid(lo, hi, n))
        }
        _ => Err(format!("grid `{s}` must be `lo:hi:points` or a single value")),
    }
}

/// Comma-separated numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number `{x}`"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        assert!(close(parse_angle("pi").unwrap(), PI));
        assert!(close(parse_angle("0.25pi").unwrap(), PI / 4.0));
        assert!(close(parse_angle("pi/4").unwrap(), PI / 4.0));
        assert!(close(parse_angle("3pi/4").unwrap(), 0.75 * PI));
        assert!(close(parse_angle("-pi").unwrap(), -PI));
        assert!(close(parse_angle("1.5").unwrap(), 1.5));
        assert!(close(parse_angle("0.5π").unwrap(), PI / 2.0));
        assert!(parse_angle("pie").is_err());
        assert!(parse_angle("pi/0").is_err());
    }

    #[test]
    fn brackets() {
        assert_eq!(parse_bracket("20:28").unwrap(), (20.0, 28.0));
        assert!(parse_bracket("28:20").is_err());
        assert!(parse_bracket("0:5").is_err());
        assert!(parse_bracket("20").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.65").unwrap(), vec![0.65]);
        let g = parse_grid("0.3:0.9:121").unwrap();
        assert_eq!(g.len(), 121);
        assert!((g[120] - 0.9).abs() < 1e-15);
        assert!(parse_grid("0.9:0.3:5").is_err());
        assert!(parse_grid("0.3:0.9").is_err());
        assert_eq!(parse_list("0.1, -0.2").unwrap(), vec![0.1, -0.2]);
    }
}
