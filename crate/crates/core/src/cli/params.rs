//! Flat `key = value` parameters: config file first, command-line flags on top.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use super::CliError;

/// Smallest truncation accepted from the command line.
pub const MIN_N_MAX: usize = 10;

#[derive(Debug, Clone, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Params {
    /// Parses a config file: one `key = value` per line, `#` starts a comment.
    pub fn from_config_text(text: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let mut p = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::validation(format!("config line {}: expected `key = value`", i + 1)));
            };
            let key = normalize(k);
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::validation(format!("config line {}: unknown key `{key}`", i + 1)));
            }
            p.values.insert(key, v.trim().to_string());
        }
        Ok(p)
    }

    pub fn from_config_file(path: &Path, allowed: &[&str]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_config_text(&text, allowed)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(normalize(key), value.trim().to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn angle(&self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        match self.raw(key) {
            Some(v) => parse_angle(v).map_err(|e| field(key, e)),
            None => default.ok_or_else(|| field(key, "required")),
        }
    }

    pub fn float(&self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        self.angle(key, default)
    }

    pub fn opt_float(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) if v.eq_ignore_ascii_case("none") || v.eq_ignore_ascii_case("inf") => Ok(None),
            Some(v) => parse_angle(v).map(Some).map_err(|e| field(key, e)),
        }
    }

    pub fn count(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.raw(key) {
            Some(v) => v.replace('_', "").parse().map_err(|_| field(key, format!("`{v}` is not a non-negative integer"))),
            None => Ok(default),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(false),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(field(key, format!("`{v}` is not a boolean"))),
            },
        }
    }

    pub fn n_max(&self, default: usize) -> Result<usize, CliError> {
        let n = self.count("n_max", default)?;
        if n < MIN_N_MAX {
            return Err(field("n_max", format!("must be at least {MIN_N_MAX}, got {n}")));
        }
        Ok(n)
    }

    pub fn grid(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.raw(key).ok_or_else(|| field(key, "required"))?;
        let g = parse_grid(v).map_err(|e| field(key, e))?;
        if g.is_empty() {
            return Err(field(key, "grid is empty"));
        }
        Ok(g)
    }

    /// Every parameter in key order, for self-describing output headers.
    pub fn entries(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }
}

fn field(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("{key}: {reason}"))
}

/// Accepts plain numbers and π multiples: `0.3`, `pi`, `-pi/4`, `2pi/3`, `3*pi/4.5`, `π/20`.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase().replace('π', "pi");
    if t.is_empty() {
        return Err("empty value".into());
    }
    let bad = || format!("`{text}` is neither a number nor a multiple of pi");
    let Some(pos) = t.find("pi") else {
        let x: f64 = t.parse().map_err(|_| bad())?;
        return if x.is_finite() { Ok(x) } else { Err(bad()) };
    };
    let coef = t[..pos].trim_end_matches('*');
    let k = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let rest = &t[pos + 2..];
    let d = if rest.is_empty() {
        1.0
    } else {
        let d: f64 = rest.strip_prefix('/').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if d == 0.0 {
            return Err(format!("`{text}` divides by zero"));
        }
        d
    };
    let x = k * PI / d;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}

/// Comma-separated values, or an inclusive range `start:stop:step`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range `{t}` must read start:stop:step"));
        }
        let (a, b, h) = (parse_angle(parts[0])?, parse_angle(parts[1])?, parse_angle(parts[2])?);
        if !(h > 0.0) {
            return Err(format!("range step must be positive, got {h}"));
        }
        if b < a {
            return Ok(Vec::new());
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * h).collect());
    }
    t.split(',').filter(|s| !s.trim().is_empty()).map(parse_angle).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert_eq!(parse_angle("pi/20").unwrap(), PI / 20.0);
        assert_eq!(parse_angle(" -pi / 4 ").unwrap(), -PI / 4.0);
        assert_eq!(parse_angle("2pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_angle("3*pi/4.5").unwrap(), 3.0 * PI / 4.5);
        assert_eq!(parse_angle("π").unwrap(), PI);
        assert_eq!(parse_angle("PI/2").unwrap(), PI / 2.0);
        for bad in ["", "pie", "pi/0", "pi/x", "nan", "1e999", "x*pi"] {
            assert!(parse_angle(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1, 0.2,0.3").unwrap(), vec![0.1, 0.2, 0.3]);
        let r = parse_grid("0.02:0.75:0.01").unwrap();
        assert_eq!(r.len(), 74);
        assert!((r[73] - 0.75).abs() < 1e-12);
        assert_eq!(parse_grid("pi/4.3,pi/28").unwrap(), vec![PI / 4.3, PI / 28.0]);
        assert!(parse_grid("").unwrap().is_empty());
        assert!(parse_grid("1:0:0.1").unwrap().is_empty());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn config_text_and_overrides() {
        let allowed = ["theta", "n_max", "u"];
        let mut p = Params::from_config_text("# comment\ntheta = pi/20\nn-max = 40 # trailing\n\n", &allowed).unwrap();
        assert_eq!(p.angle("theta", None).unwrap(), PI / 20.0);
        assert_eq!(p.n_max(60).unwrap(), 40);
        p.set("n_max", "8");
        assert!(p.n_max(60).unwrap_err().to_string().contains("n_max"));
        assert!(p.angle("u", None).unwrap_err().to_string().contains("u: required"));
        assert!(Params::from_config_text("eta = 1", &allowed).is_err());
        assert!(Params::from_config_text("theta", &allowed).is_err());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let mut p = Params::default();
        p.set("u_grid", "");
        assert!(p.grid("u_grid").unwrap_err().to_string().contains("empty"));
    }
}
