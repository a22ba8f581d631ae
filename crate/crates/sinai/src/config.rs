//! Flat key-value run configuration.
//!
//! The format is deliberately primitive so any language can parse it:
//! one `key = value` per line, `#` comments, optional `[section]`
//! headers that are cosmetic only (keys are global and must be unique).
//! Lists are whitespace-separated, matrix rows are separated by `;`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{Centering, TableConfig};
use crate::sequences::{InitialLaw, MarkovModel, SequenceModel};
use crate::stats::Observable;

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
    /// Every key this run actually consulted, with the value used
    /// (defaults materialized), so reports are self-describing.
    resolved: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }
        Ok(Config {
            entries,
            resolved: BTreeMap::new(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    /// Override or inject a value (used by command-line flags).
    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// The keys consulted so far with the values in effect.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    fn record(&mut self, key: &str, value: String) {
        self.resolved.insert(key.to_string(), value);
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.entries.get(key).cloned()
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or_else(|| default.to_string());
        self.record(key, v.clone());
        v
    }

    pub fn require_str(&mut self, key: &str) -> Result<String> {
        let v = self
            .raw(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))?;
        self.record(key, v.clone());
        Ok(v)
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            Some(v) => {
                let x = parse_f64(key, &v)?;
                self.record(key, v);
                Ok(x)
            }
            None => {
                self.record(key, format_f64(default));
                Ok(default)
            }
        }
    }

    pub fn require_f64(&mut self, key: &str) -> Result<f64> {
        let v = self.require_str(key)?;
        parse_f64(key, &v)
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            Some(v) => {
                let x = v
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not an integer")))?;
                self.record(key, v);
                Ok(x)
            }
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            Some(v) => {
                let x = v
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not an integer")))?;
                self.record(key, v);
                Ok(x)
            }
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn f64_list_or(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            Some(v) => {
                let xs = parse_f64_list(key, &v)?;
                self.record(key, v);
                Ok(xs)
            }
            None => {
                let mut s = String::new();
                for (i, x) in default.iter().enumerate() {
                    if i > 0 {
                        s.push(' ');
                    }
                    let _ = write!(s, "{}", format_f64(*x));
                }
                self.record(key, s);
                Ok(default.to_vec())
            }
        }
    }

    pub fn usize_list_or(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.raw(key) {
            Some(v) => {
                let mut out = Vec::new();
                for tok in v.split_whitespace() {
                    out.push(tok.parse::<usize>().map_err(|_| {
                        Error::Config(format!("key `{key}`: `{tok}` is not an integer"))
                    })?);
                }
                if out.is_empty() {
                    return Err(Error::Config(format!("key `{key}`: empty list")));
                }
                self.record(key, v);
                Ok(out)
            }
            None => {
                let s = default
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                self.record(key, s);
                Ok(default.to_vec())
            }
        }
    }

    /// Table parameters from the keys `rbar`, `r`, `eps`.
    pub fn table(&mut self) -> Result<TableConfig> {
        let rbar = self.require_f64("rbar")?;
        let r = self.require_f64("r")?;
        let eps = self.require_f64("eps")?;
        Ok(TableConfig::new(rbar, r, eps))
    }

    /// Scatterer-sequence model from the `model` key and its parameters.
    ///
    /// - `model = fixed` with `centering = x y`
    /// - `model = iid` (uniform on the admissible disk)
    /// - `model = markov` with `states = x y ; x y ; ...`,
    ///   `transition = p p ; p p ; ...` and
    ///   `initial = stationary | state K | weights w w ...`
    pub fn sequence_model(&mut self) -> Result<SequenceModel> {
        let kind = self.str_or("model", "fixed");
        match kind.as_str() {
            "fixed" => {
                let c = self.centering_or("centering", Centering::ZERO)?;
                Ok(SequenceModel::Fixed(c))
            }
            "iid" => Ok(SequenceModel::IidUniform),
            "markov" => {
                let states = self.centering_rows("states")?;
                let transition = self.matrix("transition")?;
                let initial = self.initial_law()?;
                Ok(SequenceModel::Markov(MarkovModel {
                    states,
                    transition,
                    initial,
                }))
            }
            other => Err(Error::Config(format!(
                "key `model`: unknown kind `{other}` (expected fixed, iid or markov)"
            ))),
        }
    }

    /// Observable from the `observable` key:
    /// `flight_time`, `displacement`, or `tabulated` with `gains = g g ...`.
    pub fn observable(&mut self) -> Result<Observable> {
        let kind = self.str_or("observable", "flight_time");
        match kind.as_str() {
            "flight_time" => Ok(Observable::FlightTime),
            "displacement" => Ok(Observable::Displacement),
            "tabulated" => {
                let gains = self.f64_list_or("gains", &[])?;
                if gains.is_empty() {
                    return Err(Error::Config(
                        "observable `tabulated` needs `gains = g g ...`".into(),
                    ));
                }
                Ok(Observable::Tabulated { gains })
            }
            other => Err(Error::Config(format!(
                "key `observable`: unknown kind `{other}` \
                 (expected flight_time, displacement or tabulated)"
            ))),
        }
    }

    pub fn centering_or(&mut self, key: &str, default: Centering) -> Result<Centering> {
        match self.raw(key) {
            Some(v) => {
                let xs = parse_f64_list(key, &v)?;
                if xs.len() != 2 {
                    return Err(Error::Config(format!(
                        "key `{key}`: expected two numbers, got {}",
                        xs.len()
                    )));
                }
                self.record(key, v);
                Ok(Centering::new(xs[0], xs[1]))
            }
            None => {
                self.record(
                    key,
                    format!("{} {}", format_f64(default.x), format_f64(default.y)),
                );
                Ok(default)
            }
        }
    }

    /// A `;`-separated list of `x y` centerings.
    pub fn centering_rows(&mut self, key: &str) -> Result<Vec<Centering>> {
        let v = self.require_str(key)?;
        let mut out = Vec::new();
        for row in v.split(';') {
            let xs = parse_f64_list(key, row)?;
            if xs.len() != 2 {
                return Err(Error::Config(format!(
                    "key `{key}`: each row needs two numbers, got `{row}`"
                )));
            }
            out.push(Centering::new(xs[0], xs[1]));
        }
        Ok(out)
    }

    /// A `;`-separated row-major matrix.
    pub fn matrix(&mut self, key: &str) -> Result<DMatrix<f64>> {
        let v = self.require_str(key)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for row in v.split(';') {
            rows.push(parse_f64_list(key, row)?);
        }
        let ncols = rows[0].len();
        if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Config(format!("key `{key}`: ragged or empty matrix")));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    fn initial_law(&mut self) -> Result<InitialLaw> {
        let v = self.str_or("initial", "stationary");
        let mut toks = v.split_whitespace();
        match toks.next() {
            Some("stationary") => Ok(InitialLaw::Stationary),
            Some("state") => {
                let k = toks
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config("`initial = state K` needs an index".into()))?;
                Ok(InitialLaw::State(k))
            }
            Some("weights") => {
                let ws: Vec<f64> = toks
                    .map(|t| parse_f64("initial", t))
                    .collect::<Result<_>>()?;
                if ws.is_empty() {
                    return Err(Error::Config("`initial = weights ...` needs numbers".into()));
                }
                Ok(InitialLaw::Weights(ws))
            }
            _ => Err(Error::Config(format!(
                "key `initial`: `{v}` (expected stationary, state K, or weights ...)"
            ))),
        }
    }
}

fn parse_f64(key: &str, tok: &str) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("key `{key}`: `{}` is not a number", tok.trim())))
}

fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace().map(|t| parse_f64(key, t)).collect()
}

fn format_f64(x: f64) -> String {
    // Shortest representation that round-trips exactly.
    format!("{x}")
}
