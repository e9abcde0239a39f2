//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments run to end of line
//! experiment = thm1-transference
//! family     = cube, laplace
//! n          = 16
//! t_grid     = 0, 0.25, 0.5, 1
//! trials     = 1000000
//! ```
//!
//! Lists accept commas or whitespace. Keys that are absent take the
//! defaults of [`ExperimentConfig::default`].

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thickening::thicken::MAX_TRIALS;
use thickening::Family;

use crate::experiments;
use crate::LabRunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(with = "family_names")]
    pub family: Vec<Family>,
    pub n: usize,
    pub p_list: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// Monte Carlo size: rows per batch, or trials per tail estimate.
    pub trials: u64,
    pub directions: usize,
    pub restarts: usize,
    /// Local proposals per restart of the worst-direction search.
    pub steps: usize,
    /// Tail exponent override; each family's nominal value when absent.
    pub alpha: Option<f64>,
    /// Random polygon count for the planar suite.
    pub polygons: usize,
    pub root_seed: u64,
    /// Where `lab run` writes records. Not part of the parameter echo.
    #[serde(skip)]
    pub out_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            family: vec![Family::Gaussian],
            n: 8,
            p_list: vec![2.0, 4.0, 8.0],
            t_grid: vec![0.0, 0.25, 0.5, 1.0],
            eps_grid: vec![0.5, 0.6, 0.7],
            trials: 100_000,
            directions: 20,
            restarts: 4,
            steps: 100,
            alpha: None,
            polygons: 1000,
            root_seed: 1,
            out_path: None,
        }
    }
}

const KEYS: [&str; 14] = [
    "experiment", "family", "n", "p_list", "t_grid", "eps_grid", "trials", "directions", "restarts",
    "steps", "alpha", "polygons", "root_seed", "out_path",
];

fn bad(line: usize, msg: impl std::fmt::Display) -> LabRunError {
    LabRunError::Config(format!("line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, LabRunError> {
    v.parse()
        .map_err(|_| bad(line, format!("`{key}` expects a number, got {v:?}")))
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>, LabRunError> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_num::<f64>(line, key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, LabRunError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| bad(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(bad(line, format!("unknown key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(bad(line, format!("duplicate key `{key}`")));
            }
            match key {
                "experiment" => cfg.experiment = value.to_string(),
                "family" => {
                    cfg.family = value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<Family>().map_err(|e| bad(line, e)))
                        .collect::<Result<_, _>>()?
                }
                "n" => cfg.n = parse_num(line, key, value)?,
                "p_list" => cfg.p_list = parse_list(line, key, value)?,
                "t_grid" => cfg.t_grid = parse_list(line, key, value)?,
                "eps_grid" => cfg.eps_grid = parse_list(line, key, value)?,
                "trials" => cfg.trials = parse_num(line, key, value)?,
                "directions" => cfg.directions = parse_num(line, key, value)?,
                "restarts" => cfg.restarts = parse_num(line, key, value)?,
                "steps" => cfg.steps = parse_num(line, key, value)?,
                "alpha" => cfg.alpha = Some(parse_num(line, key, value)?),
                "polygons" => cfg.polygons = parse_num(line, key, value)?,
                "root_seed" => cfg.root_seed = parse_num(line, key, value)?,
                "out_path" => cfg.out_path = Some(PathBuf::from(value)),
                _ => unreachable!(),
            }
        }
        if !seen.contains("experiment") {
            return Err(LabRunError::Config("missing `experiment`".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Registry membership and basic positivity; experiment-specific ranges
    /// are checked when the experiment runs.
    pub fn validate(&self) -> Result<(), LabRunError> {
        let err = |m: String| Err(LabRunError::Config(m));
        if experiments::lookup(&self.experiment).is_none() {
            return err(format!("unknown experiment `{}` (see `lab list`)", self.experiment));
        }
        if self.family.is_empty() {
            return err("`family` is empty".into());
        }
        if self.n == 0 {
            return err("`n` must be positive".into());
        }
        if self.trials < 2 || self.trials > MAX_TRIALS {
            return err(format!("`trials` must lie in [2, {MAX_TRIALS}]"));
        }
        if self.directions == 0 || self.restarts == 0 || self.steps == 0 || self.polygons == 0 {
            return err("`directions`, `restarts`, `steps` and `polygons` must be positive".into());
        }
        for (name, list) in [("p_list", &self.p_list), ("t_grid", &self.t_grid), ("eps_grid", &self.eps_grid)] {
            if list.is_empty() {
                return err(format!("`{name}` is empty"));
            }
            if list.iter().any(|v| !v.is_finite()) {
                return err(format!("`{name}` has a non-finite entry"));
            }
        }
        if self.p_list.iter().any(|p| *p < 1.0) {
            return err("`p_list` entries must be at least 1".into());
        }
        if self.alpha.is_some_and(|a| !(a > 0.0 && a.is_finite())) {
            return err("`alpha` must be positive".into());
        }
        Ok(())
    }

    /// Renders the config back into the file format.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut s = format!(
            "experiment = {}\nfamily = {}\nn = {}\np_list = {}\nt_grid = {}\neps_grid = {}\n\
             trials = {}\ndirections = {}\nrestarts = {}\nsteps = {}\npolygons = {}\nroot_seed = {}\n",
            self.experiment,
            self.family.iter().map(|f| f.name()).collect::<Vec<_>>().join(", "),
            self.n,
            list(&self.p_list),
            list(&self.t_grid),
            list(&self.eps_grid),
            self.trials,
            self.directions,
            self.restarts,
            self.steps,
            self.polygons,
            self.root_seed,
        );
        if let Some(a) = self.alpha {
            s.push_str(&format!("alpha = {a}\n"));
        }
        if let Some(p) = &self.out_path {
            s.push_str(&format!("out_path = {}\n", p.display()));
        }
        s
    }
}

mod family_names {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use thickening::Family;

    pub fn serialize<S: Serializer>(v: &[Family], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|f| f.name()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Family>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# demo\nexperiment = small-ball  # trailing\nfamily = gaussian laplace\neps_grid = 0.5,0.6 , 0.7\nn=16\n",
        )
        .unwrap();
        assert_eq!(cfg.family, vec![Family::Gaussian, Family::LaplaceProduct]);
        assert_eq!(cfg.eps_grid, vec![0.5, 0.6, 0.7]);
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.trials, 100_000);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "experiment = nope\n",
            "family = cube\n",
            "experiment = isotropy\nexperiment = isotropy\n",
            "experiment = isotropy\ncolour = red\n",
            "experiment = isotropy\nn = -3\n",
            "experiment = isotropy\nn = 0\n",
            "experiment = isotropy\nfamily = octahedron\n",
            "experiment = isotropy\np_list = 2, x\n",
            "experiment = isotropy\njust words\n",
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(LabRunError::Config(_))), "{text}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::parse("experiment = lemma0\nfamily = laplace, shifted_exp\nalpha = 1\n").unwrap();
        cfg.p_list = vec![1.1 + 2.2, 3.0];
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
