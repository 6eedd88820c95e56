//! Declarative run configuration. Every tunable the pipeline consults
//! lives here and is echoed verbatim into the run manifest, so no
//! default is silent.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dataset::InterventionSpec;
use crate::error::Error;
use crate::learners::Algorithm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub window_days: u32,
    pub test_fraction: f64,
    pub k_folds: usize,
    /// Normal quantile for the accuracy confidence interval.
    pub z: f64,
    /// Score cutoff for hard labels.
    pub threshold: f64,
    pub states: Vec<String>,
    /// Algorithm tags to run, in canonical order.
    pub algorithms: Vec<String>,
    pub inputs: InputPaths,
    /// ISO dates keyed by state postal code.
    pub order_dates: BTreeMap<String, String>,
    pub search: SearchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputPaths {
    pub cases: String,
    pub deaths: String,
    pub census: String,
    pub mask: String,
}

impl Default for InputPaths {
    fn default() -> Self {
        InputPaths {
            cases: "data/snapshot/covid_confirmed_usafacts.csv".into(),
            deaths: "data/snapshot/covid_deaths_usafacts.csv".into(),
            census: "data/snapshot/census_county_data.csv".into(),
            mask: "data/snapshot/mask-use-by-county.csv".into(),
        }
    }
}

/// Hyperparameter spaces for the tuned run. Two-element arrays are
/// uniform sampling ranges for the random search; lists are exhaustive
/// grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub lr_c: Vec<f64>,
    pub dt_depth: Vec<usize>,
    pub rf_depth: Vec<usize>,
    pub et_min_samples_leaf: Vec<usize>,
    pub svm_c: Vec<f64>,
    pub knn_k_max: usize,
    pub gb_draws: usize,
    pub gb_learning_rate: [f64; 2],
    pub gb_depth: [usize; 2],
    pub gb_gamma: [f64; 2],
    pub gb_subsample: [f64; 2],
    pub gb_colsample: [f64; 2],
    pub gb_rounds: [usize; 2],
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lr_c: vec![100.0, 1000.0, 10000.0],
            dt_depth: vec![3, 4, 5, 6],
            rf_depth: vec![5, 7, 9],
            et_min_samples_leaf: vec![1, 2, 4],
            svm_c: vec![0.5, 1.0, 2.0],
            knn_k_max: 25,
            gb_draws: 12,
            gb_learning_rate: [0.05, 0.15],
            gb_depth: [3, 5],
            gb_gamma: [0.3, 0.7],
            gb_subsample: [0.5, 0.8],
            gb_colsample: [0.8, 1.0],
            gb_rounds: [80, 160],
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut order_dates = BTreeMap::new();
        order_dates.insert("CA".to_string(), "2020-06-18".to_string());
        order_dates.insert("OR".to_string(), "2020-06-19".to_string());
        order_dates.insert("WA".to_string(), "2020-06-26".to_string());
        RunConfig {
            seed: 7,
            window_days: 30,
            test_fraction: 0.2,
            k_folds: 5,
            z: 1.96,
            threshold: 0.5,
            states: vec!["CA".into(), "OR".into(), "WA".into()],
            algorithms: Algorithm::ALL.iter().map(|a| a.tag().to_string()).collect(),
            inputs: InputPaths::default(),
            order_dates,
            search: SearchConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML config. With no path, `config.toml` in the working
    /// directory is used when present; otherwise the built-in defaults.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, Error> {
        let chosen = match path {
            Some(p) => Some(p.to_path_buf()),
            None => {
                let fallback = Path::new("config.toml");
                fallback.exists().then(|| fallback.to_path_buf())
            }
        };
        let cfg = match chosen {
            None => RunConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(&p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.window_days == 0 {
            return bad("window_days must be >= 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!(
                "test_fraction {} must be inside (0,1)",
                self.test_fraction
            ));
        }
        if self.k_folds < 2 {
            return bad("k_folds must be >= 2".into());
        }
        if !(self.z > 0.0) {
            return bad(format!("z {} must be > 0", self.z));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} must be in [0,1]", self.threshold));
        }
        if self.states.is_empty() {
            return bad("states must not be empty".into());
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty".into());
        }
        for tag in &self.algorithms {
            if Algorithm::from_tag(tag).is_none() {
                return bad(format!("unknown algorithm {tag:?}"));
            }
        }
        for state in &self.states {
            let date = self
                .order_dates
                .get(state)
                .ok_or_else(|| Error::Config(format!("no order date for state {state:?}")))?;
            parse_iso_date(state, date)?;
        }
        let s = &self.search;
        if s.knn_k_max == 0 || s.gb_draws == 0 {
            return bad("search sizes must be >= 1".into());
        }
        if s.lr_c.is_empty()
            || s.dt_depth.is_empty()
            || s.rf_depth.is_empty()
            || s.et_min_samples_leaf.is_empty()
            || s.svm_c.is_empty()
        {
            return bad("search grids must not be empty".into());
        }
        if s.gb_learning_rate[0] > s.gb_learning_rate[1]
            || s.gb_depth[0] > s.gb_depth[1]
            || s.gb_gamma[0] > s.gb_gamma[1]
            || s.gb_subsample[0] > s.gb_subsample[1]
            || s.gb_colsample[0] > s.gb_colsample[1]
            || s.gb_rounds[0] > s.gb_rounds[1]
        {
            return bad("search ranges must have low <= high".into());
        }
        if !(s.gb_learning_rate[0] > 0.0)
            || s.gb_depth[0] == 0
            || s.gb_rounds[0] == 0
            || !(s.gb_gamma[0] >= 0.0)
            || !(s.gb_subsample[0] > 0.0 && s.gb_subsample[1] <= 1.0)
            || !(s.gb_colsample[0] > 0.0 && s.gb_colsample[1] <= 1.0)
        {
            return bad("search range bounds leave the valid hyperparameter region".into());
        }
        Ok(())
    }

    /// The validated set of algorithms, in canonical order without
    /// duplicates.
    pub fn selected_algorithms(&self) -> Vec<Algorithm> {
        Algorithm::ALL
            .into_iter()
            .filter(|a| self.algorithms.iter().any(|t| t == a.tag()))
            .collect()
    }

    pub fn intervention(&self) -> Result<InterventionSpec, Error> {
        let mut dates = BTreeMap::new();
        for state in &self.states {
            let raw = self
                .order_dates
                .get(state)
                .ok_or_else(|| Error::Config(format!("no order date for state {state:?}")))?;
            dates.insert(state.clone(), parse_iso_date(state, raw)?);
        }
        InterventionSpec::new(dates, self.window_days)
    }
}

fn parse_iso_date(state: &str, raw: &str) -> Result<NaiveDate, Error> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|_| Error::Config(format!("order date for {state} is not YYYY-MM-DD: {raw:?}")))
}
