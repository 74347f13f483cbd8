use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::SynthConfig;
use crate::federation::{FederationConfig, Strategy};
use crate::losses::MarginConfig;
use crate::retrieval::Metric;
use crate::{Error, Result};

/// Which strategies an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategySelection {
    One(Strategy),
    /// Strategies 1–6 followed by the non-federated reference.
    All,
}

impl StrategySelection {
    pub fn strategies(self) -> Vec<Strategy> {
        match self {
            StrategySelection::One(s) => vec![s],
            StrategySelection::All => Strategy::NUMBERED.iter().copied().chain([Strategy::NonFed]).collect(),
        }
    }
}

impl FromStr for StrategySelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            Ok(StrategySelection::All)
        } else {
            s.parse().map(StrategySelection::One)
        }
    }
}

impl fmt::Display for StrategySelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySelection::One(s) => write!(f, "{s}"),
            StrategySelection::All => f.write_str("all"),
        }
    }
}

/// Every knob of one experiment.
///
/// The file format is one `key = value` pair per line; blank lines and
/// anything after `#` are ignored. Keys are the field names below. Each key
/// can also be set with [`ExperimentConfig::set`], which is what the CLI
/// flags of the same name call.
///
/// | key | default | meaning |
/// |---|---|---|
/// | `strategy` | `all` | `1`–`6`, `non-fed` or `all` |
/// | `n_clients` | 10 | |
/// | `rounds` | 16 | communication rounds `t` |
/// | `local_epochs` | 1 | local epochs `k` per round |
/// | `batch_size` | 16 | |
/// | `lr` | 1e-4 | Adam learning rate |
/// | `hidden` | `64,32` | hidden widths of the backbone |
/// | `embedding_dim` | 16 | `d` |
/// | `margin` | 0.2 | additive angular margin `m` |
/// | `scale` | 20 | logit scale `s` |
/// | `alpha` | 0.5 | Dirichlet concentration |
/// | `seed` | 0 | drives data, split, partition, init and training |
/// | `n_classes` | 10 | synthetic data |
/// | `per_class` | 100 | synthetic data |
/// | `d_in` | 8 | synthetic data |
/// | `spread` | 0.25 | synthetic cluster standard deviation |
/// | `csv_path` | none | load this CSV instead of generating data |
/// | `test_fraction` | 0.3 | stratified validation share |
/// | `knn_k` | `auto` | `auto` is 5 for strategy 5 and 1 for strategy 6 |
/// | `knn_metric` | `cosine` | `cosine` or `euclidean` |
/// | `average_head` | true | strategies 4–6 average the head with the backbone |
/// | `parallel` | false | train clients concurrently |
/// | `w_bytes` | `auto` | overrides the model size used by the symbolic cost |
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub strategy: StrategySelection,
    pub n_clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub margin: f64,
    pub scale: f64,
    pub alpha: f64,
    pub seed: u64,
    pub n_classes: usize,
    pub per_class: usize,
    pub d_in: usize,
    pub spread: f64,
    pub csv_path: Option<PathBuf>,
    pub test_fraction: f64,
    pub knn_k: Option<usize>,
    pub knn_metric: Metric,
    pub average_head: bool,
    pub parallel: bool,
    pub w_bytes: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fed = FederationConfig::default();
        let synth = SynthConfig::default();
        Self {
            strategy: StrategySelection::All,
            n_clients: fed.n_clients,
            rounds: fed.rounds,
            local_epochs: fed.local_epochs,
            batch_size: fed.batch_size,
            lr: fed.lr,
            hidden: fed.hidden,
            embedding_dim: fed.embedding_dim,
            margin: fed.margin.margin(),
            scale: fed.margin.scale(),
            alpha: fed.alpha,
            seed: fed.seed,
            n_classes: synth.n_classes,
            per_class: synth.per_class,
            d_in: synth.d_in,
            spread: synth.spread,
            csv_path: None,
            test_fraction: 0.3,
            knn_k: fed.knn_k,
            knn_metric: fed.knn_metric,
            average_head: fed.average_head,
            parallel: fed.parallel,
            w_bytes: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl ExperimentConfig {
    /// All keys accepted by [`set`](Self::set), in documentation order.
    pub const KEYS: [&'static str; 23] = [
        "strategy",
        "n_clients",
        "rounds",
        "local_epochs",
        "batch_size",
        "lr",
        "hidden",
        "embedding_dim",
        "margin",
        "scale",
        "alpha",
        "seed",
        "n_classes",
        "per_class",
        "d_in",
        "spread",
        "csv_path",
        "test_fraction",
        "knn_k",
        "knn_metric",
        "average_head",
        "parallel",
        "w_bytes",
    ];

    /// Sets one key from its textual value. Dashes in `key` are read as
    /// underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let k = key.as_str();
        let value = value.trim();
        match k {
            "strategy" => self.strategy = value.parse()?,
            "n_clients" => self.n_clients = parse(k, value)?,
            "rounds" => self.rounds = parse(k, value)?,
            "local_epochs" => self.local_epochs = parse(k, value)?,
            "batch_size" => self.batch_size = parse(k, value)?,
            "lr" => self.lr = parse(k, value)?,
            "hidden" => {
                self.hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|w| parse(k, w.trim())).collect::<Result<_>>()?
                }
            }
            "embedding_dim" => self.embedding_dim = parse(k, value)?,
            "margin" => self.margin = parse(k, value)?,
            "scale" => self.scale = parse(k, value)?,
            "alpha" => self.alpha = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "n_classes" => self.n_classes = parse(k, value)?,
            "per_class" => self.per_class = parse(k, value)?,
            "d_in" => self.d_in = parse(k, value)?,
            "spread" => self.spread = parse(k, value)?,
            "csv_path" => self.csv_path = (!value.is_empty() && value != "none").then(|| PathBuf::from(value)),
            "test_fraction" => self.test_fraction = parse(k, value)?,
            "knn_k" => self.knn_k = parse_auto(k, value)?,
            "knn_metric" => self.knn_metric = value.parse()?,
            "average_head" => self.average_head = parse(k, value)?,
            "parallel" => self.parallel = parse(k, value)?,
            "w_bytes" => self.w_bytes = parse_auto(k, value)?,
            _ => return Err(Error::config(k, "unknown key")),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Defaults overridden by the contents of a config file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_str(&text)?;
        Ok(cfg)
    }

    /// Checks every field, naming the first offending one.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_clients", self.n_clients),
            ("batch_size", self.batch_size),
            ("embedding_dim", self.embedding_dim),
            ("n_classes", self.n_classes),
            ("d_in", self.d_in),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be >= 1"));
            }
        }
        if self.per_class < 2 {
            return Err(Error::config("per_class", "must be >= 2 so every class reaches both splits"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "widths must be >= 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", format!("must be finite and >= 0, got {}", self.lr)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", format!("must be finite and > 0, got {}", self.alpha)));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::config("spread", format!("must be finite and >= 0, got {}", self.spread)));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("test_fraction", format!("must lie in (0, 1), got {}", self.test_fraction)));
        }
        if self.knn_k == Some(0) {
            return Err(Error::config("knn_k", "must be >= 1"));
        }
        if self.w_bytes == Some(0) {
            return Err(Error::config("w_bytes", "must be >= 1"));
        }
        self.margin_config()?;
        Ok(())
    }

    pub fn margin_config(&self) -> Result<MarginConfig> {
        MarginConfig::new(self.margin, self.scale).map_err(|e| Error::config("margin", e.to_string()))
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_classes: self.n_classes,
            per_class: self.per_class,
            d_in: self.d_in,
            spread: self.spread,
            seed: self.seed,
        }
    }

    pub fn federation_config(&self) -> Result<FederationConfig> {
        Ok(FederationConfig {
            n_clients: self.n_clients,
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            hidden: self.hidden.clone(),
            embedding_dim: self.embedding_dim,
            margin: self.margin_config()?,
            alpha: self.alpha,
            seed: self.seed,
            knn_k: self.knn_k,
            knn_metric: self.knn_metric,
            average_head: self.average_head,
            parallel: self.parallel,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_setup() {
        let c = ExperimentConfig::default();
        assert_eq!((c.rounds, c.local_epochs, c.batch_size), (16, 1, 16));
        assert_eq!((c.lr, c.margin, c.scale, c.test_fraction), (1e-4, 0.2, 20.0, 0.3));
        c.validate().unwrap();
    }

    #[test]
    fn file_lines_and_comments() {
        let mut c = ExperimentConfig::default();
        c.apply_str("# header\nstrategy = 3\n\nrounds=4 # inline\nhidden = 8, 4\nknn_k = 7\nknn_metric = euclidean\n")
            .unwrap();
        assert_eq!(c.strategy, StrategySelection::One(Strategy::RegularizedFeatureMeans));
        assert_eq!(c.rounds, 4);
        assert_eq!(c.hidden, vec![8, 4]);
        assert_eq!(c.knn_k, Some(7));
        assert_eq!(c.knn_metric, Metric::Euclidean);
    }

    #[test]
    fn every_key_is_settable() {
        let values = [
            "non-fed", "3", "2", "1", "8", "0.01", "4", "4", "0.1", "10", "1.0", "9", "3", "5", "2", "0.1", "x.csv",
            "0.25", "2", "cosine", "false", "true", "100",
        ];
        let mut c = ExperimentConfig::default();
        for (k, v) in ExperimentConfig::KEYS.iter().zip(values) {
            c.set(k, v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        assert_eq!(c.w_bytes, Some(100));
        assert_eq!(c.csv_path, Some(PathBuf::from("x.csv")));
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = ExperimentConfig::default();
        let e = c.set("n_clients", "ten").unwrap_err().to_string();
        assert!(e.contains("n_clients"), "{e}");
        assert!(c.set("bogus", "1").unwrap_err().to_string().contains("bogus"));
        assert!(matches!(c.apply_str("rounds 3"), Err(Error::Parse { line: 1, .. })));

        c.n_clients = 0;
        assert!(c.validate().unwrap_err().to_string().contains("n_clients"));
        let c = ExperimentConfig {
            margin: 2.0,
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("margin"));
        let c = ExperimentConfig {
            test_fraction: 1.0,
            ..Default::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("test_fraction"));
    }

    #[test]
    fn dashes_are_underscores() {
        let mut c = ExperimentConfig::default();
        c.set("n-clients", "3").unwrap();
        assert_eq!(c.n_clients, 3);
    }
}
