use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Communication strategy run by a federation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Clients train alone and never communicate (reference curve).
    NonFed,
    /// 1: average all model weights every round.
    FedAvg,
    /// 2: exchange per-class mean features; they become the cosine head.
    FeatureMeans,
    /// 3: strategy 2, then pull every backbone back towards the shared init.
    RegularizedFeatureMeans,
    /// 4: strategy 1 followed by the strategy 2 exchange.
    ModelAndFeatures,
    /// 5: strategy 4, then kNN over every exchanged training feature.
    RetrievalAllFeatures,
    /// 6: strategy 4, then kNN over exchanged per-class mean features.
    RetrievalClassMeans,
}

impl Strategy {
    /// The six communicating strategies, in numeric order.
    pub const NUMBERED: [Strategy; 6] = [
        Strategy::FedAvg,
        Strategy::FeatureMeans,
        Strategy::RegularizedFeatureMeans,
        Strategy::ModelAndFeatures,
        Strategy::RetrievalAllFeatures,
        Strategy::RetrievalClassMeans,
    ];

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1..=6 => Ok(Self::NUMBERED[id as usize - 1]),
            _ => Err(Error::config("strategy", format!("unknown strategy {id}; expected 1-6"))),
        }
    }

    /// Numeric id 1–6; `None` for [`Strategy::NonFed`].
    pub fn id(self) -> Option<u8> {
        Self::NUMBERED.iter().position(|&s| s == self).map(|i| i as u8 + 1)
    }

    pub fn averages_weights(self) -> bool {
        matches!(
            self,
            Strategy::FedAvg | Strategy::ModelAndFeatures | Strategy::RetrievalAllFeatures | Strategy::RetrievalClassMeans
        )
    }

    pub fn exchanges_class_means(self) -> bool {
        !matches!(self, Strategy::FedAvg | Strategy::NonFed)
    }

    /// Softmax head with bias (strategy 1 and the reference) versus cosine head.
    pub fn uses_softmax_head(self) -> bool {
        matches!(self, Strategy::FedAvg | Strategy::NonFed)
    }

    /// Whether head anchors are updated by local training.
    pub fn trains_head(self) -> bool {
        !matches!(self, Strategy::FeatureMeans | Strategy::RegularizedFeatureMeans)
    }

    pub fn keeps_global_model(self) -> bool {
        self.averages_weights()
    }

    pub fn uses_retrieval(self) -> bool {
        matches!(self, Strategy::RetrievalAllFeatures | Strategy::RetrievalClassMeans)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id() {
            Some(id) => write!(f, "{id}"),
            None => f.write_str("non-fed"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non-fed" | "nonfed" => Ok(Strategy::NonFed),
            _ => {
                let id: u8 = s
                    .parse()
                    .map_err(|_| Error::config("strategy", format!("unknown strategy `{s}`")))?;
                Strategy::from_id(id)
            }
        }
    }
}
