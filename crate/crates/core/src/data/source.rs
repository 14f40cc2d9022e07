use std::ops::Deref;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Sample};
use crate::generators::{keyed_rng, LsStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OrderPolicy {
    AsStored,
    Shuffled { seed: u64 },
}

/// Ordered provider of training samples. `draw(t)` is a pure function of the
/// source and `t`; there is no cursor.
#[derive(Debug, Clone)]
pub enum SampleSource {
    Finite {
        dataset: Arc<Dataset>,
        /// `None` for as-stored order, otherwise a fixed permutation cycled.
        permutation: Option<Arc<[usize]>>,
    },
    Stream(Arc<LsStream>),
}

/// A drawn sample, either borrowed from a dataset or shared from a stream.
pub enum Drawn<'a> {
    Borrowed(&'a Sample),
    Shared(Arc<Sample>),
}

impl Deref for Drawn<'_> {
    type Target = Sample;

    fn deref(&self) -> &Sample {
        match self {
            Drawn::Borrowed(s) => s,
            Drawn::Shared(s) => s,
        }
    }
}

impl SampleSource {
    pub fn finite(dataset: Arc<Dataset>, order: OrderPolicy) -> Result<Self, DataError> {
        if dataset.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let permutation = match order {
            OrderPolicy::AsStored => None,
            OrderPolicy::Shuffled { seed } => {
                let mut perm: Vec<usize> = (0..dataset.len()).collect();
                perm.shuffle(&mut keyed_rng(seed, u64::MAX));
                Some(perm.into())
            }
        };
        Ok(Self::Finite { dataset, permutation })
    }

    pub fn stream(stream: Arc<LsStream>) -> Self {
        Self::Stream(stream)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Finite { dataset, .. } => dataset.dim(),
            Self::Stream(s) => s.dim(),
        }
    }

    /// Backing dataset for finite sources.
    pub fn dataset(&self) -> Option<&Dataset> {
        match self {
            Self::Finite { dataset, .. } => Some(dataset),
            Self::Stream(_) => None,
        }
    }

    /// Dataset position served at draw `t` (finite sources only).
    pub fn position(&self, t: u64) -> Option<usize> {
        match self {
            Self::Finite { dataset, permutation } => {
                let slot = (t % dataset.len() as u64) as usize;
                Some(permutation.as_ref().map_or(slot, |p| p[slot]))
            }
            Self::Stream(_) => None,
        }
    }

    pub fn draw(&self, t: u64) -> Drawn<'_> {
        match self {
            Self::Finite { dataset, .. } => {
                let pos = self.position(t).expect("finite source has positions");
                Drawn::Borrowed(&dataset.samples()[pos])
            }
            Self::Stream(s) => Drawn::Shared(s.sample(t)),
        }
    }

    /// The first `n` draws, in order.
    pub fn prefix(&self, n: usize) -> Vec<Sample> {
        (0..n as u64).map(|t| (*self.draw(t)).clone()).collect()
    }
}
