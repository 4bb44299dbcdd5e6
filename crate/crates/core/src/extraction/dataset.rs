use std::collections::VecDeque;
use std::sync::Arc;

use log::warn;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use crate::dtree::{JointContext, Row};
use crate::rng::Rng;

/// A visited joint state with the loss weight of every tracked agent.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub context: Arc<JointContext>,
    /// Indexed by agent; agents whose weight was not computed hold 0.
    pub weights: Vec<f64>,
}

impl DataPoint {
    pub fn row(&self, agent: usize, weight: f64) -> Row<'_> {
        Row {
            features: &self.context.observations[agent],
            label: self.context.expert_actions[agent],
            weight,
        }
    }
}

/// Points aggregated across iterations, oldest evicted first once the cap
/// is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedDataset {
    points: VecDeque<DataPoint>,
    max_samples: usize,
}

impl AggregatedDataset {
    pub fn new(max_samples: usize) -> Self {
        AggregatedDataset { points: VecDeque::new(), max_samples }
    }

    pub fn extend(&mut self, batch: impl IntoIterator<Item = DataPoint>) {
        for p in batch {
            if self.points.len() == self.max_samples {
                self.points.pop_front();
            }
            self.points.push_back(p);
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataPoint> {
        self.points.iter()
    }

    pub fn get(&self, i: usize) -> &DataPoint {
        &self.points[i]
    }

    pub fn weights(&self, agent: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.weights[agent]).collect()
    }

    /// Draws `size` points with probability proportional to `agent`'s
    /// weight, with replacement.
    pub fn resample(&self, agent: usize, size: usize, rng: &mut Rng) -> Vec<DataPoint> {
        resample_indices(&self.weights(agent), size, rng)
            .into_iter()
            .map(|i| self.points[i].clone())
            .collect()
    }
}

/// Indices drawn with replacement proportionally to `weights`. Falls back to
/// uniform draws when every weight is zero.
pub fn resample_indices(weights: &[f64], size: usize, rng: &mut Rng) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    match WeightedIndex::new(weights) {
        Ok(dist) => (0..size).map(|_| dist.sample(rng)).collect(),
        Err(_) => {
            warn!("all {} resampling weights are zero; drawing uniformly", weights.len());
            (0..size).map(|_| rng.gen_range(0..weights.len())).collect()
        }
    }
}
