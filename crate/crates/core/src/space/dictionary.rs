//! Finite dictionaries of Lipschitz test functions.
//!
//! The suprema over bounded Lipschitz functions that define the transport
//! distances and functional-inequality constants are replaced by maxima over
//! a dictionary. Construction is deterministic given the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{neighbor_lipschitz, FiniteMetricSpace, TestFunction};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DictionaryConfig {
    /// Anchor points for distance functions, spread evenly over the index
    /// range. `0` means every point.
    pub max_anchors: usize,
    /// Truncation levels `d(x_k, ·) ∧ R` per anchor.
    pub truncations_per_anchor: usize,
    pub random_functions: usize,
    pub smoothing_passes: usize,
    pub include_coordinates: bool,
    pub seed: u64,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            max_anchors: 0,
            truncations_per_anchor: 2,
            random_functions: 16,
            smoothing_passes: 4,
            include_coordinates: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Zero,
    DistanceToPoint { anchor: usize },
    TruncatedDistance { anchor: usize, radius: f64 },
    Coordinate { axis: usize },
    RandomSmoothed { index: usize },
    UserSupplied { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub function: TestFunction,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzDictionary {
    entries: Vec<DictionaryEntry>,
}

impl LipschitzDictionary {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&DictionaryEntry> {
        self.entries.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TestFunction> {
        self.entries.iter().map(|e| &e.function)
    }

    /// Adds a caller-provided function after checking its Lipschitz bound.
    pub fn push_user(&mut self, space: &FiniteMetricSpace, values: Vec<f64>, lip_bound: f64) -> Result<usize> {
        let function = TestFunction::new(space, values, lip_bound)?;
        let index = self.entries.iter().filter(|e| matches!(e.provenance, Provenance::UserSupplied { .. })).count();
        self.entries.push(DictionaryEntry { function, provenance: Provenance::UserSupplied { index } });
        Ok(self.entries.len() - 1)
    }

    /// First `len` entries, for convergence curves.
    pub fn prefix(&self, len: usize) -> Self {
        Self { entries: self.entries[..len.min(self.entries.len())].to_vec() }
    }

    /// Every member passes the neighbor-pair Lipschitz check.
    pub fn validate(&self, space: &FiniteMetricSpace) -> Result<()> {
        self.entries.iter().try_for_each(|e| e.function.check(space))
    }
}

/// Builds the dictionary: the zero function, coordinates, all (or evenly
/// spread) distance functions `d(x_k, ·)` with their truncations
/// `d(x_k, ·) ∧ R`, and seeded random functions smoothed over the neighbor
/// graph and rescaled to Lipschitz bound 1.
pub fn build_dictionary(space: &FiniteMetricSpace, config: &DictionaryConfig) -> LipschitzDictionary {
    let n = space.n();
    let mut entries = Vec::new();
    let mut push = |values: Vec<f64>, lip_bound: f64, provenance: Provenance| {
        entries.push(DictionaryEntry { function: TestFunction { values, lip_bound }, provenance });
    };

    push(vec![0.0; n], 0.0, Provenance::Zero);

    if config.include_coordinates {
        if let Some(coords) = space.coords() {
            for axis in 0..coords[0].len() {
                let values = coords.iter().map(|c| c[axis]).collect();
                push(values, 1.0, Provenance::Coordinate { axis });
            }
        }
    }

    let anchors: Vec<usize> = if config.max_anchors == 0 || config.max_anchors >= n {
        (0..n).collect()
    } else if config.max_anchors == 1 {
        vec![n / 2]
    } else {
        let m = config.max_anchors;
        let mut a: Vec<usize> = (0..m).map(|k| ((k * (n - 1)) as f64 / (m - 1) as f64).round() as usize).collect();
        a.dedup();
        a
    };

    for &anchor in &anchors {
        let values: Vec<f64> = (0..n).map(|j| space.dist(anchor, j)).collect();
        let far = values.iter().copied().fold(0.0, f64::max);
        for t in 1..=config.truncations_per_anchor {
            let radius = far * t as f64 / (config.truncations_per_anchor + 1) as f64;
            let truncated = values.iter().map(|&v| v.min(radius)).collect();
            push(truncated, 1.0, Provenance::TruncatedDistance { anchor, radius });
        }
        push(values, 1.0, Provenance::DistanceToPoint { anchor });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for index in 0..config.random_functions {
        let mut values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..config.smoothing_passes {
            values = (0..n)
                .map(|i| {
                    let nb = space.neighbors(i);
                    let s: f64 = nb.iter().map(|&j| values[j]).sum::<f64>() + values[i];
                    s / (nb.len() + 1) as f64
                })
                .collect();
        }
        let lip = neighbor_lipschitz(space, &values);
        if lip > 0.0 {
            values.iter_mut().for_each(|v| *v /= lip);
        }
        // Exact rescaling can land a hair above 1 on the steepest edge.
        let lip_bound = neighbor_lipschitz(space, &values).max(1.0);
        push(values, lip_bound, Provenance::RandomSmoothed { index });
    }

    LipschitzDictionary { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_distance_functions() {
        let space = FiniteMetricSpace::two_point(1.0).unwrap();
        let dict = build_dictionary(&space, &DictionaryConfig::default());
        let has = |v: &[f64]| dict.iter().any(|f| f.values() == v && f.lip_bound() == 1.0);
        assert!(has(&[0.0, 1.0]));
        assert!(has(&[1.0, 0.0]));
    }

    #[test]
    fn deterministic_given_seed() {
        let space = FiniteMetricSpace::cycle(12).unwrap();
        let cfg = DictionaryConfig { seed: 42, random_functions: 8, ..Default::default() };
        let a = serde_json::to_vec(&build_dictionary(&space, &cfg)).unwrap();
        let b = serde_json::to_vec(&build_dictionary(&space, &cfg)).unwrap();
        assert_eq!(a, b);
        let other = DictionaryConfig { seed: 43, ..cfg };
        assert_ne!(a, serde_json::to_vec(&build_dictionary(&space, &other)).unwrap());
    }

    #[test]
    fn every_member_is_lipschitz() {
        for space in [
            FiniteMetricSpace::cycle(9).unwrap(),
            FiniteMetricSpace::symmetric_grid(2.0, 0.1).unwrap(),
            FiniteMetricSpace::from_coords(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.5]], 1.6)
                .unwrap(),
        ] {
            let dict = build_dictionary(&space, &DictionaryConfig { random_functions: 10, ..Default::default() });
            dict.validate(&space).unwrap();
            // Exhaustive pairwise re-check, independent of `validate`.
            for f in dict.iter() {
                for i in 0..space.n() {
                    for &j in space.neighbors(i) {
                        let diff = (f.values()[i] - f.values()[j]).abs();
                        assert!(diff <= f.lip_bound() * space.dist(i, j) * (1.0 + 1e-12) + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn anchor_subsampling() {
        let space = FiniteMetricSpace::symmetric_grid(1.0, 0.01).unwrap();
        let cfg = DictionaryConfig { max_anchors: 5, truncations_per_anchor: 0, random_functions: 0, ..Default::default() };
        let dict = build_dictionary(&space, &cfg);
        // zero + coordinate + 5 anchors
        assert_eq!(dict.len(), 7);
    }
}
