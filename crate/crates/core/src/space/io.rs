//! Space files (JSON) and measure files (CSV).
//!
//! Space files take one of two forms:
//!
//! ```json
//! {"points": ["a", "b"], "dist": [[0, 1], [1, 0]], "neighbors": [[1], [0]]}
//! {"coords": [[0.0], [0.5], [1.0]], "metric": "euclidean", "neighbor_radius": 0.6}
//! ```
//!
//! The explicit form may also carry `"coords"` (kept for lattice detection)
//! and `"tolerance"`. Measure files hold one weight per line, index-aligned
//! with the points; blank lines and lines starting with `#` are skipped.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DiscreteMeasure, FiniteMetricSpace, DEFAULT_TOLERANCE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceFile {
    Explicit {
        points: Vec<serde_json::Value>,
        dist: Vec<Vec<f64>>,
        neighbors: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
    },
    Coordinates {
        coords: Vec<Vec<f64>>,
        metric: String,
        neighbor_radius: f64,
    },
}

impl SpaceFile {
    pub fn into_space(self) -> Result<FiniteMetricSpace> {
        match self {
            SpaceFile::Explicit { points, dist, neighbors, coords, tolerance } => {
                let n = dist.len();
                if points.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: points.len() });
                }
                if let Some(row) = dist.iter().position(|r| r.len() != n) {
                    return Err(Error::InvalidSpace(format!("dist row {row} has {} entries, expected {n}", dist[row].len())));
                }
                let matrix = Array2::from_shape_fn((n, n), |(i, j)| dist[i][j]);
                let tol = tolerance.unwrap_or(DEFAULT_TOLERANCE);
                let mut space = FiniteMetricSpace::with_tolerance(matrix, neighbors, tol)?;
                if let Some(coords) = coords {
                    if coords.len() != n {
                        return Err(Error::DimensionMismatch { expected: n, found: coords.len() });
                    }
                    for i in 0..n {
                        for j in 0..n {
                            let e: f64 = coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                            if (e - space.dist[[i, j]]).abs() > tol.max(1e-9) * (1.0 + e) {
                                return Err(Error::InvalidSpace(format!(
                                    "coords disagree with dist at ({i},{j}): {e} vs {}",
                                    space.dist[[i, j]]
                                )));
                            }
                        }
                    }
                    space.coords = Some(coords);
                }
                let labels = points
                    .into_iter()
                    .map(|p| match p {
                        serde_json::Value::String(s) => s,
                        other => other.to_string(),
                    })
                    .collect();
                space.with_labels(labels)
            }
            SpaceFile::Coordinates { coords, metric, neighbor_radius } => {
                if metric != "euclidean" {
                    return Err(Error::InvalidSpace(format!("unsupported metric '{metric}' (only 'euclidean')")));
                }
                FiniteMetricSpace::from_coords(coords, neighbor_radius)
            }
        }
    }

    pub fn from_space(space: &FiniteMetricSpace) -> Self {
        let n = space.n();
        SpaceFile::Explicit {
            points: space.labels.iter().cloned().map(serde_json::Value::String).collect(),
            dist: (0..n).map(|i| space.dist.row(i).to_vec()).collect(),
            neighbors: space.neighbors.clone(),
            coords: space.coords.clone(),
            tolerance: (space.tolerance != DEFAULT_TOLERANCE).then_some(space.tolerance),
        }
    }
}

pub fn parse_space_json(text: &str) -> Result<FiniteMetricSpace> {
    let file: SpaceFile = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("space file: {e}")))?;
    file.into_space()
}

pub fn space_to_json(space: &FiniteMetricSpace) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SpaceFile::from_space(space))?)
}

pub fn read_space(path: impl AsRef<Path>) -> Result<FiniteMetricSpace> {
    parse_space_json(&std::fs::read_to_string(path)?)
}

/// Parses a measure file. The result is validated as nonnegative only;
/// callers needing a probability measure re-check the total mass.
pub fn parse_measure_csv(text: &str) -> Result<DiscreteMeasure> {
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let w: f64 = line
            .trim_end_matches(',')
            .parse()
            .map_err(|_| Error::Parse(format!("measure line {}: '{line}' is not a number", lineno + 1)))?;
        weights.push(w);
    }
    DiscreteMeasure::new(weights)
}

pub fn measure_to_csv(measure: &DiscreteMeasure) -> String {
    let mut out = String::new();
    for w in measure.weights() {
        out.push_str(&format!("{w}\n"));
    }
    out
}

pub fn read_measure(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    parse_measure_csv(&std::fs::read_to_string(path)?)
}

/// Reads a measure and checks it is a probability measure on `space`.
pub fn read_probability(path: impl AsRef<Path>, space: &FiniteMetricSpace) -> Result<DiscreteMeasure> {
    let m = read_measure(path)?;
    space.expect_len(m.len())?;
    DiscreteMeasure::probability_with_tolerance(m.into_weights(), space.tolerance().max(DEFAULT_TOLERANCE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_form() {
        let text = r#"{"points": ["a", 7], "dist": [[0, 2], [2, 0]], "neighbors": [[1], [0]]}"#;
        let space = parse_space_json(text).unwrap();
        assert_eq!(space.n(), 2);
        assert_eq!(space.dist(0, 1), 2.0);
        assert_eq!(space.labels(), &["a".to_string(), "7".to_string()]);
    }

    #[test]
    fn coordinate_form() {
        let text = r#"{"coords": [[0.0], [0.5], [1.0]], "metric": "euclidean", "neighbor_radius": 0.6}"#;
        let space = parse_space_json(text).unwrap();
        assert_eq!(space.neighbors(1), &[0, 2]);
        assert!(space.uniform_spacing().is_some());
    }

    #[test]
    fn rejects_unknown_metric_and_bad_rows() {
        let text = r#"{"coords": [[0.0], [1.0]], "metric": "manhattan", "neighbor_radius": 2}"#;
        assert!(parse_space_json(text).is_err());
        let text = r#"{"points": [0, 1], "dist": [[0, 1], [1]], "neighbors": [[1], [0]]}"#;
        assert!(parse_space_json(text).is_err());
    }

    #[test]
    fn space_roundtrip_keeps_lattice() {
        let space = FiniteMetricSpace::symmetric_grid(1.0, 0.25).unwrap();
        let back = parse_space_json(&space_to_json(&space).unwrap()).unwrap();
        assert_eq!(back, space);
        assert!(back.uniform_spacing().is_some());
    }

    #[test]
    fn measure_csv() {
        let m = parse_measure_csv("# weights\n0.25\n\n0.75\n").unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
        assert!(parse_measure_csv("0.5\nabc\n").is_err());
        assert!(parse_measure_csv("-0.5\n1.5\n").is_err());
        let w = DiscreteMeasure::probability(vec![0.1, 0.2, 0.7]).unwrap();
        assert_eq!(parse_measure_csv(&measure_to_csv(&w)).unwrap(), w);
    }
}
