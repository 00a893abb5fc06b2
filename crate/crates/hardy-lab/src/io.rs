//! JSON formats for spaces, operators, signals and point sets.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixtures::GraphModel;
use crate::space::{MetricMeasureSpace, PointSet, SpaceError};
use crate::spectral::{MeasureMode, SpectralError, SpectralOperator};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid content: {0}")]
    Format(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Space file: a distance matrix, a weighted edge list (closed under shortest paths)
/// or Euclidean coordinates, together with the measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, f64)>>,
    pub measure: Vec<f64>,
}

impl SpaceFile {
    pub fn build(&self) -> Result<MetricMeasureSpace, IoError> {
        let n = self.measure.len();
        if let Some(rows) = &self.distances {
            return Ok(MetricMeasureSpace::new(square(rows, n, "distances")?, self.measure.clone())?);
        }
        if let Some(edges) = &self.edges {
            return Ok(MetricMeasureSpace::from_edges(n, edges, self.measure.clone())?);
        }
        if let Some(points) = &self.points {
            if points.len() != n {
                return Err(IoError::Format(format!("{} points but {n} measure entries", points.len())));
            }
            let dist = DMatrix::from_fn(n, n, |i, j| {
                points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            });
            return Ok(MetricMeasureSpace::new(dist, self.measure.clone())?);
        }
        Err(IoError::Format("space needs one of \"distances\", \"edges\" or \"points\"".into()))
    }
}

/// Adjacency as a dense matrix or a weighted edge list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Adjacency {
    Matrix(Vec<Vec<f64>>),
    Edges { n: usize, edges: Vec<(usize, usize, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorFile {
    pub adjacency: Adjacency,
    pub measure_mode: MeasureMode,
}

impl OperatorFile {
    pub fn adjacency_matrix(&self) -> Result<DMatrix<f64>, IoError> {
        match &self.adjacency {
            Adjacency::Matrix(rows) => square(rows, rows.len(), "adjacency"),
            Adjacency::Edges { n, edges } => {
                let mut a = DMatrix::zeros(*n, *n);
                for &(i, j, w) in edges {
                    if i >= *n || j >= *n {
                        return Err(IoError::Format(format!("edge ({i}, {j}) outside {n} vertices")));
                    }
                    a[(i, j)] = w;
                    a[(j, i)] = w;
                }
                Ok(a)
            }
        }
    }

    pub fn build(&self) -> Result<SpectralOperator, IoError> {
        Ok(SpectralOperator::from_weighted_graph(&self.adjacency_matrix()?, &self.measure_mode)?)
    }
}

/// Space and operator files describing a graph model.
pub fn model_files(model: &GraphModel) -> Result<(SpaceFile, OperatorFile), IoError> {
    let (space, op) = model.build().map_err(|e| IoError::Format(e.to_string()))?;
    let n = model.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = model.adjacency[(i, j)];
            if w > 0.0 {
                edges.push((i, j, w));
            }
        }
    }
    let space_edges = edges.iter().map(|&(i, j, _)| (i, j, space.dist(i, j))).collect();
    Ok((
        SpaceFile { points: None, distances: None, edges: Some(space_edges), measure: op.mu().to_vec() },
        OperatorFile { adjacency: Adjacency::Edges { n, edges }, measure_mode: model.measure_mode.clone() },
    ))
}

fn square(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>, IoError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(IoError::Format(format!("{what} must be a {n}×{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Parse { path: path.into(), source })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|source| IoError::Write { path: path.into(), source })
}

pub fn read_space(path: &Path) -> Result<MetricMeasureSpace, IoError> {
    read_json::<SpaceFile>(path)?.build()
}

pub fn read_operator(path: &Path) -> Result<SpectralOperator, IoError> {
    read_json::<OperatorFile>(path)?.build()
}

/// A signal is a JSON array of finite numbers.
pub fn read_signal(path: &Path, n: usize) -> Result<Vec<f64>, IoError> {
    let f: Vec<f64> = read_json(path)?;
    if f.len() != n {
        return Err(IoError::Format(format!("signal has {} entries, the space has {n} points", f.len())));
    }
    Ok(f)
}

/// A point set is a JSON array of indices.
pub fn read_point_set(path: &Path, n: usize) -> Result<PointSet, IoError> {
    let idx: Vec<usize> = read_json(path)?;
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(IoError::Format(format!("point {bad} outside a space of {n} points")));
    }
    Ok(PointSet::from_indices(n, idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn edge_list_matches_distance_matrix() {
        let by_edges: SpaceFile =
            serde_json::from_str(r#"{"edges": [[0,1,1.0],[1,2,2.0]], "measure": [1,1,1]}"#).unwrap();
        let by_matrix: SpaceFile =
            serde_json::from_str(r#"{"distances": [[0,1,3],[1,0,2],[3,2,0]], "measure": [1,1,1]}"#).unwrap();
        let (a, b) = (by_edges.build().unwrap(), by_matrix.build().unwrap());
        assert_eq!(a.dist_matrix(), b.dist_matrix());
    }

    #[test]
    fn points_give_euclidean_distances() {
        let f: SpaceFile = serde_json::from_str(r#"{"points": [[0,0],[3,4]], "measure": [1,2]}"#).unwrap();
        assert_eq!(f.build().unwrap().dist(0, 1), 5.0);
    }

    #[test]
    fn missing_geometry_is_an_error() {
        let f: SpaceFile = serde_json::from_str(r#"{"measure": [1]}"#).unwrap();
        assert!(matches!(f.build(), Err(IoError::Format(_))));
    }

    #[test]
    fn model_files_round_trip() {
        let model = fixtures::cycle(16);
        let (sf, of) = model_files(&model).unwrap();
        let (space, op) = model.build().unwrap();
        let json = serde_json::to_string(&(&sf, &of)).unwrap();
        let (sf2, of2): (SpaceFile, OperatorFile) = serde_json::from_str(&json).unwrap();
        assert_eq!(sf2.build().unwrap().dist_matrix(), space.dist_matrix());
        assert_eq!(of2.build().unwrap().eigenvalues(), op.eigenvalues());
    }

    #[test]
    fn measure_modes_parse() {
        let of: OperatorFile =
            serde_json::from_str(r#"{"adjacency": [[0,1],[1,0]], "measure_mode": {"custom": [1, 3]}}"#).unwrap();
        assert_eq!(of.measure_mode, MeasureMode::Custom(vec![1.0, 3.0]));
        let of: OperatorFile = serde_json::from_str(r#"{"adjacency": [[0,1],[1,0]], "measure_mode": "degree"}"#).unwrap();
        assert_eq!(of.build().unwrap().mu(), &[1.0, 1.0]);
    }
}
