//! Standard graph models: paths, cycles and square grids with unit edge lengths.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::space::{MetricMeasureSpace, SpaceError};
use crate::spectral::{MeasureMode, SpectralError, SpectralOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// A weighted graph whose shortest-path metric and operator `M⁻¹(D − A)` share one measure.
#[derive(Clone, Debug)]
pub struct GraphModel {
    pub name: String,
    pub adjacency: DMatrix<f64>,
    pub measure_mode: MeasureMode,
}

impl GraphModel {
    pub fn new(name: impl Into<String>, adjacency: DMatrix<f64>, measure_mode: MeasureMode) -> Self {
        Self { name: name.into(), adjacency, measure_mode }
    }

    pub fn from_edges(name: impl Into<String>, n: usize, edges: &[(usize, usize)]) -> Self {
        let mut a = DMatrix::zeros(n, n);
        for &(i, j) in edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        Self::new(name, a, MeasureMode::Degree)
    }

    pub fn with_measure(mut self, mode: MeasureMode) -> Self {
        self.measure_mode = mode;
        self
    }

    pub fn len(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Space with unit edge lengths and the operator on the same measure.
    pub fn build(&self) -> Result<(MetricMeasureSpace, SpectralOperator), ModelError> {
        let op = SpectralOperator::from_weighted_graph(&self.adjacency, &self.measure_mode)?;
        let n = self.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[(i, j)] > 0.0 {
                    edges.push((i, j, 1.0));
                }
            }
        }
        let space = MetricMeasureSpace::from_edges(n, &edges, op.mu().to_vec())?;
        Ok((space, op))
    }
}

pub fn path(n: usize) -> GraphModel {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    GraphModel::from_edges(format!("P{n}"), n, &edges)
}

pub fn cycle(n: usize) -> GraphModel {
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    GraphModel::from_edges(format!("C{n}"), n, &edges)
}

/// `w × h` grid, point `(i, j)` at index `j·w + i`.
pub fn grid(w: usize, h: usize) -> GraphModel {
    let mut edges = Vec::new();
    for j in 0..h {
        for i in 0..w {
            let v = j * w + i;
            if i + 1 < w {
                edges.push((v, v + 1));
            }
            if j + 1 < h {
                edges.push((v, v + w));
            }
        }
    }
    GraphModel::from_edges(format!("G{w}x{h}"), w * h, &edges)
}

/// The four acceptance models, all with the degree measure.
pub fn all() -> Vec<GraphModel> {
    vec![path(8), path(32), cycle(16), grid(8, 8)]
}

pub fn by_name(name: &str) -> Option<GraphModel> {
    all().into_iter().find(|m| m.name == name)
}
