use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::forward::SignalRecord;
use crate::medium::PixelGrid;

/// Pixels x time matrix of signal samples; row `j` is flattened pixel `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CasoratiMatrix {
    data: DMatrix<f64>,
    grid: PixelGrid,
}

impl CasoratiMatrix {
    pub fn new(data: DMatrix<f64>, grid: PixelGrid) -> Result<Self> {
        if data.nrows() != grid.len() {
            return Err(Error::invalid(format!(
                "{} rows do not match a {}x{} grid",
                data.nrows(),
                grid.rows(),
                grid.cols()
            )));
        }
        if data.ncols() == 0 {
            return Err(Error::invalid("Casorati matrix needs at least one time sample"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("Casorati matrix has non-finite entries"));
        }
        Ok(Self { data, grid })
    }

    /// Wraps a bare matrix, treating its rows as an `n_rows x 1` pixel column.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        let grid = PixelGrid::new(data.nrows().max(1), 1)?;
        Self::new(data, grid)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn n_pixels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.data.ncols()
    }
}

/// Which part of a decomposed record to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Total,
    Collagen,
    Metabolic,
}

/// Row-major assembly: `A[j, k] = record_j.samples[k]`.
pub fn build_casorati(records: &[SignalRecord], grid: PixelGrid) -> Result<CasoratiMatrix> {
    build_component(records, grid, Component::Total)
}

pub fn build_component(
    records: &[SignalRecord],
    grid: PixelGrid,
    component: Component,
) -> Result<CasoratiMatrix> {
    if records.len() != grid.len() {
        return Err(Error::invalid(format!(
            "{} records for {} pixels",
            records.len(),
            grid.len()
        )));
    }
    let n_t = records.first().map(|r| r.samples.len()).unwrap_or(0);
    let mut data = DMatrix::zeros(grid.len(), n_t);
    let mut seen = vec![false; grid.len()];
    for r in records {
        if r.pixel >= grid.len() || std::mem::replace(&mut seen[r.pixel], true) {
            return Err(Error::invalid(format!("pixel {} is out of range or repeated", r.pixel)));
        }
        let row: &[f64] = match component {
            Component::Total => &r.samples,
            Component::Collagen | Component::Metabolic => {
                let d = r.decomposition.as_ref().ok_or_else(|| {
                    Error::invalid(format!("record {} has no decomposition", r.pixel))
                })?;
                if component == Component::Collagen {
                    &d.collagen
                } else {
                    &d.metabolic
                }
            }
        };
        if row.len() != n_t {
            return Err(Error::invalid(format!(
                "ragged records: pixel {} has {} samples, expected {n_t}",
                r.pixel,
                row.len()
            )));
        }
        for (k, v) in row.iter().enumerate() {
            data[(r.pixel, k)] = *v;
        }
    }
    CasoratiMatrix::new(data, grid)
}
