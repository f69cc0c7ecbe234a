//! Reconstruction quality metrics.

use thiserror::Error;

use crate::graph::{graphtv_apply_into, MeshGraph};
use crate::linalg::{DenseMatrix, TemporalField};

/// Relative threshold below which an entry of `D2 X` counts as zero.
pub const SPARSITY_TAU: f64 = 1e-8;
pub const SSIM_WINDOW: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {got:?} vs reference {expected:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("reference field is identically zero")]
    ZeroReference,
    #[error("reference has zero dynamic range but the fields differ")]
    DegenerateRange,
    #[error("every column of the reference is zero")]
    NoActiveColumn,
    #[error("mesh has {nodes} nodes but the field has {rows} rows")]
    Mesh { nodes: usize, rows: usize },
}

fn same_shape(x: &DenseMatrix, truth: &DenseMatrix) -> Result<(), MetricError> {
    if x.shape() != truth.shape() {
        return Err(MetricError::Shape {
            expected: truth.shape(),
            got: x.shape(),
        });
    }
    Ok(())
}

fn on_mesh(x: &DenseMatrix, mesh: &MeshGraph) -> Result<(), MetricError> {
    if x.rows() != mesh.num_nodes() {
        return Err(MetricError::Mesh {
            nodes: mesh.num_nodes(),
            rows: x.rows(),
        });
    }
    Ok(())
}

/// `10 log10(max(X)^2 / ||X - X_true||_F^2)`. Returns `+inf` when the fields
/// are equal and `-inf` when `max(X) <= 0`.
pub fn psnr(x: &TemporalField, truth: &TemporalField) -> Result<f64, MetricError> {
    same_shape(x, truth)?;
    let err = x.sub(truth).norm_sq();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = x.max();
    if !(peak > 0.0) {
        log::warn!("psnr: reconstruction maximum {peak} is not positive");
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}

/// `||X - X_true||_F / ||X_true||_F`.
pub fn rel_error(x: &TemporalField, truth: &TemporalField) -> Result<f64, MetricError> {
    same_shape(x, truth)?;
    let den = truth.norm();
    if den == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    Ok(x.dist(truth) / den)
}

/// Mean SSIM over all `8 x 8` windows (stride 1) of the `n x T` fields, with
/// dynamic range taken from the reference and sample (co)variances. Window
/// sides shrink to the field size when a dimension is shorter than 8.
pub fn ssim(x: &TemporalField, truth: &TemporalField) -> Result<f64, MetricError> {
    same_shape(x, truth)?;
    let range = truth.max() - truth.min();
    if !(range > 0.0) {
        return if x == truth {
            Ok(1.0)
        } else {
            Err(MetricError::DegenerateRange)
        };
    }
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let (rows, cols) = x.shape();
    let (wr, wc) = (SSIM_WINDOW.min(rows), SSIM_WINDOW.min(cols));
    let count = (wr * wc) as f64;
    let norm = if count > 1.0 { count - 1.0 } else { 1.0 };
    let mut total = 0.0;
    let mut windows = 0usize;
    for r0 in 0..=rows - wr {
        for c0 in 0..=cols - wc {
            let (mut sa, mut sb) = (0.0, 0.0);
            for r in r0..r0 + wr {
                for (&a, &b) in x.row(r)[c0..c0 + wc].iter().zip(&truth.row(r)[c0..c0 + wc]) {
                    sa += a;
                    sb += b;
                }
            }
            let (ma, mb) = (sa / count, sb / count);
            let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
            for r in r0..r0 + wr {
                for (&a, &b) in x.row(r)[c0..c0 + wc].iter().zip(&truth.row(r)[c0..c0 + wc]) {
                    let (da, db) = (a - ma, b - mb);
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            }
            let (vaa, vbb, vab) = (vaa / norm, vbb / norm, vab / norm);
            total += ((2.0 * ma * mb + c1) * (2.0 * vab + c2))
                / ((ma * ma + mb * mb + c1) * (vaa + vbb + c2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

fn argmax_abs(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .map(f64::abs)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// Mean over time of the distance between the nodes holding the largest
/// absolute value in `X` and in `X_true`. Columns where `X_true` vanishes are
/// skipped.
pub fn sed(x: &TemporalField, truth: &TemporalField, mesh: &MeshGraph) -> Result<f64, MetricError> {
    same_shape(x, truth)?;
    on_mesh(truth, mesh)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for t in 0..x.cols() {
        let (it, vt) = argmax_abs((0..truth.rows()).map(|i| truth[(i, t)]));
        if vt == 0.0 {
            continue;
        }
        let (ix, _) = argmax_abs((0..x.rows()).map(|i| x[(i, t)]));
        sum += mesh.distance(ix, it);
        used += 1;
    }
    if used == 0 {
        return Err(MetricError::NoActiveColumn);
    }
    Ok(sum / used as f64)
}

/// Entries of `D2 X` above `SPARSITY_TAU * max|D2 X|`, divided by `n T`.
pub fn sparsity_ratio(x: &TemporalField, mesh: &MeshGraph) -> Result<f64, MetricError> {
    on_mesh(x, mesh)?;
    let mut d = DenseMatrix::zeros(mesh.num_edges(), x.cols());
    graphtv_apply_into(mesh, x, &mut d);
    let peak = d.max_abs();
    if peak == 0.0 {
        return Ok(0.0);
    }
    let thr = SPARSITY_TAU * peak;
    let nnz = d.as_slice().iter().filter(|v| v.abs() > thr).count();
    Ok(nnz as f64 / (x.rows() * x.cols()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub rel_error: f64,
    pub ssim: f64,
    pub sed: f64,
    pub sparsity: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "psnr,rel_error,ssim,sed,sparsity";

    pub fn compute(
        x: &TemporalField,
        truth: &TemporalField,
        mesh: &MeshGraph,
    ) -> Result<Self, MetricError> {
        Ok(Self {
            psnr: psnr(x, truth)?,
            rel_error: rel_error(x, truth)?,
            ssim: ssim(x, truth)?,
            sed: sed(x, truth, mesh)?,
            sparsity: sparsity_ratio(x, mesh)?,
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.psnr, self.rel_error, self.ssim, self.sed, self.sparsity
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_log_law() {
        let truth = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]);
        let mut x = truth.clone();
        x[(0, 1)] = 2.0;
        // max(X) = 2 and the squared error is 4.
        assert_eq!(psnr(&x, &truth).unwrap(), 0.0);
        assert_eq!(psnr(&truth, &truth).unwrap(), f64::INFINITY);
        let neg = truth.scaled(-1.0);
        assert_eq!(psnr(&neg, &truth).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn rel_error_cases() {
        let t = DenseMatrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]);
        assert_eq!(rel_error(&t, &t).unwrap(), 0.0);
        assert_eq!(rel_error(&DenseMatrix::zeros(2, 2), &t).unwrap(), 1.0);
        assert!((rel_error(&t.scaled(2.0), &t).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            rel_error(&t, &DenseMatrix::zeros(2, 2)),
            Err(MetricError::ZeroReference)
        );
    }

    #[test]
    fn ssim_identity_and_flip() {
        let t = DenseMatrix::from_fn(10, 9, |i, j| ((i * 5 + j * 3) % 7) as f64 - 2.0);
        assert_eq!(ssim(&t, &t).unwrap(), 1.0);
        assert!(ssim(&t.scaled(-1.0), &t).unwrap() < 1.0);
        let flat = DenseMatrix::zeros(8, 8);
        assert_eq!(ssim(&flat, &flat).unwrap(), 1.0);
        assert_eq!(
            ssim(&DenseMatrix::identity(8), &flat),
            Err(MetricError::DegenerateRange)
        );
    }

    #[test]
    fn sed_constant_shift() {
        let mesh = MeshGraph::path(4);
        let truth = DenseMatrix::from_fn(4, 3, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let x = DenseMatrix::from_fn(4, 3, |i, _| if i == 2 { -5.0 } else { 0.1 });
        assert_eq!(sed(&truth, &truth, &mesh).unwrap(), 0.0);
        assert_eq!(sed(&x, &truth, &mesh).unwrap(), 2.0);
    }

    #[test]
    fn sparsity_cases() {
        let mesh = MeshGraph::path(3);
        assert_eq!(sparsity_ratio(&DenseMatrix::from_fn(3, 2, |_, j| j as f64 + 1.0), &mesh).unwrap(), 0.0);
        let x = DenseMatrix::from_rows(&[[1.0], [1.0], [0.0]]);
        assert!((sparsity_ratio(&x, &mesh).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }
}
