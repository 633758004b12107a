//! Regular Cartesian training grids labelled by the analytic inverse map, input
//! normalization, and the grid-spacing quantities used by the error bound.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kinematics::{CartesianPoint, JointAngles, RobotGeometry};
use crate::numfmt::sig17;

/// Label round-trip tolerance, mm.
const LABEL_TOL_MM: f64 = 1e-9;

pub const DATASET_HEADER: [&str; 6] = ["x1_mm", "x2_mm", "x3_mm", "q1_rad", "q2_rad", "q3_rad"];

/// Axis-aligned Cartesian region (mm) used for sampling and input scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for WorkspaceBox {
    fn default() -> Self {
        Self {
            min: [20.0, 20.0, 0.0],
            max: [80.0, 80.0, 60.0],
        }
    }
}

impl WorkspaceBox {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            if !(min[i].is_finite() && max[i].is_finite() && min[i] < max[i]) {
                return Err(Error::invalid(format!(
                    "box axis {} needs finite min < max, got [{}, {}]",
                    i + 1,
                    min[i],
                    max[i]
                )));
            }
        }
        Ok(Self { min, max })
    }

    pub fn span(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn mean_span(&self) -> f64 {
        (0..3).map(|i| self.span(i)).sum::<f64>() / 3.0
    }

    pub fn center(&self) -> CartesianPoint {
        CartesianPoint::from_array(std::array::from_fn(|i| 0.5 * (self.min[i] + self.max[i])))
    }

    pub fn corners(&self) -> [CartesianPoint; 8] {
        std::array::from_fn(|c| {
            CartesianPoint::from_array(std::array::from_fn(|i| {
                if c >> (2 - i) & 1 == 0 {
                    self.min[i]
                } else {
                    self.max[i]
                }
            }))
        })
    }

    pub fn contains(&self, p: &CartesianPoint) -> bool {
        let a = p.to_array();
        (0..3).all(|i| a[i] >= self.min[i] && a[i] <= self.max[i])
    }

    /// Checks that every corner of the box can be reached by `geom`.
    pub fn check_reachable(&self, geom: &RobotGeometry) -> Result<()> {
        match self.corners().iter().position(|c| !geom.is_reachable(c)) {
            None => Ok(()),
            Some(i) => Err(Error::invalid(format!(
                "box corner {:?} is not reachable with links ({}, {}, {})",
                self.corners()[i].to_array(),
                geom.l1,
                geom.l2,
                geom.l3
            ))),
        }
    }
}

/// Grid of (position, joint label) pairs, `n = k^3`, row-major with x1 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub samples_per_axis: usize,
    pub pairs: Vec<(CartesianPoint, JointAngles)>,
    pub bounds: WorkspaceBox,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn grid_coord(bounds: &WorkspaceBox, axis: usize, j: usize, k: usize) -> f64 {
    bounds.min[axis] + bounds.span(axis) * j as f64 / (k - 1) as f64
}

pub fn generate_grid(bounds: &WorkspaceBox, k: usize, geom: &RobotGeometry) -> Result<TrainingSet> {
    if k < 2 {
        return Err(Error::invalid(format!(
            "samples per axis must be >= 2, got {k}"
        )));
    }
    let mut pairs = Vec::with_capacity(k * k * k);
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                let index = pairs.len();
                let x = CartesianPoint::new(
                    grid_coord(bounds, 0, a, k),
                    grid_coord(bounds, 1, b, k),
                    grid_coord(bounds, 2, c, k),
                );
                if !geom.is_reachable(&x) {
                    return Err(Error::UnreachableGridPoint { index });
                }
                let q = geom
                    .inverse_kinematics(&x)
                    .map_err(|_| Error::UnreachableGridPoint { index })?;
                if geom.forward_kinematics(&q).distance(&x) >= LABEL_TOL_MM {
                    return Err(Error::UnreachableGridPoint { index });
                }
                pairs.push((x, q));
            }
        }
    }
    Ok(TrainingSet {
        samples_per_axis: k,
        pairs,
        bounds: *bounds,
    })
}

pub fn normalize_input(x: &CartesianPoint, bounds: &WorkspaceBox) -> [f64; 3] {
    let a = x.to_array();
    std::array::from_fn(|i| (a[i] - bounds.min[i]) / bounds.span(i))
}

pub fn denormalize_input(u: &[f64; 3], bounds: &WorkspaceBox) -> CartesianPoint {
    CartesianPoint::from_array(std::array::from_fn(|i| {
        bounds.min[i] + u[i] * bounds.span(i)
    }))
}

/// Integer cube root, if `n` is a perfect cube.
pub fn exact_cube_root(n: usize) -> Option<usize> {
    let guess = (n as f64).cbrt().round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&k| k.checked_pow(3) == Some(n))
}

/// Half the normalized per-axis grid spacing, `1 / (2 (cbrt(n) - 1))`.
pub fn half_spacing_normalized(n: usize) -> Result<f64> {
    match exact_cube_root(n) {
        Some(k) if k >= 2 => Ok(0.5 / (k - 1) as f64),
        _ => Err(Error::NotACube(n)),
    }
}

/// Mean per-axis distance between neighbouring grid samples, mm.
pub fn spacing_mm(bounds: &WorkspaceBox, k: usize) -> f64 {
    (0..3).map(|i| bounds.span(i) / (k - 1) as f64).sum::<f64>() / 3.0
}

pub fn write_dataset_csv(ds: &TrainingSet, path: &Path) -> Result<()> {
    let to_err = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(DATASET_HEADER).map_err(to_err)?;
    for (x, q) in &ds.pairs {
        let row = x.to_array().into_iter().chain(q.to_array()).map(sig17);
        w.write_record(row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the pairs written by [`write_dataset_csv`].
pub fn read_dataset_csv(path: &Path) -> Result<Vec<(CartesianPoint, JointAngles)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let header = r.headers().map_err(|e| Error::io(path, e.into()))?;
    if header.iter().ne(DATASET_HEADER) {
        return Err(Error::Format {
            what: "dataset csv",
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::io(path, e.into()))?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Format {
                what: "dataset csv",
                reason: e.to_string(),
            })?;
        if v.len() != 6 {
            return Err(Error::Format {
                what: "dataset csv",
                reason: format!("expected 6 fields, got {}", v.len()),
            });
        }
        out.push((
            CartesianPoint::new(v[0], v[1], v[2]),
            JointAngles::new(v[3], v[4], v[5]),
        ));
    }
    Ok(out)
}
