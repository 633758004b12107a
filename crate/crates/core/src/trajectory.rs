//! Reference paths and closed-loop tracking evaluation.
//!
//! Each reference point goes through the learned inverse map and back through
//! forward kinematics; the Euclidean gap to the reference is the tracking error.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kinematics::{CartesianPoint, JointAngles, RobotGeometry};
use crate::neuralnet::NetworkParams;
use crate::numfmt::sig17;
use crate::sampler::{normalize_input, WorkspaceBox};

pub const TRAJECTORY_HEADER: [&str; 8] = [
    "idx", "x1_ref", "x2_ref", "x3_ref", "x1_pred", "x2_pred", "x3_pred", "err_mm",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathKind {
    DoubleRectangle,
    Heart,
    Custom,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::DoubleRectangle => "rectangle",
            PathKind::Heart => "heart",
            PathKind::Custom => "custom",
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangle" => Ok(PathKind::DoubleRectangle),
            "heart" => Ok(PathKind::Heart),
            "custom" => Ok(PathKind::Custom),
            other => Err(Error::invalid(format!("unknown path kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectangleParams {
    pub z_low: f64,
    pub z_high: f64,
    pub margin: f64,
    pub points_per_edge: usize,
}

impl Default for RectangleParams {
    fn default() -> Self {
        Self {
            z_low: 10.0,
            z_high: 50.0,
            margin: 10.0,
            points_per_edge: 26,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeartParams {
    /// Only `x1` and `x2` of the centre are used; the height comes from `z`.
    pub center: CartesianPoint,
    pub scale: f64,
    pub z: f64,
    pub n_points: usize,
}

impl Default for HeartParams {
    fn default() -> Self {
        Self {
            center: CartesianPoint::new(50.0, 50.0, 30.0),
            scale: 25.0,
            z: 30.0,
            n_points: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathParams {
    Rectangle(RectangleParams),
    Heart(HeartParams),
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub kind: PathKind,
    pub points: Vec<CartesianPoint>,
    pub params: PathParams,
}

impl TrajectorySpec {
    pub fn custom(points: Vec<CartesianPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a path needs at least two points"));
        }
        Ok(Self {
            kind: PathKind::Custom,
            points,
            params: PathParams::Custom,
        })
    }

    /// Indices of points outside `bounds`; evaluating there means extrapolating.
    pub fn points_outside(&self, bounds: &WorkspaceBox) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| !bounds.contains(p))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Two inset rectangles in the x1-x2 plane at two heights, traversed corner to corner.
pub fn make_rectangle_path(
    bounds: &WorkspaceBox,
    params: &RectangleParams,
) -> Result<TrajectorySpec> {
    if params.points_per_edge < 2 {
        return Err(Error::invalid("points_per_edge must be >= 2"));
    }
    if params.margin.is_nan() || params.margin < 0.0 {
        return Err(Error::invalid("margin must be >= 0"));
    }
    let lo = [bounds.min[0] + params.margin, bounds.min[1] + params.margin];
    let hi = [bounds.max[0] - params.margin, bounds.max[1] - params.margin];
    if lo[0] >= hi[0] || lo[1] >= hi[1] {
        return Err(Error::invalid("margin leaves an empty rectangle"));
    }
    let corners = [
        [lo[0], lo[1]],
        [hi[0], lo[1]],
        [hi[0], hi[1]],
        [lo[0], hi[1]],
    ];
    let steps = params.points_per_edge - 1;
    let mut points = Vec::with_capacity(2 * 4 * steps);
    for z in [params.z_low, params.z_high] {
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            for s in 0..steps {
                let t = s as f64 / steps as f64;
                points.push(CartesianPoint::new(
                    a[0] + t * (b[0] - a[0]),
                    a[1] + t * (b[1] - a[1]),
                    z,
                ));
            }
        }
    }
    Ok(TrajectorySpec {
        kind: PathKind::DoubleRectangle,
        points,
        params: PathParams::Rectangle(*params),
    })
}

/// Offsets of the classic parametric heart curve (unscaled, before dividing by 16).
pub fn heart_curve(t: f64) -> (f64, f64) {
    let x = 16.0 * t.sin().powi(3);
    let y = 13.0 * t.cos() - 5.0 * (2.0 * t).cos() - 2.0 * (3.0 * t).cos() - (4.0 * t).cos();
    (x, y)
}

pub fn make_heart_path(params: &HeartParams) -> Result<TrajectorySpec> {
    if params.n_points < 8 {
        return Err(Error::invalid("heart path needs at least 8 points"));
    }
    let points = (0..params.n_points)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / params.n_points as f64;
            let (x, y) = heart_curve(t);
            CartesianPoint::new(
                params.center.x1 + params.scale * x / 16.0,
                params.center.x2 + params.scale * y / 16.0,
                params.z,
            )
        })
        .collect();
    Ok(TrajectorySpec {
        kind: PathKind::Heart,
        points,
        params: PathParams::Heart(*params),
    })
}

/// Anything that maps a Cartesian target to joint angles.
pub trait IkModel {
    fn predict(&self, x: &CartesianPoint) -> JointAngles;
}

/// A trained network together with its input scaling.
#[derive(Debug, Clone, Copy)]
pub struct NetworkModel<'a> {
    pub params: &'a NetworkParams,
    pub input_bounds: &'a WorkspaceBox,
}

impl IkModel for NetworkModel<'_> {
    fn predict(&self, x: &CartesianPoint) -> JointAngles {
        JointAngles::from_array(self.params.forward(&normalize_input(x, self.input_bounds)))
    }
}

/// Analytic inverse kinematics as a model; its tracking error is round-off only.
#[derive(Debug, Clone, Copy)]
pub struct ExactIk(pub RobotGeometry);

impl IkModel for ExactIk {
    fn predict(&self, x: &CartesianPoint) -> JointAngles {
        self.0
            .inverse_kinematics(x)
            .unwrap_or(JointAngles::new(f64::NAN, f64::NAN, f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub kind: PathKind,
    pub reference: Vec<CartesianPoint>,
    pub predicted: Vec<CartesianPoint>,
    pub per_point_error_mm: Vec<f64>,
    pub mean_mm: f64,
    /// Population standard deviation over path points.
    pub std_mm: f64,
    pub max_mm: f64,
    pub n_points: usize,
    pub outside_box: Vec<usize>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn evaluate_tracking(
    model: &impl IkModel,
    traj: &TrajectorySpec,
    geom: &RobotGeometry,
    bounds: &WorkspaceBox,
) -> EvalReport {
    let predicted: Vec<CartesianPoint> = traj
        .points
        .iter()
        .map(|x| geom.forward_kinematics(&model.predict(x)))
        .collect();
    let errors: Vec<f64> = traj
        .points
        .iter()
        .zip(&predicted)
        .map(|(r, p)| r.distance(p))
        .collect();
    let (mean_mm, std_mm) = mean_std(&errors);
    let outside_box = traj.points_outside(bounds);
    if !outside_box.is_empty() {
        log::warn!(
            "{} reference points lie outside the training box",
            outside_box.len()
        );
    }
    EvalReport {
        kind: traj.kind,
        reference: traj.points.clone(),
        max_mm: errors.iter().cloned().fold(0.0, f64::max),
        predicted,
        per_point_error_mm: errors,
        mean_mm,
        std_mm,
        n_points: traj.points.len(),
        outside_box,
    }
}

pub fn error_to_spacing(mean_err_mm: f64, d_mm: f64) -> f64 {
    mean_err_mm / d_mm
}

pub fn write_trajectory_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let to_err = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(TRAJECTORY_HEADER).map_err(to_err)?;
    for (i, ((r, p), e)) in report
        .reference
        .iter()
        .zip(&report.predicted)
        .zip(&report.per_point_error_mm)
        .enumerate()
    {
        let mut row = vec![i.to_string()];
        row.extend(
            r.to_array()
                .into_iter()
                .chain(p.to_array())
                .chain([*e])
                .map(sig17),
        );
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(JointAngles);

    impl IkModel for Constant {
        fn predict(&self, _: &CartesianPoint) -> JointAngles {
            self.0
        }
    }

    #[test]
    fn rectangle_corners_only() {
        let b = WorkspaceBox::default();
        let p = make_rectangle_path(
            &b,
            &RectangleParams {
                points_per_edge: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(p.points.len(), 8);
        let xy: Vec<[f64; 2]> = p.points[..4].iter().map(|c| [c.x1, c.x2]).collect();
        assert_eq!(
            xy,
            vec![[30.0, 30.0], [70.0, 30.0], [70.0, 70.0], [30.0, 70.0]]
        );
        assert!(p.points[..4].iter().all(|c| c.x3 == 10.0));
        assert!(p.points[4..].iter().all(|c| c.x3 == 50.0));
    }

    #[test]
    fn rectangle_default_count() {
        let p = make_rectangle_path(&WorkspaceBox::default(), &RectangleParams::default()).unwrap();
        assert_eq!(p.points.len(), 200);
        assert!(make_rectangle_path(
            &WorkspaceBox::default(),
            &RectangleParams {
                points_per_edge: 1,
                ..Default::default()
            }
        )
        .is_err());
        assert!(make_rectangle_path(
            &WorkspaceBox::default(),
            &RectangleParams {
                margin: 30.0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn heart_key_points() {
        let hp = HeartParams::default();
        let p = make_heart_path(&hp).unwrap();
        assert_eq!(p.points.len(), 200);
        let top = p.points[0];
        assert_eq!(
            [top.x1, top.x2, top.x3],
            [50.0, 50.0 + 25.0 * 5.0 / 16.0, 30.0]
        );
        // t = pi sits at index 100 of 200
        let bottom = p.points[100];
        assert!((bottom.x1 - 50.0).abs() < 1e-12);
        assert!((bottom.x2 - (50.0 - 25.0 * 17.0 / 16.0)).abs() < 1e-12);
        assert!(make_heart_path(&HeartParams { n_points: 7, ..hp }).is_err());
    }

    #[test]
    fn heart_is_mirror_symmetric() {
        for i in 1..50 {
            let t = 2.0 * PI * i as f64 / 50.0;
            let (xa, ya) = heart_curve(t);
            let (xb, yb) = heart_curve(2.0 * PI - t);
            assert!((xa + xb).abs() < 1e-12 && (ya - yb).abs() < 1e-12);
        }
    }

    #[test]
    fn default_paths_inside_box() {
        let b = WorkspaceBox::default();
        let r = make_rectangle_path(&b, &RectangleParams::default()).unwrap();
        let h = make_heart_path(&HeartParams::default()).unwrap();
        assert!(r.points_outside(&b).is_empty());
        assert!(h.points_outside(&b).is_empty());
    }

    #[test]
    fn exact_model_has_zero_error() {
        let g = RobotGeometry::default();
        let b = WorkspaceBox::default();
        let path = make_heart_path(&HeartParams::default()).unwrap();
        let rep = evaluate_tracking(&ExactIk(g), &path, &g, &b);
        assert!(rep.max_mm < 1e-9);
    }

    #[test]
    fn constant_model_scores_distance_to_target() {
        let g = RobotGeometry::default();
        let b = WorkspaceBox::default();
        let c = b.center();
        let q = g.inverse_kinematics(&c).unwrap();
        let path = make_rectangle_path(&b, &RectangleParams::default()).unwrap();
        let rep = evaluate_tracking(&Constant(q), &path, &g, &b);
        let oracle: f64 = path
            .points
            .iter()
            .map(|p| ((p.x1 - 50.0).powi(2) + (p.x2 - 50.0).powi(2) + (p.x3 - 30.0).powi(2)).sqrt())
            .sum::<f64>()
            / path.points.len() as f64;
        assert!((rep.mean_mm - oracle).abs() < 1e-9);
    }

    #[test]
    fn aggregates_recompute() {
        let g = RobotGeometry::default();
        let b = WorkspaceBox::default();
        let q = JointAngles::new(0.7, 0.3, -1.5);
        let path = make_heart_path(&HeartParams::default()).unwrap();
        let rep = evaluate_tracking(&Constant(q), &path, &g, &b);
        let (m, s) = mean_std(&rep.per_point_error_mm);
        assert!((m - rep.mean_mm).abs() <= 1e-12 * m);
        assert!((s - rep.std_mm).abs() <= 1e-12 * s);
        assert!(rep
            .per_point_error_mm
            .iter()
            .all(|&e| e >= 0.0 && e <= rep.max_mm));
        assert_eq!(rep.n_points, 200);
    }

    #[test]
    fn outside_points_flagged() {
        let path = TrajectorySpec::custom(vec![
            CartesianPoint::new(50.0, 50.0, 30.0),
            CartesianPoint::new(90.0, 50.0, 30.0),
        ])
        .unwrap();
        assert_eq!(path.points_outside(&WorkspaceBox::default()), vec![1]);
        assert!(TrajectorySpec::custom(vec![CartesianPoint::default()]).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert!((error_to_spacing(2.17, 15.0) - 0.14467).abs() < 1e-4);
        assert!((error_to_spacing(19.31, 60.0) - 0.32183).abs() < 1e-4);
        assert_eq!(error_to_spacing(0.0, 7.0), 0.0);
    }

    #[test]
    fn path_kind_parse() {
        assert_eq!(
            "rectangle".parse::<PathKind>().unwrap(),
            PathKind::DoubleRectangle
        );
        assert_eq!("heart".parse::<PathKind>().unwrap(), PathKind::Heart);
        assert!("circle".parse::<PathKind>().is_err());
        assert_eq!(PathKind::Heart.to_string(), "heart");
    }
}
