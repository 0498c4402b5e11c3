//! Closed-form path geometry for the V-pattern of a short loading cycle.
//!
//! Global frame: the bank runs along the +x axis and the load receiver along
//! the +z axis, with the origin at their intersection. The loader works in the
//! positive quadrant. Headings are measured counterclockwise from +x.
//!
//! The dig point sits at `(a, 0)` on the bank and the dump point at `(0, b)`
//! on the receiver. The theoretical path is two mutually tangent circular arcs:
//! arc A touches the bank normal at the dig point (centre `(a + r_a, 0)`), arc
//! B touches the receiver normal at the dump point (centre `(0, b + r_b)`).
//! The machine reverses along arc A, switches direction at the arc junction
//! and drives forward along arc B. Its front heading is continuous through
//! the junction, where the shared tangent makes the angle `alpha` with the
//! receiver line.

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("invariant violated: {0}")]
    Invariant(&'static str),
    #[error("path construction failed: tangency residual {residual:e} m exceeds {limit:e} m")]
    Construction { residual: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, GeomError>;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Planar pose in the global workplace frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub z: f64,
    /// Heading, always in `(-pi, pi]`.
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, z: f64, theta: f64) -> Self {
        Self {
            x,
            z,
            theta: normalize_angle(theta),
        }
    }

    pub fn distance_to(&self, x: f64, z: f64) -> f64 {
        (self.x - x).hypot(self.z - z)
    }
}

/// Positions of dig point and dump point relative to the bank/receiver corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkplaceLayout {
    /// Distance of the dig point from the origin, along the bank.
    pub a: f64,
    /// Distance of the dump point from the origin, along the receiver.
    pub b: f64,
    pub receiver_halfwidth: f64,
}

impl WorkplaceLayout {
    pub fn new(a: f64, b: f64, receiver_halfwidth: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
            return Err(GeomError::Domain("layout distances a and b must be positive"));
        }
        if !(receiver_halfwidth >= 0.0) {
            return Err(GeomError::Domain("receiver_halfwidth must be non-negative"));
        }
        Ok(Self {
            a,
            b,
            receiver_halfwidth,
        })
    }

    /// Loader pose at the dig point, facing the bank.
    pub fn dig_pose(&self) -> Pose {
        Pose::new(self.a, 0.0, -FRAC_PI_2)
    }

    pub fn dump_point(&self) -> (f64, f64) {
        (0.0, self.b)
    }
}

/// The two-arc V-pattern: radius of the bank-side arc, radius of the
/// receiver-side arc, and the orientation of their shared tangent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VPathPlan {
    pub r_a: f64,
    pub r_b: f64,
    pub alpha: f64,
}

impl VPathPlan {
    /// Junction of the two arcs, where the machine changes travel direction.
    pub fn junction(&self, layout: &WorkplaceLayout) -> (f64, f64) {
        let (ca, _) = self.anchored_centres(layout);
        let n = self.centre_axis();
        (ca.0 - self.r_a * n.0, ca.1 - self.r_a * n.1)
    }

    /// Unit vector from the centre of arc B towards the centre of arc A.
    fn centre_axis(&self) -> (f64, f64) {
        (self.alpha.cos(), -self.alpha.sin())
    }

    fn anchored_centres(&self, layout: &WorkplaceLayout) -> ((f64, f64), (f64, f64)) {
        ((layout.a + self.r_a, 0.0), (0.0, layout.b + self.r_b))
    }
}

/// Remaining path onto the receiver: an arc of radius `r_c` followed by a
/// straight segment of (possibly negative) length `l_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachSolution {
    pub r_c: f64,
    pub l_c: f64,
    pub l_d: f64,
    pub l: f64,
}

fn check_layout(a: f64, b: f64) -> Result<()> {
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(GeomError::Domain("a and b must be positive and finite"))
    }
}

/// Arc radii for an arbitrary shared-tangent orientation `alpha`.
pub fn radii_general(a: f64, b: f64, alpha: f64) -> Result<(f64, f64)> {
    check_layout(a, b)?;
    if !(alpha > 0.0 && alpha < FRAC_PI_2) {
        return Err(GeomError::Domain("alpha must lie strictly between 0 and pi/2"));
    }
    let (s, c) = alpha.sin_cos();
    let r_a = 0.5 * ((a + b) * (1.0 + c) / s - (a - b));
    let r_b = 0.5 * ((a + b) * c / (1.0 - s) + (a - b));
    Ok((r_a, r_b))
}

/// Arc radii for a 45 degree shared tangent (equal steering left and right).
pub fn radii_symmetric(a: f64, b: f64) -> Result<(f64, f64)> {
    check_layout(a, b)?;
    let sqrt2 = std::f64::consts::SQRT_2;
    let r_a = (a + b) / sqrt2 + b;
    let r_b = (a - b * (1.0 - sqrt2)) / (2.0 - sqrt2);
    Ok((r_a, r_b))
}

/// The plan whose shared tangent passes through the origin, so the operator
/// can reverse while keeping the origin straight ahead.
pub fn plan_aim_at_origin(a: f64, b: f64) -> Result<VPathPlan> {
    check_layout(a, b)?;
    let root = (a + b) * ((a + b).powi(2) + 4.0 * a * b).sqrt();
    let diff_sq = a * a - b * b;
    let r_a = b + (root - diff_sq) / (4.0 * a);
    let r_b = a + (root + diff_sq) / (4.0 * b);
    let cos_alpha = (a + r_a) / (r_a + r_b);
    if !(cos_alpha.abs() <= 1.0) {
        return Err(GeomError::Invariant("|cos alpha| > 1 in aim-at-origin plan"));
    }
    Ok(VPathPlan {
        r_a,
        r_b,
        alpha: cos_alpha.acos(),
    })
}

/// Heading from the pose position towards the origin.
pub fn bearing_to_origin(pose: &Pose) -> Result<f64> {
    if pose.x == 0.0 && pose.z == 0.0 {
        return Err(GeomError::Domain("bearing undefined at the origin"));
    }
    Ok(normalize_angle((-pose.z).atan2(-pose.x)))
}

/// True when the machine's orientation points at the origin within `tol`.
///
/// While reversing out of the bank the operator keeps the origin straight
/// ahead, so the comparison is between the bearing and the machine heading,
/// not its direction of travel.
pub fn aims_at_origin(pose: &Pose, tol: f64) -> bool {
    match bearing_to_origin(pose) {
        Ok(beta) => normalize_angle(beta - pose.theta).abs() <= tol,
        Err(_) => false,
    }
}

/// Arc-plus-line distance onto the receiver.
///
/// `theta` is measured from the receiver-parallel axis (pi/2 means already
/// perpendicular), `d` is the lateral offset from the final approach line and
/// `z` the distance from the receiver line. `l_d` may come out negative.
pub fn approach_solution(d: f64, theta: f64, z: f64) -> Result<ApproachSolution> {
    if !(d >= 0.0) || !(z >= 0.0) {
        return Err(GeomError::Domain("d and z must be non-negative"));
    }
    if !(theta >= 0.0) || theta >= FRAC_PI_2 {
        return Err(GeomError::Domain("theta must lie in [0, pi/2)"));
    }
    if d == 0.0 && theta > 0.0 {
        return Err(GeomError::Domain("no tangent circle for zero offset at non-zero angle"));
    }
    let (s, c) = theta.sin_cos();
    let r_c = d / (1.0 - s);
    let l_c = r_c * (FRAC_PI_2 - theta);
    let l_d = z - r_c * c;
    Ok(ApproachSolution {
        r_c,
        l_c,
        l_d,
        l: l_c + l_d,
    })
}

/// Tangency gaps of a plan laid into a layout.
///
/// Each arc is anchored at its own end of the path and the other arc is
/// hung off the shared tangent; the residuals are the resulting gaps at the
/// bank-normal tangency, the arc junction and the receiver-normal tangency.
pub fn tangency_residuals(layout: &WorkplaceLayout, plan: &VPathPlan) -> (f64, f64, f64) {
    let (ca, cb) = plan.anchored_centres(layout);
    let n = plan.centre_axis();

    // junction seen from each anchored arc
    let ja = (ca.0 - plan.r_a * n.0, ca.1 - plan.r_a * n.1);
    let jb = (cb.0 + plan.r_b * n.0, cb.1 + plan.r_b * n.1);
    let arc_arc = (ja.0 - jb.0).hypot(ja.1 - jb.1);

    let ca_hung = (jb.0 + plan.r_a * n.0, jb.1 + plan.r_a * n.1);
    let line_arc_a = ((ca_hung.0 - layout.a).abs() - plan.r_a).abs();

    let cb_hung = (ja.0 - plan.r_b * n.0, ja.1 - plan.r_b * n.1);
    let line_arc_b = ((cb_hung.1 - layout.b).abs() - plan.r_b).abs();

    (line_arc_a, arc_arc, line_arc_b)
}

/// Samples the theoretical path from the dig point to the dump point at
/// arc-length spacing `ds`. Poses carry the machine heading, which turns from
/// facing the bank to facing the receiver without a jump at the junction.
pub fn sample_vpath(layout: &WorkplaceLayout, plan: &VPathPlan, ds: f64) -> Result<Vec<Pose>> {
    if !(ds > 0.0) || !ds.is_finite() {
        return Err(GeomError::Domain("ds must be positive"));
    }
    let (ra, rd, rb) = tangency_residuals(layout, plan);
    let residual = ra.max(rd).max(rb);
    let limit = 1e-6 * (layout.a + layout.b);
    if !(residual <= limit) {
        return Err(GeomError::Construction { residual, limit });
    }
    let (ca, cb) = plan.anchored_centres(layout);
    let mut poses = Vec::new();

    // Arc A: position angle about its centre runs from pi to pi - alpha.
    let len_a = plan.r_a * plan.alpha;
    let n_a = (len_a / ds).ceil().max(1.0) as usize;
    for i in 0..n_a {
        let phi = plan.alpha * i as f64 / n_a as f64;
        let pos = PI - phi;
        poses.push(Pose::new(
            ca.0 + plan.r_a * pos.cos(),
            ca.1 + plan.r_a * pos.sin(),
            -FRAC_PI_2 - phi,
        ));
    }

    // Arc B: position angle runs from -alpha to -pi/2.
    let sweep_b = FRAC_PI_2 - plan.alpha;
    let len_b = plan.r_b * sweep_b;
    let n_b = (len_b / ds).ceil().max(1.0) as usize;
    for i in 0..=n_b {
        let phi = sweep_b * i as f64 / n_b as f64;
        let pos = -plan.alpha - phi;
        poses.push(Pose::new(
            cb.0 + plan.r_b * pos.cos(),
            cb.1 + plan.r_b * pos.sin(),
            -FRAC_PI_2 - plan.alpha - phi,
        ));
    }
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn general_radii_at_45_degrees() {
        let (ra, rb) = radii_general(20.0, 15.0, FRAC_PI_4).unwrap();
        assert!((ra - 39.7487).abs() < 1e-4, "{ra}");
        assert!((rb - 44.7487).abs() < 1e-4, "{rb}");
        let (ra, rb) = radii_general(10.0, 10.0, FRAC_PI_4).unwrap();
        assert!((ra - 24.1421).abs() < 1e-4);
        assert!(rel(ra, rb) < 1e-12);
    }

    #[test]
    fn general_radii_reject_degenerate_alpha() {
        assert!(radii_general(1.0, 1.0, 0.0).is_err());
        assert!(radii_general(1.0, 1.0, FRAC_PI_2).is_err());
        assert!(radii_general(1.0, 1.0, -0.1).is_err());
        assert!(radii_general(0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn symmetric_radii_match_general() {
        let (ra, rb) = radii_symmetric(20.0, 15.0).unwrap();
        let (ga, gb) = radii_general(20.0, 15.0, FRAC_PI_4).unwrap();
        assert!(rel(ra, ga) < 1e-12 && rel(rb, gb) < 1e-12);
        let (ra, rb) = radii_symmetric(10.0, 10.0).unwrap();
        assert!((ra - 24.1421).abs() < 1e-4);
        assert!(rel(ra, rb) < 1e-12);
    }

    #[test]
    fn aim_at_origin_plan_values() {
        let p = plan_aim_at_origin(10.0, 10.0).unwrap();
        assert!((p.r_a - 24.1421).abs() < 1e-4);
        assert!(rel(p.r_a, p.r_b) < 1e-12);
        assert!((p.alpha - FRAC_PI_4).abs() < 1e-12);

        let p = plan_aim_at_origin(20.0, 15.0).unwrap();
        assert!((p.r_a - 34.3569).abs() < 1e-4, "{}", p.r_a);
        assert!((p.r_b - 51.6425).abs() < 1e-4, "{}", p.r_b);
        // independent numeric solve of the tangent-through-origin construction
        assert!((p.alpha - 0.886_586_006_180_979).abs() < 1e-9, "{}", p.alpha);
        assert!((p.alpha - 0.8867).abs() < 2e-4);
    }

    #[test]
    fn swapped_layout_mirrors_across_diagonal() {
        let p = plan_aim_at_origin(20.0, 15.0).unwrap();
        let q = plan_aim_at_origin(15.0, 20.0).unwrap();
        assert!((p.alpha + q.alpha - FRAC_PI_2).abs() < 1e-12);
        assert!(rel(p.r_a, q.r_b) < 1e-12 && rel(p.r_b, q.r_a) < 1e-12);
        let lp = WorkplaceLayout::new(20.0, 15.0, 0.0).unwrap();
        let lq = WorkplaceLayout::new(15.0, 20.0, 0.0).unwrap();
        let (jx, jz) = p.junction(&lp);
        let (kx, kz) = q.junction(&lq);
        assert!((jx - kz).abs() < 1e-9 && (jz - kx).abs() < 1e-9);
    }

    #[test]
    fn bearing_examples() {
        let b = bearing_to_origin(&Pose::new(5.0, 5.0, 1.0)).unwrap();
        assert!((b + 3.0 * FRAC_PI_4).abs() < 1e-15);
        let b = bearing_to_origin(&Pose::new(0.0, 7.0, 0.0)).unwrap();
        assert!((b + FRAC_PI_2).abs() < 1e-15);
        let b = bearing_to_origin(&Pose::new(-3.0, 0.0, 0.0)).unwrap();
        assert_eq!(b, 0.0);
        assert!(bearing_to_origin(&Pose::new(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn aim_check_compares_heading_with_bearing() {
        let facing = Pose::new(5.0, 5.0, -3.0 * FRAC_PI_4);
        assert!(aims_at_origin(&facing, 0.01));
        let away = Pose::new(5.0, 5.0, FRAC_PI_4);
        assert!(!aims_at_origin(&away, 0.01));
        let off = Pose::new(5.0, 5.0, -3.0 * FRAC_PI_4 + 0.02);
        assert!(!aims_at_origin(&off, 0.01));
        // across the +-pi seam
        let seam = Pose::new(3.0, 1e-3, PI);
        assert!(aims_at_origin(&seam, 0.01));
    }

    #[test]
    fn approach_examples() {
        let s = approach_solution(6.0, PI / 6.0, 25.0).unwrap();
        assert!((s.r_c - 12.0).abs() < 1e-12);
        assert!((s.l_c - 12.566).abs() < 1e-3);
        assert!((s.l_d - 14.608).abs() < 1e-3);
        assert!((s.l - 27.174).abs() < 1e-3);
        assert_eq!(s.l, s.l_c + s.l_d);

        let s = approach_solution(0.0, 0.0, 20.0).unwrap();
        assert_eq!((s.r_c, s.l_c, s.l_d, s.l), (0.0, 0.0, 20.0, 20.0));

        let s = approach_solution(6.0, PI / 6.0, 5.0).unwrap();
        assert!((s.l_d + 5.392).abs() < 1e-3, "{}", s.l_d);
    }

    #[test]
    fn approach_domain_errors() {
        assert!(approach_solution(1.0, FRAC_PI_2, 1.0).is_err());
        assert!(approach_solution(0.0, 0.3, 1.0).is_err());
        assert!(approach_solution(-1.0, 0.3, 1.0).is_err());
        assert!(approach_solution(1.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn residuals_vanish_for_planned_paths() {
        let layout = WorkplaceLayout::new(10.0, 10.0, 0.0).unwrap();
        let (a, m, b) = tangency_residuals(&layout, &plan_aim_at_origin(10.0, 10.0).unwrap());
        assert!(a <= 1e-8 && m <= 1e-8 && b <= 1e-8);

        let layout = WorkplaceLayout::new(20.0, 15.0, 0.0).unwrap();
        let (ra, rb) = radii_symmetric(20.0, 15.0).unwrap();
        let plan = VPathPlan {
            r_a: ra,
            r_b: rb,
            alpha: FRAC_PI_4,
        };
        let (a, m, b) = tangency_residuals(&layout, &plan);
        assert!(a <= 1e-8 && m <= 1e-8 && b <= 1e-8, "{a} {m} {b}");
    }

    #[test]
    fn perturbed_radius_shows_up_in_residuals() {
        let layout = WorkplaceLayout::new(10.0, 10.0, 0.0).unwrap();
        let mut plan = plan_aim_at_origin(10.0, 10.0).unwrap();
        plan.r_a += 0.1;
        let (a, m, b) = tangency_residuals(&layout, &plan);
        for r in [a, m, b] {
            assert!(r > 0.01 && r < 0.2, "{a} {m} {b}");
        }
        assert!(sample_vpath(&layout, &plan, 0.1).is_err());
    }

    #[test]
    fn sampled_path_end_headings() {
        let layout = WorkplaceLayout::new(20.0, 15.0, 0.0).unwrap();
        let plan = plan_aim_at_origin(20.0, 15.0).unwrap();
        let poses = sample_vpath(&layout, &plan, 0.05).unwrap();
        let first = poses.first().unwrap();
        let last = poses.last().unwrap();
        assert!((first.x - 20.0).abs() < 1e-9 && first.z.abs() < 1e-9);
        assert!((first.theta + FRAC_PI_2).abs() < 1e-12);
        assert!(last.x.abs() < 1e-9 && (last.z - 15.0).abs() < 1e-9);
        assert!((normalize_angle(last.theta - PI)).abs() < 1e-12);
    }

    #[test]
    fn junction_heading_matches_alpha() {
        let layout = WorkplaceLayout::new(20.0, 15.0, 0.0).unwrap();
        let plan = plan_aim_at_origin(20.0, 15.0).unwrap();
        let poses = sample_vpath(&layout, &plan, 0.05).unwrap();
        let (jx, jz) = plan.junction(&layout);
        let j = poses
            .iter()
            .find(|p| (p.x - jx).hypot(p.z - jz) < 1e-9)
            .expect("junction sampled");
        // shared tangent makes angle alpha with the receiver (z) axis
        let dir = (j.theta.cos(), j.theta.sin());
        let angle_to_receiver = (-dir.0).atan2(-dir.1);
        assert!((angle_to_receiver - plan.alpha).abs() < 1e-9);
        // and the tangent line runs through the origin
        let cross = jx * dir.1 - jz * dir.0;
        assert!(cross.abs() < 1e-9 * 35.0);
    }

    #[test]
    fn normalize_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-FRAC_PI_2 - PI) - FRAC_PI_2).abs() < 1e-12);
    }
}
