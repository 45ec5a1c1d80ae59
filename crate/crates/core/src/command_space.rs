//! The admissible command polygon and uniform sampling over it.
//!
//! Wheel controllers bound each wheel speed to a square in the wheel frame;
//! the manufacturer bounds longitudinal and yaw speed to a rectangle in the
//! body frame. Since the two boxes live in different frames, the real
//! command space is their intersection mapped through the differential-drive
//! matrix: a convex polygon with 4 to 8 vertices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{idd_forward, idd_inverse, BodyVelocity, RobotGeometry, WheelCommand};

/// Vertices closer than this in either coordinate are merged when clipping.
const VERTEX_MERGE_EPS: f64 = 1e-9;

/// Containment tolerance for the half-plane test.
const CONTAINS_EPS: f64 = 1e-9;

/// Intersected command polygon, stored in the wheel frame with a mapped
/// body-frame copy. Vertices are ordered counter-clockwise.
#[derive(Debug, Clone)]
pub struct CommandPolygon {
    wheel_vertices: Vec<(f64, f64)>,
    body_vertices: Vec<(f64, f64)>,
    /// Half-planes (a, b, c) meaning a*wl + b*wr <= c, in the wheel frame.
    half_planes: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Error)]
pub enum CommandSpaceError {
    #[error("sample count must be at least 1")]
    EmptySampleRequest,
    #[error(transparent)]
    Geometry(#[from] crate::model::GeometryError),
}

/// Build the command polygon for a platform: the wheel-frame square
/// [-w_max, w_max]^2 clipped by the body-frame speed rectangle expressed in
/// wheel coordinates.
pub fn build_polygon(geom: &RobotGeometry) -> Result<CommandPolygon, CommandSpaceError> {
    geom.validate()?;
    let w = geom.max_wheel_speed;
    let r = geom.wheel_radius;
    let b = geom.base_width;

    // a*wl + b*wr <= c rows: wheel square, then |vx| <= vx_max and
    // |wz| <= wz_max mapped through vx = r(wl+wr)/2, wz = r(wr-wl)/b.
    let half_planes = vec![
        (1.0, 0.0, w),
        (-1.0, 0.0, w),
        (0.0, 1.0, w),
        (0.0, -1.0, w),
        (r / 2.0, r / 2.0, geom.max_linear_speed),
        (-r / 2.0, -r / 2.0, geom.max_linear_speed),
        (-r / b, r / b, geom.max_angular_speed),
        (r / b, -r / b, geom.max_angular_speed),
    ];

    // Start from the wheel square and clip by the remaining four planes.
    let mut verts = vec![(-w, -w), (w, -w), (w, w), (-w, w)];
    for hp in &half_planes[4..] {
        verts = clip(&verts, *hp);
        assert!(!verts.is_empty(), "positive limits cannot empty the polygon");
    }
    let verts = merge_close(verts);
    debug_assert!((4..=8).contains(&verts.len()));

    let body_vertices = verts
        .iter()
        .map(|&(wl, wr)| {
            let v = idd_forward(geom, WheelCommand::new(wl, wr));
            (v.vx, v.wz)
        })
        .collect();

    Ok(CommandPolygon {
        wheel_vertices: verts,
        body_vertices,
        half_planes,
    })
}

/// Sutherland-Hodgman clip of a convex CCW polygon by one half-plane.
fn clip(verts: &[(f64, f64)], (a, b, c): (f64, f64, f64)) -> Vec<(f64, f64)> {
    let inside = |p: (f64, f64)| a * p.0 + b * p.1 <= c;
    let mut out = Vec::with_capacity(verts.len() + 1);
    for i in 0..verts.len() {
        let cur = verts[i];
        let next = verts[(i + 1) % verts.len()];
        let cur_in = inside(cur);
        let next_in = inside(next);
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            // Edge crosses the boundary a*x + b*y = c.
            let denom = a * (next.0 - cur.0) + b * (next.1 - cur.1);
            let t = (c - a * cur.0 - b * cur.1) / denom;
            out.push((cur.0 + t * (next.0 - cur.0), cur.1 + t * (next.1 - cur.1)));
        }
    }
    out
}

fn merge_close(verts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(verts.len());
    for v in verts {
        let dup = out.iter().any(|&u| {
            (u.0 - v.0).abs() < VERTEX_MERGE_EPS && (u.1 - v.1).abs() < VERTEX_MERGE_EPS
        });
        if !dup {
            out.push(v);
        }
    }
    out
}

impl CommandPolygon {
    /// Wheel-frame vertices (wl, wr), counter-clockwise.
    pub fn wheel_vertices(&self) -> &[(f64, f64)] {
        &self.wheel_vertices
    }

    /// Body-frame vertices (vx, wz), counter-clockwise.
    pub fn body_vertices(&self) -> &[(f64, f64)] {
        &self.body_vertices
    }

    /// Exact half-plane containment test in the wheel frame.
    pub fn contains_wheel(&self, cmd: WheelCommand) -> bool {
        self.half_planes
            .iter()
            .all(|&(a, b, c)| a * cmd.left + b * cmd.right <= c + CONTAINS_EPS)
    }

    /// Containment test for a body-frame command (vx, wz).
    pub fn contains_body(&self, geom: &RobotGeometry, vel: BodyVelocity) -> bool {
        match idd_inverse(geom, BodyVelocity::command(vel.vx, vel.wz)) {
            Ok(cmd) => self.contains_wheel(cmd),
            Err(_) => false,
        }
    }

    /// Axis-aligned bounding box of the wheel-frame polygon.
    pub fn wheel_bbox(&self) -> ((f64, f64), (f64, f64)) {
        bbox(&self.wheel_vertices)
    }

    /// Axis-aligned bounding box of the body-frame polygon.
    pub fn body_bbox(&self) -> ((f64, f64), (f64, f64)) {
        bbox(&self.body_vertices)
    }

    /// Signed area of the wheel-frame polygon (positive for CCW order).
    pub fn wheel_area(&self) -> f64 {
        shoelace(&self.wheel_vertices)
    }

    /// Centroid of the wheel-frame polygon.
    pub fn wheel_centroid(&self) -> (f64, f64) {
        let verts = &self.wheel_vertices;
        let a = shoelace(verts);
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..verts.len() {
            let (x0, y0) = verts[i];
            let (x1, y1) = verts[(i + 1) % verts.len()];
            let cross = x0 * y1 - x1 * y0;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
        }
        (cx / (6.0 * a), cy / (6.0 * a))
    }
}

fn bbox(verts: &[(f64, f64)]) -> ((f64, f64), (f64, f64)) {
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in verts {
        min.0 = min.0.min(x);
        min.1 = min.1.min(y);
        max.0 = max.0.max(x);
        max.1 = max.1.max(y);
    }
    (min, max)
}

fn shoelace(verts: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for i in 0..verts.len() {
        let (x0, y0) = verts[i];
        let (x1, y1) = verts[(i + 1) % verts.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

/// The commands drawn for one protocol run, with the seed that produced them.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub commands: Vec<WheelCommand>,
    pub seed: u64,
}

/// Draw `count` commands i.i.d. uniform over the wheel-frame polygon by
/// rejection from its bounding box. Deterministic for a given seed.
pub fn sample_uniform(
    poly: &CommandPolygon,
    count: usize,
    seed: u64,
) -> Result<SampleSet, CommandSpaceError> {
    if count == 0 {
        return Err(CommandSpaceError::EmptySampleRequest);
    }
    let ((lo_l, lo_r), (hi_l, hi_r)) = poly.wheel_bbox();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut commands = Vec::with_capacity(count);
    while commands.len() < count {
        let cand = WheelCommand::new(rng.gen_range(lo_l..=hi_l), rng.gen_range(lo_r..=hi_r));
        if poly.contains_wheel(cand) {
            commands.push(cand);
        }
    }
    Ok(SampleSet { commands, seed })
}

/// One acceleration-limited step from `prev` toward `next`.
///
/// Only the longitudinal channel is ramped; yaw follows immediately. The
/// returned command equals `next` once the remaining gap fits in one step,
/// so repeated application reaches `next` exactly in finitely many steps.
pub fn clamp_transition(
    geom: &RobotGeometry,
    prev: BodyVelocity,
    next: BodyVelocity,
    dt: f64,
) -> BodyVelocity {
    debug_assert!(dt > 0.0);
    let max_step = geom.max_linear_accel * dt;
    let dv = next.vx - prev.vx;
    let vx = if dv.abs() <= max_step {
        next.vx
    } else {
        prev.vx + max_step.copysign(dv)
    };
    BodyVelocity::command(vx, next.wz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(r: f64, b: f64, w_max: f64, vx_max: f64, wz_max: f64) -> RobotGeometry {
        RobotGeometry {
            wheel_radius: r,
            base_width: b,
            max_wheel_speed: w_max,
            max_linear_speed: vx_max,
            max_angular_speed: wz_max,
            ..RobotGeometry::warthog_analog()
        }
    }

    /// Independent oracle: enumerate all pairwise boundary-line
    /// intersections, keep the feasible ones, order them by angle.
    fn oracle_vertices(geom: &RobotGeometry) -> Vec<(f64, f64)> {
        let w = geom.max_wheel_speed;
        let r = geom.wheel_radius;
        let b = geom.base_width;
        let lines = [
            (1.0, 0.0, w),
            (-1.0, 0.0, w),
            (0.0, 1.0, w),
            (0.0, -1.0, w),
            (r / 2.0, r / 2.0, geom.max_linear_speed),
            (-r / 2.0, -r / 2.0, geom.max_linear_speed),
            (-r / b, r / b, geom.max_angular_speed),
            (r / b, -r / b, geom.max_angular_speed),
        ];
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for i in 0..lines.len() {
            for j in (i + 1)..lines.len() {
                let (a1, b1, c1) = lines[i];
                let (a2, b2, c2) = lines[j];
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (c1 * b2 - c2 * b1) / det;
                let y = (a1 * c2 - a2 * c1) / det;
                let feasible = lines.iter().all(|&(a, bb, c)| a * x + bb * y <= c + 1e-9);
                if feasible {
                    let dup = pts
                        .iter()
                        .any(|&(px, py)| (px - x).abs() < 1e-7 && (py - y).abs() < 1e-7);
                    if !dup {
                        pts.push((x, y));
                    }
                }
            }
        }
        pts.sort_by(|p, q| {
            let ap = p.1.atan2(p.0);
            let aq = q.1.atan2(q.0);
            ap.partial_cmp(&aq).unwrap()
        });
        pts
    }

    fn assert_same_vertex_set(got: &[(f64, f64)], want: &[(f64, f64)]) {
        assert_eq!(got.len(), want.len(), "vertex count: {got:?} vs {want:?}");
        for v in want {
            assert!(
                got.iter()
                    .any(|g| (g.0 - v.0).abs() < 1e-7 && (g.1 - v.1).abs() < 1e-7),
                "missing vertex {v:?} in {got:?}"
            );
        }
    }

    #[test]
    fn body_rectangle_when_wheel_limit_slack() {
        // Huge wheel limit: the body rectangle is the whole polygon.
        let g = geom(0.5, 1.0, 1e6, 4.0, 6.0);
        let poly = build_polygon(&g).unwrap();
        assert_eq!(poly.body_vertices().len(), 4);
        for &(vx, wz) in poly.body_vertices() {
            assert!((vx.abs() - 4.0).abs() < 1e-6);
            assert!((wz.abs() - 6.0).abs() < 1e-6);
        }
    }

    #[test]
    fn wheel_square_when_body_limits_slack() {
        // Huge body limits: the polygon is the wheel square, a tilted
        // diamond once mapped to the body frame.
        let g = geom(0.5, 1.0, 10.0, 1e6, 1e6);
        let poly = build_polygon(&g).unwrap();
        assert_eq!(poly.wheel_vertices().len(), 4);
        assert_same_vertex_set(
            poly.wheel_vertices(),
            &[(10.0, 10.0), (-10.0, 10.0), (-10.0, -10.0), (10.0, -10.0)],
        );
        // Diamond corners in the body frame: (+-5, 0) and (0, +-10).
        assert_same_vertex_set(
            poly.body_vertices(),
            &[(5.0, 0.0), (-5.0, 0.0), (0.0, 10.0), (0.0, -10.0)],
        );
    }

    #[test]
    fn mixed_limits_match_half_plane_oracle() {
        let g = geom(0.5, 1.0, 10.0, 4.0, 6.0);
        let poly = build_polygon(&g).unwrap();
        let want = oracle_vertices(&g);
        assert_same_vertex_set(poly.wheel_vertices(), &want);
        assert!((4..=8).contains(&poly.wheel_vertices().len()));
    }

    #[test]
    fn preset_polygons_match_oracle() {
        for g in [RobotGeometry::warthog_analog(), RobotGeometry::husky_analog()] {
            let poly = build_polygon(&g).unwrap();
            let want = oracle_vertices(&g);
            assert_same_vertex_set(poly.wheel_vertices(), &want);
        }
    }

    #[test]
    fn vertices_respect_all_limits() {
        let g = geom(0.5, 1.0, 10.0, 4.0, 6.0);
        let poly = build_polygon(&g).unwrap();
        for &(wl, wr) in poly.wheel_vertices() {
            assert!(wl.abs() <= 10.0 + 1e-9 && wr.abs() <= 10.0 + 1e-9);
            let v = idd_forward(&g, WheelCommand::new(wl, wr));
            assert!(v.vx.abs() <= 4.0 + 1e-9);
            assert!(v.wz.abs() <= 6.0 + 1e-9);
        }
    }

    #[test]
    fn polygon_symmetric_under_negation() {
        let poly = build_polygon(&RobotGeometry::warthog_analog()).unwrap();
        for &(wl, wr) in poly.wheel_vertices() {
            assert!(
                poly.wheel_vertices()
                    .iter()
                    .any(|&(a, b)| (a + wl).abs() < 1e-9 && (b + wr).abs() < 1e-9),
                "negated vertex missing for ({wl}, {wr})"
            );
        }
    }

    #[test]
    fn sampling_rejects_zero_count() {
        let poly = build_polygon(&RobotGeometry::husky_analog()).unwrap();
        assert!(sample_uniform(&poly, 0, 1).is_err());
    }

    #[test]
    fn samples_are_contained_and_deterministic() {
        let poly = build_polygon(&RobotGeometry::warthog_analog()).unwrap();
        let a = sample_uniform(&poly, 500, 42).unwrap();
        let b = sample_uniform(&poly, 500, 42).unwrap();
        assert_eq!(a.commands, b.commands);
        for c in &a.commands {
            assert!(poly.contains_wheel(*c));
        }
    }

    #[test]
    fn sample_mean_matches_centroid() {
        // Unit-square polygon: wheel limit 1, slack body limits.
        let g = geom(0.5, 1.0, 1.0, 1e6, 1e6);
        let poly = build_polygon(&g).unwrap();
        let set = sample_uniform(&poly, 10_000, 7).unwrap();
        let n = set.commands.len() as f64;
        let mean_l: f64 = set.commands.iter().map(|c| c.left).sum::<f64>() / n;
        let mean_r: f64 = set.commands.iter().map(|c| c.right).sum::<f64>() / n;
        // Per-coordinate sigma of the mean for U(-1,1): (2/sqrt(12))/sqrt(n).
        let sigma = 2.0 / 12f64.sqrt() / n.sqrt();
        let (cx, cy) = poly.wheel_centroid();
        assert!((mean_l - cx).abs() < 3.0 * sigma, "mean_l={mean_l} cx={cx}");
        assert!((mean_r - cy).abs() < 3.0 * sigma, "mean_r={mean_r} cy={cy}");
    }

    #[test]
    fn clamp_identity_when_reachable() {
        let g = RobotGeometry::warthog_analog();
        let next = BodyVelocity::command(1.0, 0.5);
        assert_eq!(clamp_transition(&g, next, next, 0.05), next);
    }

    #[test]
    fn clamp_ramp_step_hand_value() {
        // accel 4 m/s^2 over 0.05 s moves vx by 0.2.
        let g = RobotGeometry::warthog_analog();
        let out = clamp_transition(
            &g,
            BodyVelocity::command(0.0, 0.0),
            BodyVelocity::command(5.0, 0.0),
            0.05,
        );
        assert!((out.vx - 0.2).abs() < 1e-12);
    }

    #[test]
    fn clamp_converges_in_expected_steps() {
        let g = RobotGeometry::warthog_analog();
        let dt = 0.05;
        let target = BodyVelocity::command(5.0, -1.0);
        let mut cur = BodyVelocity::command(0.0, 0.0);
        let mut steps = 0;
        while cur != target {
            cur = clamp_transition(&g, cur, target, dt);
            steps += 1;
            assert!(steps < 1000);
        }
        let expected = (5.0f64 / (g.max_linear_accel * dt)).ceil() as usize;
        assert_eq!(steps, expected);
    }
}
