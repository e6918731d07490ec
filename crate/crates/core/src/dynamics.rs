//! Kinematic bicycle integration, vehicle footprints and oriented-box
//! collision geometry.
//!
//! The state reference point is the body center. With the default
//! symmetric axle split this coincides with the center of gravity used by
//! the bicycle model.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Longitudinal position along the road (m).
    pub x: f64,
    /// Lateral position (m); the lane marking sits at `y = 0`.
    pub y: f64,
    /// Yaw angle (rad), kept in `(-π, π]`.
    pub heading: f64,
    /// Forward speed (m/s), never negative.
    pub speed: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
            speed: speed.max(0.0),
        }
    }

    /// Velocity component along the road.
    pub fn longitudinal_speed(&self) -> f64 {
        self.speed * self.heading.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Longitudinal acceleration command (m/s²).
    pub accel: f64,
    /// Front-wheel steering angle (rad).
    pub steer: f64,
}

impl ControlInput {
    pub fn new(accel: f64, steer: f64) -> Self {
        Self { accel, steer }
    }
}

/// Actuator bounds applied before every integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLimits {
    pub accel_min: f64,
    pub accel_max: f64,
    pub steer_max: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self {
            accel_min: -4.0,
            accel_max: 3.0,
            steer_max: 0.5,
        }
    }
}

impl ControlLimits {
    /// Clamps a command into the limits. The flag is set when anything moved.
    pub fn clamp(&self, control: ControlInput) -> (ControlInput, bool) {
        let accel = control.accel.clamp(self.accel_min, self.accel_max);
        let steer = control.steer.clamp(-self.steer_max, self.steer_max);
        let clamped = accel != control.accel || steer != control.steer;
        (ControlInput { accel, steer }, clamped)
    }

    pub fn contains(&self, control: ControlInput) -> bool {
        control.accel >= self.accel_min
            && control.accel <= self.accel_max
            && control.steer.abs() <= self.steer_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    pub length: f64,
    pub width: f64,
    /// Distance from the center of gravity to the rear axle (l_r).
    pub rear_axle_to_cg: f64,
    /// Distance from the center of gravity to the front axle (l_f).
    pub front_axle_to_cg: f64,
}

impl Default for VehicleGeometry {
    /// A 4.8 m × 1.9 m sedan with a 2.8 m wheelbase split evenly.
    fn default() -> Self {
        Self {
            length: 4.8,
            width: 1.9,
            rear_axle_to_cg: 1.4,
            front_axle_to_cg: 1.4,
        }
    }
}

impl VehicleGeometry {
    pub fn wheelbase(&self) -> f64 {
        self.rear_axle_to_cg + self.front_axle_to_cg
    }

    pub fn is_valid(&self) -> bool {
        self.length > 0.0
            && self.width > 0.0
            && self.rear_axle_to_cg > 0.0
            && self.front_axle_to_cg > 0.0
            && self.wheelbase() <= self.length
    }

    /// Body slip angle produced by a front steering angle.
    pub fn slip_angle(&self, steer: f64) -> f64 {
        (self.rear_axle_to_cg / self.wheelbase() * steer.tan()).atan()
    }

    /// Inverse of [`slip_angle`](Self::slip_angle).
    pub fn steer_for_slip(&self, slip: f64) -> f64 {
        (slip.tan() * self.wheelbase() / self.rear_axle_to_cg).atan()
    }
}

/// Result of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicycleStep {
    pub state: VehicleState,
    /// The command had to be clamped into the limits.
    pub clamped: bool,
}

/// One explicit Euler step of the kinematic bicycle model.
///
/// Position and heading are advanced with the pre-step speed; the speed
/// update comes last and is floored at zero.
pub fn step_bicycle(
    state: &VehicleState,
    control: ControlInput,
    geometry: &VehicleGeometry,
    limits: &ControlLimits,
    dt: f64,
) -> BicycleStep {
    debug_assert!(dt > 0.0);
    let (control, clamped) = limits.clamp(control);
    let beta = geometry.slip_angle(control.steer);
    let v = state.speed;
    let course = state.heading + beta;
    let next = VehicleState {
        x: state.x + v * course.cos() * dt,
        y: state.y + v * course.sin() * dt,
        heading: normalize_angle(state.heading + v / geometry.rear_axle_to_cg * beta.sin() * dt),
        speed: (v + control.accel * dt).max(0.0),
    };
    BicycleStep {
        state: next,
        clamped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: (f64, f64),
    pub half_length: f64,
    pub half_width: f64,
    pub heading: f64,
}

impl OrientedBox {
    pub fn new(center: (f64, f64), half_length: f64, half_width: f64, heading: f64) -> Self {
        Self {
            center,
            half_length,
            half_width,
            heading,
        }
    }

    /// Unit vectors along the box length and width.
    pub fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let [u, w] = self.axes();
        let (cx, cy) = self.center;
        let (l, h) = (self.half_length, self.half_width);
        [
            (cx + u.0 * l + w.0 * h, cy + u.1 * l + w.1 * h),
            (cx - u.0 * l + w.0 * h, cy - u.1 * l + w.1 * h),
            (cx - u.0 * l - w.0 * h, cy - u.1 * l - w.1 * h),
            (cx + u.0 * l - w.0 * h, cy + u.1 * l - w.1 * h),
        ]
    }

    /// Radius of the circumscribed circle.
    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    pub fn max_y(&self) -> f64 {
        let (s, c) = self.heading.sin_cos();
        self.center.1 + self.half_length * s.abs() + self.half_width * c.abs()
    }

    pub fn min_y(&self) -> f64 {
        let (s, c) = self.heading.sin_cos();
        self.center.1 - self.half_length * s.abs() - self.half_width * c.abs()
    }

    pub fn max_x(&self) -> f64 {
        let (s, c) = self.heading.sin_cos();
        self.center.0 + self.half_length * c.abs() + self.half_width * s.abs()
    }

    pub fn min_x(&self) -> f64 {
        let (s, c) = self.heading.sin_cos();
        self.center.0 - self.half_length * c.abs() - self.half_width * s.abs()
    }

    fn project(&self, axis: (f64, f64)) -> (f64, f64) {
        let [u, w] = self.axes();
        let c = self.center.0 * axis.0 + self.center.1 * axis.1;
        let r = self.half_length * (u.0 * axis.0 + u.1 * axis.1).abs()
            + self.half_width * (w.0 * axis.0 + w.1 * axis.1).abs();
        (c - r, c + r)
    }
}

/// Body footprint of a vehicle, aligned with its heading.
pub fn footprint(state: &VehicleState, geometry: &VehicleGeometry) -> OrientedBox {
    OrientedBox::new(
        (state.x, state.y),
        geometry.length / 2.0,
        geometry.width / 2.0,
        state.heading,
    )
}

/// Separating-axis overlap test over the four face normals. Touching boxes
/// collide.
pub fn boxes_collide(a: &OrientedBox, b: &OrientedBox) -> bool {
    let dx = a.center.0 - b.center.0;
    let dy = a.center.1 - b.center.1;
    let reach = a.bounding_radius() + b.bounding_radius();
    if dx * dx + dy * dy > reach * reach {
        return false;
    }
    a.axes().into_iter().chain(b.axes()).all(|axis| {
        let (amin, amax) = a.project(axis);
        let (bmin, bmax) = b.project(axis);
        !(amax < bmin || bmax < amin)
    })
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let ap = (p.0 - a.0, p.1 - a.1);
    let len2 = ab.0 * ab.0 + ab.1 * ab.1;
    let t = if len2 > 0.0 {
        ((ap.0 * ab.0 + ap.1 * ab.1) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = (a.0 + t * ab.0, a.1 + t * ab.1);
    (p.0 - q.0).hypot(p.1 - q.1)
}

/// Minimum distance between the boundaries of two boxes; zero when they
/// collide.
pub fn min_separation(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if boxes_collide(a, b) {
        return 0.0;
    }
    let ca = a.corners();
    let cb = b.corners();
    let mut best = f64::INFINITY;
    for (points, edges) in [(&ca, &cb), (&cb, &ca)] {
        for &p in points.iter() {
            for i in 0..4 {
                let d = point_segment_distance(p, edges[i], edges[(i + 1) % 4]);
                best = best.min(d);
            }
        }
    }
    best
}

/// Cheap lower bound on [`min_separation`] from the circumscribed circles.
pub fn separation_lower_bound(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let d = (a.center.0 - b.center.0).hypot(a.center.1 - b.center.1);
    (d - a.bounding_radius() - b.bounding_radius()).max(0.0)
}
