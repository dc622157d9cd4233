//! Deterministic labeled scenes for desk-scale experiments.
//!
//! * `rooms`: an indoor box room with floor, walls, furniture boxes and a
//!   ceiling; noisy per-class RGB colors as features (segmentation).
//! * `beacon`: points scattered over a square with one red beacon point;
//!   every point is labeled with the quadrant in which the beacon lies as
//!   seen from that point, so a point can only be labeled correctly if the
//!   beacon is inside its receptive field.
//! * `shapes`: a single primitive surface with analytic unit normals as
//!   features and one object class for the whole cloud (classification).

use std::f64::consts::TAU;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    Rooms,
    Beacon,
    Shapes,
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rooms" => Ok(SceneKind::Rooms),
            "beacon" => Ok(SceneKind::Beacon),
            "shapes" => Ok(SceneKind::Shapes),
            other => Err(Error::invalid(format!("unknown scene kind {other:?}"))),
        }
    }
}

impl SceneKind {
    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Rooms => "rooms",
            SceneKind::Beacon => "beacon",
            SceneKind::Shapes => "shapes",
        }
    }

    /// Number of label classes the generator emits with default options.
    pub fn default_classes(self) -> usize {
        match self {
            SceneKind::Rooms => ROOM_CLASSES,
            SceneKind::Beacon => BEACON_CLASSES,
            SceneKind::Shapes => SHAPE_CLASSES,
        }
    }
}

pub const ROOM_CLASSES: usize = 4;
pub const BEACON_CLASSES: usize = 4;
pub const SHAPE_CLASSES: usize = 5;

pub const BEACON_COLOR: [f64; 3] = [1.0, 0.0, 0.0];
pub const BEACON_BACKGROUND: [f64; 3] = [0.5, 0.5, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneOptions {
    pub points: usize,
    /// Rooms only: 2 (floor, wall), 3 (+ box) or 4 (+ ceiling).
    #[serde(default = "default_room_classes")]
    pub room_classes: usize,
    /// Side length of the beacon square in meters.
    #[serde(default = "default_beacon_extent")]
    pub beacon_extent: f64,
}

fn default_room_classes() -> usize {
    ROOM_CLASSES
}

fn default_beacon_extent() -> f64 {
    4.0
}

impl SceneOptions {
    pub fn for_kind(kind: SceneKind) -> Self {
        let points = match kind {
            SceneKind::Rooms => 4096,
            SceneKind::Beacon => 512,
            SceneKind::Shapes => 1024,
        };
        Self {
            points,
            room_classes: ROOM_CLASSES,
            beacon_extent: default_beacon_extent(),
        }
    }
}

pub fn gen_synthetic_scene(scene_seed: u64, kind: SceneKind) -> PointCloud {
    gen_synthetic_scene_with(scene_seed, kind, &SceneOptions::for_kind(kind))
        .expect("default scene options are valid")
}

pub fn gen_synthetic_scene_with(scene_seed: u64, kind: SceneKind, opts: &SceneOptions) -> Result<PointCloud> {
    if opts.points == 0 {
        return Err(Error::invalid("scene needs at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
    match kind {
        SceneKind::Rooms => rooms(&mut rng, opts),
        SceneKind::Beacon => beacon(&mut rng, opts),
        SceneKind::Shapes => shapes(&mut rng, opts),
    }
}

/// Quadrant of `beacon` relative to `point` in the xy-plane:
/// 0 = (+x, +y), 1 = (−x, +y), 2 = (−x, −y), 3 = (+x, −y); ties count as +.
pub fn beacon_quadrant(point: [f64; 3], beacon: [f64; 3]) -> usize {
    let east = beacon[0] - point[0] >= 0.0;
    let north = beacon[1] - point[1] >= 0.0;
    match (east, north) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

/// Index of the beacon point in a beacon scene (the one red point).
pub fn find_beacon(cloud: &PointCloud) -> Option<usize> {
    cloud
        .valid_indices()
        .find(|&i| cloud.features().row(i) == BEACON_COLOR)
}

struct Builder {
    positions: Vec<[f64; 3]>,
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
}

impl Builder {
    fn new(capacity: usize, dim: usize) -> Self {
        Self {
            positions: Vec::with_capacity(capacity),
            features: Vec::with_capacity(capacity * dim),
            labels: Vec::with_capacity(capacity),
            dim,
        }
    }

    fn push(&mut self, p: [f64; 3], f: &[f64], label: usize) {
        debug_assert_eq!(f.len(), self.dim);
        self.positions.push(p);
        self.features.extend_from_slice(f);
        self.labels.push(label);
    }

    fn finish(self) -> Result<PointCloud> {
        let n = self.positions.len();
        let features = Matrix::from_vec(n, self.dim, self.features)?;
        PointCloud::new(self.positions, features, Some(self.labels), vec![true; n])
    }
}

fn noisy_color(rng: &mut impl Rng, base: [f64; 3], amount: f64) -> [f64; 3] {
    base.map(|c| (c + rng.gen_range(-amount..=amount)).clamp(0.0, 1.0))
}

fn rooms(rng: &mut ChaCha8Rng, opts: &SceneOptions) -> Result<PointCloud> {
    const FLOOR: usize = 0;
    const WALL: usize = 1;
    const BOX: usize = 2;
    const CEILING: usize = 3;
    const PALETTE: [[f64; 3]; 4] = [
        [0.55, 0.42, 0.30],
        [0.80, 0.80, 0.74],
        [0.30, 0.40, 0.70],
        [0.92, 0.92, 0.90],
    ];
    if !(2..=4).contains(&opts.room_classes) {
        return Err(Error::invalid("room_classes must be 2, 3 or 4"));
    }
    let classes = opts.room_classes;

    let width = rng.gen_range(4.0..8.0);
    let depth = rng.gen_range(4.0..8.0);
    let height = rng.gen_range(2.5..3.2);
    let noise = 0.005;

    let boxes: Vec<([f64; 3], [f64; 3])> = (0..rng.gen_range(2..=4))
        .map(|_| {
            let size = [
                rng.gen_range(0.4..1.4),
                rng.gen_range(0.4..1.4),
                rng.gen_range(0.4..1.1),
            ];
            let x = rng.gen_range(0.2..width - size[0] - 0.2);
            let y = rng.gen_range(0.2..depth - size[1] - 0.2);
            ([x, y, 0.0], size)
        })
        .collect();

    let mut b = Builder::new(opts.points, 3);
    let weights: &[f64] = match classes {
        2 => &[0.5, 0.5],
        3 => &[0.35, 0.4, 0.25],
        _ => &[0.3, 0.35, 0.2, 0.15],
    };
    for _ in 0..opts.points {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let class = weights
            .iter()
            .position(|w| {
                acc += w;
                u < acc
            })
            .unwrap_or(classes - 1);
        let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(-noise..=noise);
        let p = match class {
            FLOOR => [rng.gen_range(0.0..width), rng.gen_range(0.0..depth), jitter(rng)],
            CEILING => [
                rng.gen_range(0.0..width),
                rng.gen_range(0.0..depth),
                height + jitter(rng),
            ],
            WALL => {
                let z = rng.gen_range(0.0..height);
                match rng.gen_range(0..4) {
                    0 => [jitter(rng), rng.gen_range(0.0..depth), z],
                    1 => [width + jitter(rng), rng.gen_range(0.0..depth), z],
                    2 => [rng.gen_range(0.0..width), jitter(rng), z],
                    _ => [rng.gen_range(0.0..width), depth + jitter(rng), z],
                }
            }
            _ => {
                let (o, s) = boxes[rng.gen_range(0..boxes.len())];
                // top face or one of four sides
                let face = rng.gen_range(0..5);
                let (u, v) = (rng.gen::<f64>(), rng.gen::<f64>());
                match face {
                    0 => [o[0] + u * s[0], o[1] + v * s[1], s[2] + jitter(rng)],
                    1 => [o[0] + jitter(rng), o[1] + u * s[1], v * s[2]],
                    2 => [o[0] + s[0] + jitter(rng), o[1] + u * s[1], v * s[2]],
                    3 => [o[0] + u * s[0], o[1] + jitter(rng), v * s[2]],
                    _ => [o[0] + u * s[0], o[1] + s[1] + jitter(rng), v * s[2]],
                }
            }
        };
        debug_assert!(class != BOX || classes >= 3);
        let color = noisy_color(rng, PALETTE[class], 0.15);
        b.push(p, &color, class);
    }
    b.finish()
}

fn beacon(rng: &mut ChaCha8Rng, opts: &SceneOptions) -> Result<PointCloud> {
    let s = opts.beacon_extent;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid("beacon_extent must be positive"));
    }
    let positions: Vec<[f64; 3]> = (0..opts.points)
        .map(|_| {
            [
                rng.gen_range(0.0..s),
                rng.gen_range(0.0..s),
                rng.gen_range(0.0..0.05 * s),
            ]
        })
        .collect();
    let beacon_index = rng.gen_range(0..opts.points);
    let beacon_pos = positions[beacon_index];

    let mut b = Builder::new(opts.points, 3);
    for (i, &p) in positions.iter().enumerate() {
        let color = if i == beacon_index {
            BEACON_COLOR
        } else {
            BEACON_BACKGROUND
        };
        b.push(p, &color, beacon_quadrant(p, beacon_pos));
    }
    b.finish()
}

fn shapes(rng: &mut ChaCha8Rng, opts: &SceneOptions) -> Result<PointCloud> {
    let class = rng.gen_range(0..SHAPE_CLASSES);
    let scale = rng.gen_range(0.5..1.5);
    let mut b = Builder::new(opts.points, 3);
    for _ in 0..opts.points {
        let (p, n) = match class {
            0 => sphere_sample(rng),
            1 => cube_sample(rng),
            2 => cylinder_sample(rng),
            3 => cone_sample(rng),
            _ => torus_sample(rng),
        };
        b.push(p.map(|v| v * scale), &normalize(n), class);
    }
    b.finish()
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / len)
}

fn sphere_sample(rng: &mut impl Rng) -> ([f64; 3], [f64; 3]) {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..TAU);
    let r = (1.0 - z * z).sqrt();
    let p = [r * phi.cos(), r * phi.sin(), z];
    (p, p)
}

fn cube_sample(rng: &mut impl Rng) -> ([f64; 3], [f64; 3]) {
    let face = rng.gen_range(0..6);
    let axis = face / 2;
    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
    let mut p = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    p[axis] = sign;
    let mut n = [0.0; 3];
    n[axis] = sign;
    (p, n)
}

fn cylinder_sample(rng: &mut impl Rng) -> ([f64; 3], [f64; 3]) {
    let phi = rng.gen_range(0.0..TAU);
    // side area 2π·2 vs caps 2·π
    if rng.gen_range(0.0..1.0) < 2.0 / 3.0 {
        let z = rng.gen_range(-1.0..1.0);
        ([phi.cos(), phi.sin(), z], [phi.cos(), phi.sin(), 0.0])
    } else {
        let r = rng.gen_range(0.0f64..1.0).sqrt();
        let top = rng.gen_bool(0.5);
        let z = if top { 1.0 } else { -1.0 };
        ([r * phi.cos(), r * phi.sin(), z], [0.0, 0.0, z])
    }
}

fn cone_sample(rng: &mut impl Rng) -> ([f64; 3], [f64; 3]) {
    // apex at z = 1, base radius 1 at z = -1
    let phi = rng.gen_range(0.0..TAU);
    let slant = 5f64.sqrt();
    if rng.gen_range(0.0..1.0) < slant / (slant + 1.0) {
        let t = rng.gen_range(0.0f64..1.0).sqrt();
        let z = 1.0 - 2.0 * t;
        let n = [2.0 * phi.cos(), 2.0 * phi.sin(), 1.0];
        ([t * phi.cos(), t * phi.sin(), z], n)
    } else {
        let r = rng.gen_range(0.0f64..1.0).sqrt();
        ([r * phi.cos(), r * phi.sin(), -1.0], [0.0, 0.0, -1.0])
    }
}

fn torus_sample(rng: &mut impl Rng) -> ([f64; 3], [f64; 3]) {
    let (major, minor) = (0.75, 0.25);
    let u = rng.gen_range(0.0..TAU);
    let v = rng.gen_range(0.0..TAU);
    let n = [v.cos() * u.cos(), v.cos() * u.sin(), v.sin()];
    let p = [
        (major + minor * v.cos()) * u.cos(),
        (major + minor * v.cos()) * u.sin(),
        minor * v.sin(),
    ];
    (p, n)
}
