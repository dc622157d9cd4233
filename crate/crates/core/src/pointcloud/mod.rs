//! Point-cloud data model, text file I/O, crop sampling with zero-padding and
//! synthetic labeled scenes.

mod cloud;
mod crop;
mod io;
mod synthetic;

pub use cloud::PointCloud;
pub use crop::{random_crop_center, sample_crop, CropSpec};
pub use io::{format_ply_colored, format_xyz, load_cloud, save_cloud, CloudFormat};
pub use synthetic::{
    beacon_quadrant, find_beacon, gen_synthetic_scene, gen_synthetic_scene_with, SceneKind, SceneOptions,
    BEACON_BACKGROUND, BEACON_CLASSES, BEACON_COLOR, ROOM_CLASSES, SHAPE_CLASSES,
};
