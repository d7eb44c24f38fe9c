//! Parallel-jaw gripper model, dense candidate enumeration, contacts,
//! collision checks, antipodal quality and per-point labels.

mod candidates;
mod collision;
mod contacts;
mod gripper;
pub mod io;
mod labels;
mod pose;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use candidates::{
    angle, candidate_index, enumerate_candidates, fibonacci_sphere, view_opposes_normal, views, CANDIDATES_PER_SAMPLE,
    DEPTHS, NUM_ANGLES, NUM_DEPTHS, NUM_VIEWS, PER_VIEW,
};
pub use collision::{check_collision, check_collision_octree, CollisionGeometry};
pub(crate) use contacts::find_contacts_among;
pub use contacts::{
    find_contacts, force_closure, grasp_quality, ContactPair, CONTACT_TIE_TOLERANCE, MIN_CONTACT_SEPARATION,
};
pub use gripper::{GripperModel, LocalBox};
pub use labels::{
    attach_labels, generate_labels, generate_labels_with, label_sample, label_samples, LabelConfig, SurfaceCloud,
    LABEL_RADIUS,
};
pub use pose::{frame, reference_axes, GraspLabel, GraspPose, DEPTH_RANGE, PACKED_FIELDS, WIDTH_RANGE};

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("contact points coincide (separation {0:.3e} m)")]
    DegenerateContacts(f64),
    #[error("invalid gripper: {0}")]
    InvalidGripper(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
