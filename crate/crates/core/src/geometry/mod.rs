//! Layered phase space, the nilpotent matrix `B`, the hyper-Galilean group and cylinders.

mod cylinder;
mod group;
mod spec;

pub use cylinder::{Cylinder, CylinderKind, CylinderLayout};
pub use group::{dilate, group_compose, group_inverse};
pub use spec::{KineticPoint, SystemSpec};
