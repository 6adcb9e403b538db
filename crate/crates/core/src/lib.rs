//! Lifted model fitting of Phong surfaces and triangle meshes to oriented
//! point sets.

pub mod bench;
pub mod curve2d;
pub mod energy;
pub mod kinematics;
pub mod mesh;
pub mod rotation;
pub mod solvers;
pub mod surfaces;
