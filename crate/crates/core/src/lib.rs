//! Guaranteed set-membership uncertainty quantification for 3D-3D landmark
//! SLAM: polytope calculus, SDP-certified forward/backward/compound
//! primitives, conformal calibration and the full mapping pipeline.

pub mod conformal;
pub mod error;
pub mod liegroup;
pub mod lp;
pub mod polytope;
pub mod sdp;
pub mod slam;
pub mod uq;
