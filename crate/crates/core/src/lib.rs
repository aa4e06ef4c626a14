//! Exact planar optimal-transport geometry and quantitative convexity checks.

pub mod error;
pub mod geometry;
pub mod rational;

pub use geometry::{Point2, Polygon2, PwlFunction, Rect, Region, Rotation, Subdiff};
pub use rational::Q;
pub mod flow;
pub(crate) mod int;
pub mod measures;
pub mod report;
pub mod transport;
pub mod hall;
pub mod analysis;
pub mod integral;
pub mod appendix;
pub mod io;
