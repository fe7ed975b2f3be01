//! Polygon arithmetic, neighbourhood-order computation, and cubature of
//! isotropic kernels over polygonal domains.

mod clip;
mod cubature;
mod nborder;
mod polygon;

pub use clip::{disc_polygon, intersect_poly_disc};
pub use cubature::{
    adaptive_quadrature, cubature_green, cubature_triangulated, kernel_cubature,
    polygon_disc_area,
};
pub use nborder::nb_order;
pub use polygon::{point_in_polygon, polygon_area, PolygonSet, Ring};
