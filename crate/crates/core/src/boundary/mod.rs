//! Cylindrical bounds: fitting, overlap scoring and the regression loss.

pub mod circle;
pub mod cylinder;
pub mod loss;

pub use circle::{min_enclosing_circle, Circle};
pub use cylinder::{
    cyl_overlap, disc_intersection_area, fit_bound, fit_points, intersection_volume,
    read_bounds_csv, write_bounds_csv, CylBound, Overlap, DEGENERATE_FLOOR,
};
pub use loss::{bound_loss, smooth_l1, smooth_l1_grad, smooth_l1_sum};
