//! Geometric fidelity metrics with exact accelerated paths.

pub mod assignment;
pub mod distance;
pub mod kdtree;
pub mod report;

pub use assignment::solve_assignment;
pub use distance::{
    asd, chamfer_l1, chamfer_l1_brute, emd, estimate_normals, f1_at, nn_distances,
    nn_distances_brute, normal_consistency, PrecisionRecall,
};
pub use kdtree::KdTree;
pub use report::{
    evaluate_scenario, report_rows, write_metric_rows, Cloud, EvalMode, MetricConfig, MetricReport,
    MetricRow, DISTANCE_REPORT_SCALE,
};
