//! End-to-end evaluation: task generation, oracle queries, scoring,
//! metrics and result files.

mod exploit;
mod explore_eval;
mod io;
mod metrics;
mod report;

pub use exploit::{
    evaluate_task, generate_tasks, run_exploit_eval, ExploitTask, RunRecord, TaskInstance, KIND_LINEAR, KIND_MAB,
    KIND_ROOM,
};
pub use explore_eval::{explore_tasks, run_explore_eval, write_explore_results};
pub use io::{
    read_csv, read_results_csv, write_atomic, write_csv, write_curve_csv, write_exploit_outputs, write_explore_csv,
    write_fixtures, write_histogram_csv, write_results_csv,
};
pub use metrics::{
    ci95, explore_histograms, explore_summary, frac_correct_curve, normal_band, observed_thresholds, CurvePoint,
    ExploreRow, HistogramRow, Z95,
};
pub use report::{build_report, render_explore_table, Report};
