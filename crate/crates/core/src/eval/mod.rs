//! Scoring of predictive distributions, comparisons against a benchmark model and
//! PIT calibration diagnostics.

mod calibration;
mod compare;
mod scores;

pub use calibration::{pit_uniformity, rs_diagnostic, Calibration};
pub use compare::{
    cumulative_path, decade_windows, relative_table, subsample_average, write_cumulative_csv,
    write_subsamples_csv, write_table_csv, RelativeRow, SubsampleRow, Window,
};
pub use scores::{
    component_log_density, log_pred_likelihood, mse, pit, quantile_score, ScorePanel,
};
