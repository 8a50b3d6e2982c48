//! Panel ingestion, transformations, direct-forecast designs and principal components.

pub mod dataset;
pub mod panel;
pub mod pca;
pub mod quarter;
pub mod synthetic;
pub mod transform;

pub use dataset::{
    assemble_design, assemble_regression, DatasetSpec, DatasetVariant, Design, ForecastWindow,
    RegressionData, Standardizer,
};
pub use panel::{Membership, SeriesPanel};
pub use pca::{principal_components, Pca};
pub use quarter::Quarter;
pub use synthetic::{synthetic_panel, SyntheticConfig};
pub use transform::{apply_transform, build_target, diff_order};
