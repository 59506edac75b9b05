//! Config-driven experiment grids and their reports.

pub mod config;
pub mod grid;
pub mod report;

pub use config::{DataSource, DimredMode, ExperimentConfig, PvScope, Representation};
pub use grid::{cell_count, featurize, load_data, make_dataset, run_grid, run_grid_on, CellKey, CellResult, EvalReport};
pub use report::{macro_rows, read_results, write_report, write_tables, MacroRow};
