//! Color palette, opacity and rendering-order optimization for
//! semi-transparent overlapped charts.
//!
//! The pipeline: build a [`scene::SceneStructure`] from histograms or layer
//! masks, score candidate solutions with [`objective`], and search with the
//! annealer in [`anneal`]. [`oracle`] holds an independent reference
//! evaluator and an exhaustive search used to check the fast paths;
//! [`report`] and [`render`] turn results into documents and charts.

pub mod anneal;
pub mod color;
pub mod composite;
pub mod names;
pub mod objective;
pub mod oracle;
pub mod render;
pub mod report;
pub mod scene;
pub mod stimulus;
