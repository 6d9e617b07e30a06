//! Library half of the `carbonflex` binary: subcommand implementations,
//! deterministic table rendering, and the sweep heatmap.

pub mod app;
pub mod report;
pub mod svg;
