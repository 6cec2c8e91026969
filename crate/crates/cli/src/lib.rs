//! Batch front end: ingestion, matching, metric and accuracy reports, and
//! overlay rendering over directories of images and annotation files.

pub mod commands;
pub mod overlay;
pub mod report;
