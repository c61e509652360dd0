//! Leaf-area measurement: image codecs, batch runs, reports and the HTTP service.

pub mod batch;
pub mod cli;
pub mod codec;
pub mod config;
pub mod report;
pub mod service;
