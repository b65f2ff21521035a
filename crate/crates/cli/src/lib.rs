//! Command-line tool and HTTP service around the `blendpal` optimizer.

pub mod cli;
pub mod engine;
pub mod error;
pub mod io;
pub mod service;
