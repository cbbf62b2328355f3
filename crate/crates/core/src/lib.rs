pub mod agents;
pub mod alpha_model;
pub mod backtest;
pub mod cli;
pub mod codec;
pub mod env;
pub mod error;
pub mod labeling;
pub mod lob;
pub mod manifest;
pub mod nn;
pub mod serve;
pub mod synth;
