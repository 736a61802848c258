//! Configuration, output formats, verification suites and the command line
//! for the `csflock-core` flocking model.

pub mod config;
pub mod nash_cmd;
pub mod output;
pub mod run;
pub mod suites;
