mod config;
mod output;
mod run;
mod selftest;

pub use config::*;
pub use output::*;
pub use run::*;
pub use selftest::*;
