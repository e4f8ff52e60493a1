pub mod basis;
pub mod binomial;
pub mod dataset;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod multinomial;
pub mod rng;
pub mod survey;
pub mod synthetic;
