pub mod output;
pub mod runner;
pub mod scenario;
