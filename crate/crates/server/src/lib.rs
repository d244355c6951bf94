pub mod api;
pub mod cli;
pub mod inputs;
pub mod session;
