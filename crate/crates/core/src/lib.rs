pub mod analysis;
pub mod execution;
pub mod lexer;
pub mod mutation;
pub mod pipeline;
pub mod project;
pub mod report;
pub mod safety_net;
