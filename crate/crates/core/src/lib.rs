pub mod analysis;
pub mod channel;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod geometry;
pub mod link_sim;
pub mod receiver;
pub mod special;
