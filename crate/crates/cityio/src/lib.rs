//! Server, client, analysis worker and operator tools for versioned urban
//! grids. The data model lives in `cityio-core`.

pub mod archive;
pub mod cli;
pub mod client;
pub mod demo;
pub mod fixtures;
pub mod server;
pub mod store;
pub mod wire;
pub mod worker;
