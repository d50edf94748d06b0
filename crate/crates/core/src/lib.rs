//! Mapping inference, data exchange and query translation between heterogeneous XML schemas,
//! with a simulator for query propagation over a peer network.

pub mod instance;
pub mod mapping;
pub mod query;
pub mod schema;
pub mod sim;
pub mod translate;
pub mod verify;
