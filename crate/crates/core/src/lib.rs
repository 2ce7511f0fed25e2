pub mod linalg;
pub mod pipeline;
pub mod classifier;
pub mod fuzzy;
pub mod qos;
pub mod cuckoo;
pub mod autonomic;
pub mod metrics;
pub mod sim;
