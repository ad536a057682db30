pub mod approx;
pub mod ckks;
pub mod cli;
pub mod combine;
pub mod gridcluster;
pub mod hpdata;
pub mod mhe;
pub mod protocols;
