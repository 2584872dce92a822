pub mod analysis;
pub mod ancestry;
pub mod forward_models;
pub mod partitions;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod xi_coalescent;
pub mod xi_rates;
