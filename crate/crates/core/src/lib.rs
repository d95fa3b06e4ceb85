//! Grid model, frequency dynamics, RoCoF-constrained unit commitment and the
//! neural RoCoF predictor with its MILP embedding.

pub mod data_gen;
pub mod dnn_embed;
pub mod freq_dynamics;
pub mod grid_model;
pub mod rocof_net;
pub mod uc_milp;

#[cfg(test)]
pub(crate) mod test_cases;
