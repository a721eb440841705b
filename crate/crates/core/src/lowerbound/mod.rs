//! Numerical checks of the adversary-bound composition and executable
//! reductions from the planted search problem to key recovery.

pub mod adversary;
pub mod consistency;
pub mod matrix;
pub mod reduction;

pub use adversary::{
    adv_ratio, claim_suite, delta_prime_q, delta_q, psearch_d, psearch_gamma, psearch_mask_checks,
    psearch_ratio_checks, psearch_ratio_closed_form, random_gamma_f, AdversarySystem, ClaimCheck,
    OuterFunction,
};
pub use consistency::{compare_worlds, distribution_consistency_test, ConsistencyReport, World};
pub use matrix::spectral_norm;
pub use reduction::{
    plant_instance, plant_instance_with, reduction_oracles, reduction_oracles_resampling, Planting,
    SearchInstance, SimulatedOracles,
};
