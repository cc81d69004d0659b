//! Simulation and analysis of the classical predator-prey model family.

pub mod analysis;
pub mod integrator;
pub mod model;
pub mod scenario;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/integration.md")]
    mod integration {}
    #[doc = include_str!("../../../book/src/first-integral.md")]
    mod first_integral {}
    #[doc = include_str!("../../../book/src/averages.md")]
    mod averages {}
    #[doc = include_str!("../../../book/src/limit-cycles.md")]
    mod limit_cycles {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
