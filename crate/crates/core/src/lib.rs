//! Cooperative games induced by distribution chains with several retailers
//! and several suppliers.
//!
//! A [`Situation`] describes retailers (selling-price functions), suppliers
//! (wholesale-price and production-cost functions) and order capacities.
//! [`CharacteristicFunction::build`] solves the joint-profit problem of every
//! retailer/supplier coalition pair, and the [`allocation`] module divides the
//! grand-coalition profit: the altruistic rule, the supplier-compensation
//! rule, and its variant for unbounded production, each with core and
//! axiom certificates.

pub mod allocation;
pub mod coalition;
pub mod error;
pub mod game;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod pwl;
pub mod simplex;

pub use allocation::{
    altruistic, axiom_check, beta, beta_restricted, core_check, core_supplier_max, independence_fixture,
    optimal_suppliers, sc_allocation, sc_star_allocation, Allocation, AllocationRule, Axiom, AxiomResult,
    BetaWitness, CoreReport, IndependenceVariant,
};
pub use coalition::{Coalition, CoalitionPair};
pub use error::{Error, Result};
pub use game::{CharacteristicFunction, StructureReport, Table};
pub use io::{parse_situation, read_situation, SituationFile};
pub use model::{Capacity, MrsSituation, OrderMatrix, RetailerSpec, Situation, SupplierSpec, Violation};
pub use optimizer::{brute_force_oracle, coalition_objective, solve_coalition, supplier_profit, OptResult, SolverConfig};
pub use pwl::PiecewiseLinearFn;
