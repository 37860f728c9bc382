//! Two-step demand-side management for a heat pump charging stratified
//! thermal storage.
//!
//! The crate implements the full pipeline around a validated
//! eight-temperature plant model:
//!
//! 1. **Flexibility assessment** ([`assess`]): find the longest/most
//!    valuable contiguous block of upcoming steps in which the heat pump
//!    can be promised off without violating the hard temperature band or
//!    the switching budget.
//! 2. **Flexibility exploitation** ([`dispatch`]): once an external party
//!    requests (part of) the offered block, compute the exact cost-optimal
//!    on/off plan that honors the request, with the temperature band
//!    relaxed through priced slack variables.
//!
//! Both planners are exact over the binary input space — a depth-first
//! search with only provably lossless pruning — and ship with exhaustive
//! reference implementations ([`oracle`]) they are tested against bitwise.
//! A closed-loop harness ([`sim`]) runs the receding-horizon controllers
//! and a rule-based hysteresis baseline over a simulated working day, and
//! [`config`]/[`report`] handle scenario files, trace CSVs and KPI tables
//! for the `hptes` command-line tool.

pub mod assess;
pub mod cli;
pub mod config;
pub mod constraints;
pub mod dispatch;
pub mod model;
pub mod oracle;
pub mod report;
mod search;
pub mod sim;

pub use search::ConstraintFamily;
