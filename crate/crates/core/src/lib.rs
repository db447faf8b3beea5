//! Population size estimation for hidden populations from a respondent-driven
//! sampling (RDS) capture followed by a report-based recapture, with optional
//! anonymization of identities through a small hash space.
//!
//! The pipeline:
//!
//! 1. [`rds::rds_capture`] grows a recruitment forest over a population graph.
//! 2. [`rds::recapture`] collects each subject's reports of other members.
//! 3. [`hashing`] maps identities to codes in `1..=m`.
//! 4. [`estimators`] turns captures and reports into size estimates, with
//!    false-match correction and a tree bootstrap for hashed data.
//!
//! [`experiments`] runs parameter sweeps and [`survey`] reads and writes
//! hashed field data.

pub mod estimators;
pub mod experiments;
pub mod fixtures;
pub mod graph;
pub mod hashing;
pub mod multiset;
pub mod rds;
pub mod seed;
pub mod survey;
