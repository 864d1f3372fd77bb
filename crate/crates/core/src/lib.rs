//! Test-time compute orchestration for chat-completions models.
//!
//! * [`client`]: streaming token interface over an HTTP chat backend and a
//!   deterministic scripted mock.
//! * [`budget`]: thinking budgets and "Wait."-style budget forcing.
//! * [`prompt`] and [`extract`]: exact prompt layouts, answer extraction and
//!   grading for multiple-choice questions.
//! * [`curation`]: difficulty filtering, trace validation, decontamination,
//!   diversity sampling and SFT formatting with a provenance ledger.
//! * [`eval`]: accuracy runs, budget and forcing sweeps, OLS fits with 95%
//!   bands, CSV/SVG emission.
//! * [`cli`]: the `ttscale` command line.

pub mod budget;
pub mod cli;
pub mod client;
pub mod extract;
pub mod prompt;
pub mod curation;
pub mod eval;
pub mod io;
mod pool;
