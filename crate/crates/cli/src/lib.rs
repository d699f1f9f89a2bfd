//! Campaign runner for the `bocoa` library.
//!
//! The binary is a thin clap wrapper over the `cmd_*` functions here, which
//! are also what the integration and acceptance tests drive.

mod campaign;
mod output;
mod plotdata;
mod regress;

pub use campaign::{
    cmd_replay, cmd_run, parse_configs, parse_dims, parse_functions, run_id, Campaign, CampaignRun,
    CampaignSpec, ErtdRow, PoptRow, ALL_SUBSET,
};
pub use output::{fmt_float, resolve_seed, SEED_ENV};
pub use plotdata::cmd_plotdata;
pub use regress::{cmd_regress, config_for_variant, parse_variants, RegressOutcome, RegressSpec, Skipped};
