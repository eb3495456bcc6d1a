//! Parameter files and inline overrides.

use std::path::Path;

use clap::Args;
use svi_noarb::svi::SviParams;

use crate::error::{CliError, CliResult};

/// Raw SVI parameters: a JSON file with keys `a, b, rho, m, sigma`, each of
/// which can be overridden by a flag.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// JSON file with keys a, b, rho, m, sigma
    #[arg(long)]
    pub params: Option<std::path::PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Default, serde::Deserialize)]
struct PartialParams {
    a: Option<f64>,
    b: Option<f64>,
    rho: Option<f64>,
    m: Option<f64>,
    sigma: Option<f64>,
}

impl ParamArgs {
    /// File values with flags applied on top, validated.
    pub fn resolve(&self) -> CliResult<SviParams> {
        let file = match &self.params {
            Some(path) => read_partial(path)?,
            None => PartialParams::default(),
        };
        let get = |name: &str, flag: Option<f64>, from_file: Option<f64>| {
            flag.or(from_file).ok_or_else(|| CliError::Input(format!("missing parameter '{name}'")))
        };
        let p = SviParams {
            a: get("a", self.a, file.a)?,
            b: get("b", self.b, file.b)?,
            rho: get("rho", self.rho, file.rho)?,
            m: get("m", self.m, file.m)?,
            sigma: get("sigma", self.sigma, file.sigma)?,
        };
        p.validate()?;
        Ok(p)
    }
}

fn read_partial(path: &Path) -> CliResult<PartialParams> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
