//! Named ground-truth models.

use hawkes_core::process::{HawkesModel, TriggeringKernelSpec};

use crate::config::ModelSection;
use crate::error::CliError;

/// Resolves `exp`, `cos`, `poisson` (zero kernel) or `custom` (exponential
/// kernel with explicit `a1`, `a2`). `mu` defaults to 10.
pub fn resolve(m: &ModelSection) -> Result<HawkesModel, CliError> {
    let name = m.name.as_deref().unwrap_or("exp");
    let mu = m.mu.unwrap_or(10.0);
    let kernel = match name {
        "exp" => TriggeringKernelSpec::ExpToy,
        "cos" => TriggeringKernelSpec::CosineToy,
        "poisson" => TriggeringKernelSpec::Zero,
        "custom" => {
            let (Some(a1), Some(a2)) = (m.a1, m.a2) else {
                return Err(CliError::Usage("model `custom` needs --a1 and --a2".into()));
            };
            TriggeringKernelSpec::exponential(a1, a2)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown model `{other}` (expected exp, cos, poisson or custom)"
            )))
        }
    };
    if name != "custom" && (m.a1.is_some() || m.a2.is_some()) {
        log::warn!("--a1/--a2 only apply to the custom model; ignored for `{name}`");
    }
    Ok(HawkesModel::new(mu, kernel)?)
}

/// Merges a flag-level model over the config section.
pub fn merge(flags: &ModelSection, config: &ModelSection) -> ModelSection {
    ModelSection {
        name: flags.name.clone().or_else(|| config.name.clone()),
        mu: flags.mu.or(config.mu),
        a1: flags.a1.or(config.a1),
        a2: flags.a2.or(config.a2),
    }
}
