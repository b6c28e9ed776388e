//! Problem registry: configs, refinement, and built-in strategies.

use std::path::Path;

use clap::ValueEnum;
use mgrkit_core::mgr::MgrStrategy;
use mgrkit_problems::comp::{self, CompConfig};
use mgrkit_problems::frac::{self, FracConfig};
use mgrkit_problems::mfd::{self, InnerProductKind, MfdConfig};
use mgrkit_problems::ProblemBundle;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Mfd,
    Comp,
    Frac,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Mfd => "mfd",
            ProblemKind::Comp => "comp",
            ProblemKind::Frac => "frac",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [ProblemKind::Mfd, ProblemKind::Comp, ProblemKind::Frac]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Mfd(MfdConfig),
    Comp(CompConfig),
    Frac(FracConfig),
}

fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        path: origin.to_string(),
        message: format!("field `{}`: {}", e.path(), e.inner()),
    })
}

impl ProblemConfig {
    pub fn default_for(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Mfd => ProblemConfig::Mfd(MfdConfig::default()),
            ProblemKind::Comp => ProblemConfig::Comp(CompConfig::default()),
            ProblemKind::Frac => ProblemConfig::Frac(FracConfig::default()),
        }
    }

    /// Parses a JSON config; missing fields take their defaults, unknown or
    /// mistyped fields are reported by path.
    pub fn parse(kind: ProblemKind, text: &str, origin: &str) -> Result<Self> {
        Ok(match kind {
            ProblemKind::Mfd => ProblemConfig::Mfd(parse_json(text, origin)?),
            ProblemKind::Comp => ProblemConfig::Comp(parse_json(text, origin)?),
            ProblemKind::Frac => ProblemConfig::Frac(parse_json(text, origin)?),
        })
    }

    pub fn load(kind: ProblemKind, path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default_for(kind)),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(kind, &text, &p.display().to_string())
            }
        }
    }

    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemConfig::Mfd(_) => ProblemKind::Mfd,
            ProblemConfig::Comp(_) => ProblemKind::Comp,
            ProblemConfig::Frac(_) => ProblemKind::Frac,
        }
    }

    /// Overrides the random seed: mesh perturbation (mfd) or right-hand side
    /// (comp). The fracture problem has no random input.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ProblemConfig::Mfd(c) => c.mesh.seed = seed,
            ProblemConfig::Comp(c) => c.seed = seed,
            ProblemConfig::Frac(_) => {}
        }
        self
    }

    /// Sets `n` cells per direction.
    pub fn with_size(mut self, n: usize) -> Self {
        match &mut self {
            ProblemConfig::Mfd(c) => c.mesh.dims = [n; 3],
            ProblemConfig::Comp(c) => c.dims = [n; 3],
            ProblemConfig::Frac(c) => c.dims = [n; 2],
        }
        self
    }

    pub fn size_label(&self) -> String {
        let dims: Vec<String> = match self {
            ProblemConfig::Mfd(c) => c.mesh.dims.iter().map(|d| d.to_string()).collect(),
            ProblemConfig::Comp(c) => c.dims.iter().map(|d| d.to_string()).collect(),
            ProblemConfig::Frac(c) => c.dims.iter().map(|d| d.to_string()).collect(),
        };
        dims.join("x")
    }

    pub fn build(&self) -> Result<ProblemBundle> {
        Ok(match self {
            ProblemConfig::Mfd(c) => mfd::generate(c)?.bundle()?,
            ProblemConfig::Comp(c) => comp::build_comp_system(c)?.bundle()?,
            ProblemConfig::Frac(c) => frac::build_frac_system(c)?.bundle()?,
        })
    }
}

/// Built-in strategy names per problem; the first is the default.
pub fn builtin_names(kind: ProblemKind) -> &'static [&'static str] {
    match kind {
        ProblemKind::Mfd => &["mgr_pi", "mgr_p"],
        ProblemKind::Comp => &["mgr_comp", "mgr_comp_no_wells"],
        ProblemKind::Frac => &["mgr_u", "mgr_p"],
    }
}

/// Built-in strategy by name; `meta` is the bundle metadata, which selects
/// the interpolation of `mgr_pi` for the mfd problem.
pub fn builtin_strategy(kind: ProblemKind, name: &str, meta: &serde_json::Value) -> Option<MgrStrategy> {
    match (kind, name) {
        (ProblemKind::Mfd, "mgr_pi") => {
            let ip = match meta.get("inner_product").and_then(|v| v.as_str()) {
                Some("consistent") => InnerProductKind::Consistent,
                _ => InnerProductKind::Tpfa,
            };
            Some(mfd::strategy_mgr_pi(ip))
        }
        (ProblemKind::Mfd, "mgr_p") => Some(mfd::strategy_mgr_p()),
        (ProblemKind::Comp, "mgr_comp") => Some(comp::strategy_compositional()),
        (ProblemKind::Comp, "mgr_comp_no_wells") => Some(comp::strategy_compositional_no_wells()),
        (ProblemKind::Frac, "mgr_u") => Some(frac::strategy_mgr_u()),
        (ProblemKind::Frac, "mgr_p") => Some(frac::strategy_mgr_p_frac()),
        _ => None,
    }
}

/// Resolves `spec` as a strategy JSON file, or else as a built-in name for
/// the bundle's problem.
pub fn resolve_strategy(spec: &str, meta: &serde_json::Value) -> Result<MgrStrategy> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return parse_json(&text, spec);
    }
    let kind = meta
        .get("problem")
        .and_then(|v| v.as_str())
        .and_then(ProblemKind::from_name)
        .ok_or_else(|| CliError::Usage(format!("strategy `{spec}` is not a file and the bundle names no known problem")))?;
    builtin_strategy(kind, spec, meta).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown strategy `{spec}` for {}; built-ins: {}",
            kind.name(),
            builtin_names(kind).join(", ")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors_name_the_field() {
        let err = ProblemConfig::parse(ProblemKind::Mfd, r#"{"mesh": {"dims": [4, 4, "x"]}}"#, "cfg.json").unwrap_err();
        assert!(err.to_string().contains("mesh.dims"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = ProblemConfig::parse(ProblemKind::Comp, r#"{"wellz": 1}"#, "cfg.json").unwrap_err();
        assert!(err.to_string().contains("wellz"), "{err}");
    }

    #[test]
    fn size_and_seed_overrides() {
        let c = ProblemConfig::default_for(ProblemKind::Frac).with_size(32).with_seed(3);
        assert_eq!(c.size_label(), "32x32");
        let ProblemConfig::Mfd(m) = ProblemConfig::default_for(ProblemKind::Mfd).with_seed(9) else {
            unreachable!()
        };
        assert_eq!(m.mesh.seed, 9);
    }

    #[test]
    fn every_builtin_resolves() {
        for kind in [ProblemKind::Mfd, ProblemKind::Comp, ProblemKind::Frac] {
            let meta = serde_json::json!({ "problem": kind.name() });
            for name in builtin_names(kind) {
                assert_eq!(&resolve_strategy(name, &meta).unwrap().name, name);
            }
            assert!(resolve_strategy("nope", &meta).is_err());
        }
    }
}
