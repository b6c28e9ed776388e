use serde::{Deserialize, Serialize};

use super::partition::DofPartition;
use super::transfer::{InterpKind, RestrictKind};
use crate::amg::AmgConfig;
use crate::error::{Result, SolverError};
use crate::krylov::KrylovConfig;
use crate::relax::SmootherSpec;

/// One reduction level: which fields become F-points and how they are treated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgrLevelSpec {
    pub f_fields: Vec<String>,
    pub interp: InterpKind,
    pub restrict: RestrictKind,
    #[serde(default)]
    pub f_relax: SmootherSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_relax: Option<SmootherSpec>,
    /// Diagonal block sizes of `A_FF` for ideal transfers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ff_block_layout: Option<Vec<usize>>,
}

impl MgrLevelSpec {
    pub fn new<S: Into<String>>(f_fields: Vec<S>, interp: InterpKind, restrict: RestrictKind) -> Self {
        Self {
            f_fields: f_fields.into_iter().map(Into::into).collect(),
            interp,
            restrict,
            f_relax: SmootherSpec::jacobi(),
            global_relax: None,
            ff_block_layout: None,
        }
    }

    pub fn with_f_relax(mut self, spec: SmootherSpec) -> Self {
        self.f_relax = spec;
        self
    }

    pub fn with_global_relax(mut self, spec: SmootherSpec) -> Self {
        self.global_relax = Some(spec);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoarseSolverSpec {
    DenseLu,
    AmgVcycle {
        #[serde(default)]
        amg: AmgConfig,
    },
    /// Inner GMRES, optionally AMG-preconditioned. Not a fixed linear map
    /// unless solved tightly.
    GmresInner {
        #[serde(default)]
        krylov: KrylovConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amg: Option<AmgConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgrStrategy {
    #[serde(default)]
    pub name: String,
    pub levels: Vec<MgrLevelSpec>,
    pub coarse_solver: CoarseSolverSpec,
    /// Free-form remarks carried into reports.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MgrStrategy {
    pub fn new(name: impl Into<String>, levels: Vec<MgrLevelSpec>, coarse_solver: CoarseSolverSpec) -> Self {
        Self {
            name: name.into(),
            levels,
            coarse_solver,
            notes: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SolverError::InvalidConfig(format!("strategy JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("strategy serializes")
    }

    /// Fields left for the coarsest grid; errors when level specs overlap,
    /// name unknown fields, or consume every field.
    pub fn coarse_fields(&self, partition: &DofPartition) -> Result<Vec<String>> {
        let mut remaining: Vec<String> = partition.present_fields().into_iter().map(String::from).collect();
        for (l, level) in self.levels.iter().enumerate() {
            if level.f_fields.is_empty() {
                return Err(SolverError::InvalidConfig(format!("level {l} has no F fields")));
            }
            for f in &level.f_fields {
                if partition.field_index(f).is_none() {
                    return Err(SolverError::Partition(format!("level {l}: unknown field '{f}'")));
                }
                let Some(pos) = remaining.iter().position(|r| r == f) else {
                    return Err(SolverError::InvalidConfig(format!(
                        "level {l}: field '{f}' was already eliminated or owns no dofs"
                    )));
                };
                remaining.remove(pos);
            }
            if remaining.is_empty() {
                return Err(SolverError::InvalidConfig(format!(
                    "level {l} eliminates every remaining field; the coarse grid would be empty"
                )));
            }
        }
        Ok(remaining)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relax::SmootherKind;

    #[test]
    fn json_roundtrip() {
        let s = MgrStrategy::new(
            "demo",
            vec![MgrLevelSpec::new(vec!["pi"], InterpKind::Ideal, RestrictKind::Injection)],
            CoarseSolverSpec::AmgVcycle { amg: AmgConfig::default() },
        );
        let back = MgrStrategy::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let text = r#"{
            "levels": [{"f_fields": ["rho2"], "interp": "jacobi", "restrict": "injection"}],
            "coarse_solver": {"kind": "dense_lu"}
        }"#;
        let s = MgrStrategy::from_json(text).unwrap();
        assert_eq!(s.levels[0].f_relax.kind, SmootherKind::Jacobi);
        assert!(s.levels[0].global_relax.is_none());
        assert!(MgrStrategy::from_json(r#"{"levels": [], "coarse_solver": {"kind": "lu"}}"#).is_err());
    }

    #[test]
    fn field_accounting() {
        let p = DofPartition::from_labels(&["a", "b", "c"]).unwrap();
        let level = |f: &str| MgrLevelSpec::new(vec![f], InterpKind::Jacobi, RestrictKind::Injection);
        let ok = MgrStrategy::new("x", vec![level("a"), level("b")], CoarseSolverSpec::DenseLu);
        assert_eq!(ok.coarse_fields(&p).unwrap(), vec!["c".to_string()]);
        let dup = MgrStrategy::new("x", vec![level("a"), level("a")], CoarseSolverSpec::DenseLu);
        assert!(dup.coarse_fields(&p).is_err());
        let all = MgrStrategy::new("x", vec![level("a"), level("b"), level("c")], CoarseSolverSpec::DenseLu);
        assert!(all.coarse_fields(&p).is_err());
        let unknown = MgrStrategy::new("x", vec![level("z")], CoarseSolverSpec::DenseLu);
        assert!(unknown.coarse_fields(&p).is_err());
    }
}
