use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::sparse::IndexSet;

/// Assignment of every dof to a named physical field.
///
/// Optionally carries an unknown id per dof (for example the displacement
/// component) used by unknown-based AMG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionFile", into = "PartitionFile")]
pub struct DofPartition {
    field_order: Vec<String>,
    field_of: Vec<usize>,
    unknowns: Option<Vec<usize>>,
}

/// On-disk form: field names in order, one label per dof.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionFile {
    field_order: Vec<String>,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unknowns: Option<Vec<usize>>,
}

impl TryFrom<PartitionFile> for DofPartition {
    type Error = SolverError;
    fn try_from(f: PartitionFile) -> Result<Self> {
        let p = DofPartition::new(f.field_order, &f.labels)?;
        match f.unknowns {
            Some(u) => p.with_unknowns(u),
            None => Ok(p),
        }
    }
}

impl From<DofPartition> for PartitionFile {
    fn from(p: DofPartition) -> Self {
        PartitionFile {
            labels: p.labels().into_iter().map(str::to_string).collect(),
            field_order: p.field_order,
            unknowns: p.unknowns,
        }
    }
}

impl DofPartition {
    pub fn new<S: AsRef<str>>(field_order: Vec<String>, labels: &[S]) -> Result<Self> {
        if labels.is_empty() {
            return Err(SolverError::Partition("partition has no dofs".into()));
        }
        for (k, f) in field_order.iter().enumerate() {
            if field_order[..k].contains(f) {
                return Err(SolverError::Partition(format!("field '{f}' listed twice")));
            }
        }
        let field_of = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                field_order
                    .iter()
                    .position(|f| f == l.as_ref())
                    .ok_or_else(|| SolverError::Partition(format!("dof {i} has undeclared field '{}'", l.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            field_order,
            field_of,
            unknowns: None,
        })
    }

    /// Field order taken from first appearance.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        for l in labels {
            if !order.iter().any(|f| f == l.as_ref()) {
                order.push(l.as_ref().to_string());
            }
        }
        Self::new(order, labels)
    }

    /// Builds from field indices into `field_order`.
    pub fn from_field_ids(field_order: Vec<String>, field_of: Vec<usize>) -> Result<Self> {
        if field_of.is_empty() {
            return Err(SolverError::Partition("partition has no dofs".into()));
        }
        if let Some(&bad) = field_of.iter().find(|&&f| f >= field_order.len()) {
            return Err(SolverError::Partition(format!("field id {bad} out of range")));
        }
        Ok(Self {
            field_order,
            field_of,
            unknowns: None,
        })
    }

    pub fn with_unknowns(mut self, unknowns: Vec<usize>) -> Result<Self> {
        if unknowns.len() != self.field_of.len() {
            return Err(SolverError::Partition(format!(
                "{} unknown ids for {} dofs",
                unknowns.len(),
                self.field_of.len()
            )));
        }
        self.unknowns = Some(unknowns);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.field_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field_of.is_empty()
    }

    pub fn field_order(&self) -> &[String] {
        &self.field_order
    }

    pub fn field_ids(&self) -> &[usize] {
        &self.field_of
    }

    pub fn unknowns(&self) -> Option<&[usize]> {
        self.unknowns.as_deref()
    }

    /// Unknown id per dof: explicit ids when present, field ids otherwise.
    pub fn unknown_ids(&self) -> Vec<usize> {
        self.unknowns.clone().unwrap_or_else(|| self.field_of.clone())
    }

    pub fn label(&self, i: usize) -> &str {
        &self.field_order[self.field_of[i]]
    }

    pub fn labels(&self) -> Vec<&str> {
        self.field_of.iter().map(|&f| self.field_order[f].as_str()).collect()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.field_order.iter().position(|f| f == name)
    }

    /// Fields that own at least one dof, in field order.
    pub fn present_fields(&self) -> Vec<&str> {
        let mut seen = vec![false; self.field_order.len()];
        for &f in &self.field_of {
            seen[f] = true;
        }
        self.field_order
            .iter()
            .zip(seen)
            .filter_map(|(f, s)| s.then_some(f.as_str()))
            .collect()
    }

    /// Dofs belonging to any of `fields`.
    pub fn dofs_of<S: AsRef<str>>(&self, fields: &[S]) -> Result<IndexSet> {
        let mut wanted = vec![false; self.field_order.len()];
        for f in fields {
            let k = self
                .field_index(f.as_ref())
                .ok_or_else(|| SolverError::Partition(format!("unknown field '{}'", f.as_ref())))?;
            wanted[k] = true;
        }
        Ok(IndexSet::from_mask(
            &self.field_of.iter().map(|&f| wanted[f]).collect::<Vec<_>>(),
        ))
    }

    /// Partition of the subset `dofs`, renumbered in order.
    pub fn restrict(&self, dofs: &IndexSet) -> DofPartition {
        DofPartition {
            field_order: self.field_order.clone(),
            field_of: dofs.as_slice().iter().map(|&i| self.field_of[i]).collect(),
            unknowns: self
                .unknowns
                .as_ref()
                .map(|u| dofs.as_slice().iter().map(|&i| u[i]).collect()),
        }
    }

    /// Partition after relabeling: new dof `k` is old dof `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> DofPartition {
        DofPartition {
            field_order: self.field_order.clone(),
            field_of: perm.iter().map(|&i| self.field_of[i]).collect(),
            unknowns: self.unknowns.as_ref().map(|u| perm.iter().map(|&i| u[i]).collect()),
        }
    }
}

/// F-points are the dofs of `f_fields`, C-points the rest.
pub fn split<S: AsRef<str>>(partition: &DofPartition, f_fields: &[S]) -> Result<(IndexSet, IndexSet)> {
    if f_fields.is_empty() {
        return Err(SolverError::Partition("no F fields given".into()));
    }
    let f = partition.dofs_of(f_fields)?;
    if f.is_empty() {
        return Err(SolverError::Partition("F fields own no dofs".into()));
    }
    if f.len() == partition.len() {
        return Err(SolverError::Partition("F fields cover every dof; nothing left to coarsen".into()));
    }
    let c = f.complement(partition.len());
    Ok((f, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_examples() {
        let p = DofPartition::from_labels(&["p", "pi", "p", "pi"]).unwrap();
        let (f, c) = split(&p, &["pi"]).unwrap();
        assert_eq!(f.as_slice(), &[1, 3]);
        assert_eq!(c.as_slice(), &[0, 2]);

        let one = DofPartition::from_labels(&["u", "u", "u"]).unwrap();
        assert!(split(&one, &["u"]).is_err());
        assert!(split(&p, &["q"]).is_err());

        let labels = ["p", "rho1", "rho2", "p", "rho1", "rho2", "well", "well"];
        let comp = DofPartition::from_labels(&labels).unwrap();
        let (f, _) = split(&comp, &["rho2"]).unwrap();
        assert_eq!(f.as_slice(), &[2, 5]);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let p = DofPartition::from_labels(&["u", "u", "p"]).unwrap().with_unknowns(vec![0, 1, 2]).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: DofPartition = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"field_order": ["p"], "labels": ["p", "q"]}"#;
        assert!(serde_json::from_str::<DofPartition>(bad).is_err());
    }

    #[test]
    fn restrict_and_permute() {
        let p = DofPartition::from_labels(&["a", "b", "a", "c"]).unwrap();
        let sub = p.restrict(&IndexSet::new(vec![1, 3], 4).unwrap());
        assert_eq!(sub.labels(), vec!["b", "c"]);
        assert_eq!(sub.present_fields(), vec!["b", "c"]);
        assert_eq!(p.permuted(&[3, 2, 1, 0]).labels(), vec!["c", "a", "b", "a"]);
    }
}
