use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Factor, ModelError, VariableSpec};
use crate::graph::{CausalStructure, GraphError, NodeId};

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    RealWorld,
    Synthetic,
    Fixture,
}

/// Rectangular categorical records, one column per variable. Cells are
/// stored as category indices into the column's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<NodeId>,
    domains: Vec<Vec<String>>,
    rows: Vec<Vec<usize>>,
    provenance: Provenance,
}

impl Dataset {
    /// Validates every label against the column's spec.
    pub fn from_records<C, R, L>(
        columns: &[C],
        specs: &[VariableSpec],
        records: impl IntoIterator<Item = R>,
        provenance: Provenance,
    ) -> Result<Self, ModelError>
    where
        C: AsRef<str>,
        R: AsRef<[L]>,
        L: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        let mut col_specs = Vec::with_capacity(columns.len());
        for c in columns {
            let name = c.as_ref();
            if !seen.insert(name) {
                return Err(ModelError::DuplicateColumn(name.to_string()));
            }
            let spec = specs
                .iter()
                .find(|s| s.name == name)
                .ok_or_else(|| GraphError::UnknownNode(name.to_string()))?;
            col_specs.push(spec);
        }
        let mut rows = Vec::new();
        for (r, record) in records.into_iter().enumerate() {
            let record = record.as_ref();
            if record.len() != columns.len() {
                return Err(ModelError::RaggedRow { row: r, found: record.len(), expected: columns.len() });
            }
            let row = record
                .iter()
                .zip(&col_specs)
                .map(|(cell, spec)| {
                    spec.category(cell.as_ref()).map_err(|_| ModelError::UnknownLabel {
                        row: r,
                        column: spec.name.clone(),
                        label: cell.as_ref().to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Dataset {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            domains: col_specs.iter().map(|s| s.domain.clone()).collect(),
            rows,
            provenance,
        })
    }

    pub(crate) fn from_indices(
        columns: Vec<NodeId>,
        domains: Vec<Vec<String>>,
        rows: Vec<Vec<usize>>,
        provenance: Provenance,
    ) -> Self {
        Dataset { columns, domains, rows, provenance }
    }

    pub fn columns(&self) -> &[NodeId] {
        &self.columns
    }

    pub fn domain(&self, column: usize) -> &[String] {
        &self.domains[column]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub(crate) fn cell(&self, row: usize, column: usize) -> usize {
        self.rows[row][column]
    }

    /// Labels of record `row`, in column order.
    pub fn record(&self, row: usize) -> Vec<&str> {
        self.rows[row].iter().zip(&self.domains).map(|(&c, d)| d[c].as_str()).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = Vec<&str>> + '_ {
        (0..self.rows.len()).map(|r| self.record(r))
    }

    /// Relative frequencies over `nodes` (structure indices, ascending);
    /// `None` unless every node is a column and the dataset is non-empty.
    pub(crate) fn empirical_joint(&self, structure: &CausalStructure, nodes: &[usize]) -> Option<Factor> {
        if self.rows.is_empty() {
            return None;
        }
        let cols: Vec<usize> =
            nodes.iter().map(|&v| self.column_index(structure.name(v))).collect::<Option<_>>()?;
        let cards: Vec<usize> = cols.iter().map(|&c| self.domains[c].len()).collect();
        let mut f = Factor::zeros(nodes.to_vec(), cards);
        let mut state = vec![0; cols.len()];
        for row in &self.rows {
            for (k, &c) in cols.iter().enumerate() {
                state[k] = row[c];
            }
            let idx = f.index_of(&state);
            f.values[idx] += 1.0;
        }
        Some(f.scale(1.0 / self.rows.len() as f64))
    }
}
