//! Maximum-likelihood (optionally smoothed) CPD estimation and ancestral
//! sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cpd, Dataset, DiscreteModel, ModelError, Provenance, VariableSpec};
use crate::graph::{CausalStructure, GraphError, NodeId};

/// Non-fatal findings from [`estimate_cpds`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimationWarning {
    /// No record matched this parent configuration and smoothing is off;
    /// the child is left uninstantiated.
    UnseenParentConfiguration { child: NodeId, parents: Vec<(NodeId, String)> },
}

#[derive(Debug, Clone)]
pub struct Estimation {
    pub model: DiscreteModel,
    pub warnings: Vec<EstimationWarning>,
}

/// Instantiates every node whose column and parent columns are all in
/// `data`, with `P(c | pa) = (count + alpha) / (row_total + alpha * |domain|)`.
/// The returned model keeps `data` for observational queries over its
/// columns.
pub fn estimate_cpds(
    structure: &CausalStructure,
    specs: &[VariableSpec],
    data: &Dataset,
    alpha: f64,
) -> Result<Estimation, ModelError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(ModelError::InvalidSpec { variable: "alpha".into(), reason: format!("smoothing {alpha} must be finite and >= 0") });
    }
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let base = DiscreteModel::uninstantiated(structure.clone(), specs.iter().cloned())?;
    let mut column_of = vec![None; structure.len()];
    for (c, name) in data.columns().iter().enumerate() {
        let i = structure.index_of(name).map_err(|_| GraphError::UnknownNode(name.clone()))?;
        if data.domain(c) != base.spec_at(i).domain.as_slice() {
            return Err(ModelError::InvalidSpec {
                variable: name.clone(),
                reason: "dataset domain differs from the variable spec".into(),
            });
        }
        column_of[i] = Some(c);
    }

    let mut cpds = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..structure.len() {
        let Some(child_col) = column_of[i] else { continue };
        let parents = structure.parents_at(i);
        let Some(parent_cols) = parents.iter().map(|&p| column_of[p]).collect::<Option<Vec<_>>>() else {
            continue;
        };
        let parent_cards: Vec<usize> = parents.iter().map(|&p| base.spec_at(p).cardinality()).collect();
        let card = base.spec_at(i).cardinality();
        let n_rows: usize = parent_cards.iter().product();
        let mut counts = vec![0.0; n_rows * card];
        for r in 0..data.len() {
            let row = parent_cols.iter().zip(&parent_cards).fold(0, |acc, (&c, &k)| acc * k + data.cell(r, c));
            counts[row * card + data.cell(r, child_col)] += 1.0;
        }

        let mut table = Vec::with_capacity(counts.len());
        let mut complete = true;
        for (row, chunk) in counts.chunks(card).enumerate() {
            let total: f64 = chunk.iter().sum();
            let denom = total + alpha * card as f64;
            if denom == 0.0 {
                complete = false;
                warnings.push(EstimationWarning::UnseenParentConfiguration {
                    child: structure.name(i).to_string(),
                    parents: decode_row(&base, parents, &parent_cards, row),
                });
                continue;
            }
            table.extend(chunk.iter().map(|c| (c + alpha) / denom));
        }
        if complete {
            let names: Vec<&str> = parents.iter().map(|&p| structure.name(p)).collect();
            cpds.push(Cpd::new(structure.name(i), names, normalize_rows(table, card)));
        }
    }
    let model = DiscreteModel::new(structure.clone(), specs.iter().cloned(), cpds)?.with_observations(data.clone());
    Ok(Estimation { model, warnings })
}

// Rows are exact ratios; re-normalizing guards the 1e-9 row-sum check
// against accumulated rounding on very large counts.
fn normalize_rows(mut table: Vec<f64>, card: usize) -> Vec<f64> {
    for row in table.chunks_mut(card) {
        let s: f64 = row.iter().sum();
        for p in row {
            *p /= s;
        }
    }
    table
}

fn decode_row(model: &DiscreteModel, parents: &[usize], cards: &[usize], mut row: usize) -> Vec<(NodeId, String)> {
    let mut out = vec![(String::new(), String::new()); parents.len()];
    for k in (0..parents.len()).rev() {
        let c = row % cards[k];
        row /= cards[k];
        let spec = model.spec_at(parents[k]);
        out[k] = (spec.name.clone(), spec.domain[c].clone());
    }
    out
}

pub(super) fn forward_sample(model: &DiscreteModel, n: usize, seed: u64) -> Result<Dataset, ModelError> {
    model.require_complete()?;
    let structure = model.structure();
    let order = structure.topological_order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut states = vec![0usize; structure.len()];
    for _ in 0..n {
        for &v in &order {
            let card = model.spec_at(v).cardinality();
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = 0;
            for c in 0..card {
                states[v] = c;
                let p = model.cpd_entry(v, &states);
                if p > 0.0 {
                    last_positive = c;
                }
                acc += p;
                if u < acc {
                    pick = Some(c);
                    break;
                }
            }
            states[v] = pick.unwrap_or(last_positive);
        }
        rows.push(states.clone());
    }
    Ok(Dataset::from_indices(
        structure.node_names().to_vec(),
        model.specs().iter().map(|s| s.domain.clone()).collect(),
        rows,
        Provenance::Synthetic,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<VariableSpec> {
        vec![VariableSpec::new("A", ["a0", "a1"]), VariableSpec::new("B", ["b0", "b1"])]
    }

    fn structure() -> CausalStructure {
        CausalStructure::builder().nodes(["A", "B"]).edge("A", "B").build().unwrap()
    }

    #[test]
    fn counts_become_conditional_frequencies() {
        let data = Dataset::from_records(
            &["A", "B"],
            &specs(),
            [["a0", "b0"], ["a0", "b1"], ["a0", "b1"], ["a1", "b1"]],
            Provenance::Fixture,
        )
        .unwrap();
        let est = estimate_cpds(&structure(), &specs(), &data, 0.0).unwrap();
        assert!(est.warnings.is_empty());
        let b = est.model.cpd("B").unwrap().unwrap();
        let expected = [1.0 / 3.0, 2.0 / 3.0, 0.0, 1.0];
        for (got, want) in b.table.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(est.model.cpd("A").unwrap().unwrap().table, vec![0.75, 0.25]);
    }

    #[test]
    fn laplace_smoothing_fills_unseen_rows_uniformly() {
        let data = Dataset::from_records(&["A", "B"], &specs(), [["a0", "b0"]], Provenance::Fixture).unwrap();
        let est = estimate_cpds(&structure(), &specs(), &data, 1.0).unwrap();
        let b = est.model.cpd("B").unwrap().unwrap();
        assert_eq!(&b.table[2..], &[0.5, 0.5]);
    }

    #[test]
    fn unseen_row_without_smoothing_drops_node() {
        let data = Dataset::from_records(&["A", "B"], &specs(), [["a0", "b0"]], Provenance::Fixture).unwrap();
        let est = estimate_cpds(&structure(), &specs(), &data, 0.0).unwrap();
        assert_eq!(est.model.instantiated().into_iter().collect::<Vec<_>>(), ["A"]);
        assert_eq!(
            est.warnings,
            vec![EstimationWarning::UnseenParentConfiguration {
                child: "B".into(),
                parents: vec![("A".into(), "a1".into())]
            }]
        );
    }

    #[test]
    fn missing_parent_column_leaves_child_uninstantiated() {
        let data = Dataset::from_records(&["B"], &specs(), [["b0"]], Provenance::Fixture).unwrap();
        let est = estimate_cpds(&structure(), &specs(), &data, 0.0).unwrap();
        assert!(est.model.instantiated().is_empty());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let data = Dataset::from_records(&["A"], &specs(), Vec::<[&str; 1]>::new(), Provenance::Fixture).unwrap();
        assert_eq!(estimate_cpds(&structure(), &specs(), &data, 0.0).unwrap_err(), ModelError::EmptyDataset);
    }

    #[test]
    fn dataset_validation() {
        let ragged = Dataset::from_records(&["A", "B"], &specs(), [vec!["a0"]], Provenance::Fixture);
        assert!(matches!(ragged, Err(ModelError::RaggedRow { row: 0, found: 1, expected: 2 })));
        let unknown = Dataset::from_records(&["A"], &specs(), [["zz"]], Provenance::Fixture);
        assert!(matches!(unknown, Err(ModelError::UnknownLabel { row: 0, .. })));
    }

    #[test]
    fn sampling_zero_rows_keeps_columns() {
        let m = DiscreteModel::new(
            structure(),
            specs(),
            [Cpd::prior("A", [0.5, 0.5]), Cpd::new("B", ["A"], [1.0, 0.0, 0.0, 1.0])],
        )
        .unwrap();
        let d = m.sample(0, 1).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.columns(), ["A", "B"]);
        let d = m.sample(50, 7).unwrap();
        assert!(d.records().all(|r| (r[0] == "a0") == (r[1] == "b0")));
        assert_eq!(d, m.sample(50, 7).unwrap());
    }
}
