//! Exact enumeration of CPD products.

use super::{DiscreteModel, ModelError};

/// Dense table over node indices (ascending), last variable fastest.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    pub(crate) vars: Vec<usize>,
    pub(crate) cards: Vec<usize>,
    pub(crate) values: Vec<f64>,
}

impl Factor {
    pub(crate) fn zeros(vars: Vec<usize>, cards: Vec<usize>) -> Self {
        let size = cards.iter().product();
        Factor { vars, cards, values: vec![0.0; size] }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.cards.len()];
        for k in (0..self.cards.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.cards[k + 1];
        }
        strides
    }

    /// Sums out every variable not in `keep` (ascending).
    pub(crate) fn marginalize(&self, keep: &[usize]) -> Factor {
        if keep == self.vars.as_slice() {
            return self.clone();
        }
        let pos: Vec<usize> = keep
            .iter()
            .map(|v| self.vars.iter().position(|w| w == v).expect("kept variable present"))
            .collect();
        let mut out = Factor::zeros(keep.to_vec(), pos.iter().map(|&p| self.cards[p]).collect());
        let out_strides = out.strides();
        let mut state = vec![0usize; self.vars.len()];
        for &value in &self.values {
            let idx: usize = pos.iter().zip(&out_strides).map(|(&p, &s)| state[p] * s).sum();
            out.values[idx] += value;
            increment(&mut state, &self.cards);
        }
        out
    }

    /// Zeroes every entry inconsistent with `evidence` (variables absent
    /// from the factor are ignored).
    pub(crate) fn condition(&self, evidence: &[(usize, usize)]) -> Factor {
        let checks: Vec<(usize, usize)> = evidence
            .iter()
            .filter_map(|&(v, c)| self.vars.iter().position(|&w| w == v).map(|p| (p, c)))
            .collect();
        if checks.is_empty() {
            return self.clone();
        }
        let mut out = self.clone();
        let mut state = vec![0usize; self.vars.len()];
        for value in out.values.iter_mut() {
            if checks.iter().any(|&(p, c)| state[p] != c) {
                *value = 0.0;
            }
            increment(&mut state, &self.cards);
        }
        out
    }

    pub(crate) fn scale(mut self, k: f64) -> Factor {
        for v in &mut self.values {
            *v *= k;
        }
        self
    }

    pub(crate) fn index_of(&self, state: &[usize]) -> usize {
        state.iter().zip(&self.cards).fold(0, |acc, (&s, &c)| acc * c + s)
    }
}

pub(crate) fn increment(state: &mut [usize], cards: &[usize]) {
    for k in (0..state.len()).rev() {
        state[k] += 1;
        if state[k] < cards[k] {
            return;
        }
        state[k] = 0;
    }
}

pub(crate) fn check_state_space(model: &DiscreteModel, cards: impl Iterator<Item = usize>) -> Result<(), ModelError> {
    let states = cards.fold(1u128, |acc, c| acc.saturating_mul(c as u128));
    if states > model.state_limit() as u128 {
        return Err(ModelError::StateSpaceTooLarge { states, limit: model.state_limit() });
    }
    Ok(())
}

/// Joint over an ancestrally closed set of instantiated nodes, as the
/// product of their CPDs. Zero-probability prefixes are skipped.
pub(crate) fn product_joint(model: &DiscreteModel, members: &[usize]) -> Result<Factor, ModelError> {
    let cards: Vec<usize> = members.iter().map(|&i| model.spec_at(i).cardinality()).collect();
    check_state_space(model, cards.iter().copied())?;
    let order: Vec<usize> =
        model.structure().topological_order().into_iter().filter(|v| members.binary_search(v).is_ok()).collect();
    let mut out = Factor::zeros(members.to_vec(), cards);
    let mut states = vec![0usize; model.structure().len()];
    let slot: Vec<usize> = order.iter().map(|v| members.binary_search(v).unwrap()).collect();
    let mut local = vec![0usize; members.len()];
    descend(model, &order, &slot, 0, 1.0, &mut states, &mut local, &mut out);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    model: &DiscreteModel,
    order: &[usize],
    slot: &[usize],
    depth: usize,
    weight: f64,
    states: &mut [usize],
    local: &mut [usize],
    out: &mut Factor,
) {
    if depth == order.len() {
        let idx = out.index_of(local);
        out.values[idx] += weight;
        return;
    }
    let v = order[depth];
    for c in 0..model.spec_at(v).cardinality() {
        states[v] = c;
        let p = model.cpd_entry(v, states);
        if p == 0.0 {
            continue;
        }
        local[slot[depth]] = c;
        descend(model, order, slot, depth + 1, weight * p, states, local, out);
    }
}
