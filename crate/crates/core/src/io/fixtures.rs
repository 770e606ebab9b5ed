use std::fmt;
use std::str::FromStr;

use super::model_file::parse_model;
use crate::context::CausalRelation;
use crate::model::DiscreteModel;

/// Models shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FixtureId {
    /// Five-node precipitation model treated as ground truth.
    HeavyRainReality,
    /// A candidate model of the same reality with a wrong parent of `X`.
    HeavyRainModel,
    /// Structure-only causal relation for reduced road friction; edges are
    /// a reconstruction, no CPDs.
    FrictionRelation,
}

impl FixtureId {
    pub const ALL: [FixtureId; 3] = [FixtureId::HeavyRainReality, FixtureId::HeavyRainModel, FixtureId::FrictionRelation];

    pub fn name(self) -> &'static str {
        match self {
            FixtureId::HeavyRainReality => "heavy-rain-reality",
            FixtureId::HeavyRainModel => "heavy-rain-model",
            FixtureId::FrictionRelation => "friction-relation",
        }
    }
}

impl fmt::Display for FixtureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|f| f.name()).collect();
            format!("unknown fixture `{s}`; expected one of {}", names.join(", "))
        })
    }
}

/// Canonical model-file text of a fixture.
pub fn fixture_text(id: FixtureId) -> &'static str {
    match id {
        FixtureId::HeavyRainReality => include_str!("../../fixtures/heavy-rain-reality.json"),
        FixtureId::HeavyRainModel => include_str!("../../fixtures/heavy-rain-model.json"),
        FixtureId::FrictionRelation => include_str!("../../fixtures/friction-relation.json"),
    }
}

pub fn fixture(id: FixtureId) -> (CausalRelation, DiscreteModel) {
    parse_model(fixture_text(id), id.name()).expect("shipped fixtures are valid")
}
