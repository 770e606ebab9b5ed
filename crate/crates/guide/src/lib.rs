//! Book chapters compiled as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/structures.md")]
pub mod structures {}
#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}
#[doc = include_str!("../../../book/src/interventions.md")]
pub mod interventions {}
#[doc = include_str!("../../../book/src/indicators.md")]
pub mod indicators {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/contexts.md")]
pub mod contexts {}
#[doc = include_str!("../../../book/src/files.md")]
pub mod files {}
