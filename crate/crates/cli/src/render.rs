use critcause::io::{format_float, to_canonical_json};
use critcause::model::Distribution;
use serde::Serialize;

use crate::Format;

/// Prints either canonical JSON of `doc` or the human rendering.
pub(crate) fn emit<T: Serialize>(format: Format, doc: &T, human: impl FnOnce() -> String) {
    match format {
        Format::Json => print!("{}", to_canonical_json(doc)),
        Format::Human => print!("{}", human()),
    }
}

/// `{A, B}`, or `∅` for the empty set.
pub(crate) fn format_set<S: AsRef<str>>(members: impl Iterator<Item = S>) -> String {
    let names: Vec<String> = members.map(|m| m.as_ref().to_string()).collect();
    if names.is_empty() {
        "∅".to_string()
    } else {
        format!("{{{}}}", names.join(", "))
    }
}

pub(crate) fn human_distribution(d: &Distribution) -> String {
    let mut s = String::new();
    for (labels, p) in d.entries() {
        s.push_str(&format!("  {} = {}\n", labels.join(", "), format_float(p)));
    }
    s
}
