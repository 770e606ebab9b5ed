use std::path::Path;

use critcause::context::{validate_causal_relation, validate_record, CausalRelation, Record};
use critcause::engine::{self, EngineError, Intervention, SafetyPrinciple};
use critcause::indicators::{indicator_table, LogBase, ModelPair, Rho3Semantics};
use critcause::io::{self, FixtureId, IoError};
use critcause::metrics::{self, default_bin_labels, DrivingTask};
use critcause::model::{estimate_cpds, DiscreteModel, Provenance};
use serde_json::json;

use crate::render::{emit, format_set, human_distribution};
use crate::{Command, Failure, Format, Rho3Arg};

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        if e.is_validation() {
            Failure::Finding(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn finding(e: impl std::fmt::Display) -> Failure {
    Failure::Finding(e.to_string())
}

fn load(spec: &str) -> Result<(CausalRelation, DiscreteModel), Failure> {
    match spec.strip_prefix("fixture:") {
        Some(name) => {
            let id: FixtureId = name.parse().map_err(Failure::Usage)?;
            Ok(io::fixture(id))
        }
        None => Ok(io::load_model(spec)?),
    }
}

fn intervention(text: &str) -> Result<Intervention, Failure> {
    text.parse().map_err(|e: EngineError| Failure::Usage(e.to_string()))
}

pub(crate) fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { model, record, out } => validate(&model, record.as_deref(), out.format),
        Command::Adjust { model, x, y, max, out } => adjust(&model, x, y, max, out.format),
        Command::Effect { model, intervention: i, target, route, out } => {
            let (relation, m) = load(&model)?;
            let i = intervention(&i)?;
            let target = target.unwrap_or(relation.metric);
            let dist = engine::interventional(&m, &i, &target, route).map_err(finding)?;
            let expectation = engine::expectation_of(&m, &dist, &target).map_err(finding)?;
            let doc = json!({
                "intervention": i.to_string(),
                "target": target,
                "route": route.to_string(),
                "distribution": dist,
                "expectation": expectation,
            });
            emit(out.format, &doc, || {
                let cond = if i.is_empty() { String::new() } else { format!(" | do({i})") };
                format!("P({target}{cond}) via {route}\n{}E = {}\n", human_distribution(&dist), io::format_float(expectation))
            });
            Ok(())
        }
        Command::Indicators { reference, candidate, set, data, alpha, bits, rho3, out } => {
            indicators(&reference, &candidate, set, &data, alpha, bits, rho3, out.format)
        }
        Command::Sample { model, count, seed, output } => {
            let (_, m) = load(&model)?;
            let data = m.sample(count, seed).map_err(finding)?;
            match output {
                Some(path) => io::save_dataset(path, &data)?,
                None => print!("{}", io::render_dataset(&data)),
            }
            Ok(())
        }
        Command::Metrics { trajectories, field, edges, labels, agg, out } => {
            let trajectories = trajectories.iter().map(io::load_trajectory).collect::<Result<Vec<_>, _>>()?;
            let field = io::load_field(&field)?;
            let task = DrivingTask::spanning(trajectories).map_err(finding)?;
            let mut report = metrics::evaluate(&task, &field, agg).map_err(finding)?;
            if !edges.is_empty() {
                let labels = if labels.is_empty() { default_bin_labels(edges.len() + 1) } else { labels };
                let label = metrics::discretize_label(report.aggregate, &edges, &labels).map_err(|e| Failure::Usage(e.to_string()))?;
                report.label = Some(label.to_string());
            }
            emit(out.format, &report, || {
                let f = io::format_float;
                let mut s = format!(
                    "a_long,req = {}\na_lat,req = {}\na_long,min = {}\na_lat,min = {}\nBTN_DT = {}\nSTN_DT = {}\n{}(BTN_DT, STN_DT) = {}\n",
                    f(report.along_req),
                    f(report.alat_req),
                    f(report.along_min),
                    f(report.alat_min),
                    f(report.btn_dt),
                    f(report.stn_dt),
                    report.aggregate_mode,
                    f(report.aggregate),
                );
                if let Some(label) = &report.label {
                    s.push_str(&format!("label = {label}\n"));
                }
                s
            });
            Ok(())
        }
        Command::Sp { model, intervention: i, name, report, out } => {
            let (relation, m) = load(&model)?;
            let sp = SafetyPrinciple { name, intervention: intervention(&i)?, rationale: String::new() };
            let result = engine::evaluate_safety_principle(&m, &sp, &relation.phenomenon, &relation.metric).map_err(finding)?;
            if let Some(path) = report {
                std::fs::write(&path, io::to_canonical_json(&result))
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            }
            emit(out.format, &result, || {
                let f = io::format_float;
                let x = &relation.phenomenon;
                let mut s = format!(
                    "{} = do({})\nP({}={}) = {} -> {} (delta {})\nE({}) = {} -> {} (delta {})\n",
                    result.principle,
                    result.intervention,
                    x.variable,
                    x.cp_label,
                    f(result.p_cp),
                    f(result.p_cp_do),
                    f(result.delta_p_cp),
                    relation.metric,
                    f(result.e_phi),
                    f(result.e_phi_do),
                    f(result.delta_e_phi),
                );
                for w in &result.warnings {
                    s.push_str(&format!("warning: {w:?}\n"));
                }
                s
            });
            Ok(())
        }
    }
}

fn validate(model: &str, record: Option<&Path>, format: Format) -> Result<(), Failure> {
    let (relation, _) = load(model)?;
    let violations = validate_causal_relation(&relation);
    let record_violations = match record {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let rec: Record = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
            validate_record(&relation.context, &rec)
        }
        None => Vec::new(),
    };
    let clean = violations.is_empty() && record_violations.is_empty();
    let mut doc = json!({ "model": model, "valid": clean, "violations": violations });
    if record.is_some() {
        doc["record_violations"] = json!(record_violations);
    }
    emit(format, &doc, || {
        let mut s = String::new();
        for v in &violations {
            s.push_str(&format!("clause {}: {}\n", v.clause, v.message));
        }
        for v in &record_violations {
            s.push_str(&format!("record, layer {} statement {}: {}\n", v.layer, v.statement, v.message));
        }
        if clean {
            s.push_str("ok\n");
        }
        s
    });
    if clean {
        Ok(())
    } else {
        Err(Failure::Finding(String::new()))
    }
}

fn adjust(model: &str, x: Option<String>, y: Option<String>, max: usize, format: Format) -> Result<(), Failure> {
    let (relation, _) = load(model)?;
    let x = x.unwrap_or_else(|| relation.phenomenon.variable.clone());
    let y = y.unwrap_or_else(|| relation.metric.clone());
    let sets = relation.structure.enumerate_adjustment_sets(&x, &y, max).map_err(finding)?;
    let doc = json!({ "x": x, "y": y, "sets": sets });
    emit(format, &doc, || {
        let mut s = String::new();
        for set in &sets {
            s.push_str(&format_set(set.iter()));
            s.push('\n');
        }
        if sets.is_empty() {
            s.push_str(&format!("no admissible set for ({x}, {y})\n"));
        }
        s
    });
    if sets.is_empty() {
        Err(Failure::Finding(String::new()))
    } else {
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn indicators(
    reference: &str,
    candidate: &str,
    set: Vec<String>,
    data: &[std::path::PathBuf],
    alpha: f64,
    bits: bool,
    rho3: Rho3Arg,
    format: Format,
) -> Result<(), Failure> {
    let (ref_rel, mut ref_model) = load(reference)?;
    let (cand_rel, mut cand_model) = load(candidate)?;
    if let [ref_csv, cand_csv] = data {
        for (rel, model, path) in [(&ref_rel, &mut ref_model, ref_csv), (&cand_rel, &mut cand_model, cand_csv)] {
            let dataset = io::load_dataset(path, &rel.specs, Provenance::RealWorld)?;
            let est = estimate_cpds(&rel.structure, &rel.specs, &dataset, alpha).map_err(finding)?;
            for w in &est.warnings {
                eprintln!("warning: {}: {w:?}", path.display());
            }
            *model = est.model;
        }
    }
    let nodes: Vec<String> = if set.is_empty() {
        let s = &ref_rel.structure;
        s.node_names().iter().filter(|n| !s.is_latent(n).unwrap_or(true)).cloned().collect()
    } else {
        set
    };
    let base = if bits { LogBase::Bits } else { LogBase::Nats };
    let semantics = match rho3 {
        Rho3Arg::FullGraph => Rho3Semantics::FullGraph,
        Rho3Arg::RestrictToN => Rho3Semantics::RestrictToN,
    };
    let pair = ModelPair { reference: &ref_model, candidate: &cand_model };
    let (reports, failed) = indicator_table(pair, &nodes, &ref_rel.phenomenon, &ref_rel.metric, semantics, base);
    let failures: Vec<_> = failed.iter().map(|(name, e)| json!({ "name": name, "error": e.to_string() })).collect();
    let doc = json!({ "node_set": nodes, "indicators": reports, "failed": failures });
    emit(format, &doc, || {
        let mut s = String::new();
        for r in &reports {
            s.push_str(&format!("{:<6} {}", r.name.to_string(), io::format_float(r.value)));
            if let Some(order) = &r.conventions.kl_order {
                s.push_str(&format!("  [{order}, {:?}]", r.conventions.log_base).to_lowercase());
            }
            s.push('\n');
            for (node, v) in &r.components {
                s.push_str(&format!("         {node}: {}\n", io::format_float(*v)));
            }
            for w in &r.warnings {
                s.push_str(&format!("         warning: {w}\n"));
            }
        }
        for (name, e) in &failed {
            s.push_str(&format!("{:<6} not computable: {e}\n", name.to_string()));
        }
        s
    });
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Finding(String::new()))
    }
}
