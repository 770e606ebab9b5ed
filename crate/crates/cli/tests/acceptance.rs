//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use critcause::context::{validate_causal_relation, PhenomenonBinding};
use critcause::engine::{self, Intervention};
use critcause::graph::CausalStructure;
use critcause::indicators::{self, LogBase, ModelPair, Rho3Semantics};
use critcause::io::{self, FixtureId};
use critcause::metrics::{self, AccelField, DrivingTask, Trajectory};
use critcause::model::{estimate_cpds, Cpd, DiscreteModel, VariableSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn near(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    check((got - want).abs() <= tol, || format!("{name} = {got}, expected {want} ± {tol}"))
}

fn within(name: &str, elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("{name} took {elapsed:?}, limit {limit:?}"))
}

fn heavy_rain() -> (DiscreteModel, DiscreteModel, PhenomenonBinding, String) {
    let (relation, reality) = io::fixture(FixtureId::HeavyRainReality);
    let (_, candidate) = io::fixture(FixtureId::HeavyRainModel);
    (reality, candidate, relation.phenomenon, relation.metric)
}

const N: [&str; 3] = ["V1", "V2", "X"];

fn heavy_rain_indicators() -> Outcome {
    let start = Instant::now();
    let (reality, candidate, cp, metric) = heavy_rain();
    let pair = ModelPair { reference: &reality, candidate: &candidate };
    let ace = indicators::ace(&reality, &cp, &metric).map_err(|e| e.to_string())?.value;
    let rce = indicators::rce(&reality, &cp, &metric).map_err(|e| e.to_string())?.value;
    let rho1 = indicators::rho1(pair, &cp, LogBase::Nats).map_err(|e| e.to_string())?.value;
    let rho2 = indicators::rho2(pair, &N, LogBase::Nats).map_err(|e| e.to_string())?.value;
    near("ACE", ace, 0.2, 1e-9)?;
    near("RCE", rce, 1.5, 1e-9)?;
    near("rho1", rho1, 0.0, 1e-12)?;
    near("rho2", rho2, 0.0141, 1e-4)?;
    within("evaluation", start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("ACE={ace:.12} RCE={rce:.12} rho1={rho1:.3e} rho2={rho2:.6}"))
}

fn sigma() -> Outcome {
    let (reality, _, cp, metric) = heavy_rain();
    let value = indicators::sigma(&reality, &cp, &metric).map_err(|e| e.to_string())?.value;
    near("sigma", value, 0.2509, 5e-4)?;

    // The same model with phi encoded Long=1 yields the mean used by the
    // mixed-encoding value 0.1416.
    let specs: Vec<VariableSpec> = reality
        .specs()
        .iter()
        .map(|s| if s.name == metric { s.clone().with_codes([0.0, 1.0]) } else { s.clone() })
        .collect();
    let flipped = DiscreteModel::new(reality.structure().clone(), specs, reality.cpds().cloned()).map_err(|e| e.to_string())?;
    let mean_long = engine::interventional_expectation(&flipped, &Intervention::new(), &metric).map_err(|e| e.to_string())?;
    let do_not_cp = Intervention::single(&cp.variable, "notCP");
    let numerator = engine::interventional_expectation(&reality, &do_not_cp, &metric).map_err(|e| e.to_string())?;
    near("E(phi) under Long=1", mean_long, 0.466, 1e-12)?;
    let mixed = 1.0 - numerator / mean_long;
    near("mixed-encoding sigma", mixed, 0.1416, 1e-4)?;
    Ok(format!("sigma={value:.6} (mixed-encoding reconstruction {mixed:.6})"))
}

fn rho3_suite() -> Outcome {
    let (reality, candidate, cp, _) = heavy_rain();
    let mut zeros = Vec::new();
    for m in [&reality, &candidate] {
        for sem in [Rho3Semantics::FullGraph, Rho3Semantics::RestrictToN] {
            let r = indicators::rho3(ModelPair { reference: m, candidate: m }, &N, &cp, sem, LogBase::Nats)
                .map_err(|e| e.to_string())?;
            near("rho3 of identical models", r.value, 0.0, 1e-12)?;
            zeros.push(r.value);
        }
    }
    let pair = ModelPair { reference: &reality, candidate: &candidate };
    let full = indicators::rho3(pair, &N, &cp, Rho3Semantics::FullGraph, LogBase::Nats).map_err(|e| e.to_string())?.value;
    let restrict = indicators::rho3(pair, &N, &cp, Rho3Semantics::RestrictToN, LogBase::Nats).map_err(|e| e.to_string())?.value;
    near("rho3 full-graph", full, 0.0135, 5e-4)?;
    near("rho3 restrict-to-N", restrict, 0.0190, 5e-4)?;
    Ok(format!("identical=0 ({} cases) full-graph={full:.6} restrict-to-N={restrict:.6}", zeros.len()))
}

/// Random instantiated DAG over binary nodes `N0..`; node `i` can only have
/// parents earlier in a random permutation, so name order and
/// topological order differ.
struct RandomModel {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
}

impl RandomModel {
    fn generate(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Self {
        let names: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut parents = vec![Vec::new(); n];
        for (pos, &child) in order.iter().enumerate() {
            for &p in &order[..pos] {
                if rng.gen_bool(density) {
                    parents[child].push(p);
                }
            }
            parents[child].sort_by(|&a, &b| names[a].cmp(&names[b]));
        }
        let tables = parents
            .iter()
            .map(|ps| {
                (0..1usize << ps.len())
                    .flat_map(|_| {
                        let p = rng.gen_range(0.05..0.95);
                        [p, 1.0 - p]
                    })
                    .collect()
            })
            .collect();
        RandomModel { names, parents, tables }
    }

    fn build(&self) -> DiscreteModel {
        let mut b = CausalStructure::builder().nodes(self.names.iter().cloned());
        for (child, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                b = b.edge(self.names[p].clone(), self.names[child].clone());
            }
        }
        let specs = self.names.iter().map(|n| VariableSpec::new(n.clone(), ["a", "b"]));
        let cpds = (0..self.names.len()).map(|i| {
            Cpd::new(self.names[i].clone(), self.parents[i].iter().map(|&p| self.names[p].clone()), self.tables[i].clone())
        });
        DiscreteModel::new(b.build().expect("acyclic by construction"), specs, cpds).expect("valid CPDs")
    }

    /// `P(v)` for every assignment (bit i = node i), with `clamp` nodes
    /// cut from their parents and fixed.
    fn joint(&self, clamp: Option<(usize, usize)>) -> Vec<f64> {
        let n = self.names.len();
        (0..1usize << n)
            .map(|state| {
                let bit = |i: usize| (state >> i) & 1;
                (0..n)
                    .map(|i| match clamp {
                        Some((c, v)) if c == i => f64::from(u8::from(bit(i) == v)),
                        _ => {
                            let row = self.parents[i].iter().fold(0, |r, &p| r * 2 + bit(p));
                            self.tables[i][row * 2 + bit(i)]
                        }
                    })
                    .product()
            })
            .collect()
    }
}

fn route_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut backdoor_runs = 0;
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.gen_range(2..=5);
        let rm = RandomModel::generate(&mut rng, n, 0.5);
        let m = rm.build();
        let x = rng.gen_range(0..n);
        let y = (x + rng.gen_range(1..n)) % n;
        let value = rng.gen_range(0..2);
        let (xn, yn) = (&rm.names[x], &rm.names[y]);
        let i = Intervention::single(xn.clone(), ["a", "b"][value]);

        let joint = rm.joint(Some((x, value)));
        let mut oracle = [0.0; 2];
        for (state, p) in joint.iter().enumerate() {
            oracle[(state >> y) & 1] += p;
        }
        let fail = |route: &str, e: String| format!("case {case}: {route} for do({i}) on {yn}: {e}");
        let mut results = vec![
            ("truncated", engine::interventional_truncated(&m, &i, yn).map_err(|e| fail("truncated", e.to_string()))?),
            ("parent-adjust", engine::interventional_parent_adjust(&m, &i, yn).map_err(|e| fail("parent-adjust", e.to_string()))?),
        ];
        let sets = m.structure().enumerate_adjustment_sets(xn, yn, 64).map_err(|e| fail("enumeration", e.to_string()))?;
        for set in &sets {
            let members: Vec<&str> = set.iter().map(String::as_str).collect();
            let d = engine::interventional_backdoor(&m, &i, yn, &members).map_err(|e| fail("backdoor", e.to_string()))?;
            results.push(("backdoor", d));
            backdoor_runs += 1;
        }
        for (route, d) in &results {
            for (k, want) in oracle.iter().enumerate() {
                let diff = (d.probs[k] - want).abs();
                worst = worst.max(diff);
                check(diff <= 1e-9, || fail(route, format!("P = {:?}, oracle {oracle:?}", d.probs)))?;
            }
        }
        for pair in results.windows(2) {
            let diff = pair[0].1.max_abs_diff(&pair[1].1).unwrap_or(f64::INFINITY);
            check(diff <= 1e-9, || fail(pair[1].0, format!("disagrees with {} by {diff}", pair[0].0)))?;
        }
    }
    within("200 models", start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("200 models, {backdoor_runs} back-door sets, max deviation {worst:.1e}, {:?}", start.elapsed()))
}

fn dsep_completeness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut queries = 0usize;
    let mut separated = 0usize;
    for dag in 0..50 {
        let n = rng.gen_range(3..=7);
        let density = rng.gen_range(0.2..0.6);
        let base = RandomModel::generate(&mut rng, n, density);
        let structure = base.build().structure().clone();
        // d-separation verdict for every (a, b, z), z a bitmask over the rest.
        let mut verdicts = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let rest: Vec<usize> = (0..n).filter(|&v| v != a && v != b).collect();
                for mask in 0..1usize << rest.len() {
                    let z: Vec<usize> = rest.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &v)| v).collect();
                    let names: Vec<&str> = z.iter().map(|&v| base.names[v].as_str()).collect();
                    let sep = structure
                        .d_separated(&[base.names[a].as_str()], &[base.names[b].as_str()], &names)
                        .map_err(|e| e.to_string())?
                        .separated;
                    verdicts.push((a, b, z, sep));
                }
            }
        }
        for _ in 0..20 {
            let mut inst = RandomModel::generate(&mut rng, n, 0.0);
            inst.parents.clone_from(&base.parents);
            inst.tables = base
                .parents
                .iter()
                .map(|ps| (0..1usize << ps.len()).flat_map(|_| { let p = rng.gen_range(0.05..0.95); [p, 1.0 - p] }).collect())
                .collect();
            let joint = inst.joint(None);
            for (a, b, z, sep) in &verdicts {
                let gap = dependence(&joint, *a, *b, z);
                queries += 1;
                separated += usize::from(*sep);
                let independent = gap <= 1e-9;
                check(independent == *sep, || {
                    format!("dag {dag}: {} vs {} given {:?}: d-separated={sep}, max |P(ab|z)-P(a|z)P(b|z)|={gap:.3e}", base.names[*a], base.names[*b], z)
                })?;
            }
        }
    }
    Ok(format!("{queries} queries over 50 graphs x 20 instantiations ({separated} separated)"))
}

/// Largest `|P(a,b|z) − P(a|z)P(b|z)|` over all values, binary variables.
fn dependence(joint: &[f64], a: usize, b: usize, z: &[usize]) -> f64 {
    let zc = 1usize << z.len();
    let mut table = vec![0.0; 4 * zc];
    for (state, p) in joint.iter().enumerate() {
        let zi = z.iter().enumerate().fold(0, |acc, (k, &v)| acc | ((state >> v) & 1) << k);
        table[zi * 4 + ((state >> a) & 1) * 2 + ((state >> b) & 1)] += p;
    }
    let mut worst = 0.0f64;
    for cell in table.chunks(4) {
        let pz: f64 = cell.iter().sum();
        if pz <= 0.0 {
            continue;
        }
        for va in 0..2 {
            for vb in 0..2 {
                let pab = cell[va * 2 + vb] / pz;
                let pa = (cell[va * 2] + cell[va * 2 + 1]) / pz;
                let pb = (cell[vb] + cell[2 + vb]) / pz;
                worst = worst.max((pab - pa * pb).abs());
            }
        }
    }
    worst
}

fn estimation_consistency() -> Outcome {
    let (relation, reality) = io::fixture(FixtureId::HeavyRainReality);
    let data = reality.sample(100_000, 2024).map_err(|e| e.to_string())?;
    let est = estimate_cpds(&relation.structure, &relation.specs, &data, 0.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for truth in reality.cpds() {
        let fitted = est.model.cpd(&truth.child).map_err(|e| e.to_string())?.ok_or_else(|| format!("{} not estimated", truth.child))?;
        check(fitted.parents == truth.parents, || format!("{}: parents {:?}", truth.child, fitted.parents))?;
        let card = reality.spec(&truth.child).map(VariableSpec::cardinality).unwrap_or(0);
        for (r, (a, b)) in truth.rows(card).zip(fitted.rows(card)).enumerate() {
            let tv = 0.5 * a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>();
            worst = worst.max(tv);
            check(tv < 0.02, || format!("{} row {r}: total variation {tv}", truth.child))?;
        }
    }
    let ace = indicators::ace(&est.model, &relation.phenomenon, &relation.metric).map_err(|e| e.to_string())?.value;
    near("ACE of the estimated model", ace, 0.2, 0.02)?;
    Ok(format!("max row TV {worst:.4}, ACE {ace:.4} from 10^5 samples"))
}

const NINE: [&str; 9] = [
    "Ego tire temperature",
    "Planned steering",
    "Ego vehicle longitudinal wheel slip",
    "Wet grip",
    "Tire type",
    "Planned acceleration",
    "Tire pressure",
    "Forward velocity of ego",
    "Ego vehicle slip angle",
];

fn friction_relation() -> Outcome {
    let start = Instant::now();
    let (relation, _) = io::fixture(FixtureId::FrictionRelation);
    let violations = validate_causal_relation(&relation);
    check(violations.is_empty(), || format!("violations: {violations:?}"))?;
    let s = &relation.structure;
    for node in ["Max. avail. long. dec.", "Max. avail. lat. dec.", "Max. req. long. dec.", "Max. req. lat. dec.", "BTN_DT", "STN_DT"] {
        check(s.is_latent(node) == Ok(true), || format!("{node} is not latent"))?;
    }
    let x = &relation.phenomenon.variable;
    let admissible = s.backdoor_admissible(&NINE, x, &relation.metric).map_err(|e| e.to_string())?;
    check(admissible, || "nine-variable set is not admissible".into())?;
    within("check", start.elapsed(), Duration::from_secs(1))?;
    let want: BTreeSet<String> = NINE.iter().map(|n| n.to_string()).collect();
    let sets = s.enumerate_adjustment_sets(x, &relation.metric, 64).map_err(|e| e.to_string())?;
    let rank = sets.iter().position(|set| *set == want).ok_or("nine-variable set not enumerated")?;
    Ok(format!("{} variables, 0 violations, set admissible and enumerated at position {}", s.len(), rank + 1))
}

fn metric_checks() -> Outcome {
    let field = AccelField::uniform(1, 1, (-1e4, -1e4), (2e4, 2e4), (-8.0, 5.0)).map_err(|e| e.to_string())?;
    let task = |f: &dyn Fn(f64) -> (f64, f64)| -> Result<DrivingTask, String> {
        let tr = Trajectory::from_fn(0.0, 0.01, 401, f).map_err(|e| e.to_string())?;
        DrivingTask::spanning(vec![tr]).map_err(|e| e.to_string())
    };
    let braking = task(&|t| (25.0 * t - 1.5 * t * t, 3.0))?;
    let along = metrics::along_req_dt(&braking).map_err(|e| e.to_string())?;
    near("a_long,req", along, -3.0, 0.03)?;

    let (r, v) = (40.0, 12.0);
    let arc = task(&|t| (r * (v * t / r).sin(), r * (1.0 - (v * t / r).cos())))?;
    let alat = metrics::alat_req_dt(&arc).map_err(|e| e.to_string())?;
    near("a_lat,req", alat, v * v / r, 0.02 * v * v / r)?;

    let straight = task(&|t| (-30.0 + 13.9 * t, 7.25))?;
    let (btn, stn) = (metrics::btn_dt(&straight, &field), metrics::stn_dt(&straight, &field));
    let (btn, stn) = (btn.map_err(|e| e.to_string())?, stn.map_err(|e| e.to_string())?);
    check(btn == 0.0 && stn == 0.0, || format!("straight line: BTN_DT={btn}, STN_DT={stn}"))?;

    let long = metrics::ratio(-6.5, -6.5, "longitudinal").map_err(|e| e.to_string())?;
    let lat = metrics::ratio(4.2, 4.2, "lateral").map_err(|e| e.to_string())?;
    near("ratio long", long, 1.0, 1e-9)?;
    near("ratio lat", lat, 1.0, 1e-9)?;
    Ok(format!("a_long,req={along:.5} a_lat,req={alat:.5} (v^2/R={:.5}) straight 0/0 ratios 1", v * v / r))
}

fn run_cli(args: &[String]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_critcause")).args(args).output().map_err(|e| e.to_string())?;
    check(out.status.code().is_some_and(|c| c <= 1), || format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("critcause-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let file = |name: &str, text: &str| -> Result<String, String> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| e.to_string())?;
        Ok(p.display().to_string())
    };
    let field = file("field.txt", "1 1 -1000 -1000 2000 2000\n-8 5\n")?;
    let traj: String = (0..=40).map(|k| { let t = k as f64 * 0.1; format!("{t} {} 0\n", 20.0 * t - 1.5 * t * t) }).collect();
    let traj = file("traj.txt", &traj)?;

    let mut matrix: Vec<Vec<String>> = Vec::new();
    let mut add = |args: &[&str]| matrix.push(args.iter().map(|s| s.to_string()).collect());
    for id in FixtureId::ALL {
        let m = format!("fixture:{id}");
        add(&["validate", &m, "--format", "json"]);
        add(&["adjust", &m, "--format", "json"]);
    }
    for m in ["fixture:heavy-rain-reality", "fixture:heavy-rain-model"] {
        add(&["effect", m, "--format", "json"]);
        add(&["effect", m, "--do", "X=CP", "--format", "json"]);
        add(&["effect", m, "--do", "X=notCP", "--route", "parent-adjust", "--format", "json"]);
        add(&["sp", m, "--sp", "V2=Slow", "--format", "json"]);
        add(&["sample", m, "-n", "500", "--seed", "9"]);
    }
    for rho3 in ["full-graph", "restrict-to-n"] {
        add(&["indicators", "fixture:heavy-rain-reality", "fixture:heavy-rain-model", "--set", "V1,V2,X", "--rho3", rho3, "--format", "json"]);
    }
    add(&["indicators", "fixture:heavy-rain-reality", "fixture:heavy-rain-model", "--bits", "--format", "json"]);
    add(&["metrics", "--trajectories", &traj, "--field", &field, "--edges", "0.3,0.6", "--format", "json"]);

    for args in &matrix {
        let (a, b) = (run_cli(args)?, run_cli(args)?);
        check(a == b, || format!("{args:?} output differs between runs"))?;
        check(!a.is_empty(), || format!("{args:?} printed nothing"))?;
    }

    for id in FixtureId::ALL {
        let (relation, model) = io::fixture(id);
        let path = dir.join(format!("{id}.json"));
        io::save_model(&path, &relation, &model).map_err(|e| e.to_string())?;
        let (r2, m2) = io::load_model(&path).map_err(|e| e.to_string())?;
        let again = io::render_model(&r2, &m2);
        check(again == io::fixture_text(id), || format!("{id}: save/load/save is not a fixed point"))?;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("{} commands byte-identical across runs, 3 fixtures fixed under save/load/save", matrix.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("heavy-rain ACE, RCE, rho1, rho2", heavy_rain_indicators),
        ("sigma under a consistent encoding", sigma),
        ("rho3 properties and values", rho3_suite),
        ("route equivalence against brute force", route_equivalence),
        ("d-separation iff conditional independence", dsep_completeness),
        ("estimation consistency", estimation_consistency),
        ("friction relation and adjustment set", friction_relation),
        ("metric analytic cases", metric_checks),
        ("determinism and fixed point", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
