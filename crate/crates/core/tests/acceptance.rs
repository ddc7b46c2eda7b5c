//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptss_core::bisim::{equivalent, naive_fixpoint, quotient, Kind};
use ptss_core::derive::{build_pts, stable_model, TransitionTable, DEFAULT_FUEL};
use ptss_core::dist::{distributivity_check, eval_dist};
use ptss_core::format::{check_spec, Format};
use ptss_core::lang::{parse_dist_formula, parse_formula, parse_spec, Spec};
use ptss_core::logic::{distinguishing_formula, in_fragment, sat_dist, sat_state};
use ptss_core::probe::congruence_probe;
use ptss_core::pts::{random_pts, Pts};
use ptss_core::rational::{rat, Rational};
use ptss_core::terms::{DistTerm, Signature, Sort, StateTerm};

const RANDOM_SYSTEMS: usize = 500;
const RANDOM_SEED: u64 = 0;
const PROBE_TRIALS: usize = 200;
const PROBE_SEED: u64 = 0;
const DISTRIBUTIVITY_INSTANCES: usize = 200;
const MATRIX_BUDGET: Duration = Duration::from_secs(1);
const INCLUSION_BUDGET: Duration = Duration::from_secs(60);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn from_failures(failures: Vec<String>, ok: String) -> Self {
        if failures.is_empty() {
            Outcome { pass: true, detail: ok }
        } else {
            Outcome { pass: false, detail: failures.join("; ") }
        }
    }
}

fn load(rel: &str) -> Spec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(rel);
    parse_spec(&fs::read_to_string(&path).unwrap()).unwrap()
}

fn def_roots(spec: &Spec) -> Vec<StateTerm> {
    spec.defs.iter().map(|d| d.term.clone()).collect()
}

/// The base PA model with the label of every named process.
fn pa_model() -> (Pts, BTreeMap<String, String>, TransitionTable) {
    let spec = load("pa.ptss");
    let table = stable_model(&spec, &def_roots(&spec), DEFAULT_FUEL).unwrap();
    let pts = build_pts(&table).unwrap();
    let labels = spec.defs.iter().map(|d| (d.name.clone(), d.term.to_string())).collect();
    (pts, labels, table)
}

fn c1_matrix() -> Outcome {
    let start = Instant::now();
    let (pts, labels, _) = pa_model();
    let pairs = [("t1", "t2"), ("t3", "t4"), ("t5", "t6")];
    let expected = [
        (Kind::Strong, [false, false, false]),
        (Kind::Convex, [true, false, false]),
        (Kind::Abstracted, [false, true, false]),
        (Kind::Obliterated, [true, true, true]),
    ];
    let mut failures = Vec::new();
    for (kind, row) in expected {
        let got: Vec<bool> = pairs
            .iter()
            .map(|(l, r)| equivalent(&pts, &labels[*l], &labels[*r], kind).unwrap())
            .collect();
        if got != row {
            failures.push(format!("{kind}: got {got:?}, want {row:?}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= MATRIX_BUDGET {
        failures.push(format!("took {elapsed:?}"));
    }
    Outcome::from_failures(failures, format!("4x3 matrix exact in {elapsed:.2?}"))
}

fn random_systems() -> Vec<Pts> {
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SEED);
    (0..RANDOM_SYSTEMS).map(|_| random_pts(&mut rng, 8, 3, 8)).collect()
}

fn c2_inclusions(systems: &[Pts]) -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut proper = [0usize; 3];
    for (i, pts) in systems.iter().enumerate() {
        let [b, c, a, o] = Kind::ALL.map(|k| quotient(pts, k));
        let checks = [(&b, &c, "b<=c"), (&b, &a, "b<=a"), (&c, &o, "c<=o"), (&a, &o, "a<=o")];
        for (fine, coarse, name) in checks {
            if !fine.refines(coarse) {
                failures.push(format!("system {i}: {name}"));
            }
        }
        proper[0] += usize::from(b.num_blocks() > c.num_blocks());
        proper[1] += usize::from(b.num_blocks() > a.num_blocks());
        proper[2] += usize::from(c.num_blocks() > o.num_blocks() || a.num_blocks() > o.num_blocks());
    }
    let elapsed = start.elapsed();
    if elapsed >= INCLUSION_BUDGET {
        failures.push(format!("took {elapsed:?}"));
    }
    Outcome::from_failures(
        failures,
        format!(
            "{} systems, zero violations in {elapsed:.2?} (strictly finer: b<c {}, b<a {}, c|a<o {})",
            systems.len(),
            proper[0],
            proper[1],
            proper[2]
        ),
    )
}

fn c3_oracle(systems: &[Pts]) -> Outcome {
    let mut failures = Vec::new();
    for (i, pts) in systems.iter().enumerate() {
        for kind in Kind::ALL {
            let fast = quotient(pts, kind).relation();
            match naive_fixpoint(pts, kind) {
                Ok(slow) if slow == fast => {}
                Ok(_) => failures.push(format!("system {i} {kind}: mismatch")),
                Err(e) => failures.push(format!("system {i} {kind}: {e}")),
            }
        }
    }
    Outcome::from_failures(failures, format!("{} systems x 4 kinds agree", systems.len()))
}

fn c4_formats() -> Outcome {
    let cases = [
        ("counterexamples/eq1.ptss", "f_eq1", Format::Convex, "7"),
        ("counterexamples/eq2.ptss", "f_eq2", Format::Convex, "9"),
        ("counterexamples/eq3.ptss", "f_eq3", Format::Convex, "9"),
        ("counterexamples/eq4.ptss", "f_eq4", Format::Convex, "10"),
        ("counterexamples/eq1.ptss", "f_eq1", Format::Abstracted, "p=0"),
        ("counterexamples/eq1c.ptss", "f_eq1c", Format::Abstracted, "p=0"),
        ("counterexamples/eq5.ptss", "f_eq5", Format::Obliterated, "2"),
        ("counterexamples/eq6.ptss", "f_eq6", Format::Obliterated, "3"),
        ("counterexamples/eq7.ptss", "f_eq7", Format::Obliterated, "2"),
        ("counterexamples/eq2.ptss", "f_eq2", Format::Obliterated, "3"),
        ("counterexamples/eq3o.ptss", "f_eq3", Format::Obliterated, "1"),
        ("counterexamples/eq4.ptss", "f_eq4", Format::Obliterated, "3"),
    ];
    let mut failures = Vec::new();
    for (file, rule, format, want) in cases {
        let report = check_spec(&load(file), &[format]);
        let got = report
            .verdict(rule, format)
            .and_then(|v| v.primary())
            .map_or("conforms".to_string(), |v| v.condition.to_string());
        if got != want {
            failures.push(format!("{file} {format}: got {got}, want {want}"));
        }
    }
    let pa = load("pa.ptss");
    let report = check_spec(&pa, &Format::ALL);
    for format in Format::ALL {
        if !report.conforms(format) {
            failures.push(format!("pa.ptss rejected by {format}"));
        }
    }
    Outcome::from_failures(
        failures,
        format!("{} rejections with exact conditions; {} PA rules pass 4 formats", cases.len(), pa.rules.len()),
    )
}

fn c5_probe() -> Outcome {
    let violating = [
        ("counterexamples/eq1.ptss", Kind::Convex),
        ("counterexamples/eq2.ptss", Kind::Convex),
        ("counterexamples/eq2.ptss", Kind::Obliterated),
        ("counterexamples/eq4.ptss", Kind::Convex),
        ("counterexamples/eq5.ptss", Kind::Obliterated),
        ("counterexamples/eq6.ptss", Kind::Obliterated),
        ("counterexamples/eq7.ptss", Kind::Obliterated),
        ("counterexamples/eq1c.ptss", Kind::Abstracted),
    ];
    let conforming = [
        ("conforming/convex.ptss", Kind::Convex),
        ("conforming/abstracted.ptss", Kind::Abstracted),
        ("conforming/obliterated.ptss", Kind::Obliterated),
        ("pa.ptss", Kind::Strong),
        ("pa.ptss", Kind::Convex),
        ("pa.ptss", Kind::Abstracted),
        ("pa.ptss", Kind::Obliterated),
    ];
    let mut failures = Vec::new();
    for (file, kind) in violating {
        let report = congruence_probe(&load(file), kind, PROBE_TRIALS, PROBE_SEED);
        if !report.found() {
            failures.push(format!("{file} {kind}: no violation"));
        }
    }
    for (file, kind) in conforming {
        let report = congruence_probe(&load(file), kind, PROBE_TRIALS, PROBE_SEED);
        if report.found() {
            failures.push(format!("{file} {kind}: spurious violation {}", report.violations[0].context));
        }
    }
    Outcome::from_failures(
        failures,
        format!("{} violations reproduced, {} conforming cases clean", violating.len(), conforming.len()),
    )
}

fn c6_logic() -> Outcome {
    let (pts, labels, _) = pa_model();
    let mut failures = Vec::new();
    let sat = |name: &str, text: &str| sat_state(&pts, &labels[name], &parse_formula(text).unwrap()).unwrap();
    let separates = |l: &str, r: &str, text: &str| sat(l, text) != sat(r, text);

    let meet = "[<b>tt]_1/2 /\\ [<c>tt]_1/2";
    if !separates("t1", "t2", &format!("<a>({meet})")) {
        failures.push("<a>([<b>tt]_1/2 /\\ [<c>tt]_1/2) does not separate t1/t2".into());
    }
    if separates("t1", "t2", &format!("<a>_c ({meet})")) {
        failures.push("<a>_c variant separates t1/t2".into());
    }

    let state = |term: &str| pts.state(term).unwrap();
    let (b0, c0) = (state("b.dirac(0)"), state("c.dirac(0)"));
    let half = vec![(b0, rat(1, 2)), (c0, rat(1, 2))];
    let tenth = vec![(b0, rat(1, 10)), (c0, rat(9, 10))];
    let dirac_c = vec![(c0, Rational::one())];
    let dsat = |pi: &Vec<(usize, Rational)>, text: &str| sat_dist(&pts, pi, &parse_dist_formula(text).unwrap());
    if dsat(&half, "[<b>tt]_1/2") == dsat(&tenth, "[<b>tt]_1/2") {
        failures.push("[<b>tt]_1/2 does not separate 1/2:1/2 from 1/10:9/10".into());
    }
    if dsat(&half, "[<b>tt]_0") != dsat(&tenth, "[<b>tt]_0") {
        failures.push("[<b>tt]_0 separates 1/2:1/2 from 1/10:9/10".into());
    }
    for (name, pi) in [("1/2:1/2", &half), ("1/10:9/10", &tenth)] {
        if dsat(pi, "[<b>tt]_0") == dsat(&dirac_c, "[<b>tt]_0") {
            failures.push(format!("[<b>tt]_0 does not separate {name} from dirac(c.0)"));
        }
    }

    if !separates("t5", "t6", "<a>([<b>tt]_0 /\\ [<c>tt]_0)") {
        failures.push("meet formula does not separate t5/t6".into());
    }
    for weak in ["<a>[<b>tt]_0", "<a>[<c>tt]_0"] {
        if separates("t5", "t6", weak) {
            failures.push(format!("{weak} separates t5/t6"));
        }
    }

    let names = ["t1", "t2", "t3", "t4", "t5", "t6"];
    let mut separators = 0;
    for kind in Kind::ALL {
        for (i, l) in names.iter().enumerate() {
            for r in &names[i + 1..] {
                let (sl, sr) = (&labels[*l], &labels[*r]);
                if equivalent(&pts, sl, sr, kind).unwrap() {
                    continue;
                }
                match distinguishing_formula(&pts, sl, sr, kind) {
                    Ok(Some(phi)) => {
                        let differs = sat_state(&pts, sl, &phi).unwrap() != sat_state(&pts, sr, &phi).unwrap();
                        if in_fragment(&phi, kind) && differs {
                            separators += 1;
                        } else {
                            failures.push(format!("{kind} {l}/{r}: bad separator {phi}"));
                        }
                    }
                    Ok(None) => failures.push(format!("{kind} {l}/{r}: no separator")),
                    Err(e) => failures.push(format!("{kind} {l}/{r}: {e}")),
                }
            }
        }
    }
    Outcome::from_failures(failures, format!("named formulas as stated; {separators} verified separators"))
}

fn c7_stable_model() -> Outcome {
    let mut failures = Vec::new();
    let cycle = load("negative_cycle.ptss");
    let table = stable_model(&cycle, &def_roots(&cycle), DEFAULT_FUEL).unwrap();
    if table.certain == table.possible {
        failures.push("negative cycle: CT = PT".into());
    }
    if table.is_complete() {
        failures.push("negative cycle reported complete".into());
    }
    let (_, _, pa) = pa_model();
    if pa.certain != pa.possible {
        failures.push("pa: CT != PT".into());
    }
    if pa.iterations > pa.explored.len() {
        failures.push(format!("pa: {} iterations for {} terms", pa.iterations, pa.explored.len()));
    }
    Outcome::from_failures(
        failures,
        format!(
            "cycle |CT|={} |PT|={}; pa complete after {} iteration(s) over {} terms",
            table.certain.len(),
            table.possible.len(),
            pa.iterations,
            pa.explored.len()
        ),
    )
}

fn stop() -> StateTerm {
    StateTerm::constant("stop")
}

fn prefixed(action: &str, d: DistTerm) -> StateTerm {
    StateTerm::app(&format!("pre_{action}"), vec![d.into()])
}

fn random_closed_state<R: Rng>(rng: &mut R, depth: usize) -> StateTerm {
    if depth == 0 || rng.gen_bool(0.3) {
        return stop();
    }
    let action = ["a", "b", "c"][rng.gen_range(0..3)];
    prefixed(action, DistTerm::dirac(random_closed_state(rng, depth - 1)))
}

fn random_dist<R: Rng>(rng: &mut R) -> DistTerm {
    let den: i64 = rng.gen_range(1..=8);
    let mut parts = Vec::new();
    let mut left = den;
    while left > 0 {
        let units = rng.gen_range(1..=left);
        parts.push((rat(units, den), DistTerm::dirac(random_closed_state(rng, 2))));
        left -= units;
    }
    DistTerm::sum(parts)
}

fn c8_semantics() -> Outcome {
    let sig = Signature::new()
        .with_op("stop", &[])
        .with_op("pre_a", &[Sort::Dist])
        .with_op("pre_b", &[Sort::Dist])
        .with_op("pre_c", &[Sort::Dist])
        .with_op("g", &[Sort::State, Sort::State])
        .with_op("h", &[Sort::State, Sort::Dist]);
    let mut failures = Vec::new();

    let half = DistTerm::mix(
        rat(1, 2),
        DistTerm::dirac(prefixed("b", DistTerm::dirac(stop()))),
        DistTerm::dirac(prefixed("c", DistTerm::dirac(stop()))),
    );
    let lifted = eval_dist(&DistTerm::lift("g", vec![half.clone(), half.clone()]), &sig).unwrap();
    let parts = eval_dist(&half, &sig).unwrap();
    let mut oracle: BTreeMap<StateTerm, Rational> = BTreeMap::new();
    for (x, p) in parts.iter() {
        for (y, q) in parts.iter() {
            let t = StateTerm::app("g", vec![x.clone().into(), y.clone().into()]);
            *oracle.entry(t).or_default() += p * q;
        }
    }
    let got: BTreeMap<StateTerm, Rational> = lifted.iter().map(|(t, p)| (t.clone(), p.clone())).collect();
    if got != oracle || oracle.len() != 4 || oracle.values().any(|p| *p != rat(1, 4)) {
        failures.push("lifted g does not give four outcomes at 1/4".into());
    }
    if !lifted.total().is_one() {
        failures.push("lifted g does not have mass 1".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SEED);
    let mut distributive = 0;
    for i in 0..DISTRIBUTIVITY_INSTANCES {
        let args = vec![random_dist(&mut rng), random_dist(&mut rng)];
        let position = rng.gen_range(0..2);
        let k = rng.gen_range(2..=3);
        let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
        let total: i64 = weights.iter().sum();
        let parts: Vec<(Rational, DistTerm)> =
            weights.iter().map(|w| (rat(*w, total), random_dist(&mut rng))).collect();
        let mass_ok = eval_dist(&DistTerm::lift("g", args.clone()), &sig).unwrap().total().is_one();
        match distributivity_check(&sig, "g", position, &args, &parts) {
            Ok(true) if mass_ok => distributive += 1,
            Ok(_) => failures.push(format!("instance {i}: not distributive or mass != 1")),
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }

    let dist_arg = vec![DistTerm::dirac(stop()), half.clone()];
    let split = [
        (rat(1, 2), DistTerm::dirac(prefixed("b", DistTerm::dirac(stop())))),
        (rat(1, 2), DistTerm::dirac(prefixed("c", DistTerm::dirac(stop())))),
    ];
    if distributivity_check(&sig, "h", 1, &dist_arg, &split).unwrap() {
        failures.push("lifted h distributes in its dist-sorted position".into());
    }

    Outcome::from_failures(
        failures,
        format!("g example exact; {distributive}/{DISTRIBUTIVITY_INSTANCES} distributive; dist-sorted counterexample found"),
    )
}

fn main() -> ExitCode {
    let systems = random_systems();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("relation-lattice golden matrix", Box::new(c1_matrix)),
        ("inclusion properties", Box::new(|| c2_inclusions(&systems))),
        ("naive oracle equivalence", Box::new(|| c3_oracle(&systems))),
        ("format-checker golden suite", Box::new(c4_formats)),
        ("congruence-violation reproduction", Box::new(c5_probe)),
        ("logic characterization spot checks", Box::new(c6_logic)),
        ("3-valued semantics", Box::new(c7_stable_model)),
        ("semantics unit suite", Box::new(c8_semantics)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict} {name}: {}", i + 1, outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
