//! Runs each acceptance criterion and prints one PASS/FAIL line per
//! criterion. Exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use htn_tutor::content::{builtin_domain, builtin_domains, generate_problem, Problem, ProblemSpec, FRACTIONS, LOGARITHMS};
use htn_tutor::domain::{parse_domain, serialize_domain};
use htn_tutor::knowledge::{bkt_update, Band, BandThresholds, SkillParams, SkillState, StudentModel};
use htn_tutor::scaffold::{compute_layout, schedule_depth, ProblemLayout, ScaffoldPolicy};
use htn_tutor::testing::random_domain;
use htn_tutor::tracer::{enumerate_plans, init_trace, init_trace_collapsed, PlanSet, TraceResult, TraceState};
use htn_tutor::{Domain, GroundTask, Rational, Sym, Value};
use htn_tutor_service::events::EventBody;
use htn_tutor_service::session::{Session, SessionStatus};
use htn_tutor_service::{CreateRequest, FileStore, MemoryStore, ServiceConfig, Tutor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn domains() -> Vec<Arc<Domain>> {
    builtin_domains().into_iter().map(Arc::new).collect()
}

fn problem(domain: &str, text: &str) -> Problem {
    generate_problem(&ProblemSpec::parse(domain, text).unwrap()).unwrap()
}

fn drive(t: &mut TraceState, seq: &[(Sym, Value)]) -> Result<TraceResult, String> {
    let mut last = Err("empty sequence".to_owned());
    for (f, v) in seq {
        let r = t.apply_action(f, v).map_err(|e| e.to_string())?;
        ensure!(r.is_accepted(), "{f}={v} rejected");
        last = Ok(r);
    }
    last
}

fn prefix_walk(t: &TraceState, plans: &PlanSet, prefix: &mut Vec<(Sym, Value)>, checks: &mut usize) -> Result<(), String> {
    let mut candidates = BTreeSet::new();
    for plan in &plans.plans {
        for a in plan.iter().skip(prefix.len()) {
            candidates.insert(a.clone());
            candidates.insert((a.0.clone(), Value::text("wrong")));
        }
    }
    for cand in candidates {
        prefix.push(cand.clone());
        let is_prefix = plans.plans.iter().any(|p| p.starts_with(prefix));
        let is_plan = plans.plans.iter().any(|p| p == prefix);
        let mut next = t.clone();
        let r = next.apply_action(&cand.0, &cand.1).map_err(|e| e.to_string())?;
        *checks += 1;
        ensure!(r.is_accepted() == is_prefix, "{prefix:?}: accepted={} but prefix={is_prefix}", r.is_accepted());
        ensure!(matches!(r, TraceResult::Complete { .. }) == is_plan, "{prefix:?}: complete mismatch");
        if is_prefix && !is_plan {
            prefix_walk(&next, plans, prefix, checks)?;
        }
        prefix.pop();
    }
    Ok(())
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut checks = 0;
    let mut problems = 0;
    for d in domains() {
        for seed in 0..50 {
            let p = generate_problem(&ProblemSpec::random(d.name.as_str(), seed)).unwrap();
            let plans = enumerate_plans(&d, &p.root, &p.facts, 10_000).map_err(|e| e.to_string())?;
            ensure!(!plans.truncated && !plans.plans.is_empty(), "{} seed {seed}: no complete plan set", d.name);
            let t = init_trace(d.clone(), p.root, p.facts).map_err(|e| e.to_string())?;
            prefix_walk(&t, &plans, &mut Vec::new(), &mut checks)?;
            problems += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1}s");
    Ok(format!("{problems} problems, {checks} actions agree, {secs:.2}s"))
}

const TWO_STRATEGIES: &str = r#"
    domain toy
    skill a "Strategy A"
    skill b "Strategy B"
    root solve()
    method solve() as viaA { subtasks { first(); finish() } skill a }
    method solve() as viaB { subtasks { other(); finish() } skill b }
    operator first() { action x = 1 }
    operator other() { action z = 3 }
    operator finish() { action y = 2 }
"#;

fn semantics() -> Check {
    let d = Arc::new(builtin_domain(FRACTIONS).unwrap());
    let mut wrong = 0;
    for seed in 0..50 {
        let p = generate_problem(&ProblemSpec::random(FRACTIONS, seed)).unwrap();
        let mut t = init_trace(d.clone(), p.root, p.facts).unwrap();
        while !t.is_complete() {
            let before = serde_json::to_string(&t).unwrap();
            let exp = t.expected_actions().unwrap();
            for f in exp.iter().map(|a| a.field.clone()).chain([Sym::new("noSuchField")]) {
                let r = t.apply_action(&f, &Value::Int(-99)).unwrap();
                ensure!(matches!(r, TraceResult::Incorrect { .. }), "seed {seed}: -99 accepted for {f}");
                ensure!(serde_json::to_string(&t).unwrap() == before, "seed {seed}: state changed on Incorrect");
                wrong += 1;
            }
            let r = t.apply_action(&exp[0].field, &exp[0].value).unwrap();
            ensure!(
                matches!(r, TraceResult::Complete { .. }) == t.is_complete(),
                "seed {seed}: Complete reported without a finished plan"
            );
        }
    }
    let d = Arc::new(parse_domain(TWO_STRATEGIES).unwrap());
    let mut t = init_trace(d, GroundTask::new("solve", vec![]), vec![]).unwrap();
    ensure!(t.frontier().len() == 1 && t.expected_actions().unwrap().len() == 2, "toy start");
    ensure!(t.apply_action(&Sym::new("z"), &Value::Int(3)).unwrap().is_accepted(), "strategy B rejected");
    let a_only = t.apply_action(&Sym::new("x"), &Value::Int(1)).unwrap();
    ensure!(matches!(a_only, TraceResult::Incorrect { .. }), "strategy A still live after B");
    let done = t.apply_action(&Sym::new("y"), &Value::Int(2)).unwrap();
    ensure!(matches!(done, TraceResult::Complete { .. }), "toy did not complete");
    Ok(format!("{wrong} incorrect entries left state unchanged; strategy pruning holds"))
}

fn fraction_walkthrough() -> Check {
    let d = Arc::new(builtin_domain(FRACTIONS).unwrap());
    let p = problem(FRACTIONS, "1/2+1/4");
    let lcd = (1..).find(|m| m % 2 == 0 && m % 4 == 0).unwrap();
    let sum = Rational::new(lcd / 2 + lcd / 4, lcd);
    ensure!(sum == Rational::new(1, 2) + Rational::new(1, 4), "oracle disagrees with itself");
    let full = [
        ("lcdField", Value::Int(lcd)),
        ("convNumLeft", Value::Int(lcd / 2)),
        ("convNumRight", Value::Int(lcd / 4)),
        ("sumNumField", Value::Int(lcd / 2 + lcd / 4)),
        ("answerField", Value::from_ratio(sum)),
    ]
    .map(|(f, v)| (Sym::new(f), v));
    let mut t = init_trace(d.clone(), p.root.clone(), p.facts.clone()).unwrap();
    let r = drive(&mut t, &full)?;
    ensure!(matches!(r, TraceResult::Complete { .. }), "full sequence ended with {r:?}");

    let collapsed = BTreeSet::from([p.root.clone()]);
    let mut t = init_trace_collapsed(d, p.root, p.facts, collapsed).unwrap();
    let r = t.apply_action(&Sym::new("answerField"), &Value::from_ratio(sum)).unwrap();
    ensure!(matches!(r, TraceResult::Complete { .. }), "collapsed answer gave {r:?}");
    Ok(format!("5 steps to {sum}; collapsed single entry {sum} completes"))
}

fn model_at(d: &Domain, p: f64) -> StudentModel {
    let mut m = StudentModel::new("s");
    for skill in d.skills.keys() {
        m.states.insert(skill.clone(), SkillState { p_mastery: p, opportunities: 0 });
    }
    m
}

fn adaptive_layout(d: &Arc<Domain>, p: &Problem, m: &StudentModel) -> (TraceState, ProblemLayout) {
    let mut t = init_trace(d.clone(), p.root.clone(), p.facts.clone()).unwrap();
    let policy = ScaffoldPolicy::Adaptive { thresholds: BandThresholds::default() };
    let l = compute_layout(&mut t, m, &policy, &BandThresholds::default()).unwrap();
    (t, l)
}

fn int_log(base: i64, n: i64) -> i64 {
    let (mut k, mut acc) = (0, 1);
    while acc < n {
        acc *= base;
        k += 1;
    }
    k
}

fn log_walkthrough() -> Check {
    let d = Arc::new(builtin_domain(LOGARITHMS).unwrap());
    let p = problem(LOGARITHMS, "log2(4)+log2(8)");
    let answer = Value::Int(int_log(2, 4 * 8));
    let mut counts = Vec::new();
    for (pm, band, want) in [(0.2, Band::Low, 6), (0.6, Band::Medium, 3), (0.9, Band::High, 1)] {
        let (mut t, l) = adaptive_layout(&d, &p, &model_at(&d, pm));
        ensure!(l.fields.len() == want, "{band:?}: {} fields, want {want}", l.fields.len());
        ensure!(l.fields.iter().all(|f| f.band == Some(band)), "{band:?}: band mismatch");
        ensure!(l.fields.last().unwrap().expected == answer, "{band:?}: final answer is not {answer}");
        let r = drive(&mut t, &l.expected_sequence())?;
        ensure!(matches!(r, TraceResult::Complete { .. }), "{band:?}: sequence ended with {r:?}");
        counts.push(l.fields.len().to_string());
    }
    Ok(format!("low/medium/high fields {}; answer {answer}", counts.join("/")))
}

fn reference_bkt(l: f64, t: f64, g: f64, s: f64, correct: bool) -> f64 {
    let (if_known, if_unknown) = if correct { (1.0 - s, g) } else { (s, 1.0 - g) };
    let posterior = 1.0 / (1.0 + ((1.0 - l) / l) * (if_unknown / if_known));
    1.0 - (1.0 - posterior) * (1.0 - t)
}

fn random_params(rng: &mut ChaCha8Rng) -> SkillParams {
    loop {
        let p = SkillParams::new(
            rng.gen_range(0.01..0.99),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.01..0.5),
            rng.gen_range(0.01..0.5),
        );
        if let Ok(p) = p {
            return p;
        }
    }
}

fn bkt_closed_form() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb47);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p = random_params(&mut rng);
        let l = rng.gen_range(0.001..0.999);
        let correct = rng.gen_bool(0.5);
        let got = bkt_update(&SkillState { p_mastery: l, opportunities: 0 }, &p, correct).p_mastery;
        let want = reference_bkt(l, p.p_transit, p.p_guess, p.p_slip, correct);
        worst = worst.max((got - want).abs());
    }
    ensure!(worst < 1e-9, "max error {worst:e}");
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let mut s = SkillState::initial(&p);
        for _ in 0..30 {
            let next = bkt_update(&s, &p, true);
            ensure!(next.p_mastery > s.p_mastery || s.p_mastery > 1.0 - 1e-9, "correct answer lowered mastery");
            s = next;
        }
    }
    Ok(format!("10000 cases, max error {worst:.1e}; 1000 all-correct runs increase"))
}

fn adaptive_monotonicity() -> Check {
    let domains = domains();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut fewer = 0;
    for trial in 0..1000u64 {
        let d = &domains[trial as usize % domains.len()];
        let p = generate_problem(&ProblemSpec::random(d.name.as_str(), trial)).unwrap();
        let mut lower = model_at(d, 0.0);
        for s in lower.states.values_mut() {
            s.p_mastery = rng.gen_range(0.0..1.0);
        }
        let mut higher = lower.clone();
        for s in higher.states.values_mut() {
            s.p_mastery += rng.gen_range(0.0..=1.0 - s.p_mastery);
        }
        let a = adaptive_layout(d, &p, &lower).1.fields.len();
        let b = adaptive_layout(d, &p, &higher).1.fields.len();
        ensure!(b <= a, "trial {trial}: {b} fields after raising mastery, {a} before");
        fewer += usize::from(b < a);
    }
    Ok(format!("1000 trials, {fewer} strictly fewer fields"))
}

fn fading_schedules() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let d_min = rng.gen_range(0..4);
        let d_max = d_min + rng.gen_range(0..5);
        let u = ScaffoldPolicy::UShaped {
            d_max,
            d_min,
            midpoint: rng.gen_range(0.0..30.0),
            width: rng.gen_range(0.0..20.0),
        };
        let depths: Vec<usize> = (0..60).map(|n| schedule_depth(&u, n).unwrap()).collect();
        let turn = depths.windows(2).position(|w| w[1] > w[0]).unwrap_or(depths.len());
        ensure!(
            depths[..turn].windows(2).all(|w| w[1] <= w[0]) && depths[turn..].windows(2).all(|w| w[1] >= w[0]),
            "{u:?}: {depths:?}"
        );
        let s = ScaffoldPolicy::Sigmoid {
            d_min,
            d_max,
            midpoint: rng.gen_range(-10.0..30.0),
            steepness: rng.gen_range(0.0..5.0),
        };
        let depths: Vec<usize> = (0..60).map(|n| schedule_depth(&s, n).unwrap()).collect();
        ensure!(depths.windows(2).all(|w| w[1] <= w[0]), "{s:?}: {depths:?}");
    }
    Ok("1000 random u-shaped and sigmoid schedules".into())
}

fn fewer_evaluations() -> Check {
    let all = domains();
    let fractions = all.iter().find(|d| d.name.as_str() == FRACTIONS).unwrap().clone();
    ensure!(all.iter().any(|d| d.name.as_str() == LOGARITHMS), "log domain not loaded");
    let mut total = 0;
    for seed in 0..20 {
        let p = generate_problem(&ProblemSpec::random(FRACTIONS, seed)).unwrap();
        let mut t = init_trace(fractions.clone(), p.root, p.facts).unwrap();
        while !t.is_complete() {
            let a = t.expected_actions().unwrap().remove(0);
            t.apply_action(&a.field, &a.value).unwrap();
        }
        let log = t.stats().records_of(LOGARITHMS).len();
        ensure!(log == 0, "seed {seed}: {log} log-domain evaluations");
        total += t.stats().total();
    }
    Ok(format!("20 fraction problems, {total} fraction evaluations, 0 log-domain"))
}

/// Correct entry, wrong entry, hint or expansion, chosen at random.
fn random_command(tutor: &Tutor, id: &str, rng: &mut ChaCha8Rng) -> bool {
    let view = tutor.get_session(id).unwrap();
    if view.status == SessionStatus::Complete {
        return false;
    }
    let layout = tutor.layout(id).unwrap();
    let open: Vec<_> = layout.fields.iter().filter(|f| f.entered.is_none()).collect();
    match rng.gen_range(0..10) {
        0..=4 => {
            tutor.submit_action(id, &open[0].id, &open[0].expected.to_string(), view.turn).unwrap();
        }
        5 | 6 => {
            let f = open.choose(rng).unwrap();
            tutor.submit_action(id, &f.id, "999999", view.turn).unwrap();
        }
        7 => {
            tutor.request_hint(id).unwrap();
        }
        _ => {
            if let Some(f) = layout.fields.iter().find(|f| f.expandable) {
                tutor.expand_scaffold(id, &f.id, view.turn).unwrap();
            }
        }
    }
    true
}

fn request(student: &str, domain: &str, seed: u64, policy: &str) -> CreateRequest {
    CreateRequest {
        student: student.into(),
        domain: domain.into(),
        spec: Some(ProblemSpec::random(domain, seed)),
        policy: Some(policy.into()),
    }
}

fn event_sourced_replay() -> Check {
    let domains: BTreeMap<String, Arc<Domain>> = domains().into_iter().map(|d| (d.name.to_string(), d)).collect();
    let tutor = Tutor::open(ServiceConfig::default(), Arc::new(MemoryStore::new())).unwrap();
    let policies: Vec<String> = tutor.policies();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut events = 0;
    for n in 0..100u64 {
        let domain = if n % 2 == 0 { FRACTIONS } else { LOGARITHMS };
        let id = format!("r{n}");
        let policy = &policies[n as usize % policies.len()];
        tutor
            .create_session_with_id(id.clone(), request(&format!("st{}", n % 9), domain, n, policy))
            .unwrap();
        let mut steps = 0;
        while random_command(&tutor, &id, &mut rng) && steps < 80 {
            steps += 1;
        }
        let log = tutor.store().load_session(&id).unwrap();
        events += log.len();
        let EventBody::Created { spec, .. } = &log[0].body else {
            return Err(format!("{id}: log does not start with created"));
        };
        let replayed = Session::replay(&log, domains[&spec.domain].clone()).map_err(|e| e.to_string())?;
        // canonical JSON (sorted keys) on both sides
        let a = serde_json::to_value(&replayed).unwrap().to_string();
        let b = tutor.session_state(&id).unwrap().to_string();
        ensure!(a == b, "{id}: replayed state differs");
    }

    let dir = tempfile::tempdir().unwrap();
    let open = || Tutor::open(ServiceConfig::default(), Arc::new(FileStore::open(dir.path()).unwrap())).unwrap();
    let live = open();
    live.create_session_with_id("mid".into(), request("rex", FRACTIONS, 3, "static-full"))
        .unwrap();
    let mut accepted = 0;
    for f in live.layout("mid").unwrap().fields.iter().take(3) {
        let turn = live.get_session("mid").unwrap().turn;
        live.submit_action("mid", &f.id, &f.expected.to_string(), turn).unwrap();
        accepted += 1;
    }
    let before = live.session_state("mid").unwrap();
    let skills = live.student_skills("rex").unwrap();
    drop(live);
    let restarted = open();
    ensure!(restarted.session_state("mid").unwrap() == before, "session state changed across restart");
    ensure!(restarted.student_skills("rex").unwrap() == skills, "student model changed across restart");
    let entered = restarted.layout("mid").unwrap().fields.iter().filter(|f| f.entered.is_some()).count();
    ensure!(entered == accepted, "{entered} of {accepted} accepted entries survived");
    Ok(format!("100 sessions ({events} events) replay identically; restart kept {accepted}/{accepted} actions"))
}

fn domain_round_trip() -> Check {
    for seed in 0..500u64 {
        let d = random_domain(seed);
        let text = serialize_domain(&d);
        let back = parse_domain(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(back == d, "seed {seed}: parsed domain differs");
        ensure!(serialize_domain(&back) == text, "seed {seed}: text differs");
    }
    Ok("500 generated domains".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("tracing semantics", semantics),
        ("fraction walkthrough", fraction_walkthrough),
        ("log walkthrough", log_walkthrough),
        ("knowledge tracing closed form", bkt_closed_form),
        ("adaptive monotonicity", adaptive_monotonicity),
        ("fading schedules", fading_schedules),
        ("fewer evaluations", fewer_evaluations),
        ("event-sourced replay", event_sourced_replay),
        ("domain file round trip", domain_round_trip),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
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
