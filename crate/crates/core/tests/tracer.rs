use std::collections::BTreeSet;
use std::sync::Arc;

use htn_tutor::content::{builtin_domain, builtin_domains, generate_problem, ProblemSpec, FRACTIONS, LOGARITHMS};
use htn_tutor::domain::parse_domain;
use htn_tutor::tracer::{
    enumerate_plans, init_trace, init_trace_collapsed, PlanSet, TraceError, TraceResult, TraceState,
    TraceStatus,
};
use htn_tutor::{Domain, Sym, Value};
use num_rational::Ratio;

fn fraction_trace(text: &str) -> TraceState {
    let d = Arc::new(builtin_domain(FRACTIONS).unwrap());
    let p = generate_problem(&ProblemSpec::parse(FRACTIONS, text).unwrap()).unwrap();
    init_trace(d, p.root, p.facts).unwrap()
}

fn act(t: &mut TraceState, field: &str, v: Value) -> TraceResult {
    t.apply_action(&Sym::new(field), &v).unwrap()
}

#[test]
fn fraction_start_expects_lcd() {
    let mut t = fraction_trace("1/2+1/4");
    let exp = t.expected_actions().unwrap();
    assert_eq!(exp.len(), 1);
    assert_eq!(exp[0].field.as_str(), "lcdField");
    assert_eq!(exp[0].value, Value::Int(4));
    let hint = t.next_hint().unwrap();
    let names: Vec<&str> = hint.strategy.iter().map(Sym::as_str).collect();
    assert_eq!(names, ["addFractions-diff-den", "makeSameDenominators"]);
}

#[test]
fn fraction_walkthrough() {
    let mut t = fraction_trace("1/2+1/4");
    // oracle: lcd by search, numerators scaled by lcd/den, sum reduced
    let ((n1, d1), (n2, d2)) = ((1, 2), (1, 4));
    let lcd = (1..).find(|m| m % d1 == 0 && m % d2 == 0).unwrap();
    let (c1, c2) = (n1 * lcd / d1, n2 * lcd / d2);
    let sum = Ratio::new(c1 + c2, lcd);
    assert_eq!(sum, Ratio::new(1, 2) + Ratio::new(1, 4));
    let steps = [
        ("lcdField", Value::Int(lcd)),
        ("convNumLeft", Value::Int(c1)),
        ("convNumRight", Value::Int(c2)),
        ("sumNumField", Value::Int(c1 + c2)),
    ];
    for (f, v) in steps {
        let r = act(&mut t, f, v);
        assert!(matches!(r, TraceResult::Correct { .. }), "{f}: {r:?}");
        assert_eq!(t.status(), TraceStatus::InProgress);
    }
    let answer = Value::rational(*sum.numer(), *sum.denom()).unwrap();
    let r = act(&mut t, "answerField", answer);
    assert!(matches!(r, TraceResult::Complete { .. }), "{r:?}");
    assert!(t.is_complete());
    assert_eq!(
        t.apply_action(&Sym::new("answerField"), &Value::Int(1)),
        Err(TraceError::AlreadyComplete)
    );
}

#[test]
fn conversions_may_come_in_either_order() {
    let mut t = fraction_trace("1/2+1/4");
    act(&mut t, "lcdField", Value::Int(4));
    let fields: BTreeSet<String> = t
        .expected_actions()
        .unwrap()
        .iter()
        .map(|a| a.field.to_string())
        .collect();
    assert_eq!(fields, BTreeSet::from(["convNumLeft".into(), "convNumRight".into()]));
    assert!(act(&mut t, "convNumRight", Value::Int(1)).is_accepted());
    assert!(act(&mut t, "convNumLeft", Value::Int(2)).is_accepted());
}

#[test]
fn collapsed_fraction_accepts_single_answer() {
    let d = Arc::new(builtin_domain(FRACTIONS).unwrap());
    let p = generate_problem(&ProblemSpec::parse(FRACTIONS, "1/2+1/4").unwrap()).unwrap();
    let collapsed = BTreeSet::from([p.root.clone()]);
    let mut t = init_trace_collapsed(d, p.root, p.facts, collapsed).unwrap();
    let expected = Ratio::new(1i64, 2) + Ratio::new(1, 4);
    let exp = t.expected_actions().unwrap();
    assert_eq!(exp.len(), 1);
    assert_eq!(exp[0].field.as_str(), "answerField");
    assert_eq!(exp[0].value, Value::from_ratio(expected));
    assert!(!act(&mut t, "lcdField", Value::Int(4)).is_accepted());
    let r = act(&mut t, "answerField", Value::parse_input("6/8"));
    assert!(matches!(r, TraceResult::Complete { .. }), "{r:?}");
    // a macro credits every inner skill
    let skills: BTreeSet<&str> = r.skills().iter().map(Sym::as_str).collect();
    assert!(skills.contains("findLCD") && skills.contains("writeFraction"), "{skills:?}");
}

#[test]
fn same_denominator_plans_skip_the_lcd() {
    let d = builtin_domain(FRACTIONS).unwrap();
    let p = generate_problem(&ProblemSpec::parse(FRACTIONS, "1/4+2/4").unwrap()).unwrap();
    let plans = enumerate_plans(&d, &p.root, &p.facts, 100).unwrap();
    assert!(!plans.plans.is_empty());
    for plan in &plans.plans {
        assert!(plan.iter().all(|(f, _)| f.as_str() != "lcdField"), "{plan:?}");
        assert_eq!(plan.last().map(|a| &a.1), Some(&Value::rational(3, 4).unwrap()));
    }
}

#[test]
fn incorrect_actions_leave_state_identical() {
    for text in ["1/2+1/4", "2/3+5/6", "1/4+2/4"] {
        let mut t = fraction_trace(text);
        let lcd = t.expected_actions().unwrap()[0].value.clone();
        act(&mut t, "lcdField", lcd);
        let before = serde_json::to_string(&t).unwrap();
        let snapshot = t.clone();
        for (f, v) in [("lcdField", Value::Int(99)), ("answerField", Value::Int(0)), ("nope", Value::text("x"))] {
            let r = act(&mut t, f, v);
            assert!(matches!(r, TraceResult::Incorrect { .. }), "{r:?}");
            assert_eq!(serde_json::to_string(&t).unwrap(), before);
            assert_eq!(t, snapshot);
        }
    }
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

#[test]
fn choosing_one_strategy_prunes_the_other() {
    let d = Arc::new(parse_domain(TWO_STRATEGIES).unwrap());
    let mut t = init_trace(d, htn_tutor::GroundTask::new("solve", vec![]), vec![]).unwrap();
    assert_eq!(t.expected_actions().unwrap().len(), 2);
    assert!(act(&mut t, "z", Value::Int(3)).is_accepted());
    assert_eq!(t.frontier().len(), 1);
    assert!(matches!(act(&mut t, "x", Value::Int(1)), TraceResult::Incorrect { .. }));
    let r = act(&mut t, "y", Value::Int(2));
    assert!(matches!(r, TraceResult::Complete { .. }));
    assert!(r.skills().iter().any(|s| s.as_str() == "b"));
    assert!(!r.skills().iter().any(|s| s.as_str() == "a"));
}

#[test]
fn enumerate_plans_on_small_networks() {
    let src = r#"
        domain toy root r()
        method r() unordered { subtasks { p(); q() } }
        operator p() { action fp = 1 }
        operator q() { action fq = 2 }
    "#;
    let d = parse_domain(src).unwrap();
    let root = htn_tutor::GroundTask::new("r", vec![]);
    let all = enumerate_plans(&d, &root, &[], 10).unwrap();
    assert_eq!(all.plans.len(), 2);
    assert!(!all.truncated);
    let one = enumerate_plans(&d, &root, &[], 1).unwrap();
    assert_eq!(one.plans.len(), 1);
    assert!(one.truncated);
}

/// Walks every accepted path, checking each candidate action against the
/// plan list. Returns the number of checks made.
fn check_against_plans(t: &TraceState, plans: &PlanSet, prefix: &mut Vec<(Sym, Value)>) -> usize {
    let n = prefix.len();
    let mut candidates: BTreeSet<(Sym, Value)> = BTreeSet::new();
    for plan in &plans.plans {
        for (i, a) in plan.iter().enumerate() {
            if i >= n {
                candidates.insert(a.clone());
                candidates.insert((a.0.clone(), Value::text("wrong")));
            }
        }
    }
    let mut checks = 0;
    for cand in candidates {
        prefix.push(cand.clone());
        let is_prefix = plans.plans.iter().any(|p| p.starts_with(prefix));
        let is_plan = plans.plans.iter().any(|p| p == prefix);
        let mut next = t.clone();
        let r = next.apply_action(&cand.0, &cand.1).unwrap();
        assert_eq!(r.is_accepted(), is_prefix, "{prefix:?}: {r:?}");
        assert_eq!(matches!(r, TraceResult::Complete { .. }), is_plan, "{prefix:?}: {r:?}");
        checks += 1;
        if is_prefix && !is_plan {
            checks += check_against_plans(&next, plans, prefix);
        }
        prefix.pop();
    }
    checks
}

#[test]
fn acceptance_matches_plan_prefixes() {
    for domain in builtin_domains() {
        let d = Arc::new(domain);
        for seed in 0..50 {
            let p = generate_problem(&ProblemSpec::random(d.name.as_str(), seed)).unwrap();
            let plans = enumerate_plans(&d, &p.root, &p.facts, 1000).unwrap();
            assert!(!plans.truncated);
            let t = init_trace(d.clone(), p.root.clone(), p.facts.clone()).unwrap();
            let checks = check_against_plans(&t, &plans, &mut Vec::new());
            assert!(checks > 0);
        }
    }
}

#[test]
fn expected_actions_are_the_plan_extensions() {
    let d = Arc::new(builtin_domain(LOGARITHMS).unwrap());
    let p = generate_problem(&ProblemSpec::parse(LOGARITHMS, "log2(4)+log2(8)").unwrap()).unwrap();
    let plans = enumerate_plans(&d, &p.root, &p.facts, 100).unwrap();
    let mut t = init_trace(d, p.root, p.facts).unwrap();
    let firsts: BTreeSet<(Sym, Value)> = plans.plans.iter().map(|p| p[0].clone()).collect();
    let expected: BTreeSet<(Sym, Value)> = t
        .expected_actions()
        .unwrap()
        .into_iter()
        .map(|a| (a.field, a.value))
        .collect();
    assert_eq!(expected, firsts);
}

#[test]
fn tracing_fractions_never_evaluates_log_preconditions() {
    let domains: Vec<Arc<Domain>> = builtin_domains().into_iter().map(Arc::new).collect();
    let fractions = domains.iter().find(|d| d.name.as_str() == FRACTIONS).unwrap().clone();
    let p = generate_problem(&ProblemSpec::parse(FRACTIONS, "1/2+1/3").unwrap()).unwrap();
    let mut t = init_trace(fractions, p.root, p.facts).unwrap();
    while !t.is_complete() {
        let a = t.expected_actions().unwrap().remove(0);
        t.apply_action(&a.field, &a.value).unwrap();
    }
    assert!(t.stats().total() > 0);
    assert!(!t.stats().records_of(FRACTIONS).is_empty());
    assert!(t.stats().records_of(LOGARITHMS).is_empty());
    assert_eq!(t.stats().domains(), BTreeSet::from([FRACTIONS]));
}
