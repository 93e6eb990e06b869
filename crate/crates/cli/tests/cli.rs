use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use htn_tutor::content::{ProblemSpec, FRACTIONS};
use htn_tutor_service::{CreateRequest, FileStore, ServiceConfig, Tutor};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_htn-tutor"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn core_content(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/content")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["trace", "fractions"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn validate_shipped_domains() {
    for f in ["fractions.htn", "logarithms.htn"] {
        let o = run(&["validate", &core_content(f)]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        assert!(stdout(&o).contains("0 errors"));
    }
}

#[test]
fn validate_reports_problems() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, src: &str| {
        let p = dir.path().join(name);
        fs::write(&p, src).unwrap();
        p.to_string_lossy().into_owned()
    };
    let unachievable = write("a.htn", "domain d root r()\nmethod r() { subtasks { missing() } }\n");
    let o = run(&["validate", &unachievable]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("1 errors"), "{}", stdout(&o));

    let warning_only = write(
        "w.htn",
        "domain d skill s \"S\" root r()\noperator r() { action f = 1 }\noperator q() { action g = 2 }\n",
    );
    let o = run(&["validate", &warning_only]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("warning"));

    let syntax = write("s.htn", "domain d\nroot r(\n");
    let o = run(&["validate", &syntax]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("s.htn:"), "{}", stdout(&o));

    assert_eq!(code(&run(&["validate", "/no/such/file.htn"])), 1);
}

#[test]
fn worked_solution() {
    let o = run(&["trace", "fractions", "1/2+1/4"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("Add: 1/2 + 1/4\n"));
    assert!(text.contains("1. lcdField = 4: correct"));
    assert!(text.contains("answerField = 3/4: complete"));
    assert!(text.ends_with("complete\n"));
    // a domain file works in place of the name
    let o = run(&["trace", &core_content("fractions.htn"), "1/2+1/4"]);
    assert_eq!(stdout(&o), text);
}

#[test]
fn text_transcripts_match_golden_output() {
    for (domain, problem, name) in [
        ("fractions", "1/2+1/4", "fractions-walkthrough"),
        ("logarithms", "log2(4)+log2(8)", "logarithms-walkthrough"),
    ] {
        let transcript = golden(&format!("{name}.txt"));
        let o = run(&["trace", domain, problem, "--transcript", transcript.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o), fs::read_to_string(golden(&format!("{name}.out"))).unwrap());
    }
}

#[test]
fn diverging_transcripts_fail() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.txt");
    fs::write(&p, "lcdField = 4 => incorrect\n").unwrap();
    let o = run(&["trace", "fractions", "1/2+1/4", "--transcript", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("traced correct"));
    assert_eq!(code(&run(&["trace", "fractions", "1/1+1/2"])), 1);
    assert_eq!(code(&run(&["trace", "algebra", "1/2+1/4"])), 1);
}

#[test]
fn service_logs_replay_with_the_same_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let tutor = Tutor::open(ServiceConfig::default(), Arc::new(FileStore::open(dir.path()).unwrap())).unwrap();
    let req = CreateRequest {
        student: "gil".into(),
        domain: FRACTIONS.into(),
        spec: Some(ProblemSpec::parse(FRACTIONS, "2/3+1/6").unwrap()),
        policy: Some("static-answer".into()),
    };
    let id = tutor.create_session(req).unwrap().id;
    let mut live = Vec::new();
    let mut submit = |field: &str, value: &str| {
        let turn = tutor.get_session(&id).unwrap().turn;
        let (feedback, _) = tutor.submit_action(&id, &field.into(), value, turn).unwrap();
        live.push(serde_json::to_value(feedback.outcome).unwrap().as_str().unwrap().to_owned());
    };
    submit("answerField", "3/9");
    let turn = tutor.get_session(&id).unwrap().turn;
    tutor.expand_scaffold(&id, &"answerField".into(), turn).unwrap();
    tutor.request_hint(&id).unwrap();
    let layout = tutor.layout(&id).unwrap();
    let entries: Vec<(String, String)> = layout
        .fields
        .iter()
        .map(|f| (f.id.to_string(), f.expected.to_string()))
        .collect();
    submit(&entries[0].0, "7");
    for (f, v) in &entries {
        submit(f, v);
    }
    drop(tutor);

    let log = FileStore::open(dir.path()).unwrap().session_path(&id);
    let o = run(&["trace", "fractions", "2/3+1/6", "--transcript", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let replayed: Vec<String> = stdout(&o)
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .filter_map(|l| l.split_once(": ").map(|(_, rest)| rest))
        .map(|rest| rest.split(' ').next().unwrap().to_owned())
        .collect();
    assert_eq!(replayed, live);
    assert_eq!(live.first().map(String::as_str), Some("incorrect"));
    assert_eq!(live.last().map(String::as_str), Some("complete"));

    let o = run(&["trace", "fractions", "1/2+1/4", "--transcript", log.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

fn sim_config(dir: &Path, students: usize, policies: &str) -> PathBuf {
    let p = dir.join(format!("sim-{students}.toml"));
    fs::write(
        &p,
        format!(
            "domain = \"fractions\"\npolicies = {policies}\nstudents = {students}\nproblems = 4\nseed = 7\n"
        ),
    )
    .unwrap();
    p
}

#[test]
fn simulation_csv_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = sim_config(dir.path(), 100, "[\"static-full\", \"adaptive\"]");
    let a = run(&["simulate", config.to_str().unwrap()]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let out = dir.path().join("b.csv");
    let b = run(&["simulate", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&b), 0);
    assert_eq!(a.stdout, fs::read(&out).unwrap());

    let mut reader = csv::Reader::from_reader(a.stdout.as_slice());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), htn_tutor_cli::sim::CSV_HEADER);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let skills = htn_tutor::content::builtin_domain(FRACTIONS).unwrap().skills.len();
    assert_eq!(rows.len(), 2 * skills);
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r[0].to_owned(), r[1].to_owned())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(keys, sorted);
    assert!(rows.iter().all(|r| &r[2] == "100"));
    assert!(String::from_utf8_lossy(&a.stderr).contains("entries/problem"));
}

#[test]
fn simulation_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = sim_config(dir.path(), 0, "[\"adaptive\"]");
    let o = run(&["simulate", empty.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), format!("{}\n", htn_tutor_cli::sim::CSV_HEADER.join(",")));

    let unknown = sim_config(dir.path(), 3, "[\"mystery\"]");
    let o = run(&["simulate", unknown.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown policy mystery"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "domain = 3").unwrap();
    assert_eq!(code(&run(&["simulate", bad.to_str().unwrap()])), 1);
}
