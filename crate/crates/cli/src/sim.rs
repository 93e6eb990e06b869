//! Fading-policy simulation with synthetic students.
//!
//! A simulated student knows each skill or not. An entry is right with
//! probability `1 - slip` when every skill it exercises is known and
//! `guess` otherwise; each attempt gives an unknown skill a chance to be
//! learned. This is a harness for comparing policies against each other,
//! not a model of human learners.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;

use htn_tutor::content::{builtin_domain, generate_problem, ProblemSpec};
use htn_tutor::knowledge::SkillParams;
use htn_tutor::scaffold::compute_layout;
use htn_tutor::tracer::{init_trace, TraceResult};
use htn_tutor::{BandThresholds, Domain, ScaffoldPolicy, StudentModel, Sym, Value};
use htn_tutor_service::config::default_policies;
use htn_tutor_service::session::observations;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("parsing simulation spec: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid simulation spec: {0}")]
    Malformed(String),
    #[error("unknown policy {0}")]
    UnknownPolicy(String),
    #[error("unknown domain {0}")]
    UnknownDomain(String),
    #[error("simulation failed: {0}")]
    Run(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub domain: String,
    /// Policy names: the service defaults plus anything in `custom_policies`.
    pub policies: Vec<String>,
    #[serde(default)]
    pub custom_policies: BTreeMap<String, ScaffoldPolicy>,
    pub students: usize,
    pub problems: usize,
    pub seed: u64,
    /// Tutor belief at which a skill counts as mastered.
    #[serde(default = "default_mastery")]
    pub mastery_threshold: f64,
    /// Wrong attempts before the tutor supplies the entry.
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default)]
    pub population: Population,
    /// The tutor's knowledge-tracing parameters.
    #[serde(default)]
    pub bkt: SkillParams,
    #[serde(default)]
    pub bands: BandThresholds,
}

fn default_mastery() -> f64 {
    0.95
}

fn default_attempts() -> u32 {
    3
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Population {
    /// Chance that a student already knows a skill.
    pub initial_known: f64,
    /// Per-skill learning rates are drawn uniformly from this range.
    pub learn_rate: (f64, f64),
    pub guess: f64,
    pub slip: f64,
}

impl Default for Population {
    fn default() -> Self {
        Population {
            initial_known: 0.2,
            learn_rate: (0.05, 0.3),
            guess: 0.2,
            slip: 0.1,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<SimConfig, SimError> {
        let config: SimConfig = toml::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Malformed(m));
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        let pop = &self.population;
        for (name, x) in [
            ("population.initial_known", pop.initial_known),
            ("population.guess", pop.guess),
            ("population.slip", pop.slip),
            ("population.learn_rate", pop.learn_rate.0),
            ("population.learn_rate", pop.learn_rate.1),
            ("mastery_threshold", self.mastery_threshold),
        ] {
            if !prob(x) {
                return bad(format!("{name} must be a probability, got {x}"));
            }
        }
        if pop.learn_rate.0 > pop.learn_rate.1 {
            return bad("population.learn_rate must be [low, high]".into());
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        if self.policies.is_empty() {
            return bad("no policies".into());
        }
        for (name, p) in &self.custom_policies {
            p.validate().map_err(|e| SimError::Malformed(format!("policy {name}: {e}")))?;
        }
        Ok(())
    }

    fn resolve_policies(&self) -> Result<Vec<(String, ScaffoldPolicy)>, SimError> {
        let mut known = default_policies();
        known.extend(self.custom_policies.clone());
        self.policies
            .iter()
            .map(|name| {
                known
                    .get(name)
                    .map(|p| (name.clone(), p.clone()))
                    .ok_or_else(|| SimError::UnknownPolicy(name.clone()))
            })
            .collect()
    }
}

/// One CSV row: a policy's results on one skill, averaged over students.
#[derive(Clone, Debug, PartialEq)]
pub struct SkillRow {
    pub policy: String,
    pub skill: Sym,
    pub students: usize,
    /// Observations of the skill per student.
    pub mean_opportunities: f64,
    /// Wrong observations over all observations; `None` if never observed.
    pub error_rate: Option<f64>,
    /// Students the tutor judged to have mastered the skill.
    pub mastered: usize,
    /// Mean opportunities until the tutor's belief crossed the threshold,
    /// over students who got there.
    pub opportunities_to_mastery: Option<f64>,
    pub mean_final_p_mastery: f64,
    /// Fraction of students who actually know the skill at the end.
    pub truly_known: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    /// Fields filled per problem.
    pub entries_per_problem: f64,
    pub error_rate: Option<f64>,
    /// Entries the tutor had to supply after repeated errors.
    pub bottom_outs: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub rows: Vec<SkillRow>,
    pub summaries: Vec<PolicySummary>,
}

#[derive(Default, Clone)]
struct SkillTally {
    observations: u64,
    errors: u64,
    mastered_at: Option<u64>,
    final_p: f64,
    known: bool,
}

#[derive(Default)]
struct StudentRun {
    skills: BTreeMap<Sym, SkillTally>,
    entries: u64,
    attempts: u64,
    errors: u64,
    bottom_outs: u64,
}

/// splitmix64 over the three inputs, for independent per-run seeds.
fn mix(a: u64, b: u64, c: u64) -> u64 {
    let mut z = a;
    for x in [b, c] {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(x);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

struct Learner {
    known: BTreeMap<Sym, bool>,
    rate: BTreeMap<Sym, f64>,
}

impl Learner {
    /// The same learner for a given student index under every policy.
    fn draw(config: &SimConfig, domain: &Domain, student: usize) -> Learner {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 1, student as u64));
        let pop = &config.population;
        let mut known = BTreeMap::new();
        let mut rate = BTreeMap::new();
        for skill in domain.skills.keys() {
            known.insert(skill.clone(), rng.gen_bool(pop.initial_known));
            let (lo, hi) = pop.learn_rate;
            rate.insert(skill.clone(), if hi > lo { rng.gen_range(lo..=hi) } else { lo });
        }
        Learner { known, rate }
    }

    fn knows_all(&self, skills: &[Sym]) -> bool {
        skills.iter().all(|s| self.known.get(s).copied().unwrap_or(false))
    }

    fn practice(&mut self, skills: &[Sym], rng: &mut ChaCha8Rng) {
        for s in skills {
            let rate = self.rate.get(s).copied().unwrap_or(0.0);
            if let Some(k) = self.known.get_mut(s) {
                if !*k && rng.gen_bool(rate) {
                    *k = true;
                }
            }
        }
    }
}

fn run_student(
    config: &SimConfig,
    domain: &Arc<Domain>,
    policy: &ScaffoldPolicy,
    policy_index: usize,
    student: usize,
) -> Result<StudentRun, String> {
    let mut learner = Learner::draw(config, domain, student);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 2 + policy_index as u64, student as u64));
    let mut model = StudentModel::with_params(&format!("sim{student}"), config.bkt, BTreeMap::new());
    let mut run = StudentRun::default();
    let wrong = Value::text("?");
    let pop = &config.population;

    for i in 0..config.problems {
        let spec = ProblemSpec::random(&config.domain, mix(mix(config.seed, 0, 0), student as u64, i as u64));
        let p = generate_problem(&spec).map_err(|e| e.to_string())?;
        let mut trace = init_trace(domain.clone(), p.root, p.facts).map_err(|e| e.to_string())?;
        let layout = compute_layout(&mut trace, &model, policy, &config.bands).map_err(|e| e.to_string())?;
        for (field, value) in layout.expected_sequence() {
            let mut accepted = trace.clone();
            let result = accepted.apply_action(&field, &value).map_err(|e| e.to_string())?;
            if !result.is_accepted() {
                return Err(format!("layout entry {field}={value} was rejected"));
            }
            let exercised = result.skills().to_vec();
            run.entries += 1;
            let mut solved = false;
            for _ in 0..config.max_attempts {
                run.attempts += 1;
                let p_right = if learner.knows_all(&exercised) { 1.0 - pop.slip } else { pop.guess };
                let right = rng.gen_bool(p_right);
                let traced = if right {
                    result.clone()
                } else {
                    run.errors += 1;
                    trace.clone().apply_action(&field, &wrong).map_err(|e| e.to_string())?
                };
                for (skill, correct) in observations(&field, &traced) {
                    model.observe(&skill, correct);
                    let state = model.state(&skill);
                    let tally = run.skills.entry(skill).or_default();
                    tally.observations += 1;
                    tally.errors += u64::from(!correct);
                    if tally.mastered_at.is_none() && state.p_mastery >= config.mastery_threshold {
                        tally.mastered_at = Some(state.opportunities);
                    }
                }
                learner.practice(&exercised, &mut rng);
                if right {
                    solved = true;
                    break;
                }
            }
            if !solved {
                run.bottom_outs += 1;
            }
            trace = accepted;
            if matches!(result, TraceResult::Complete { .. }) {
                break;
            }
        }
    }
    for skill in domain.skills.keys() {
        let tally = run.skills.entry(skill.clone()).or_default();
        tally.final_p = model.p_mastery(skill);
        tally.known = learner.known[skill];
    }
    Ok(run)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn run_simulation(config: &SimConfig) -> Result<SimReport, SimError> {
    config.check()?;
    let domain = Arc::new(builtin_domain(&config.domain).ok_or_else(|| SimError::UnknownDomain(config.domain.clone()))?);
    let policies = config.resolve_policies()?;
    let jobs: Vec<(usize, usize)> = (0..policies.len())
        .flat_map(|p| (0..config.students).map(move |s| (p, s)))
        .collect();
    // collect keeps job order, so aggregation below is deterministic
    let runs: Vec<StudentRun> = jobs
        .par_iter()
        .map(|&(p, s)| run_student(config, &domain, &policies[p].1, p, s))
        .collect::<Result<_, _>>()
        .map_err(SimError::Run)?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (p, (name, _)) in policies.iter().enumerate() {
        let mine = &runs[p * config.students..(p + 1) * config.students];
        // no students, no rows
        for skill in domain.skills.keys().filter(|_| !mine.is_empty()) {
            let tallies: Vec<&SkillTally> = mine.iter().map(|r| &r.skills[skill]).collect();
            let observations: u64 = tallies.iter().map(|t| t.observations).sum();
            let errors: u64 = tallies.iter().map(|t| t.errors).sum();
            let mastered: Vec<u64> = tallies.iter().filter_map(|t| t.mastered_at).collect();
            let n = tallies.len();
            let mean = |total: f64| if n == 0 { 0.0 } else { total / n as f64 };
            rows.push(SkillRow {
                policy: name.clone(),
                skill: skill.clone(),
                students: n,
                mean_opportunities: mean(observations as f64),
                error_rate: ratio(errors, observations),
                mastered: mastered.len(),
                opportunities_to_mastery: ratio(mastered.iter().sum(), mastered.len() as u64),
                mean_final_p_mastery: mean(tallies.iter().map(|t| t.final_p).sum()),
                truly_known: mean(tallies.iter().filter(|t| t.known).count() as f64),
            });
        }
        let entries: u64 = mine.iter().map(|r| r.entries).sum();
        summaries.push(PolicySummary {
            policy: name.clone(),
            entries_per_problem: ratio(entries, (mine.len() * config.problems) as u64).unwrap_or(0.0),
            error_rate: ratio(mine.iter().map(|r| r.errors).sum(), mine.iter().map(|r| r.attempts).sum()),
            bottom_outs: mine.iter().map(|r| r.bottom_outs).sum(),
        });
    }
    rows.sort_by(|a, b| (&a.policy, &a.skill).cmp(&(&b.policy, &b.skill)));
    summaries.sort_by(|a, b| a.policy.cmp(&b.policy));
    Ok(SimReport { rows, summaries })
}

pub const CSV_HEADER: [&str; 9] = [
    "policy",
    "skill",
    "students",
    "mean_opportunities",
    "error_rate",
    "mastered",
    "opportunities_to_mastery",
    "mean_final_p_mastery",
    "truly_known",
];

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_csv<W: io::Write>(report: &SimReport, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.policy.clone(),
            r.skill.to_string(),
            r.students.to_string(),
            fixed(r.mean_opportunities),
            r.error_rate.map(fixed).unwrap_or_default(),
            r.mastered.to_string(),
            r.opportunities_to_mastery.map(fixed).unwrap_or_default(),
            fixed(r.mean_final_p_mastery),
            fixed(r.truly_known),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_summary<W: io::Write>(report: &SimReport, mut out: W) -> io::Result<()> {
    writeln!(out, "{:<16} {:>18} {:>10} {:>11}", "policy", "entries/problem", "errors", "bottom-outs")?;
    for s in &report.summaries {
        let errors = s.error_rate.map(|e| format!("{:.1}%", e * 100.0)).unwrap_or_else(|| "-".into());
        writeln!(out, "{:<16} {:>18.2} {:>10} {:>11}", s.policy, s.entries_per_problem, errors, s.bottom_outs)?;
    }
    Ok(())
}
