//! Choosing step granularity: which compound tasks the student sees as one
//! field and which are broken into their steps.
//!
//! Depth counts compound tasks from the root (the root task is depth 0). A
//! compound task at depth `d` is shown expanded iff `d` is below the limit
//! the policy assigns to its governing skill. Adaptive limits come from
//! mastery bands (low: unlimited, medium: 1, high: 0); scheduled limits come
//! from the skill's opportunity count.

use std::collections::BTreeSet;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::domain::GroundTask;
use crate::knowledge::{Band, BandThresholds, ParamError, StudentModel};
use crate::tracer::{NodeId, NodeKind, PlanTree, TraceError, TraceState};
use crate::value::{Sym, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: Float + Deserialize<'de>"
))]
pub enum ScaffoldPolicy<T = f64> {
    Adaptive {
        #[serde(default)]
        thresholds: BandThresholds<T>,
    },
    Static {
        depth: usize,
    },
    /// Deep scaffolding at first, shallow around `midpoint`, deep again.
    UShaped {
        d_max: usize,
        d_min: usize,
        midpoint: T,
        width: T,
    },
    /// Scaffolding fades from `d_max` to `d_min` around `midpoint`.
    Sigmoid {
        d_min: usize,
        d_max: usize,
        midpoint: T,
        steepness: T,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScaffoldError {
    #[error("adaptive policies use mastery bands, not schedules")]
    NoSchedule,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("unknown field {0}")]
    UnknownField(Sym),
    #[error("field {0} is not expandable")]
    NotExpandable(Sym),
    #[error("field {0} was already expanded")]
    AlreadyExpanded(Sym),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

const UNLIMITED: usize = usize::MAX;

impl<T: Float> ScaffoldPolicy<T> {
    pub fn validate(&self) -> Result<(), ScaffoldError> {
        let bad = |m: &str| Err(ScaffoldError::InvalidPolicy(m.to_owned()));
        match self {
            ScaffoldPolicy::Adaptive { thresholds } => {
                BandThresholds::new(thresholds.low_hi, thresholds.high_lo)?;
            }
            ScaffoldPolicy::Static { .. } => {}
            ScaffoldPolicy::UShaped {
                d_max,
                d_min,
                midpoint,
                width,
            } => {
                if d_min > d_max {
                    return bad("u_shaped needs d_min <= d_max");
                }
                if !(width.is_finite() && *width >= T::zero() && midpoint.is_finite()) {
                    return bad("u_shaped needs a finite midpoint and width >= 0");
                }
            }
            ScaffoldPolicy::Sigmoid {
                d_min,
                d_max,
                midpoint,
                steepness,
            } => {
                if d_min > d_max {
                    return bad("sigmoid needs d_min <= d_max");
                }
                if !(steepness.is_finite() && *steepness >= T::zero() && midpoint.is_finite()) {
                    return bad("sigmoid needs a finite midpoint and steepness >= 0");
                }
            }
        }
        Ok(())
    }
}

/// Scaffold depth after `opportunities` practice opportunities.
pub fn schedule_depth<T: Float>(policy: &ScaffoldPolicy<T>, opportunities: u64) -> Result<usize, ScaffoldError> {
    let n = T::from(opportunities).unwrap_or_else(T::max_value);
    let span = |hi: usize, lo: usize| T::from(hi - lo).unwrap_or_else(T::zero);
    let to_depth = |x: T| x.round().to_usize().unwrap_or(0);
    match policy {
        ScaffoldPolicy::Adaptive { .. } => Err(ScaffoldError::NoSchedule),
        ScaffoldPolicy::Static { depth } => Ok(*depth),
        ScaffoldPolicy::UShaped {
            d_max,
            d_min,
            midpoint,
            width,
        } => {
            let d_max = (*d_max).max(*d_min);
            let distance = (n - *midpoint).abs();
            let ratio = if *width > T::zero() {
                (distance / *width).min(T::one()).max(T::zero())
            } else if distance > T::zero() {
                T::one()
            } else {
                T::zero()
            };
            Ok(d_min + to_depth(span(d_max, *d_min) * ratio).min(d_max - d_min))
        }
        ScaffoldPolicy::Sigmoid {
            d_min,
            d_max,
            midpoint,
            steepness,
        } => {
            let d_max = (*d_max).max(*d_min);
            let logistic = T::one() / (T::one() + (-*steepness * (n - *midpoint)).exp());
            let granularity = d_min + to_depth(span(d_max, *d_min) * logistic).min(d_max - d_min);
            Ok(d_max - granularity + d_min)
        }
    }
}

/// How deep below the root this band may be expanded.
fn band_limit(band: Band) -> usize {
    match band {
        Band::Low => UNLIMITED,
        Band::Medium => 1,
        Band::High => 0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldState {
    Empty,
    Correct,
    Incorrect,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayoutField {
    pub id: Sym,
    pub label: String,
    /// Never sent to clients.
    #[serde(skip)]
    pub expected: Value,
    pub skill: Option<Sym>,
    pub band: Option<Band>,
    pub expandable: bool,
    pub expanded: bool,
    pub state: FieldState,
    /// The student's accepted entry, once correct.
    pub entered: Option<Value>,
    #[serde(skip)]
    pub task: GroundTask,
    /// Compound subtasks revealed by expanding this field.
    #[serde(skip)]
    pub subtasks: Vec<GroundTask>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkillProgress {
    pub skill: Sym,
    pub name: String,
    pub p_mastery: f64,
    pub band: Band,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemLayout {
    pub statement: String,
    pub fields: Vec<LayoutField>,
    pub progress: Vec<SkillProgress>,
    pub complete: bool,
}

impl ProblemLayout {
    pub fn field(&self, id: &Sym) -> Option<&LayoutField> {
        self.fields.iter().find(|f| &f.id == id)
    }

    /// Expected values in field order.
    pub fn expected_sequence(&self) -> Vec<(Sym, Value)> {
        self.fields
            .iter()
            .map(|f| (f.id.clone(), f.expected.clone()))
            .collect()
    }
}

struct Decider<'a, T> {
    model: &'a StudentModel<T>,
    policy: &'a ScaffoldPolicy<T>,
    keep_open: BTreeSet<&'a GroundTask>,
}

impl<T: Float> Decider<'_, T> {
    fn limit(&self, skill: Option<&Sym>) -> Result<usize, ScaffoldError> {
        match self.policy {
            ScaffoldPolicy::Adaptive { thresholds } => Ok(match skill {
                Some(s) => band_limit(self.model.band(s, thresholds)),
                None => UNLIMITED,
            }),
            other => {
                let n = skill.map(|s| self.model.state(s).opportunities).unwrap_or(0);
                schedule_depth(other, n)
            }
        }
    }

    fn walk(&self, tree: &PlanTree, id: NodeId, out: &mut BTreeSet<GroundTask>) -> Result<(), ScaffoldError> {
        let node = tree.node(id);
        if !matches!(node.kind, NodeKind::Method { .. }) {
            return Ok(());
        }
        let skill = tree.agenda.governing_skill(id);
        let open = self.keep_open.contains(&node.task) || node.depth < self.limit(skill.as_ref())?;
        if !open {
            out.insert(node.task.clone());
            return Ok(());
        }
        for child in tree.children(id) {
            self.walk(tree, child, out)?;
        }
        Ok(())
    }
}

/// Picks the granularity for `trace` under `policy`, applies it, and
/// renders the layout.
pub fn compute_layout<T: Float>(
    trace: &mut TraceState,
    model: &StudentModel<T>,
    policy: &ScaffoldPolicy<T>,
    thresholds: &BandThresholds<T>,
) -> Result<ProblemLayout, ScaffoldError> {
    policy.validate()?;
    let mut full = trace.clone();
    full.set_collapsed(BTreeSet::new());
    let tree = full.plan_tree()?;
    let decider = Decider {
        model,
        policy,
        keep_open: trace.expanded().iter().map(|e| &e.task).collect(),
    };
    let mut collapsed = BTreeSet::new();
    if let Some(root) = tree.root() {
        decider.walk(&tree, root, &mut collapsed)?;
    }
    trace.set_collapsed(collapsed);
    render_layout(trace, model, thresholds)
}

/// Lays out the trace at its current granularity.
pub fn render_layout<T: Float>(
    trace: &mut TraceState,
    model: &StudentModel<T>,
    thresholds: &BandThresholds<T>,
) -> Result<ProblemLayout, ScaffoldError> {
    let tree = trace.plan_tree()?;
    let expanded_fields: BTreeSet<&Sym> = trace.expanded().iter().map(|e| &e.field).collect();
    let domain = trace.domain().clone();
    let mut fields = Vec::new();
    for id in tree.leaves() {
        let node = tree.node(id);
        let Some(action) = node.action() else {
            continue;
        };
        let matched = tree.matched(id);
        let (is_macro, subtasks) = match &node.kind {
            NodeKind::Macro { subtasks, .. } => (true, subtasks.clone()),
            _ => (false, Vec::new()),
        };
        let expanded = expanded_fields.contains(&action.field);
        let label = match &action.skill {
            Some(s) => domain.skill_name(s).to_owned(),
            None => node.task.name.to_string(),
        };
        fields.push(LayoutField {
            id: action.field.clone(),
            label,
            band: action.skill.as_ref().map(|s| model.band(s, thresholds)),
            skill: action.skill,
            expandable: is_macro && !matched && !expanded,
            expanded,
            state: if matched {
                FieldState::Correct
            } else {
                FieldState::Empty
            },
            entered: matched.then(|| action.value.clone()),
            expected: action.value,
            task: node.task.clone(),
            subtasks,
        });
    }
    let statement = trace
        .memory()
        .facts_of(&Sym::new("statement"))
        .find_map(|args| match args.first() {
            Some(Value::Text(t)) => Some(t.clone()),
            _ => None,
        })
        .unwrap_or_else(|| trace.root().to_string());
    let progress = domain
        .skills
        .iter()
        .map(|(skill, name)| {
            let p = model.p_mastery(skill);
            SkillProgress {
                skill: skill.clone(),
                name: name.clone(),
                p_mastery: p.to_f64().unwrap_or(0.0),
                band: thresholds.band(p),
            }
        })
        .collect();
    Ok(ProblemLayout {
        statement,
        fields,
        progress,
        complete: trace.is_complete(),
    })
}

/// Opens a collapsed field one level and re-renders.
pub fn expand_field<T: Float>(
    layout: &ProblemLayout,
    field: &Sym,
    trace: &mut TraceState,
    model: &StudentModel<T>,
    thresholds: &BandThresholds<T>,
) -> Result<ProblemLayout, ScaffoldError> {
    let f = layout
        .field(field)
        .ok_or_else(|| ScaffoldError::UnknownField(field.clone()))?;
    if f.expanded {
        return Err(ScaffoldError::AlreadyExpanded(field.clone()));
    }
    if !f.expandable {
        return Err(ScaffoldError::NotExpandable(field.clone()));
    }
    trace.expand_task(&f.task, &f.subtasks, field)?;
    render_layout(trace, model, thresholds)
}
