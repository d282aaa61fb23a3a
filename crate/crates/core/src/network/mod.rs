//! The agent's two-slice dynamic decision network.
//!
//! Every observation variable at `t + 1` has its own table. A table's
//! parents are drawn from the slice-`t` observations (named `D_t`, `HA_t`,
//! ...), the two decisions `SF` and `SA`, and at most one binary hidden
//! variable `HV` that itself depends on slice-`t` observations. Utility is a
//! fixed function of the next observation and the action taken.

mod cpt;
mod inference;
pub mod initial;
mod utility;
mod variables;

use serde::{Deserialize, Serialize};

pub use cpt::{configurations, ConditionalTable};
pub use inference::{
    expected_utility, predict_joint, predict_marginals, select_action_meu, utility_distribution,
    UtilityDistribution, TIE_TOLERANCE,
};
pub use utility::{aside_energy, forward_energy, utility, UtilityModel, CONTACT_PENALTY};
pub use variables::{
    DiscreteAction, DiscreteObservation, ObsVar, ACTION_COUNT, DEPTH_BINS, HEADING_BINS,
    JOINT_OBSERVATIONS, STEP_ASIDE, STEP_ASIDE_CATEGORIES, STEP_ASIDE_CENTER, STEP_FORWARD,
    STEP_FORWARD_CATEGORIES,
};

use crate::error::{Error, Result};

/// Name of the hidden variable node.
pub const HIDDEN: &str = "HV";
/// Name of the utility node.
pub const UTILITY: &str = "U";
/// Version tag written into serialized networks.
pub const NETWORK_SCHEMA: u32 = 1;

/// Name of the slice-`t` copy of an observation variable.
pub fn past_name(var: ObsVar) -> String {
    format!("{}_t", var.name())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Chance,
    Decision,
    Utility,
    Hidden,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cardinality: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    /// From slice `t` into slice `t + 1`.
    Inter,
    /// Within slice `t + 1`.
    Intra,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

/// Where a table's parent takes its value from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Source {
    Past(ObsVar),
    Forward,
    Aside,
    Hidden,
}

impl Source {
    fn resolve(name: &str) -> Result<Source> {
        match name {
            STEP_FORWARD => Ok(Source::Forward),
            STEP_ASIDE => Ok(Source::Aside),
            HIDDEN => Ok(Source::Hidden),
            other => other
                .strip_suffix("_t")
                .and_then(ObsVar::from_name)
                .map(Source::Past)
                .ok_or_else(|| Error::UnknownVariable(other.to_string())),
        }
    }

    fn cardinality(self) -> usize {
        match self {
            Source::Past(v) => v.cardinality(),
            Source::Forward => STEP_FORWARD_CATEGORIES,
            Source::Aside => STEP_ASIDE_CATEGORIES,
            Source::Hidden => 2,
        }
    }

    pub(crate) fn value(self, obs: &DiscreteObservation, act: &DiscreteAction, hv: usize) -> usize {
        match self {
            Source::Past(v) => obs.get(v),
            Source::Forward => act.step_forward,
            Source::Aside => act.step_aside,
            Source::Hidden => hv,
        }
    }
}

fn resolve_parents(cpt: &ConditionalTable) -> Result<Vec<Source>> {
    let mut out = Vec::with_capacity(cpt.parents().len());
    for (name, &card) in cpt.parents().iter().zip(cpt.parent_cardinalities()) {
        let src = Source::resolve(name)?;
        if src.cardinality() != card {
            return Err(Error::ArityMismatch(format!(
                "{}: parent {name} declared with {card} values, expected {}",
                cpt.child(),
                src.cardinality()
            )));
        }
        if out.contains(&src) {
            return Err(Error::InvalidNetwork(format!(
                "{}: parent {name} listed twice",
                cpt.child()
            )));
        }
        out.push(src);
    }
    Ok(out)
}

/// The binary hidden variable and its table.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenNode {
    parents: Vec<ObsVar>,
    cpt: ConditionalTable,
}

impl HiddenNode {
    pub fn parents(&self) -> &[ObsVar] {
        &self.parents
    }

    pub fn cpt(&self) -> &ConditionalTable {
        &self.cpt
    }

    /// Table index of the hidden variable's parents in `obs`.
    pub fn config_of(&self, obs: &DiscreteObservation) -> usize {
        self.parents
            .iter()
            .zip(self.cpt.parent_cardinalities())
            .fold(0, |acc, (v, &card)| acc * card + obs.get(*v))
    }
}

/// Two-slice decision network over the four percepts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDoc", into = "NetworkDoc")]
pub struct TwoSliceNetwork {
    tables: Vec<ConditionalTable>,
    sources: Vec<Vec<Source>>,
    hidden: Option<HiddenNode>,
    utility: UtilityModel,
}

impl TwoSliceNetwork {
    /// Assembles a network from one table per observation variable (in
    /// `ObsVar::ALL` order) and an optional hidden-variable table.
    pub fn new(
        tables: Vec<ConditionalTable>,
        hidden: Option<ConditionalTable>,
        utility: UtilityModel,
    ) -> Result<Self> {
        if tables.len() != ObsVar::ALL.len() {
            return Err(Error::InvalidNetwork(format!(
                "expected {} observation tables, got {}",
                ObsVar::ALL.len(),
                tables.len()
            )));
        }
        let mut sources = Vec::with_capacity(tables.len());
        for (var, cpt) in ObsVar::ALL.iter().zip(&tables) {
            if cpt.child() != var.name() {
                return Err(Error::MissingCpt(var.name().to_string()));
            }
            if cpt.child_cardinality() != var.cardinality() {
                return Err(Error::ArityMismatch(format!(
                    "{var}: table over {} values, expected {}",
                    cpt.child_cardinality(),
                    var.cardinality()
                )));
            }
            cpt.validate()?;
            sources.push(resolve_parents(cpt)?);
        }
        let hidden = match hidden {
            None => None,
            Some(cpt) => {
                if cpt.child() != HIDDEN || cpt.child_cardinality() != 2 {
                    return Err(Error::InvalidNetwork(
                        "hidden table must be a binary table for HV".into(),
                    ));
                }
                cpt.validate()?;
                let parents = resolve_parents(&cpt)?
                    .into_iter()
                    .map(|s| match s {
                        Source::Past(v) => Ok(v),
                        _ => Err(Error::InvalidNetwork(
                            "HV may only depend on slice-t observations".into(),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(HiddenNode { parents, cpt })
            }
        };
        if hidden.is_none() && sources.iter().flatten().any(|s| *s == Source::Hidden) {
            return Err(Error::MissingCpt(HIDDEN.into()));
        }
        Ok(TwoSliceNetwork {
            tables,
            sources,
            hidden,
            utility,
        })
    }

    /// The hand-specified prior network: every percept depends on its own
    /// past value and on both decisions.
    pub fn initial() -> Self {
        Self::initial_with_utility(UtilityModel::default())
    }

    pub fn initial_with_utility(utility: UtilityModel) -> Self {
        let decisions = |var: ObsVar| {
            vec![
                (past_name(var), var.cardinality()),
                (STEP_FORWARD.to_string(), STEP_FORWARD_CATEGORIES),
                (STEP_ASIDE.to_string(), STEP_ASIDE_CATEGORIES),
            ]
        };
        let tables = ObsVar::ALL
            .iter()
            .map(|&var| {
                ConditionalTable::from_fn(var.name(), var.cardinality(), decisions(var), |cfg| {
                    let (x, sf, sa) = (cfg[0], cfg[1], cfg[2]);
                    match var {
                        ObsVar::Depth => initial::depth_column(x, sf),
                        ObsVar::HeadingAngle => initial::heading_column(x, sf, sa),
                        ObsVar::BarrierTactile => initial::barrier_tactile_column(x, sa),
                        ObsVar::TargetInVisualField => initial::target_visual_column(x, sa),
                    }
                })
                .expect("closed-form columns are stochastic")
            })
            .collect();
        Self::new(tables, None, utility).expect("initial network is well formed")
    }

    pub fn cpt(&self, var: ObsVar) -> &ConditionalTable {
        &self.tables[var.position()]
    }

    pub fn tables(&self) -> &[ConditionalTable] {
        &self.tables
    }

    pub fn hidden(&self) -> Option<&HiddenNode> {
        self.hidden.as_ref()
    }

    pub fn has_hidden(&self) -> bool {
        self.hidden.is_some()
    }

    pub fn utility_model(&self) -> UtilityModel {
        self.utility
    }

    pub fn with_utility(mut self, utility: UtilityModel) -> Self {
        self.utility = utility;
        self
    }

    /// Observation variables whose table has `HV` as a parent.
    pub fn hidden_children(&self) -> Vec<ObsVar> {
        ObsVar::ALL
            .into_iter()
            .filter(|v| self.sources[v.position()].contains(&Source::Hidden))
            .collect()
    }

    /// Column of `var`'s table selected by the slice-`t` observation, the
    /// action and a value of the hidden variable (ignored when `var` does
    /// not depend on it).
    pub fn column(&self, var: ObsVar, obs: &DiscreteObservation, act: &DiscreteAction, hv: usize) -> &[f64] {
        self.tables[var.position()].column(self.table_index(var, obs, act, hv))
    }

    /// Index of the parent configuration of `var`'s table.
    pub fn table_index(&self, var: ObsVar, obs: &DiscreteObservation, act: &DiscreteAction, hv: usize) -> usize {
        let cpt = &self.tables[var.position()];
        self.sources[var.position()]
            .iter()
            .zip(cpt.parent_cardinalities())
            .fold(0, |acc, (src, &card)| acc * card + src.value(obs, act, hv))
    }

    /// Whether `var`'s table depends on the hidden variable.
    pub fn depends_on_hidden(&self, var: ObsVar) -> bool {
        self.sources[var.position()].contains(&Source::Hidden)
    }

    /// `P(HV | parents)` at the slice-`t` observation, if a hidden variable exists.
    pub fn hidden_prior(&self, obs: &DiscreteObservation) -> Option<[f64; 2]> {
        self.hidden.as_ref().map(|h| {
            let col = h.cpt.column(h.config_of(obs));
            [col[0], col[1]]
        })
    }

    /// Adds a binary hidden variable with the given slice-`t` parents and
    /// slice-`t + 1` children. The hidden table starts uniform and each
    /// child's table is replicated across both hidden values, so predictions
    /// are unchanged.
    pub fn insert_hidden(&self, parents: &[ObsVar], children: &[ObsVar]) -> Result<Self> {
        if self.hidden.is_some() {
            return Err(Error::DuplicateHidden);
        }
        if parents.is_empty() || children.is_empty() {
            return Err(Error::EmptySpec);
        }
        let mut parents = parents.to_vec();
        parents.sort();
        parents.dedup();
        let hv_parents: Vec<(String, usize)> =
            parents.iter().map(|v| (past_name(*v), v.cardinality())).collect();
        let hidden = ConditionalTable::from_fn(HIDDEN, 2, hv_parents, |_| vec![0.5, 0.5])?;
        let mut tables = self.tables.clone();
        for child in children {
            let t = &mut tables[child.position()];
            *t = t.with_added_parent(HIDDEN, 2);
        }
        Self::new(tables, Some(hidden), self.utility)
    }

    /// Replaces one table by another with identical shape.
    pub fn replace_table(&mut self, table: ConditionalTable) -> Result<()> {
        table.validate()?;
        let slot = if table.child() == HIDDEN {
            &mut self.hidden.as_mut().ok_or(Error::NoHiddenVariable)?.cpt
        } else {
            let var = ObsVar::from_name(table.child())
                .ok_or_else(|| Error::UnknownVariable(table.child().to_string()))?;
            &mut self.tables[var.position()]
        };
        if slot.parents() != table.parents()
            || slot.parent_cardinalities() != table.parent_cardinalities()
            || slot.child_cardinality() != table.child_cardinality()
        {
            return Err(Error::ArityMismatch(format!(
                "replacement table for {} has a different shape",
                table.child()
            )));
        }
        *slot = table;
        Ok(())
    }

    /// All tables, observation tables first, then `HV` if present.
    pub fn all_tables(&self) -> impl Iterator<Item = &ConditionalTable> {
        self.tables.iter().chain(self.hidden.iter().map(|h| &h.cpt))
    }

    pub fn variables(&self) -> Vec<VariableSpec> {
        let mut vars: Vec<VariableSpec> = ObsVar::ALL
            .iter()
            .map(|v| VariableSpec {
                name: v.name().into(),
                kind: VarKind::Chance,
                cardinality: Some(v.cardinality()),
            })
            .collect();
        vars.push(VariableSpec {
            name: STEP_FORWARD.into(),
            kind: VarKind::Decision,
            cardinality: Some(STEP_FORWARD_CATEGORIES),
        });
        vars.push(VariableSpec {
            name: STEP_ASIDE.into(),
            kind: VarKind::Decision,
            cardinality: Some(STEP_ASIDE_CATEGORIES),
        });
        if self.hidden.is_some() {
            vars.push(VariableSpec {
                name: HIDDEN.into(),
                kind: VarKind::Hidden,
                cardinality: Some(2),
            });
        }
        vars.push(VariableSpec {
            name: UTILITY.into(),
            kind: VarKind::Utility,
            cardinality: None,
        });
        vars
    }

    /// Edges implied by the tables plus the utility node's parents.
    pub fn edges(&self) -> Vec<Edge> {
        let mut edges = Vec::new();
        for table in self.all_tables() {
            for parent in table.parents() {
                // Decisions are taken at t and act on slice t + 1.
                let kind = if parent == HIDDEN {
                    EdgeKind::Intra
                } else {
                    EdgeKind::Inter
                };
                edges.push(Edge {
                    from: parent.clone(),
                    to: table.child().to_string(),
                    kind,
                });
            }
        }
        for var in ObsVar::ALL {
            edges.push(Edge {
                from: var.name().into(),
                to: UTILITY.into(),
                kind: EdgeKind::Intra,
            });
        }
        for d in [STEP_FORWARD, STEP_ASIDE] {
            edges.push(Edge {
                from: d.into(),
                to: UTILITY.into(),
                kind: EdgeKind::Inter,
            });
        }
        edges
    }
}

/// Serialized form of a network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub schema_version: u32,
    pub variables: Vec<VariableSpec>,
    pub edges: Vec<Edge>,
    pub cpts: Vec<ConditionalTable>,
    #[serde(default)]
    pub utility: UtilityModel,
}

impl From<TwoSliceNetwork> for NetworkDoc {
    fn from(net: TwoSliceNetwork) -> Self {
        NetworkDoc {
            schema_version: NETWORK_SCHEMA,
            variables: net.variables(),
            edges: net.edges(),
            cpts: net.all_tables().cloned().collect(),
            utility: net.utility,
        }
    }
}

impl TryFrom<NetworkDoc> for TwoSliceNetwork {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        if doc.schema_version != NETWORK_SCHEMA {
            return Err(Error::InvalidNetwork(format!(
                "unsupported schema version {}",
                doc.schema_version
            )));
        }
        let mut hidden = None;
        let mut slots: Vec<Option<ConditionalTable>> = vec![None; ObsVar::ALL.len()];
        for cpt in doc.cpts {
            if cpt.child() == HIDDEN {
                if hidden.replace(cpt).is_some() {
                    return Err(Error::DuplicateHidden);
                }
                continue;
            }
            let var = ObsVar::from_name(cpt.child())
                .ok_or_else(|| Error::UnknownVariable(cpt.child().to_string()))?;
            if slots[var.position()].replace(cpt).is_some() {
                return Err(Error::InvalidNetwork(format!("two tables for {var}")));
            }
        }
        let tables = slots
            .into_iter()
            .zip(ObsVar::ALL)
            .map(|(t, v)| t.ok_or_else(|| Error::MissingCpt(v.name().into())))
            .collect::<Result<Vec<_>>>()?;
        let net = TwoSliceNetwork::new(tables, hidden, doc.utility)?;
        if net.variables() != doc.variables {
            return Err(Error::InvalidNetwork("variable list does not match tables".into()));
        }
        if net.edges() != doc.edges {
            return Err(Error::InvalidNetwork("edge list does not match table parents".into()));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let net = TwoSliceNetwork::initial()
            .insert_hidden(&[ObsVar::BarrierTactile, ObsVar::Depth], &[ObsVar::BarrierTactile])
            .unwrap();
        let text = serde_json::to_string(&net).unwrap();
        let back: TwoSliceNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn tampered_edges_rejected() {
        let net = TwoSliceNetwork::initial();
        let mut doc = NetworkDoc::from(net);
        doc.edges.pop();
        let text = serde_json::to_string(&doc).unwrap();
        assert!(serde_json::from_str::<TwoSliceNetwork>(&text).is_err());
    }

    #[test]
    fn insertion_errors() {
        let net = TwoSliceNetwork::initial();
        assert!(matches!(net.insert_hidden(&[], &[]), Err(Error::EmptySpec)));
        let with = net.insert_hidden(&[ObsVar::Depth], &[ObsVar::Depth]).unwrap();
        assert!(matches!(
            with.insert_hidden(&[ObsVar::Depth], &[ObsVar::Depth]),
            Err(Error::DuplicateHidden)
        ));
        assert_eq!(with.hidden_children(), vec![ObsVar::Depth]);
        assert_eq!(with.hidden().unwrap().parents(), &[ObsVar::Depth]);
    }

    #[test]
    fn unknown_parent_rejected() {
        let t = ConditionalTable::new("D", 5, vec![("Q".into(), 2)], vec![vec![0.2; 5]; 2]).unwrap();
        let mut tables: Vec<_> = TwoSliceNetwork::initial().tables().to_vec();
        tables[0] = t;
        assert!(matches!(
            TwoSliceNetwork::new(tables, None, UtilityModel::default()),
            Err(Error::UnknownVariable(_))
        ));
    }
}
