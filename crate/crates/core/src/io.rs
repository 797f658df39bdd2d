//! JSON model files: measures, graphs, structural causal models, treatment
//! specifications, ground costs and couplings.
//!
//! Numbers that enter exact arithmetic (weights, coordinates, mechanism
//! coefficients) are written as strings, either `p/q` or decimals.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::inference::AteSpec;
use crate::metric::{parse_matrix_csv, CoordinateMetric, GroundCost};
use crate::model::{CausalGraph, CoordinateSpace, Dag, DiscreteMeasure, Mechanism, Noise, Scm};
use crate::programs::Coupling;
use crate::scalar::{format_rational, parse_rational, rational_to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinateFile {
    pub name: String,
    /// Real atoms; names are the canonical renderings of the values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportEntry {
    pub atoms: Vec<String>,
    pub weight: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub coordinates: Vec<CoordinateFile>,
    pub support: Vec<SupportEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    /// `full`, `empty`, `linear` or `markov`; overrides `edges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// 1-based directed edges.
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub parents: Vec<String>,
    pub noise: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MechanismFile {
    Affine {
        #[serde(default = "zero_string")]
        offset: String,
        #[serde(default)]
        coefs: Vec<String>,
        #[serde(default = "one_string")]
        noise: String,
    },
    Table {
        entries: Vec<TableEntry>,
    },
}

fn zero_string() -> String {
    "0".into()
}

fn one_string() -> String {
    "1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmFile {
    pub graph: GraphFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    pub mechanisms: Vec<MechanismFile>,
    /// Per vertex, `(value, weight)` pairs.
    pub noises: Vec<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AteSpecFile {
    pub graph: GraphFile,
    /// 1-based vertices.
    pub treatment: usize,
    pub outcome: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostFile {
    /// `‖x - y‖_2^p`.
    Euclidean,
    /// `(Σ_i |x_i - y_i|)^p`.
    Abs,
    /// Explicit joint matrix; rows and columns are labeled by atom tuples.
    Matrix {
        labels: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
        /// Headerless CSV, relative to the cost file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
    },
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn rationals(xs: &[String]) -> Result<Vec<Rational>> {
    xs.iter().map(|s| parse_rational(s)).collect()
}

impl CoordinateFile {
    pub fn to_space(&self) -> Result<CoordinateSpace> {
        match (&self.values, &self.atoms) {
            (Some(v), None) => {
                if self.embedding.is_some() {
                    return Err(Error::Parse(format!("coordinate '{}': values exclude an embedding", self.name)));
                }
                let values = rationals(v)?;
                let space = CoordinateSpace::real_line(self.name.clone(), &values);
                if space.len() != values.len() {
                    return Err(Error::InvalidMeasure(format!("coordinate '{}' repeats a value", self.name)));
                }
                Ok(space)
            }
            (None, Some(a)) => {
                let emb = match &self.embedding {
                    Some(e) => Some(e.iter().map(|p| rationals(p)).collect::<Result<Vec<_>>>()?),
                    None => None,
                };
                CoordinateSpace::new(self.name.clone(), a.clone(), emb)
            }
            _ => Err(Error::Parse(format!(
                "coordinate '{}' needs exactly one of 'values' or 'atoms'",
                self.name
            ))),
        }
    }
}

/// Resolves an atom by name, or by value on a real line.
fn resolve_atom(space: &CoordinateSpace, name: &str) -> Result<usize> {
    if let Some(i) = space.atom_index(name) {
        return Ok(i);
    }
    if space.dimension() == Some(1) {
        if let Ok(v) = parse_rational(name) {
            if let Some(i) = (0..space.len()).find(|&a| space.real_value(a) == Some(&v)) {
                return Ok(i);
            }
        }
    }
    Err(Error::InvalidMeasure(format!("unknown atom '{name}' in coordinate '{}'", space.name())))
}

impl MeasureFile {
    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        let spaces = self.coordinates.iter().map(CoordinateFile::to_space).collect::<Result<Vec<_>>>()?;
        let mut entries = Vec::with_capacity(self.support.len());
        for e in &self.support {
            if e.atoms.len() != spaces.len() {
                return Err(Error::InvalidMeasure(format!(
                    "support entry has {} atoms, measure has {} coordinates",
                    e.atoms.len(),
                    spaces.len()
                )));
            }
            let t = e
                .atoms
                .iter()
                .zip(&spaces)
                .map(|(a, s)| resolve_atom(s, a))
                .collect::<Result<Vec<_>>>()?;
            entries.push((t, parse_rational(&e.weight)?));
        }
        DiscreteMeasure::new(spaces, entries)
    }

    pub fn from_measure(m: &DiscreteMeasure) -> MeasureFile {
        let coordinates = m
            .spaces()
            .iter()
            .map(|s| {
                let emb = s.embedding().map(|e| e.iter().map(|p| p.iter().map(format_rational).collect()).collect());
                CoordinateFile { name: s.name().into(), values: None, atoms: Some(s.atoms().to_vec()), embedding: emb }
            })
            .collect();
        let support = m
            .support()
            .iter()
            .map(|(t, w)| SupportEntry { atoms: m.atom_names(t), weight: format_rational(w) })
            .collect();
        MeasureFile { coordinates, support }
    }
}

impl GraphFile {
    pub fn to_graph(&self) -> Result<CausalGraph> {
        match &self.preset {
            Some(p) => CausalGraph::preset(p, self.n).ok_or_else(|| Error::Parse(format!("unknown graph preset '{p}'"))),
            None => Ok(CausalGraph::Acyclic(Dag::new(self.n, &self.edges)?)),
        }
    }

    pub fn to_dag(&self) -> Result<Dag> {
        self.to_graph()?
            .dag()
            .cloned()
            .ok_or_else(|| Error::Parse("the complete graph has no acyclic form here".into()))
    }

    pub fn from_graph(g: &CausalGraph) -> GraphFile {
        match g {
            CausalGraph::Complete(n) => GraphFile { n: *n, preset: Some("full".into()), edges: Vec::new() },
            CausalGraph::Acyclic(d) => GraphFile { n: d.n(), preset: None, edges: d.labeled_edges() },
        }
    }
}

impl MechanismFile {
    pub fn to_mechanism(&self) -> Result<Mechanism> {
        match self {
            MechanismFile::Affine { offset, coefs, noise } => Ok(Mechanism::Affine {
                offset: parse_rational(offset)?,
                coefs: rationals(coefs)?,
                noise: parse_rational(noise)?,
            }),
            MechanismFile::Table { entries } => {
                let mut t = BTreeMap::new();
                for e in entries {
                    t.insert((rationals(&e.parents)?, parse_rational(&e.noise)?), parse_rational(&e.value)?);
                }
                Ok(Mechanism::Table(t))
            }
        }
    }
}

impl ScmFile {
    pub fn to_scm(&self) -> Result<Scm> {
        let dag = self.graph.to_dag()?;
        let mechanisms = self.mechanisms.iter().map(MechanismFile::to_mechanism).collect::<Result<Vec<_>>>()?;
        let noises = self
            .noises
            .iter()
            .map(|atoms| {
                let atoms = atoms
                    .iter()
                    .map(|(v, w)| Ok((parse_rational(v)?, parse_rational(w)?)))
                    .collect::<Result<Vec<_>>>()?;
                Noise::new(atoms)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut s = Scm::new(dag, mechanisms, noises)?;
        if let Some(names) = &self.names {
            if names.len() != s.dag().n() {
                return Err(Error::InvalidScm("one name per vertex expected".into()));
            }
            s = s.with_names(names.clone());
        }
        if let Some(l) = &self.lipschitz {
            if l.len() != s.dag().n() {
                return Err(Error::InvalidScm("one Lipschitz entry per vertex expected".into()));
            }
            s = s.with_lipschitz(l.clone());
        }
        Ok(s)
    }
}

impl AteSpecFile {
    pub fn to_spec(&self) -> Result<AteSpec> {
        let dag = self.graph.to_dag()?;
        if self.treatment == 0 || self.outcome == 0 {
            return Err(Error::InvalidAteSpec("vertices are 1-based".into()));
        }
        AteSpec::new(dag, self.treatment - 1, self.outcome - 1, self.delta)
    }
}

impl CostFile {
    /// `base` resolves a relative CSV path.
    pub fn to_cost(&self, p: f64, n: usize, base: Option<&Path>) -> Result<GroundCost> {
        match self {
            CostFile::Euclidean => Ok(GroundCost::EuclideanPow { p }),
            CostFile::Abs => Ok(GroundCost::additive(p, CoordinateMetric::AbsDiff, n)),
            CostFile::Matrix { labels, matrix, csv } => {
                let matrix = match (matrix, csv) {
                    (Some(m), None) => m.clone(),
                    (None, Some(path)) => {
                        let path = match base {
                            Some(b) => b.join(path),
                            None => path.into(),
                        };
                        parse_matrix_csv(&read_text(&path)?)?
                    }
                    _ => return Err(Error::Parse("matrix cost needs exactly one of 'matrix' or 'csv'".into())),
                };
                if matrix.len() != labels.len() || matrix.iter().any(|r| r.len() != labels.len()) {
                    return Err(Error::InvalidMatrix(format!("expected a {0}x{0} matrix", labels.len())));
                }
                Ok(GroundCost::JointMatrixPow { p, labels: labels.clone(), matrix })
            }
        }
    }
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(parse_err)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    parse_json(&read_text(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    read_json::<MeasureFile>(path)?.to_measure()
}

pub fn read_scm(path: &Path) -> Result<Scm> {
    read_json::<ScmFile>(path)?.to_scm()
}

/// A preset name (`full`, `empty`, `linear`, `markov`) with `n`, or a graph file.
pub fn read_graph(spec: &str, n: usize) -> Result<CausalGraph> {
    if let Some(g) = CausalGraph::preset(spec, n) {
        return Ok(g);
    }
    let g = read_json::<GraphFile>(Path::new(spec))?.to_graph()?;
    if g.n() != n {
        return Err(Error::ShapeMismatch(format!("graph has {} vertices, measures have {n} coordinates", g.n())));
    }
    Ok(g)
}

pub fn measure_json(m: &DiscreteMeasure) -> Value {
    serde_json::to_value(MeasureFile::from_measure(m)).expect("serializable")
}

/// Coupling entries with positive weight, labeled by atom names.
pub fn coupling_json(pi: &Coupling, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Value {
    let entries: Vec<Value> = pi
        .entries()
        .into_iter()
        .filter(|(_, _, w)| !num_traits::Zero::is_zero(*w))
        .map(|(x, y, w)| {
            json!({
                "x": mu.atom_names(x),
                "y": nu.atom_names(y),
                "weight": format_rational(w),
                "weight_f64": rational_to_f64(w),
            })
        })
        .collect();
    Value::Array(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::example_412;

    #[test]
    fn measure_round_trip() {
        let (mu, _) = example_412();
        let text = serde_json::to_string(&MeasureFile::from_measure(&mu)).unwrap();
        let back = parse_json::<MeasureFile>(&text).unwrap().to_measure().unwrap();
        assert_eq!(back, mu);
    }

    #[test]
    fn values_resolve_by_number() {
        let text = r#"{"coordinates":[{"name":"X","values":["0","0.5"]}],
            "support":[{"atoms":["1/2"],"weight":"0.25"},{"atoms":["0"],"weight":"3/4"}]}"#;
        let m = parse_json::<MeasureFile>(text).unwrap().to_measure().unwrap();
        assert_eq!(m.len(), 2);
        assert!(parse_json::<MeasureFile>(r#"{"coordinates":[],"support":[],"x":1}"#).is_err());
    }

    #[test]
    fn scm_file() {
        let text = r#"{"graph":{"n":2,"edges":[[1,2]]},
            "mechanisms":[{"type":"affine"},{"type":"affine","coefs":["1"]}],
            "noises":[[["-1","1/2"],["1","1/2"]],[["0","1"]]]}"#;
        let s = parse_json::<ScmFile>(text).unwrap().to_scm().unwrap();
        assert_eq!(s.pushforward().unwrap().len(), 2);
    }
}
