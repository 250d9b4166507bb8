//! JSON interchange for channels, ensembles and decision rules.
//!
//! Matrices are row-major arrays of rows; each entry is `[re, im]` or a
//! bare real number. A state is `{"density": matrix}` or `{"pure": vector}`.
//!
//! ```json
//! {"states": [{"pure": [[1, 0], [0, 0]]}, {"density": [[0.5, 0], [0, 0.5]]}],
//!  "cost": [0, 1]}
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::ChannelCq;
use crate::linalg::{CMatrix, CVector};
use crate::qstate::{DecisionRule, DensityMatrix, Ensemble, Letter, PureState};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(x) => Complex64::new(x, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for Entry {
    fn from(z: Complex64) -> Self {
        Entry::Complex([z.re, z.im])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSpec {
    Density(Vec<Vec<Entry>>),
    Pure(Vec<Entry>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelFile {
    pub states: Vec<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LetterSpec {
    pub prob: f64,
    #[serde(flatten)]
    pub state: StateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub letters: Vec<LetterSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PovmFile {
    pub elements: Vec<Vec<Vec<Entry>>>,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn matrix_from_rows(rows: &[Vec<Entry>]) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare { rows: n, cols: r.len() });
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j].value()))
}

pub fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<Entry>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

fn vector_from(entries: &[Entry]) -> Result<CVector> {
    if entries.is_empty() {
        return Err(Error::Empty("state vector"));
    }
    Ok(CVector::from_iterator(entries.len(), entries.iter().map(|e| e.value())))
}

enum Parsed {
    Density(DensityMatrix),
    Pure(PureState),
}

fn parse_state(spec: &StateSpec) -> Result<Parsed> {
    match spec {
        StateSpec::Density(rows) => Ok(Parsed::Density(DensityMatrix::new(matrix_from_rows(rows)?)?)),
        StateSpec::Pure(v) => Ok(Parsed::Pure(PureState::new(vector_from(v)?)?)),
    }
}

impl ChannelFile {
    pub fn into_channel(self) -> Result<ChannelCq> {
        if self.states.is_empty() {
            return Err(Error::Empty("channel alphabet"));
        }
        let parsed = self.states.iter().map(parse_state).collect::<Result<Vec<_>>>()?;
        if parsed.iter().all(|p| matches!(p, Parsed::Pure(_))) {
            let vs = parsed
                .into_iter()
                .map(|p| match p {
                    Parsed::Pure(v) => v,
                    Parsed::Density(_) => unreachable!(),
                })
                .collect();
            return ChannelCq::from_pure(vs, self.cost);
        }
        let states = parsed
            .into_iter()
            .map(|p| match p {
                Parsed::Pure(v) => v.to_density(),
                Parsed::Density(d) => d,
            })
            .collect();
        ChannelCq::new(states, self.cost)
    }

    pub fn from_channel(ch: &ChannelCq) -> Self {
        let states = match ch.pure_states() {
            Some(vs) => vs.iter().map(|v| StateSpec::Pure(v.amplitudes().iter().map(|z| (*z).into()).collect())).collect(),
            None => ch.states().iter().map(|s| StateSpec::Density(matrix_to_rows(s.matrix()))).collect(),
        };
        ChannelFile { states, cost: ch.cost().map(<[f64]>::to_vec) }
    }
}

impl EnsembleFile {
    pub fn into_ensemble(self) -> Result<Ensemble> {
        let letters = self
            .letters
            .iter()
            .map(|l| {
                let state = match parse_state(&l.state)? {
                    Parsed::Pure(v) => v.to_density(),
                    Parsed::Density(d) => d,
                };
                Ok(Letter { prob: l.prob, state, cost: l.cost })
            })
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(letters)
    }

    pub fn from_ensemble(ens: &Ensemble) -> Self {
        let letters = ens
            .letters()
            .iter()
            .map(|l| LetterSpec { prob: l.prob, state: StateSpec::Density(matrix_to_rows(l.state.matrix())), cost: l.cost })
            .collect();
        EnsembleFile { letters }
    }
}

impl PovmFile {
    pub fn into_rule(self) -> Result<DecisionRule> {
        let elements = self.elements.iter().map(|m| matrix_from_rows(m)).collect::<Result<Vec<_>>>()?;
        DecisionRule::new(elements)
    }
}

pub fn read_channel(text: &str) -> Result<ChannelCq> {
    parse::<ChannelFile>(text)?.into_channel()
}

pub fn read_ensemble(text: &str) -> Result<Ensemble> {
    parse::<EnsembleFile>(text)?.into_ensemble()
}

pub fn read_povm(text: &str) -> Result<DecisionRule> {
    parse::<PovmFile>(text)?.into_rule()
}

pub fn write_channel(ch: &ChannelCq) -> String {
    serde_json::to_string_pretty(&ChannelFile::from_channel(ch)).expect("channel serializes")
}

pub fn write_ensemble(ens: &Ensemble) -> String {
    serde_json::to_string_pretty(&EnsembleFile::from_ensemble(ens)).expect("ensemble serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::holevo_chi;

    #[test]
    fn reads_mixed_channel_with_cost() {
        let text = r#"{"states": [{"pure": [[1, 0], [0, 0]]}, {"density": [[0.5, 0], [0, [0.5, 0]]]}], "cost": [0, 1]}"#;
        let ch = read_channel(text).unwrap();
        assert_eq!(ch.alphabet_size(), 2);
        assert!(!ch.is_pure());
        assert_eq!(ch.cost().unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn pure_channel_round_trips() {
        let ch = ChannelCq::binary(0.3).unwrap();
        let back = read_channel(&write_channel(&ch)).unwrap();
        assert!(back.is_pure());
        let (a, b) = (ch.pure_states().unwrap(), back.pure_states().unwrap());
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.amplitudes(), y.amplitudes());
        }
    }

    #[test]
    fn ensemble_round_trips() {
        let text = r#"{"letters": [
            {"prob": 0.25, "pure": [[0.6, 0], [0, 0.8]]},
            {"prob": 0.75, "density": [[0.9, 0], [0, 0.1]], "cost": 2}
        ]}"#;
        let ens = read_ensemble(text).unwrap();
        let back = read_ensemble(&write_ensemble(&ens)).unwrap();
        assert_eq!(holevo_chi(&ens), holevo_chi(&back));
        assert_eq!(back.letters()[1].cost, Some(2.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(read_channel("{"), Err(Error::Parse(_))));
        assert!(matches!(read_channel(r#"{"states": []}"#), Err(Error::Empty(_))));
        assert!(matches!(
            read_channel(r#"{"states": [{"density": [[1, 0]]}]}"#),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(read_channel(r#"{"states": [{"pure": [1, 1]}]}"#), Err(Error::NotNormalized { .. })));
        assert!(matches!(read_povm(r#"{"elements": [[[1, 0], [0, 1]], [[1, 0], [0, 0]]]}"#), Err(Error::NotPovm { .. })));
    }
}
