//! JSON file formats shared by the command-line tools.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::continuous::PreferenceSpec;
use crate::discrete::DesignResult;
use crate::error::{Error, Result};
use crate::model::{Codebook, CodebookSet, DiscretePreference, PartitionAssignment, Spv};
use crate::twouser::TwoUserDesign;

/// Discrete preference: SPVs and their request probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceFile {
    pub n: usize,
    pub spvs: Vec<Spv>,
    pub probs: Vec<f64>,
}

impl PreferenceFile {
    pub fn from_preference(pref: &DiscretePreference) -> Self {
        PreferenceFile {
            n: pref.n(),
            spvs: pref.spvs().to_vec(),
            probs: pref.probs().to_vec(),
        }
    }

    pub fn into_preference(self) -> Result<DiscretePreference> {
        check_n(self.n, self.spvs.iter().map(Spv::len))?;
        DiscretePreference::new(self.spvs, self.probs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSetFile {
    pub n: usize,
    pub codebooks: Vec<Codebook>,
}

impl CodebookSetFile {
    pub fn from_set(set: &CodebookSet) -> Self {
        CodebookSetFile {
            n: set.n(),
            codebooks: set.codebooks().to_vec(),
        }
    }

    pub fn into_set(self) -> Result<CodebookSet> {
        check_n(self.n, self.codebooks.iter().map(Codebook::len))?;
        CodebookSet::new(self.codebooks)
    }
}

/// A discrete design. Also readable as a [`CodebookSetFile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub n: usize,
    pub k: usize,
    pub codebooks: Vec<Codebook>,
    pub assignment: PartitionAssignment,
    pub objective_bits_per_symbol: f64,
    pub iterations: usize,
}

impl DesignFile {
    pub fn from_result(r: &DesignResult) -> Self {
        DesignFile {
            n: r.set.n(),
            k: r.set.k(),
            codebooks: r.set.codebooks().to_vec(),
            assignment: r.assignment.clone(),
            objective_bits_per_symbol: r.objective,
            iterations: r.iterations,
        }
    }

    pub fn set(&self) -> Result<CodebookSet> {
        check_n(self.n, self.codebooks.iter().map(Codebook::len))?;
        if self.k != self.codebooks.len() {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: self.codebooks.len(),
            });
        }
        CodebookSet::new(self.codebooks.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoUserDesignFile {
    pub n: usize,
    pub k0: usize,
    pub common: Vec<Codebook>,
    pub excl1: Vec<Codebook>,
    pub excl2: Vec<Codebook>,
    /// Expected bits per symbol position of a request pair.
    pub objective_bits: f64,
}

impl TwoUserDesignFile {
    pub fn new(design: &TwoUserDesign, objective_bits: f64) -> Self {
        TwoUserDesignFile {
            n: design.n(),
            k0: design.k0(),
            common: design.common.clone(),
            excl1: design.excl1.clone(),
            excl2: design.excl2.clone(),
            objective_bits,
        }
    }

    pub fn design(&self) -> Result<TwoUserDesign> {
        check_n(
            self.n,
            self.common
                .iter()
                .chain(&self.excl1)
                .chain(&self.excl2)
                .map(Codebook::len),
        )?;
        if self.k0 != self.common.len() {
            return Err(Error::DimensionMismatch {
                expected: self.k0,
                actual: self.common.len(),
            });
        }
        Ok(TwoUserDesign {
            common: self.common.clone(),
            excl1: self.excl1.clone(),
            excl2: self.excl2.clone(),
        })
    }
}

/// Continuous preference description. `kind` is `uniform`, `dirichlet`
/// (needs `alpha`) or `radial` (optional `center`, default barycenter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSpecFile {
    pub kind: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

impl PreferenceSpecFile {
    pub fn to_spec(&self) -> Result<PreferenceSpec> {
        let spec = match self.kind.as_str() {
            "uniform" => PreferenceSpec::Uniform { n: self.n },
            "dirichlet" => {
                let alpha = self
                    .alpha
                    .clone()
                    .ok_or_else(|| Error::InvalidArgument("dirichlet needs alpha".into()))?;
                PreferenceSpec::Dirichlet { alpha }
            }
            "radial" => match &self.center {
                Some(c) => PreferenceSpec::Radial {
                    center: Spv::new(c.clone())?,
                },
                None => PreferenceSpec::radial_barycenter(self.n)?,
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown preference kind {other:?}"
                )))
            }
        };
        if spec.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: spec.n(),
            });
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn check_n(n: usize, lens: impl Iterator<Item = usize>) -> Result<()> {
    for l in lens {
        if l != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: l,
            });
        }
    }
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
