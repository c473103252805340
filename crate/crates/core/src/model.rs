//! Domain types: symbol probability vectors, codebooks and preferences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that probabilities sum to one.
pub const PROB_TOL: f64 = 1e-9;

/// Symbol probability vector of a content item over an `N`-symbol alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spv(Vec<f64>);

impl Spv {
    /// Validates `probs` (entries in `[0, 1]`, sum within [`PROB_TOL`] of one, `N >= 2`)
    /// and renormalizes by the sum.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidSpv(format!(
                "need at least 2 symbols, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0 + PROB_TOL)
        {
            return Err(Error::InvalidSpv(format!("entry {bad} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidSpv(format!("entries sum to {sum}")));
        }
        Ok(Spv(probs.into_iter().map(|p| p / sum).collect()))
    }

    /// Builds an SPV from arbitrary nonnegative weights by dividing by their sum.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSpv(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidSpv("weights sum to zero".into()));
        }
        Spv::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Spv {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Spv::new(v)
    }
}

impl From<Spv> for Vec<f64> {
    fn from(s: Spv) -> Self {
        s.0
    }
}

/// Implied-probability vector of a codebook: symbol `n` gets a codeword of
/// `-log2 q[n]` bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Codebook(Vec<f64>);

impl Codebook {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidCodebook("empty".into()));
        }
        if q.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidCodebook(
                "entries must be finite and nonnegative".into(),
            ));
        }
        if !kraft_check(&q) {
            let sum: f64 = q.iter().sum();
            return Err(Error::InvalidCodebook(format!("Kraft sum {sum} exceeds 1")));
        }
        if q.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidCodebook("all entries are zero".into()));
        }
        Ok(Codebook(q))
    }

    pub fn q(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&Spv> for Codebook {
    fn from(p: &Spv) -> Self {
        Codebook(p.0.clone())
    }
}

impl TryFrom<Vec<f64>> for Codebook {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Codebook::new(v)
    }
}

impl From<Codebook> for Vec<f64> {
    fn from(c: Codebook) -> Self {
        c.0
    }
}

/// True iff `sum(q) <= 1 + 1e-9`.
pub fn kraft_check(q: &[f64]) -> bool {
    q.iter().sum::<f64>() <= 1.0 + PROB_TOL
}

/// A nonempty list of codebooks over a common alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Codebook>", into = "Vec<Codebook>")]
pub struct CodebookSet(Vec<Codebook>);

impl CodebookSet {
    pub fn new(codebooks: Vec<Codebook>) -> Result<Self> {
        let first = codebooks
            .first()
            .ok_or_else(|| Error::InvalidCodebook("codebook set is empty".into()))?;
        let n = first.len();
        if let Some(bad) = codebooks.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        Ok(CodebookSet(codebooks))
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.0
    }

    pub fn get(&self, k: usize) -> &Codebook {
        &self.0[k]
    }

    /// Number of codebooks `K`.
    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// Alphabet size `N`.
    pub fn n(&self) -> usize {
        self.0[0].len()
    }
}

impl TryFrom<Vec<Codebook>> for CodebookSet {
    type Error = Error;

    fn try_from(v: Vec<Codebook>) -> Result<Self> {
        CodebookSet::new(v)
    }
}

impl From<CodebookSet> for Vec<Codebook> {
    fn from(s: CodebookSet) -> Self {
        s.0
    }
}

/// Discrete user preference: item `j` (with SPV `spvs[j]`) is requested with
/// probability `probs[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePreference {
    spvs: Vec<Spv>,
    probs: Vec<f64>,
}

impl DiscretePreference {
    pub fn new(spvs: Vec<Spv>, probs: Vec<f64>) -> Result<Self> {
        if spvs.is_empty() {
            return Err(Error::InvalidPreference("no items".into()));
        }
        if spvs.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: spvs.len(),
                actual: probs.len(),
            });
        }
        let n = spvs[0].len();
        if let Some(bad) = spvs.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        if probs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidPreference(
                "request probabilities must be nonnegative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidPreference(format!(
                "request probabilities sum to {sum}"
            )));
        }
        Ok(DiscretePreference { spvs, probs })
    }

    /// Normalizes positive request weights to probabilities.
    pub fn from_weights(spvs: Vec<Spv>, weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidPreference(
                "weights must have a positive finite sum".into(),
            ));
        }
        DiscretePreference::new(spvs, weights.into_iter().map(|w| w / sum).collect())
    }

    /// Every item requested with probability `1/J`.
    pub fn uniform(spvs: Vec<Spv>) -> Result<Self> {
        let j = spvs.len();
        DiscretePreference::new(spvs, vec![1.0 / j as f64; j])
    }

    pub fn spvs(&self) -> &[Spv] {
        &self.spvs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of items `J`.
    pub fn len(&self) -> usize {
        self.spvs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spvs.is_empty()
    }

    /// Alphabet size `N`.
    pub fn n(&self) -> usize {
        self.spvs[0].len()
    }

    /// Restriction to a subset of items, renormalized.
    pub fn restrict(&self, members: &[usize]) -> Result<Self> {
        let spvs = members.iter().map(|&j| self.spvs[j].clone()).collect();
        let w = members.iter().map(|&j| self.probs[j]).collect();
        DiscretePreference::from_weights(spvs, w)
    }
}

/// Owner codebook index of every item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartitionAssignment {
    pub owner: Vec<usize>,
}

impl PartitionAssignment {
    pub fn new(owner: Vec<usize>) -> Self {
        PartitionAssignment { owner }
    }

    /// Item indices owned by codebook `k`.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == k)
            .map(|(j, _)| j)
            .collect()
    }
}

/// A content item: `L` symbol indices from an `N`-symbol alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemSpec {
    symbols: Vec<usize>,
    n: usize,
}

impl ItemSpec {
    pub fn new(symbols: Vec<usize>, n: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidArgument(
                "item must contain at least one symbol".into(),
            ));
        }
        if let Some(bad) = symbols.iter().find(|&&s| s >= n) {
            return Err(Error::InvalidArgument(format!(
                "symbol {bad} outside alphabet of size {n}"
            )));
        }
        Ok(ItemSpec { symbols, n })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    /// Number of symbols `L`.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Alphabet size `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Empirical symbol histogram.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n];
        for &s in &self.symbols {
            c[s] += 1;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spv_renormalizes_within_tolerance() {
        let p = Spv::new(vec![0.5 + 4e-10, 0.5]).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(Spv::new(vec![0.5, 0.6]).is_err());
        assert!(Spv::new(vec![1.0]).is_err());
        assert!(Spv::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn codebook_rejects_kraft_violations() {
        assert!(Codebook::new(vec![0.75, 0.5]).is_err());
        assert!(Codebook::new(vec![0.5, 0.25, 0.125]).is_ok());
        assert!(Codebook::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn kraft_examples() {
        assert!(kraft_check(&[0.5, 0.5]));
        assert!(!kraft_check(&[0.75, 0.5]));
        assert!(kraft_check(&[0.5, 0.25, 0.125]));
    }

    #[test]
    fn preference_validation() {
        let p = Spv::new(vec![0.5, 0.5]).unwrap();
        let q = Spv::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert!(DiscretePreference::new(vec![p.clone()], vec![0.9]).is_err());
        assert!(DiscretePreference::new(vec![p.clone(), q], vec![0.5, 0.5]).is_err());
        let pref = DiscretePreference::from_weights(vec![p.clone(), p], vec![3.0, 1.0]).unwrap();
        assert_eq!(pref.probs(), &[0.75, 0.25]);
    }

    #[test]
    fn item_bounds() {
        assert!(ItemSpec::new(vec![0, 3], 3).is_err());
        assert_eq!(
            ItemSpec::new(vec![0, 2, 2], 3).unwrap().counts(),
            vec![1, 0, 2]
        );
    }
}
