//! I.i.d. disorder: distribution families, exact log-moment generating
//! functions, field sampling and the `η = e^{βω+h} − 1` transform.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{inverse_normal_cdf, Cursor, SiteId, StreamKey};

/// Largest exponent accepted by [`eta_transform`] and the partition functions.
pub const EXPONENT_LIMIT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    StandardGaussian,
    Rademacher,
    /// `E − 1` with `E` a unit exponential.
    CenteredExponential,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::StandardGaussian,
        Family::Rademacher,
        Family::CenteredExponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::StandardGaussian => "standard-gaussian",
            Family::Rademacher => "rademacher",
            Family::CenteredExponential => "centered-exponential",
        }
    }

    /// Closed interval of β on which `log_mgf` is evaluated.
    pub fn admissible(self) -> (f64, f64) {
        match self {
            Family::StandardGaussian => (-25.0, 25.0),
            Family::Rademacher => (-300.0, 300.0),
            Family::CenteredExponential => (-300.0, 0.9),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown disorder family `{s}`")))
    }
}

/// Law of a single disorder variable ω (mean 0, variance 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct DisorderSpec {
    pub family: Family,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    family: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

impl TryFrom<SpecRepr> for DisorderSpec {
    type Error = Error;

    fn try_from(repr: SpecRepr) -> Result<Self> {
        let family = repr.family.parse()?;
        if let Some(name) = repr.params.keys().next() {
            return Err(Error::Input(format!(
                "family `{}` takes no parameters (got `{name}`)",
                repr.family
            )));
        }
        Ok(DisorderSpec { family })
    }
}

impl From<DisorderSpec> for SpecRepr {
    fn from(spec: DisorderSpec) -> Self {
        SpecRepr {
            family: spec.family.name().to_string(),
            params: BTreeMap::new(),
        }
    }
}

impl Default for DisorderSpec {
    fn default() -> Self {
        DisorderSpec::gaussian()
    }
}

impl DisorderSpec {
    pub fn new(family: Family) -> Self {
        DisorderSpec { family }
    }

    pub fn gaussian() -> Self {
        Self::new(Family::StandardGaussian)
    }

    pub fn rademacher() -> Self {
        Self::new(Family::Rademacher)
    }

    pub fn exponential() -> Self {
        Self::new(Family::CenteredExponential)
    }

    /// Maps a uniform variate to ω by the quantile function of the family.
    ///
    /// All families consume exactly one uniform per site, and the same
    /// uniform yields comonotone values across families.
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        match self.family {
            Family::StandardGaussian => inverse_normal_cdf(u),
            Family::Rademacher => {
                if u < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            Family::CenteredExponential => -(-u).ln_1p() - 1.0,
        }
    }

    /// Exact mean of `e^{βω+h} − 1`.
    pub fn eta_mean(&self, beta: f64, h: f64) -> Result<f64> {
        Ok((log_mgf(self, beta)? + h).exp_m1())
    }

    /// Exact variance of `e^{βω+h} − 1`.
    pub fn eta_variance(&self, beta: f64, h: f64) -> Result<f64> {
        let m1 = log_mgf(self, beta)?;
        let m2 = log_mgf(self, 2.0 * beta)?;
        Ok((2.0 * (h + m1)).exp() * (m2 - 2.0 * m1).exp_m1())
    }

    /// `λ(β) = M(2β) − 2M(β)`, the log of the replica interaction `E[e^{2βω}]/E[e^{βω}]^2`.
    pub fn replica_exponent(&self, beta: f64) -> Result<f64> {
        Ok(log_mgf(self, 2.0 * beta)? - 2.0 * log_mgf(self, beta)?)
    }
}

/// `M(β) = log E[e^{βω}]` in closed form.
pub fn log_mgf(spec: &DisorderSpec, beta: f64) -> Result<f64> {
    let (lo, hi) = spec.family.admissible();
    if !(lo..=hi).contains(&beta) {
        return Err(Error::Domain(format!(
            "β = {beta} outside the admissible interval [{lo}, {hi}] of the {} family",
            spec.family
        )));
    }
    Ok(match spec.family {
        Family::StandardGaussian => 0.5 * beta * beta,
        Family::Rademacher => {
            // log cosh, stable for large |β|
            let a = beta.abs();
            a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
        }
        Family::CenteredExponential => -beta - (-beta).ln_1p(),
    })
}

/// Index set of a field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SiteSet {
    /// Consecutive labels `first, first + 1, …, first + len − 1`.
    Range { first: u64, len: usize },
    List(Vec<SiteId>),
}

impl SiteSet {
    /// The sites `1..=n` of a one-dimensional model.
    pub fn line(n: usize) -> Self {
        SiteSet::Range { first: 1, len: n }
    }

    pub fn len(&self) -> usize {
        match self {
            SiteSet::Range { len, .. } => *len,
            SiteSet::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> SiteId {
        match self {
            SiteSet::Range { first, .. } => SiteId(first + i as u64),
            SiteSet::List(v) => v[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SiteId> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// A sampled environment `(ω_x)` together with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderField {
    pub spec: DisorderSpec,
    pub sites: SiteSet,
    pub values: Vec<f64>,
    pub key: StreamKey,
}

impl DisorderField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// A field with prescribed values, used by enumeration oracles.
    pub fn from_values(spec: DisorderSpec, sites: SiteSet, values: Vec<f64>) -> Result<Self> {
        if sites.len() != values.len() {
            return Err(Error::Input(format!(
                "{} values for {} sites",
                values.len(),
                sites.len()
            )));
        }
        Ok(DisorderField {
            spec,
            sites,
            values,
            key: StreamKey::new(0, 0),
        })
    }
}

/// Draws one ω per site, each a function of `(key, site)` only.
pub fn sample_field(spec: &DisorderSpec, sites: &SiteSet, key: StreamKey) -> Result<DisorderField> {
    if sites.is_empty() {
        return Err(Error::Input("cannot sample a field on an empty site set".into()));
    }
    let mut cursor = key.cursor();
    let values = match sites {
        SiteSet::Range { first, len } => {
            cursor.seek(SiteId(*first));
            (0..*len).map(|_| spec.quantile(cursor.next_uniform())).collect()
        }
        SiteSet::List(list) => list
            .iter()
            .map(|&s| spec.quantile(cursor.uniform_at(s)))
            .collect(),
    };
    Ok(DisorderField {
        spec: *spec,
        sites: sites.clone(),
        values,
        key,
    })
}

/// Lazily evaluated environment, sampled site by site on demand.
///
/// Produces the same values as [`sample_field`] for the same key and sites.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Environment {
    pub spec: DisorderSpec,
    pub key: StreamKey,
}

impl Environment {
    pub fn new(spec: DisorderSpec, key: StreamKey) -> Self {
        Environment { spec, key }
    }

    pub fn reader(&self) -> EnvironmentReader {
        EnvironmentReader {
            spec: self.spec,
            cursor: self.key.cursor(),
        }
    }
}

pub struct EnvironmentReader {
    spec: DisorderSpec,
    cursor: Cursor,
}

impl EnvironmentReader {
    pub fn omega(&mut self, site: SiteId) -> f64 {
        self.spec.quantile(self.cursor.uniform_at(site))
    }

    /// Fills `out` with ω at the consecutive labels starting at `first`.
    pub fn fill_run(&mut self, first: SiteId, out: &mut [f64]) {
        self.cursor.seek(first);
        for slot in out.iter_mut() {
            *slot = self.spec.quantile(self.cursor.next_uniform());
        }
    }

    /// Like [`fill_run`](Self::fill_run) for labels `first, first + 2, …`.
    pub fn fill_run_stride2(&mut self, first: SiteId, out: &mut [f64]) {
        self.cursor.seek(first);
        for slot in out.iter_mut() {
            *slot = self.spec.quantile(self.cursor.next_uniform());
            self.cursor.next_u64();
        }
    }
}

/// `η_x = e^{βω_x + h} − 1` on the sites of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaField {
    pub sites: SiteSet,
    pub values: Vec<f64>,
    pub beta: f64,
    pub h: f64,
}

impl EtaField {
    /// Looks a value up by label (linear in the number of sites for lists).
    pub fn get(&self, site: SiteId) -> Option<f64> {
        match &self.sites {
            SiteSet::Range { first, len } => {
                let i = site.0.checked_sub(*first)? as usize;
                (i < *len).then(|| self.values[i])
            }
            SiteSet::List(list) => list.iter().position(|&s| s == site).map(|i| self.values[i]),
        }
    }

    /// Same field with every η multiplied by `c`.
    pub fn scaled(&self, c: f64) -> EtaField {
        EtaField {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

pub fn eta_transform(field: &DisorderField, beta: f64, h: f64) -> Result<EtaField> {
    if !beta.is_finite() || !h.is_finite() {
        return Err(Error::Input(format!("β = {beta}, h = {h} must be finite")));
    }
    let mut values = Vec::with_capacity(field.len());
    for (i, &w) in field.values.iter().enumerate() {
        let exponent = beta * w + h;
        if exponent > EXPONENT_LIMIT {
            return Err(Error::Overflow {
                site: field.sites.get(i).0,
                exponent,
            });
        }
        values.push(exponent.exp_m1());
    }
    Ok(EtaField {
        sites: field.sites.clone(),
        values,
        beta,
        h,
    })
}
