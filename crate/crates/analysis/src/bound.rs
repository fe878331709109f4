//! Labelled bound values, as exported in epsilon curves.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Property {
    Validity,
    Totality,
    Consistency,
    GossipTotality,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Validity => "validity",
            Property::Totality => "totality",
            Property::Consistency => "consistency",
            Property::GossipTotality => "gossip-totality",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "validity" => Ok(Property::Validity),
            "totality" => Ok(Property::Totality),
            "consistency" => Ok(Property::Consistency),
            "gossip-totality" => Ok(Property::GossipTotality),
            _ => Err(format!("unknown property {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    Markov,
    MonteCarlo { samples: u64 },
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Markov => "markov",
            Method::MonteCarlo { .. } => "monte-carlo",
        }
    }

    pub fn samples(self) -> Option<u64> {
        match self {
            Method::MonteCarlo { samples } => Some(samples),
            _ => None,
        }
    }
}

/// Echo, ready and delivery sample sizes with their thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleSizes {
    pub e: usize,
    pub e_hat: usize,
    pub r: usize,
    pub r_hat: usize,
    pub d: usize,
    pub d_hat: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub n: usize,
    pub f: f64,
    pub g: Option<f64>,
    pub sizes: Option<SampleSizes>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonBound {
    pub property: Property,
    pub params: BoundParams,
    pub epsilon: f64,
    pub method: Method,
    /// Intermediate terms, in the order they were composed.
    pub terms: Vec<(&'static str, f64)>,
}

impl EpsilonBound {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == name).map(|t| t.1)
    }
}
