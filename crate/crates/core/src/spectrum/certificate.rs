use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertKind {
    AlphaDc,
    ThetaDc,
    Separation,
    Transversality,
    Cluster,
    AdmissibleM,
}

impl CertKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CertKind::AlphaDc => "alpha_dc",
            CertKind::ThetaDc => "theta_dc",
            CertKind::Separation => "separation",
            CertKind::Transversality => "transversality",
            CertKind::Cluster => "cluster",
            CertKind::AdmissibleM => "admissible_m",
        }
    }
}

/// An extremal instance: the index tuple and the value it attains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub index: Vec<i64>,
    pub value: f64,
}

/// Outcome of checking one family of inequalities.
///
/// `margin` is the worst-case slack; it is positive exactly when every
/// checked instance satisfies its inequality strictly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertKind,
    pub inputs: Vec<(String, Vec<f64>)>,
    pub margin: f64,
    pub witnesses: Vec<Witness>,
    /// Derived quantities worth reporting next to the margin.
    pub details: Vec<(String, f64)>,
    /// Shape checks with unspecified constants are reported but not gated.
    pub hard_gate: bool,
}

impl Certificate {
    pub fn new(kind: CertKind) -> Self {
        Self { kind, inputs: Vec::new(), margin: f64::INFINITY, witnesses: Vec::new(), details: Vec::new(), hard_gate: true }
    }

    pub fn input(mut self, name: &str, value: impl Into<Vec<f64>>) -> Self {
        self.inputs.push((name.to_string(), value.into()));
        self
    }

    pub fn detail(mut self, name: &str, value: f64) -> Self {
        self.details.push((name.to_string(), value));
        self
    }

    pub fn passed(&self) -> bool {
        self.margin > 0.0
    }

    pub fn detail_value(&self, name: &str) -> Option<f64> {
        self.details.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Passes, or is a soft check.
    pub fn gate_ok(&self) -> bool {
        !self.hard_gate || self.passed()
    }
}
