//! Evaluated inequalities with their parameter record.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok { Verdict::Holds } else { Verdict::Fails }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::NotApplicable => "not-applicable",
        }
    }
}

/// Scalars entering the estimates. `ell` is the half-length of the segment
/// unless an operation says otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundParams {
    #[serde(with = "ext_f64")]
    pub ell: f64,
    #[serde(with = "ext_f64")]
    pub delta: f64,
    #[serde(with = "ext_f64")]
    pub h1: f64,
    #[serde(with = "ext_f64")]
    pub h2: f64,
    #[serde(with = "ext_f64")]
    pub lam1: f64,
    #[serde(with = "ext_f64")]
    pub lam2: f64,
    #[serde(with = "ext_f64")]
    pub k: f64,
    #[serde(with = "ext_f64")]
    pub eps: f64,
    /// Domain diameter.
    #[serde(with = "ext_f64")]
    pub diam: f64,
    /// Lipschitz bound on the potential.
    #[serde(with = "ext_f64")]
    pub linf: f64,
    #[serde(with = "ext_f64")]
    pub c: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            ell: 0.0,
            delta: 1.0,
            h1: 0.0,
            h2: 0.0,
            lam1: 1.0,
            lam2: 1.0,
            k: 1.0,
            eps: 0.0,
            diam: f64::INFINITY,
            linf: 1.0,
            c: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inequality: String,
    #[serde(with = "ext_f64")]
    pub lhs: f64,
    #[serde(with = "ext_f64")]
    pub rhs: f64,
    pub params: BoundParams,
    #[serde(default, with = "ext_f64::opt")]
    pub gamma: Option<f64>,
    pub verdict: Verdict,
    /// Named preconditions and whether each was met.
    #[serde(default)]
    pub preconditions: Vec<(String, bool)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundReport {
    pub fn new(inequality: &str, lhs: f64, rhs: f64, params: BoundParams) -> Self {
        BoundReport {
            inequality: inequality.to_string(),
            lhs,
            rhs,
            params,
            gamma: None,
            verdict: Verdict::from_bool(lhs <= rhs),
            preconditions: Vec::new(),
            witness: None,
            note: None,
        }
    }

    /// Records preconditions; any unmet one turns the verdict into not-applicable.
    pub fn with_preconditions(mut self, pre: Vec<(&str, bool)>) -> Self {
        if pre.iter().any(|(_, ok)| !ok) {
            self.verdict = Verdict::NotApplicable;
        }
        self.preconditions = pre.into_iter().map(|(n, ok)| (n.to_string(), ok)).collect();
        self
    }

    pub fn with_gamma(mut self, g: f64) -> Self {
        self.gamma = Some(g);
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn applicable(&self) -> bool {
        self.verdict != Verdict::NotApplicable
    }
}

/// `f64` that keeps infinities and NaN through JSON as strings.
pub mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("NaN")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(f) => Ok(f),
            Raw::S(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                _ => s.parse().map_err(serde::de::Error::custom),
            },
        }
    }

    pub mod opt {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct W(#[serde(with = "super")] f64);
            Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
        }
    }
}
