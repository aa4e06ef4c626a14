//! JSON documents for potentials and plans. Rationals travel as `"p/q"` strings.

use serde::{Deserialize, Serialize};

use crate::error::GeomError;
use crate::geometry::{Point2, PwlFunction};
use crate::measures::WeightedPointCloud;
use crate::rational::QS;
use crate::transport::TransportPlan;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwlJson {
    pub samples: Vec<[QS; 3]>,
    /// Boundary ring of each affine piece, counterclockwise.
    #[serde(default)]
    pub facets: Vec<Vec<usize>>,
    #[serde(default)]
    pub gradients: Vec<[QS; 2]>,
}

impl PwlJson {
    pub fn from_pwl(f: &PwlFunction) -> Self {
        PwlJson {
            samples: f
                .points()
                .iter()
                .zip(f.values())
                .map(|(p, v)| [QS(p.x.clone()), QS(p.y.clone()), QS(v.clone())])
                .collect(),
            facets: f.facets().iter().map(|t| t.ring.clone()).collect(),
            gradients: f.facets().iter().map(|t| [QS(t.grad.x.clone()), QS(t.grad.y.clone())]).collect(),
        }
    }

    /// Rebuilds the function from its samples; facet data is recomputed.
    pub fn to_pwl(&self) -> Result<PwlFunction, GeomError> {
        PwlFunction::build(self.samples.iter().map(|[x, y, v]| (Point2::new(x.0.clone(), y.0.clone()), v.0.clone())).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanJson {
    pub entries: Vec<(usize, usize, QS)>,
}

impl PlanJson {
    pub fn from_plan(p: &TransportPlan) -> Self {
        PlanJson { entries: p.entries.iter().map(|(i, j, m)| (*i, *j, QS(m.clone()))).collect() }
    }

    pub fn to_plan(&self, source: &WeightedPointCloud, target: &WeightedPointCloud) -> Result<TransportPlan, GeomError> {
        if let Some((i, j, _)) = self.entries.iter().find(|(i, j, _)| *i >= source.len() || *j >= target.len()) {
            return Err(GeomError::Invalid(format!("plan entry ({i}, {j}) out of range")));
        }
        Ok(TransportPlan {
            entries: self.entries.iter().map(|(i, j, m)| (*i, *j, m.0.clone())).collect(),
            source: source.clone(),
            target: target.clone(),
        })
    }
}
