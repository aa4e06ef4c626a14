//! Scenario descriptions and the measures they generate.

use num_traits::{One, Signed};
use otlab_core::measures::{make_lattice, WeightedPointCloud};
use otlab_core::rational::{q, qi, QS};
use otlab_core::{Point2, Rect, Q};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Axis-aligned box `[x0, x1] × [y0, y1]`.
pub type BoxSpec = [QS; 4];

pub fn rect_of(b: &BoxSpec) -> Rect {
    Rect::axis(b[0].0.clone(), b[1].0.clone(), b[2].0.clone(), b[3].0.clone())
}

/// A discrete measure of unit total mass (lattices) or explicit atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Grid of step `h` on the scenario domain, then `x ↦ A x`.
    Lattice {
        h: QS,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map: Option<[[QS; 2]; 2]>,
    },
    /// As `Lattice`, each atom moved by an exact rational offset of length
    /// at most `h/4` drawn from a stream keyed by (seed, atom index).
    Perturbed {
        h: QS,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map: Option<[[QS; 2]; 2]>,
    },
    /// `[x, y, mass]` triples.
    Cloud { atoms: Vec<[QS; 3]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub c_main: f64,
    pub c_up: f64,
    pub c_low: f64,
    pub c_flat: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { c_main: 1.0, c_up: 1.0, c_low: 1.0, c_flat: 1.0 }
    }
}

/// How `K` is measured for a segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMode {
    /// `diam ∂ψ` over the closed δ-neighbourhood of the segment.
    #[default]
    Sharp,
    /// `diam ∂ψ(Ω)`.
    Domain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub domain: BoxSpec,
    pub source: MeasureSpec,
    pub target: MeasureSpec,
    /// Where the target is certified; the target's bounding box if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_domain: Option<BoxSpec>,
    pub delta: QS,
    pub h1: QS,
    pub h2: QS,
    pub lam1: QS,
    pub lam2: QS,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default = "default_angles")]
    pub angle_grid: usize,
    #[serde(default)]
    pub k_mode: KMode,
    /// Segments `[[x, y], [x, y]]` to test; a default family when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<[[QS; 2]; 2]>>,
}

fn default_angles() -> usize {
    8
}

const SOURCE_SALT: u64 = 0x736f_7572_6365;
const TARGET_SALT: u64 = 0x7461_7267_6574;

impl Scenario {
    /// Lattice-to-lattice scenario on `[0,1]²` with step `1/d`, target mapped
    /// by `map`, and the same scale on both sides.
    pub fn lattice(id: &str, d: i64, map: Option<[[Q; 2]; 2]>) -> Self {
        let h = QS(q(1, d));
        let wrap = |m: [[Q; 2]; 2]| m.map(|r| r.map(QS));
        Scenario {
            id: id.to_string(),
            domain: [QS(qi(0)), QS(qi(1)), QS(qi(0)), QS(qi(1))],
            source: MeasureSpec::Lattice { h: h.clone(), map: None },
            target: MeasureSpec::Lattice { h: h.clone(), map: map.map(wrap) },
            target_domain: None,
            delta: QS(q(1, 2)),
            h1: h.clone(),
            h2: h,
            lam1: QS(qi(8)),
            lam2: QS(qi(4)),
            seed: 0,
            constants: Constants::default(),
            angle_grid: default_angles(),
            k_mode: KMode::Sharp,
            segments: None,
        }
    }

    pub fn omega(&self) -> Rect {
        rect_of(&self.domain)
    }

    pub fn validate(&self) -> Result<(), String> {
        let [x0, x1, y0, y1] = &self.domain;
        if x0.0 >= x1.0 || y0.0 >= y1.0 {
            return Err("domain box is empty".into());
        }
        if let Some([a, b, c, d]) = &self.target_domain {
            if a.0 >= b.0 || c.0 >= d.0 {
                return Err("target domain box is empty".into());
            }
        }
        for (name, v) in [("delta", &self.delta), ("h1", &self.h1), ("h2", &self.h2), ("lam1", &self.lam1), ("lam2", &self.lam2)] {
            if !v.0.is_positive() {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.angle_grid == 0 {
            return Err("angle_grid must be at least 1".into());
        }
        Ok(())
    }

    pub fn source_measure(&self) -> Result<WeightedPointCloud, String> {
        realize(&self.source, &self.omega(), self.seed ^ SOURCE_SALT)
    }

    pub fn target_measure(&self) -> Result<WeightedPointCloud, String> {
        realize(&self.target, &self.omega(), self.seed ^ TARGET_SALT)
    }

    /// The segments to test, each inside the domain.
    pub fn segment_family(&self) -> Vec<(Point2, Point2)> {
        if let Some(s) = &self.segments {
            return s
                .iter()
                .map(|[a, b]| (Point2::new(a[0].0.clone(), a[1].0.clone()), Point2::new(b[0].0.clone(), b[1].0.clone())))
                .collect();
        }
        default_segments(&self.omega())
    }
}

/// Horizontal segments of length `W/2`, `3W/4` and `W`, flush left and
/// right, on five rows in the lower half of the box.
pub fn default_segments(omega: &Rect) -> Vec<(Point2, Point2)> {
    let (x0, y0) = (&omega.center.x - &omega.half_w, &omega.center.y - &omega.half_h);
    let (w, h) = (omega.width(), omega.height());
    let mut out = Vec::new();
    for row in 0..5 {
        let y = &y0 + &h * q(row, 8);
        for k in [2, 3, 4] {
            let len = &w * q(k, 4);
            let left = Point2::new(x0.clone(), y.clone());
            out.push((left.clone(), Point2::new(&x0 + &len, y.clone())));
            if k < 4 {
                let right = &x0 + &w;
                out.push((Point2::new(&right - &len, y.clone()), Point2::new(right, y.clone())));
            }
        }
    }
    out
}

fn apply_map(m: &[[QS; 2]; 2], p: &Point2) -> Point2 {
    Point2::new(&m[0][0].0 * &p.x + &m[0][1].0 * &p.y, &m[1][0].0 * &p.x + &m[1][1].0 * &p.y)
}

fn unit_lattice(h: &Q, omega: &Rect) -> Result<WeightedPointCloud, String> {
    let grid = make_lattice(omega, h, &Q::one()).map_err(|e| e.to_string())?;
    let n = grid.len() as i64;
    grid.scale_masses(&q(1, n)).map_err(|e| e.to_string())
}

/// Exact offset of length ≤ `r`: rejection sampling on a dyadic grid of the
/// square, one ChaCha stream per atom.
fn jitter(seed: u64, index: u64, r: &Q) -> Point2 {
    const DEN: i64 = 1 << 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    loop {
        let u = rng.gen_range(-DEN..=DEN);
        let v = rng.gen_range(-DEN..=DEN);
        if u * u + v * v <= DEN * DEN {
            return Point2::new(r * q(u, DEN), r * q(v, DEN));
        }
    }
}

pub fn realize(spec: &MeasureSpec, omega: &Rect, seed: u64) -> Result<WeightedPointCloud, String> {
    match spec {
        MeasureSpec::Lattice { h, map } => {
            let grid = unit_lattice(&h.0, omega)?;
            match map {
                Some(m) => grid.map_points(|p| apply_map(m, p)).map_err(|e| e.to_string()),
                None => Ok(grid),
            }
        }
        MeasureSpec::Perturbed { h, map } => {
            let grid = unit_lattice(&h.0, omega)?;
            let r = &h.0 / qi(4);
            let atoms = grid
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, (p, m))| {
                    let p = p.add(&jitter(seed, i as u64, &r));
                    (map.as_ref().map_or(p.clone(), |a| apply_map(a, &p)), m.clone())
                })
                .collect();
            WeightedPointCloud::new(atoms).map_err(|e| e.to_string())
        }
        MeasureSpec::Cloud { atoms } => {
            if atoms.iter().any(|[_, _, m]| m.0.is_negative()) {
                return Err("negative atom mass".into());
            }
            WeightedPointCloud::new(atoms.iter().map(|[x, y, m]| (Point2::new(x.0.clone(), y.0.clone()), m.0.clone())).collect())
                .map_err(|e| e.to_string())
        }
    }
}
