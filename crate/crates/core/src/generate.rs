//! Declarative space recipes and the deterministic generators behind them.
//!
//! A [`SpaceSpec`] serializes to a flat JSON object:
//!
//! ```json
//! {"family": "complete_bipartite", "params": {"m": 3, "n": 2, "r": 1.0},
//!  "scale": 1.0, "snowflake": 1.0, "seed": 0}
//! ```
//!
//! The generated metric is `scale * d_base^snowflake`.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{MagError, Result};
use crate::metric::FiniteMetricSpace;

/// Generators refuse to build spaces larger than this.
pub const MAX_POINTS: usize = 20_000;

/// An `l_p` exponent in `(0, inf]`. Serialized as a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpExponent(pub f64);

impl LpExponent {
    pub const INFINITY: LpExponent = LpExponent(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    /// `||x - y||_p^{min(1, p)}` for a coordinate difference iterator.
    pub fn distance<I: IntoIterator<Item = f64>>(self, diffs: I) -> f64 {
        let p = self.0;
        let diffs = diffs.into_iter().map(f64::abs);
        if p.is_infinite() {
            diffs.fold(0.0, f64::max)
        } else if p == 1.0 {
            diffs.sum()
        } else if p == 2.0 {
            diffs.map(|d| d * d).sum::<f64>().sqrt()
        } else if p < 1.0 {
            diffs.map(|d| d.powf(p)).sum()
        } else {
            diffs.map(|d| d.powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

impl fmt::Display for LpExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for LpExponent {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(LpExponent::INFINITY),
            other => other
                .parse::<f64>()
                .map(LpExponent)
                .map_err(|e| format!("bad exponent {s:?}: {e}")),
        }
    }
}

impl Serialize for LpExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for LpExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(LpExponent(x)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    /// `n` uniform points on `[0, length]`.
    IntervalNet { length: f64, n: usize },
    /// `n` Chebyshev-Lobatto points on `[0, length]`.
    ChebyshevNet { length: f64, n: usize },
    /// `n` equally spaced points on a circle, geodesic metric.
    CircleNet { circumference: f64, n: usize },
    /// Both endpoints of each of the `2^level` intervals of the middle-thirds
    /// construction on `[0, length]`.
    CantorNet { length: f64, level: u32 },
    /// The `m^dim` lattice in `[0,1]^dim` under `l_p`.
    GridNet { dim: usize, m: usize, p: LpExponent },
    /// Fibonacci lattice on a sphere, great-circle metric.
    SphereFibonacciNet { radius: f64, n: usize },
    /// Polar grid in the hyperbolic plane: the centre plus `rings` circles,
    /// ring `k` carrying `per_ring * k` points at radius `radius * k / rings`.
    HyperbolicDiskNet {
        radius: f64,
        rings: usize,
        per_ring: usize,
    },
    /// Shortest-path metric of `K_{m,n}` with all edges of length `r`.
    CompleteBipartite { m: usize, n: usize, r: f64 },
    /// Seeded random ultrametric on `leaves` points.
    UltrametricTree { leaves: usize },
    /// Path metric on all vertices of a seeded random weighted tree.
    WeightedTree { nodes: usize },
    /// Explicit coordinates under `l_p`.
    PointCloudLp { p: LpExponent, points: Vec<Vec<f64>> },
    /// `count` seeded uniform points in `[0,1]^dim` under `l_p`.
    RandomCloudLp {
        p: LpExponent,
        dim: usize,
        count: usize,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::IntervalNet { .. } => "interval_net",
            Family::ChebyshevNet { .. } => "chebyshev_net",
            Family::CircleNet { .. } => "circle_net",
            Family::CantorNet { .. } => "cantor_net",
            Family::GridNet { .. } => "grid_net",
            Family::SphereFibonacciNet { .. } => "sphere_fibonacci_net",
            Family::HyperbolicDiskNet { .. } => "hyperbolic_disk_net",
            Family::CompleteBipartite { .. } => "complete_bipartite",
            Family::UltrametricTree { .. } => "ultrametric_tree",
            Family::WeightedTree { .. } => "weighted_tree",
            Family::PointCloudLp { .. } => "point_cloud_lp",
            Family::RandomCloudLp { .. } => "random_cloud_lp",
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub snowflake: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SpaceSpec {
    pub fn new(family: Family) -> Self {
        SpaceSpec {
            family,
            scale: 1.0,
            snowflake: 1.0,
            seed: 0,
        }
    }

    pub fn scaled(mut self, t: f64) -> Self {
        self.scale = t;
        self
    }

    pub fn snowflaked(mut self, alpha: f64) -> Self {
        self.snowflake = alpha;
        self
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn interval(length: f64, n: usize) -> Self {
        Self::new(Family::IntervalNet { length, n })
    }

    pub fn complete_bipartite(m: usize, n: usize, r: f64) -> Self {
        Self::new(Family::CompleteBipartite { m, n, r })
    }

    pub fn grid(dim: usize, m: usize, p: f64) -> Self {
        Self::new(Family::GridNet {
            dim,
            m,
            p: LpExponent(p),
        })
    }

    pub fn check(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(MagError::NonpositiveScale(self.scale));
        }
        if !(self.snowflake > 0.0 && self.snowflake <= 1.0) {
            return Err(MagError::ExponentOutOfRange(format!(
                "snowflake exponent must lie in (0, 1], got {}",
                self.snowflake
            )));
        }
        let bad = |msg: String| Err(MagError::InvalidParams(msg));
        let positive = |name: &str, x: f64| -> Result<()> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                bad(format!("{name} must be positive and finite, got {x}"))
            }
        };
        let check_p = |p: LpExponent| -> Result<()> {
            if p.0 > 0.0 && !p.0.is_nan() {
                Ok(())
            } else {
                bad(format!("l_p exponent must lie in (0, inf], got {}", p.0))
            }
        };
        let count = match &self.family {
            Family::IntervalNet { length, n } | Family::ChebyshevNet { length, n } => {
                if *n > 1 {
                    positive("length", *length)?;
                }
                *n
            }
            Family::CircleNet { circumference, n } => {
                positive("circumference", *circumference)?;
                *n
            }
            Family::CantorNet { length, level } => {
                positive("length", *length)?;
                if *level > 20 {
                    return bad(format!("cantor level {level} too deep"));
                }
                2usize << level
            }
            Family::GridNet { dim, m, p } => {
                check_p(*p)?;
                if *dim < 1 {
                    return bad("grid dimension must be at least 1".into());
                }
                m.checked_pow(*dim as u32).unwrap_or(usize::MAX)
            }
            Family::SphereFibonacciNet { radius, n } => {
                positive("radius", *radius)?;
                *n
            }
            Family::HyperbolicDiskNet {
                radius,
                rings,
                per_ring,
            } => {
                if *rings > 0 {
                    positive("radius", *radius)?;
                    if *per_ring == 0 {
                        return bad("per_ring must be at least 1".into());
                    }
                }
                1 + per_ring * rings * (rings + 1) / 2
            }
            Family::CompleteBipartite { m, n, r } => {
                positive("edge length", *r)?;
                if *m == 0 || *n == 0 {
                    return bad("both sides of K_{m,n} must be nonempty".into());
                }
                m + n
            }
            Family::UltrametricTree { leaves } => *leaves,
            Family::WeightedTree { nodes } => *nodes,
            Family::PointCloudLp { p, points } => {
                check_p(*p)?;
                let dim = points.first().map_or(0, Vec::len);
                if points.iter().any(|x| x.len() != dim) {
                    return bad("point coordinates have inconsistent dimension".into());
                }
                if points.iter().flatten().any(|x| !x.is_finite()) {
                    return bad("non-finite coordinate".into());
                }
                points.len()
            }
            Family::RandomCloudLp { p, dim, count } => {
                check_p(*p)?;
                if *dim < 1 {
                    return bad("cloud dimension must be at least 1".into());
                }
                *count
            }
        };
        if count < 1 {
            return bad("a space needs at least one point".into());
        }
        if count > MAX_POINTS {
            return bad(format!("{count} points exceeds the limit of {MAX_POINTS}"));
        }
        Ok(())
    }

    /// The same family at refinement level `k` (point count, Cantor level,
    /// lattice side or ring count, depending on the family).
    pub fn refined(&self, k: usize) -> Result<SpaceSpec> {
        let mut out = self.clone();
        match &mut out.family {
            Family::IntervalNet { n, .. }
            | Family::ChebyshevNet { n, .. }
            | Family::CircleNet { n, .. }
            | Family::SphereFibonacciNet { n, .. } => *n = k,
            Family::CantorNet { level, .. } => *level = k as u32,
            Family::GridNet { m, .. } => *m = k,
            Family::HyperbolicDiskNet { rings, .. } => *rings = k,
            other => return Err(MagError::UnsupportedFamily(other.name().into())),
        }
        Ok(out)
    }

    /// A much denser net of the same compact space, used as a stand-in for
    /// the limit set when measuring Hausdorff gaps.
    pub(crate) fn reference_refinement(&self) -> Result<SpaceSpec> {
        let k = match &self.family {
            Family::IntervalNet { n, .. } | Family::ChebyshevNet { n, .. } => {
                8 * n.saturating_sub(1) + 1
            }
            Family::CircleNet { n, .. } | Family::SphereFibonacciNet { n, .. } => 8 * n,
            Family::CantorNet { level, .. } => *level as usize + 3,
            Family::GridNet { m, dim, .. } => {
                let factor = if *dim == 1 { 8 } else { 4 };
                factor * m.saturating_sub(1) + 1
            }
            Family::HyperbolicDiskNet { rings, .. } => 4 * rings,
            other => return Err(MagError::UnsupportedFamily(other.name().into())),
        };
        let mut out = self.refined(k)?;
        // the reference only needs ambient points; skip the size cap
        if let Family::CantorNet { level, .. } = &mut out.family {
            *level = (*level).min(20);
        }
        Ok(out)
    }

    pub(crate) fn ambient(&self) -> Result<Ambient> {
        let ambient = match &self.family {
            Family::IntervalNet { length, n } => Ambient::Line(
                (0..*n)
                    .map(|i| {
                        if *n == 1 {
                            0.0
                        } else {
                            length * i as f64 / (*n - 1) as f64
                        }
                    })
                    .collect(),
            ),
            Family::ChebyshevNet { length, n } => Ambient::Line(
                (0..*n)
                    .map(|j| {
                        if *n == 1 {
                            0.0
                        } else {
                            0.5 * length * (1.0 - (PI * j as f64 / (*n - 1) as f64).cos())
                        }
                    })
                    .collect(),
            ),
            Family::CantorNet { length, level } => Ambient::Line(cantor_endpoints(*length, *level)),
            Family::CircleNet { circumference, n } => Ambient::Circle {
                circumference: *circumference,
                arcs: (0..*n)
                    .map(|k| circumference * k as f64 / *n as f64)
                    .collect(),
            },
            Family::GridNet { dim, m, p } => {
                let side: Vec<f64> = (0..*m)
                    .map(|i| if *m == 1 { 0.0 } else { i as f64 / (*m - 1) as f64 })
                    .collect();
                let total = m.pow(*dim as u32);
                let points = (0..total)
                    .map(|mut idx| {
                        let mut x = vec![0.0; *dim];
                        for c in (0..*dim).rev() {
                            x[c] = side[idx % m];
                            idx /= m;
                        }
                        x
                    })
                    .collect();
                Ambient::Lp { p: *p, points }
            }
            Family::SphereFibonacciNet { radius, n } => {
                let golden = PI * (3.0 - 5f64.sqrt());
                let points = (0..*n)
                    .map(|i| {
                        let z = 1.0 - (2 * i + 1) as f64 / *n as f64;
                        let rho = (1.0 - z * z).max(0.0).sqrt();
                        let phi = golden * i as f64;
                        [rho * phi.cos(), rho * phi.sin(), z]
                    })
                    .collect();
                Ambient::Sphere {
                    radius: *radius,
                    points,
                }
            }
            Family::HyperbolicDiskNet {
                radius,
                rings,
                per_ring,
            } => {
                let mut points = vec![(0.0, 0.0)];
                for k in 1..=*rings {
                    let r = radius * k as f64 / *rings as f64;
                    let count = per_ring * k;
                    for j in 0..count {
                        points.push((r, 2.0 * PI * j as f64 / count as f64));
                    }
                }
                Ambient::Hyperbolic(points)
            }
            Family::PointCloudLp { p, points } => Ambient::Lp {
                p: *p,
                points: points.clone(),
            },
            Family::RandomCloudLp { p, dim, count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let points = (0..*count)
                    .map(|_| (0..*dim).map(|_| rng.random::<f64>()).collect())
                    .collect();
                Ambient::Lp { p: *p, points }
            }
            other => return Err(MagError::UnsupportedFamily(other.name().into())),
        };
        Ok(ambient)
    }

    /// Applies `scale * d^snowflake` to a base distance.
    pub(crate) fn transform(&self, d: f64) -> f64 {
        if self.snowflake == 1.0 {
            self.scale * d
        } else {
            self.scale * d.powf(self.snowflake)
        }
    }
}

/// Points of a geometric family in their ambient space.
#[derive(Clone, Debug)]
pub(crate) enum Ambient {
    Line(Vec<f64>),
    Circle { circumference: f64, arcs: Vec<f64> },
    Lp { p: LpExponent, points: Vec<Vec<f64>> },
    Sphere { radius: f64, points: Vec<[f64; 3]> },
    Hyperbolic(Vec<(f64, f64)>),
}

impl Ambient {
    pub(crate) fn len(&self) -> usize {
        match self {
            Ambient::Line(x) => x.len(),
            Ambient::Circle { arcs, .. } => arcs.len(),
            Ambient::Lp { points, .. } => points.len(),
            Ambient::Sphere { points, .. } => points.len(),
            Ambient::Hyperbolic(points) => points.len(),
        }
    }

    /// Base distance between point `i` of `self` and point `j` of `other`.
    /// Both must come from the same family and parameters.
    pub(crate) fn cross_distance(&self, i: usize, other: &Ambient, j: usize) -> f64 {
        match (self, other) {
            (Ambient::Line(a), Ambient::Line(b)) => (a[i] - b[j]).abs(),
            (
                Ambient::Circle {
                    circumference,
                    arcs: a,
                },
                Ambient::Circle { arcs: b, .. },
            ) => {
                let d = (a[i] - b[j]).abs() % circumference;
                d.min(circumference - d)
            }
            (Ambient::Lp { p, points: a }, Ambient::Lp { points: b, .. }) => {
                p.distance(a[i].iter().zip(&b[j]).map(|(x, y)| x - y))
            }
            (Ambient::Sphere { radius, points: a }, Ambient::Sphere { points: b, .. }) => {
                let (u, v) = (a[i], b[j]);
                let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                let cross = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
                radius * sin.atan2(dot)
            }
            (Ambient::Hyperbolic(a), Ambient::Hyperbolic(b)) => {
                let ((r1, t1), (r2, t2)) = (a[i], b[j]);
                // sinh(d/2)^2 = sinh((r1-r2)/2)^2 + sinh r1 sinh r2 sin((t1-t2)/2)^2,
                // the half-angle form of cosh d = cosh r1 cosh r2 - sinh r1 sinh r2 cos(t1-t2)
                let s = ((r1 - r2) / 2.0).sinh();
                let h = ((t1 - t2) / 2.0).sin();
                2.0 * (s * s + r1.sinh() * r2.sinh() * h * h).sqrt().asinh()
            }
            _ => panic!("cross_distance between different ambient kinds"),
        }
    }

    /// Directed Hausdorff distance from `self` to `other` in the base metric.
    pub(crate) fn directed_hausdorff(&self, other: &Ambient) -> f64 {
        if let (Ambient::Line(a), Ambient::Line(b)) = (self, other) {
            let mut sorted = b.clone();
            sorted.sort_by(f64::total_cmp);
            return a
                .iter()
                .map(|&x| {
                    let k = sorted.partition_point(|&y| y < x);
                    let mut best = f64::INFINITY;
                    if k < sorted.len() {
                        best = best.min(sorted[k] - x);
                    }
                    if k > 0 {
                        best = best.min(x - sorted[k - 1]);
                    }
                    best
                })
                .fold(0.0, f64::max);
        }
        (0..self.len())
            .map(|i| {
                (0..other.len())
                    .map(|j| self.cross_distance(i, other, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn hausdorff(&self, other: &Ambient) -> f64 {
        self.directed_hausdorff(other)
            .max(other.directed_hausdorff(self))
    }
}

fn cantor_endpoints(length: f64, level: u32) -> Vec<f64> {
    // left endpoints in units of 3^-level
    let mut lefts: Vec<u64> = vec![0];
    let mut width: u64 = 3u64.pow(level);
    for _ in 0..level {
        width /= 3;
        lefts = lefts
            .iter()
            .flat_map(|&l| [l, l + 2 * width])
            .collect();
    }
    let unit = length / 3f64.powi(level as i32);
    let mut points: Vec<f64> = lefts
        .iter()
        .flat_map(|&l| [l as f64 * unit, (l + 1) as f64 * unit])
        .collect();
    points.sort_by(f64::total_cmp);
    points
}

/// Builds the finite metric space described by `spec`. Deterministic: the
/// same spec, including the seed, gives a bit-identical matrix.
pub fn generate(spec: &SpaceSpec) -> Result<FiniteMetricSpace> {
    spec.check()?;
    let base = match &spec.family {
        Family::CompleteBipartite { m, n, r } => {
            let (m, r) = (*m, *r);
            let space = FiniteMetricSpace::from_fn(m + *n, |i, j| {
                if (i < m) == (j < m) {
                    2.0 * r
                } else {
                    r
                }
            });
            let labels = (0..m)
                .map(|i| format!("a{i}"))
                .chain((0..*n).map(|j| format!("b{j}")))
                .collect();
            space.with_labels(labels)?
        }
        Family::UltrametricTree { leaves } => ultrametric(*leaves, spec.seed),
        Family::WeightedTree { nodes } => weighted_tree(*nodes, spec.seed),
        _ => {
            let ambient = spec.ambient()?;
            FiniteMetricSpace::from_fn(ambient.len(), |i, j| ambient.cross_distance(i, &ambient, j))
        }
    };
    let space = if spec.scale == 1.0 && spec.snowflake == 1.0 {
        base
    } else {
        let labels = base.labels().to_vec();
        FiniteMetricSpace::from_fn(base.len(), |i, j| spec.transform(base.dist(i, j)))
            .with_labels(labels)?
    };
    Ok(space.with_provenance(Some(spec.clone())))
}

/// Random binary merge tree with strictly increasing merge heights; two
/// leaves are at distance twice the height of their lowest common ancestor.
fn ultrametric(leaves: usize, seed: u64) -> FiniteMetricSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dist = vec![vec![0.0; leaves]; leaves];
    let mut clusters: Vec<Vec<usize>> = (0..leaves).map(|i| vec![i]).collect();
    let mut height = 0.0;
    while clusters.len() > 1 {
        height += rng.random_range(0.05..0.5);
        let a = rng.random_range(0..clusters.len());
        let mut b = rng.random_range(0..clusters.len() - 1);
        if b >= a {
            b += 1;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let merged = clusters.swap_remove(hi);
        for &x in &clusters[lo] {
            for &y in &merged {
                dist[x][y] = 2.0 * height;
                dist[y][x] = 2.0 * height;
            }
        }
        clusters[lo].extend(merged);
    }
    FiniteMetricSpace::from_fn(leaves, |i, j| dist[i][j])
}

/// Random recursive tree: vertex `i` hangs off a uniform earlier vertex with
/// an edge length in `[0.1, 1)`.
fn weighted_tree(nodes: usize, seed: u64) -> FiniteMetricSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dist = vec![vec![0.0; nodes]; nodes];
    for i in 1..nodes {
        let parent = rng.random_range(0..i);
        let w = rng.random_range(0.1..1.0);
        for j in 0..i {
            let d = w + dist[parent][j];
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    FiniteMetricSpace::from_fn(nodes, |i, j| dist[i][j])
}
