//! Closed-form solutions, the sharp Sobolev constant, coupling matrices, and
//! the explicit families of coupled systems built from scalar solutions.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::fields::{same_grid, Field, PMap};
use crate::geometry::{sphere_volume, ManifoldModel, Model, ModelKind};

/// Critical Sobolev exponent `2* = 2n/(n-2)`.
pub fn critical_exponent(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0)
}

/// Potential of the conformal Laplacian of the round sphere, `n(n-2)/4`.
pub fn sphere_potential(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 2.0) / 4.0
}

/// The constant positive solution of `Δu + n(n-2)/4 u = u^{2*-1}`.
pub fn constant_yamabe_value(n: usize) -> f64 {
    sphere_potential(n).powf((n as f64 - 2.0) / 4.0)
}

/// Sharp constant of `‖u‖_{2*} ≤ K_n ‖∇u‖_2` on ℝⁿ.
pub fn sharp_constant(n: usize) -> Result<f64> {
    if n < 3 {
        return domain(format!("sharp constant needs n >= 3, got {n}"));
    }
    let nf = n as f64;
    let om = sphere_volume(n)?;
    Ok((4.0 / (nf * (nf - 2.0) * om.powf(2.0 / nf))).sqrt())
}

/// A symmetric p×p matrix, either constant or given per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    p: usize,
    nodes: Option<usize>,
    data: Vec<f64>,
}

fn check_symmetric(p: usize, m: &[f64]) -> Result<()> {
    if let Some(v) = m.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("coupling entry {v} is not finite")));
    }
    for a in 0..p {
        for b in a + 1..p {
            if m[a * p + b] != m[b * p + a] {
                return config(format!("coupling is not symmetric in entry ({a},{b})"));
            }
        }
    }
    Ok(())
}

impl Coupling {
    /// Constant coupling from a row-major p×p matrix.
    pub fn constant(p: usize, matrix: Vec<f64>) -> Result<Self> {
        if p == 0 || matrix.len() != p * p {
            return Err(Error::Shape(format!("expected {} entries for p = {p}", p * p)));
        }
        check_symmetric(p, &matrix)?;
        Ok(Self { p, nodes: None, data: matrix })
    }

    pub fn scaled_identity(p: usize, c: f64) -> Result<Self> {
        let mut m = vec![0.0; p * p];
        for i in 0..p {
            m[i * p + i] = c;
        }
        Self::constant(p, m)
    }

    /// Coupling varying over nodes; `per_node[j]` is row-major p×p.
    pub fn nodal(p: usize, per_node: Vec<Vec<f64>>) -> Result<Self> {
        let nodes = per_node.len();
        let mut data = Vec::with_capacity(nodes * p * p);
        for m in &per_node {
            if m.len() != p * p {
                return Err(Error::Shape(format!("expected {} entries for p = {p}", p * p)));
            }
            check_symmetric(p, m)?;
            data.extend_from_slice(m);
        }
        if p == 0 || nodes == 0 {
            return Err(Error::Shape("empty coupling".into()));
        }
        Ok(Self { p, nodes: Some(nodes), data })
    }

    /// Diagonal coupling with the given fields as potentials.
    pub fn diagonal(potentials: &[Field]) -> Result<Self> {
        let p = potentials.len();
        if p == 0 {
            return Err(Error::Shape("empty coupling".into()));
        }
        let n = potentials[0].len();
        let per_node = (0..n)
            .map(|j| {
                let mut m = vec![0.0; p * p];
                for (i, f) in potentials.iter().enumerate() {
                    m[i * p + i] = f.values()[j];
                }
                m
            })
            .collect();
        Self::nodal(p, per_node)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_constant(&self) -> bool {
        self.nodes.is_none()
    }

    pub fn node_count(&self) -> Option<usize> {
        self.nodes
    }

    /// Row-major matrix at node j (the shared matrix when constant).
    pub fn at(&self, j: usize) -> &[f64] {
        let pp = self.p * self.p;
        match self.nodes {
            None => &self.data,
            Some(_) => &self.data[j * pp..(j + 1) * pp],
        }
    }

    pub fn entry(&self, j: usize, a: usize, b: usize) -> f64 {
        self.at(j)[a * self.p + b]
    }

    fn matrices(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.p * self.p)
    }

    /// Largest absolute value of entry (a, b) over nodes.
    pub fn sup_entry(&self, a: usize, b: usize) -> f64 {
        self.matrices().fold(0.0, |m, x| m.max(x[a * self.p + b].abs()))
    }

    /// Largest absolute entry over all nodes.
    pub fn sup_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks that the coupling can be evaluated on a map with `p` components
    /// over `nodes` grid points.
    pub fn check_shape(&self, p: usize, nodes: usize) -> Result<()> {
        if p != self.p {
            return Err(Error::Shape(format!("coupling is {}×{0}, map has {p} components", self.p)));
        }
        if let Some(k) = self.nodes {
            if k != nodes {
                return Err(Error::Shape(format!("coupling has {k} nodes, grid has {nodes}")));
            }
        }
        Ok(())
    }

    /// `out = A(x_j) x`.
    pub fn apply_at(&self, j: usize, x: &[f64], out: &mut [f64]) {
        let m = self.at(j);
        for a in 0..self.p {
            out[a] = (0..self.p).map(|b| m[a * self.p + b] * x[b]).sum();
        }
    }

    pub fn map_entries(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let p = self.p;
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let r = k % (p * p);
                f(r / p, r % p, v)
            })
            .collect();
        Self { p, nodes: self.nodes, data }
    }

    pub fn negated(&self) -> Self {
        self.map_entries(|_, _, v| -v)
    }

    /// Relabels components: entry (a, b) of the result is entry
    /// (perm[a], perm[b]) of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let p = self.p;
        let mut seen = vec![false; p];
        if perm.len() != p || perm.iter().any(|&i| i >= p || std::mem::replace(&mut seen[i], true)) {
            return config("not a permutation");
        }
        let data = self
            .matrices()
            .flat_map(|m| {
                (0..p * p).map(move |k| m[perm[k / p] * p + perm[k % p]])
            })
            .collect();
        Ok(Self { p, nodes: self.nodes, data })
    }

    /// `self + t·other`, broadcasting constants.
    pub fn add_scaled(&self, t: f64, other: &Coupling) -> Result<Self> {
        if self.p != other.p {
            return Err(Error::Shape("couplings differ in size".into()));
        }
        let nodes = match (self.nodes, other.nodes) {
            (Some(a), Some(b)) if a != b => return Err(Error::Shape("couplings differ in node count".into())),
            (a, b) => a.or(b),
        };
        let count = nodes.unwrap_or(1);
        let mut data = Vec::with_capacity(count * self.p * self.p);
        for j in 0..count {
            let (a, b) = (self.at(j), other.at(j));
            data.extend(a.iter().zip(b).map(|(x, y)| x + t * y));
        }
        Ok(Self { p: self.p, nodes, data })
    }

    /// Block-diagonal coupling `diag(self, other)`.
    pub fn block_diag(&self, other: &Coupling) -> Result<Self> {
        let p = self.p + other.p;
        let nodes = match (self.nodes, other.nodes) {
            (Some(a), Some(b)) if a != b => return Err(Error::Shape("couplings differ in node count".into())),
            (a, b) => a.or(b),
        };
        let count = nodes.unwrap_or(1);
        let mut data = vec![0.0; count * p * p];
        for j in 0..count {
            let m = &mut data[j * p * p..(j + 1) * p * p];
            for a in 0..self.p {
                for b in 0..self.p {
                    m[a * p + b] = self.entry(j, a, b);
                }
            }
            for a in 0..other.p {
                for b in 0..other.p {
                    m[(self.p + a) * p + self.p + b] = other.entry(j, a, b);
                }
            }
        }
        Ok(Self { p, nodes, data })
    }
}

/// Sign structure of a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StructureFlags {
    /// Off-diagonal entries nonnegative everywhere.
    pub cooperative: bool,
    /// Off-diagonal entries nonpositive everywhere (−A cooperative).
    pub neg_cooperative: bool,
    /// The graph with an edge i–j whenever `sup|A_ij| > 1e-12` is connected.
    pub fully_coupled: bool,
}

pub fn structure_tests(a: &Coupling) -> StructureFlags {
    let p = a.p();
    let mut cooperative = true;
    let mut neg_cooperative = true;
    for m in a.matrices() {
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    cooperative &= m[i * p + j] >= 0.0;
                    neg_cooperative &= m[i * p + j] <= 0.0;
                }
            }
        }
    }
    let mut reached = vec![false; p];
    let mut stack = vec![0];
    reached[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..p {
            if !reached[j] && a.sup_entry(i, j) > 1e-12 {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    StructureFlags { cooperative, neg_cooperative, fully_coupled: reached.iter().all(|r| *r) }
}

/// Center and weight of a bubble on a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub center: f64,
    pub weight: f64,
    pub n: usize,
}

/// Euclidean bubble `(λ/(λ² + |x-x_c|²/(n(n-2))))^{(n-2)/2}`.
pub fn euclid_bubble(x: &[f64], lambda: f64, center: &[f64], n: usize) -> f64 {
    let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    euclid_bubble_radial(r2.sqrt(), lambda, n)
}

/// Radial profile of [`euclid_bubble`] at distance `r` from its center.
pub fn euclid_bubble_radial(r: f64, lambda: f64, n: usize) -> f64 {
    let nf = n as f64;
    (lambda / (lambda * lambda + r * r / (nf * (nf - 2.0)))).powf((nf - 2.0) / 2.0)
}

/// Positive solution of the Yamabe equation on the round sphere concentrating
/// at the north pole as `λ → 1⁺`.
pub fn sphere_bubble(theta: f64, lambda: f64, n: usize) -> Result<f64> {
    if !(lambda > 1.0) {
        return domain(format!("sphere bubble needs λ > 1, got {lambda}"));
    }
    let nf = n as f64;
    let amp = (sphere_potential(n) * (lambda * lambda - 1.0)).powf((nf - 2.0) / 4.0);
    Ok(amp * (lambda - theta.cos()).powf(1.0 - nf / 2.0))
}

/// Minimum of the sphere bubble, attained at the south pole.
pub fn sphere_bubble_min(lambda: f64, n: usize) -> Result<f64> {
    sphere_bubble(std::f64::consts::PI, lambda, n)
}

fn require_sphere(model: &ManifoldModel) -> Result<()> {
    if model.kind() != ModelKind::SphereRadial {
        return domain(format!("expected a sphere model, got {}", model.kind().label()));
    }
    Ok(())
}

/// Sphere bubble sampled on a sphere model.
pub fn sphere_bubble_field(model: &Model, lambda: f64) -> Result<Field> {
    require_sphere(model)?;
    sphere_bubble(0.0, lambda, model.dim())?;
    let n = model.dim();
    Field::from_fn(model, |t| sphere_bubble(t, lambda, n).unwrap_or(f64::NAN))
}

/// Bubble `(μ/(μ² + d(x_c, x)²/(n(n-2))))^{(n-2)/2}` with the model distance.
/// On the radial models the center is a coordinate value (the pole or origin
/// for a genuinely radial bubble).
pub fn manifold_bubble(params: &BubbleParams, model: &Model) -> Result<Field> {
    if !(params.weight > 0.0) {
        return domain(format!("bubble weight must be positive, got {}", params.weight));
    }
    if params.n != model.dim() {
        return config(format!("bubble dimension {} differs from model dimension {}", params.n, model.dim()));
    }
    if !(0.0..=model.extent()).contains(&params.center) {
        return domain(format!("bubble center {} lies outside the model", params.center));
    }
    Field::from_fn(model, |x| {
        euclid_bubble_radial(model.distance(params.center, x), params.weight, params.n)
    })
}

/// The two-component system built from a sphere bubble `u` and its minimum
/// `m`: `U = (u - m, u)` solves the system with the returned coupling, whose
/// first diagonal entry is `n(n-2)/4` and whose other entries tend to the
/// sphere potential times the identity as `λ → ∞`.
pub fn shifted_bubble_system(model: &Model, lambda: f64) -> Result<(PMap, Coupling)> {
    require_sphere(model)?;
    let n = model.dim();
    let u = sphere_bubble_field(model, lambda)?;
    let m = sphere_bubble_min(lambda, n)?;
    let ln = sphere_potential(n);
    let q = critical_exponent(n);
    let mut per_node = Vec::with_capacity(u.len());
    for &v in u.values() {
        let d = (v - m).max(0.0);
        let ratio = d / v;
        let target = ln - v.powf(q - 2.0) + d.powf(q - 1.0) / v;
        let a12 = target - ratio * ln;
        let a22 = ln - ratio * a12;
        per_node.push(vec![ln, a12, a12, a22]);
    }
    let shifted = u.map(|v| (v - m).max(0.0))?;
    Ok((PMap::new(vec![shifted, u])?, Coupling::nodal(2, per_node)?))
}

/// Three distinct constant positive solutions of the 2-system in dimension
/// 6 with `Λ = -1`, and their common constant coupling.
pub fn constant_triple_values(lambda: f64) -> Result<([[f64; 2]; 3], [f64; 4])> {
    if !(lambda > 0.0) {
        return domain(format!("family parameter must be positive, got {lambda}"));
    }
    let d = 2.0 * lambda + 1.0;
    let w = (lambda * lambda + (lambda + 1.0) * (lambda + 1.0)) / d;
    let diag = -(3.0 * lambda * lambda + 3.0 * lambda + 1.0) / d;
    let off = (lambda * lambda + lambda) / d;
    Ok(([[lambda, lambda + 1.0], [lambda + 1.0, lambda], [w, w]], [diag, off, off, diag]))
}

/// [`constant_triple_values`] as maps on a model of dimension 6.
pub fn constant_triple_family(model: &Model, lambda: f64) -> Result<([PMap; 3], Coupling)> {
    if model.dim() != 6 {
        return config(format!("the constant triple lives in dimension 6, got {}", model.dim()));
    }
    let (maps, a) = constant_triple_values(lambda)?;
    let build = |v: &[f64; 2]| PMap::constants(model, v);
    Ok(([build(&maps[0])?, build(&maps[1])?, build(&maps[2])?], Coupling::constant(2, a.to_vec())?))
}

fn require_positive(name: &str, f: &Field) -> Result<()> {
    if let Some(j) = f.values().iter().position(|v| !(*v > 1e-300)) {
        return domain(format!("{name} must be strictly positive (node {j})"));
    }
    Ok(())
}

fn require_same(fields: &[&Field]) -> Result<()> {
    let m = fields[0].model();
    if fields.iter().any(|f| !same_grid(f.model(), m)) {
        return Err(Error::Shape("fields live on different grids".into()));
    }
    Ok(())
}

/// Coupling making `(u, v)` a solution of the 2-system whenever `u` and `v`
/// solve scalar equations with potentials `h` and `k`: diagonal entries
/// `h - βv/u` and `k - βu/v`, off-diagonal `β`.
pub fn coupling_from_scalars(u: &Field, v: &Field, h: &Field, k: &Field, beta: &Field) -> Result<Coupling> {
    require_same(&[u, v, h, k, beta])?;
    require_positive("u", u)?;
    require_positive("v", v)?;
    let per_node = (0..u.len())
        .map(|j| {
            let (uj, vj, b) = (u.values()[j], v.values()[j], beta.values()[j]);
            vec![h.values()[j] - b * vj / uj, b, b, k.values()[j] - b * uj / vj]
        })
        .collect();
    Coupling::nodal(2, per_node)
}

/// Coupling for a pair `(u, ũ)` of solutions of scalar equations with
/// potentials `h`, `h̃`: entries `h - sε`, `sβ`, `h̃ - sε̃` with `ε = βũ/u`
/// and `ε̃ = βu/ũ`. With `s = 1` the coupling is cooperative, with `s = -1`
/// its negation is.
pub fn blowup_pair_coupling(
    u: &Field,
    u_tilde: &Field,
    beta: &Field,
    s: i32,
    h: &Field,
    h_tilde: &Field,
) -> Result<Coupling> {
    if s != 1 && s != -1 {
        return config(format!("sign must be +1 or -1, got {s}"));
    }
    require_same(&[u, u_tilde, beta, h, h_tilde])?;
    require_positive("u", u)?;
    require_positive("ũ", u_tilde)?;
    let s = s as f64;
    let per_node = (0..u.len())
        .map(|j| {
            let (a, b, bj) = (u.values()[j], u_tilde.values()[j], beta.values()[j]);
            let eps = bj * b / a;
            let eps_t = bj * a / b;
            vec![h.values()[j] - s * eps, s * bj, s * bj, h_tilde.values()[j] - s * eps_t]
        })
        .collect();
    Coupling::nodal(2, per_node)
}

/// Constant couplings with closed-form solution structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedMatrix {
    /// `[[a, b], [b, c]]` with `a + b = b + c = n(n-2)/4`, so `(u, u)` solves
    /// the 2-system whenever `u` solves the sphere Yamabe equation.
    EqualRowSums { n: usize, a: f64, b: f64, c: f64 },
    /// `[[a, b, 0], [b, c, -d], [0, -d, e]]` with `a + b = n(n-2)/4`,
    /// `b + c = d + n(n-2)/4`, `e = d + n(n-2)/4`, all entries positive, so
    /// `(u, u, u)` solves the 3-system.
    ChainTriple { n: usize, a: f64, b: f64, c: f64, d: f64, e: f64 },
    /// `n(n-2)/4 · Id_p + t·base` for a symmetric `base` (row-major).
    ShiftedIdentity { n: usize, t: f64, p: usize, base: Vec<f64> },
    /// `[[h/2, h/2, α], [h/2, h/2, -α], [α, -α, β]]`: `(u, u, 0)` solves the
    /// 3-system whenever `u` solves the scalar equation with potential `h`.
    SignedBlock { potential: f64, alpha: f64, beta: f64 },
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

pub fn named_matrix(spec: &NamedMatrix) -> Result<Coupling> {
    match *spec {
        NamedMatrix::EqualRowSums { n, a, b, c } => {
            let ln = sphere_potential(n);
            if !close(a + b, ln) {
                return config(format!("violated a + b = n(n-2)/4: {a} + {b} != {ln}"));
            }
            if !close(b + c, ln) {
                return config(format!("violated b + c = n(n-2)/4: {b} + {c} != {ln}"));
            }
            Coupling::constant(2, vec![a, b, b, c])
        }
        NamedMatrix::ChainTriple { n, a, b, c, d, e } => {
            let ln = sphere_potential(n);
            if [a, b, c, d, e].iter().any(|v| !(*v > 0.0)) {
                return config("entries a, b, c, d, e must be positive");
            }
            if !close(a + b, ln) {
                return config(format!("violated a + b = n(n-2)/4: {a} + {b} != {ln}"));
            }
            if !close(b + c, d + ln) {
                return config(format!("violated b + c = d + n(n-2)/4: {b} + {c} != {d} + {ln}"));
            }
            if !close(e, d + ln) {
                return config(format!("violated e = d + n(n-2)/4: {e} != {d} + {ln}"));
            }
            Coupling::constant(3, vec![a, b, 0.0, b, c, -d, 0.0, -d, e])
        }
        NamedMatrix::ShiftedIdentity { n, t, p, ref base } => {
            let base = Coupling::constant(p, base.clone())?;
            Coupling::scaled_identity(p, sphere_potential(n))?.add_scaled(t, &base)
        }
        NamedMatrix::SignedBlock { potential: h, alpha, beta } => Coupling::constant(
            3,
            vec![h / 2.0, h / 2.0, alpha, h / 2.0, h / 2.0, -alpha, alpha, -alpha, beta],
        ),
    }
}
