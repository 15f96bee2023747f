//! Symmetry-reduced model manifolds.
//!
//! Three models are supported, each reduced to a single coordinate:
//!
//! * `SphereRadial`: functions on the round unit `S^n` depending only on the
//!   polar angle `θ ∈ (0, π)` measured from the north pole;
//! * `ProductCircle`: functions on `S^1(T) × S^{n-1}` depending only on the
//!   arclength `t ∈ [0, 2πT)` along the circle factor;
//! * `EuclideanBallRadial`: radial functions on the Euclidean ball `B_0(R) ⊂ ℝ^n`.
//!
//! Grids are cell centred (nodes at `(j + ½)h`), so the singular coefficients of
//! the reduced operators are never evaluated at a pole or at the origin.
//! Quadrature weights are the exact Riemannian volumes of the cells, and the
//! Laplace–Beltrami operator is discretised in flux form with the exact face
//! areas. With these choices the discrete operator is symmetric with respect to
//! the weights and `⟨Δf, f⟩_w` is exactly the discrete Dirichlet energy.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::linalg::SparseRows;

/// Volume of the unit n-sphere `ω_n = 2π^{(n+1)/2} / Γ((n+1)/2)`.
pub fn sphere_volume(n: usize) -> Result<f64> {
    if n < 1 {
        return domain("sphere_volume requires n >= 1");
    }
    Ok(2.0 * PI.powf((n as f64 + 1.0) / 2.0) / gamma_half_integer(n + 1))
}

/// `Γ(k/2)` for a positive integer `k`, by the exact recurrences.
pub(crate) fn gamma_half_integer(k: usize) -> f64 {
    assert!(k >= 1);
    let (mut g, mut x) = if k % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = k as f64 / 2.0;
    while x < target - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    SphereRadial,
    /// `S^1(T) × S^{n-1}` with circle radius `radius`.
    ProductCircle { radius: f64 },
    /// Euclidean ball of radius `radius`.
    EuclideanBallRadial { radius: f64 },
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::SphereRadial => "sphere",
            ModelKind::ProductCircle { .. } => "circle",
            ModelKind::EuclideanBallRadial { .. } => "ball",
        }
    }
}

/// Nodes, spacing, and per-node quadrature weights (units of n-volume).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub spacing: f64,
}

impl Grid1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// A discretised model manifold: kind, dimension, grid, and the reduced
/// Laplace–Beltrami operator.
#[derive(Debug, Clone)]
pub struct ManifoldModel {
    kind: ModelKind,
    dim: usize,
    grid: Grid1D,
    /// `face_flux[f]` = area of face f divided by h; face f sits between nodes f-1 and f.
    /// For the periodic model face 0 joins node N-1 to node 0.
    face_flux: Vec<f64>,
    stencil: SparseRows,
}

/// Shared handle; fields and maps hold one.
pub type Model = Arc<ManifoldModel>;

/// Builds a model and its grid. `nodes` is the node count N.
pub fn build_model(kind: ModelKind, n: usize, nodes: usize) -> Result<Model> {
    if n < 3 {
        return config(format!("model dimension must be >= 3, got {n}"));
    }
    if nodes < 16 {
        return config(format!("grid needs at least 16 nodes, got {nodes}"));
    }
    let omega_sub = sphere_volume(n - 1)?;
    let nf = nodes as f64;
    let (grid, face_flux) = match kind {
        ModelKind::SphereRadial => {
            let h = PI / nf;
            let nodes_v: Vec<f64> = (0..nodes).map(|j| (j as f64 + 0.5) * h).collect();
            let prim = |a: f64, b: f64| omega_sub * integrate_sin_power(n - 1, a, b);
            let weights = (0..nodes).map(|j| prim(j as f64 * h, (j + 1) as f64 * h)).collect();
            let flux = (0..=nodes)
                .map(|f| {
                    if f == 0 || f == nodes {
                        0.0
                    } else {
                        omega_sub * (f as f64 * h).sin().powi(n as i32 - 1) / h
                    }
                })
                .collect();
            (Grid1D { nodes: nodes_v, weights, spacing: h }, flux)
        }
        ModelKind::ProductCircle { radius } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return config(format!("circle radius must be positive, got {radius}"));
            }
            let h = 2.0 * PI * radius / nf;
            let nodes_v = (0..nodes).map(|j| (j as f64 + 0.5) * h).collect();
            let weights = vec![omega_sub * h; nodes];
            let flux = vec![omega_sub / h; nodes];
            (Grid1D { nodes: nodes_v, weights, spacing: h }, flux)
        }
        ModelKind::EuclideanBallRadial { radius } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return config(format!("ball radius must be positive, got {radius}"));
            }
            let h = radius / nf;
            let nodes_v = (0..nodes).map(|j| (j as f64 + 0.5) * h).collect();
            let nn = n as i32;
            let weights = (0..nodes)
                .map(|j| {
                    let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
                    omega_sub * (b.powi(nn) - a.powi(nn)) / n as f64
                })
                .collect();
            let flux = (0..nodes)
                .map(|f| if f == 0 { 0.0 } else { omega_sub * (f as f64 * h).powi(nn - 1) / h })
                .collect();
            (Grid1D { nodes: nodes_v, weights, spacing: h }, flux)
        }
    };
    let stencil = assemble_stencil(kind, n, &grid, &face_flux);
    Ok(Arc::new(ManifoldModel { kind, dim: n, grid, face_flux, stencil }))
}

fn assemble_stencil(kind: ModelKind, n: usize, grid: &Grid1D, flux: &[f64]) -> SparseRows {
    let nodes = grid.len();
    let mut s = SparseRows::new(nodes);
    let periodic = matches!(kind, ModelKind::ProductCircle { .. });
    let mut couple = |a: usize, b: usize, c: f64| {
        // flux between nodes a and b with coefficient c
        s.add(a, a, c / grid.weights[a]);
        s.add(a, b, -c / grid.weights[a]);
        s.add(b, b, c / grid.weights[b]);
        s.add(b, a, -c / grid.weights[b]);
    };
    for f in 1..nodes {
        couple(f - 1, f, flux[f]);
    }
    if periodic {
        couple(nodes - 1, 0, flux[0]);
    }
    if let ModelKind::EuclideanBallRadial { .. } = kind {
        // Outer row: pointwise -f'' - (n-1) f'/r with one-sided second-order
        // differences, so no boundary condition is imposed at r = R.
        let last = nodes - 1;
        let mut tmp = SparseRows::new(nodes);
        std::mem::swap(&mut tmp, &mut s);
        let h = grid.spacing;
        let r = grid.nodes[last];
        let d2 = [2.0, -5.0, 4.0, -1.0];
        let d1 = [3.0, -4.0, 1.0, 0.0];
        let mut out = SparseRows::new(nodes);
        for i in 0..last {
            for &(j, v) in tmp.row(i) {
                out.add(i, j, v);
            }
        }
        for k in 0..4 {
            let c = -d2[k] / (h * h) - (n as f64 - 1.0) / r * d1[k] / (2.0 * h);
            if c != 0.0 {
                out.add(last, last - k, c);
            }
        }
        return out;
    }
    s
}

/// `∫_a^b sin^m θ dθ` by composite Gauss–Legendre (exact to rounding for the
/// cell sizes used here).
fn integrate_sin_power(m: usize, a: f64, b: f64) -> f64 {
    const X: [f64; 4] = [
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        -0.861_136_311_594_052_6,
    ];
    const W: [f64; 4] = [
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let pieces = 4;
    let step = (b - a) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let lo = a + k as f64 * step;
        let mid = lo + 0.5 * step;
        for (x, w) in X.iter().zip(W) {
            total += w * (mid + 0.5 * step * x).sin().powi(m as i32);
        }
    }
    total * 0.5 * step
}

impl ManifoldModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Manifold dimension n.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.grid.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.grid.weights
    }

    pub fn volume(&self) -> f64 {
        self.grid.total_volume()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, ModelKind::ProductCircle { .. })
    }

    /// Length of the coordinate interval.
    pub fn extent(&self) -> f64 {
        match self.kind {
            ModelKind::SphereRadial => PI,
            ModelKind::ProductCircle { radius } => 2.0 * PI * radius,
            ModelKind::EuclideanBallRadial { radius } => radius,
        }
    }

    /// Largest distance between two coordinates of the model.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            ModelKind::SphereRadial => PI,
            ModelKind::ProductCircle { radius } => PI * radius,
            ModelKind::EuclideanBallRadial { radius } => radius,
        }
    }

    /// Volume of the coordinate band `a ≤ x ≤ b`. On the radial models the
    /// band is clipped to the coordinate range; on the circle `b - a` is
    /// taken as a length and clipped to one period.
    pub fn volume_between(&self, a: f64, b: f64) -> f64 {
        let n = self.dim;
        let omega_sub = sphere_volume(n - 1).unwrap_or(f64::NAN);
        match self.kind {
            ModelKind::SphereRadial => {
                let (a, b) = (a.max(0.0), b.min(PI));
                if b <= a {
                    0.0
                } else {
                    omega_sub * integrate_sin_power(n - 1, a, b)
                }
            }
            ModelKind::ProductCircle { .. } => omega_sub * (b - a).clamp(0.0, self.extent()),
            ModelKind::EuclideanBallRadial { radius } => {
                let (a, b) = (a.max(0.0), b.min(radius));
                if b <= a {
                    0.0
                } else {
                    omega_sub * (b.powi(n as i32) - a.powi(n as i32)) / n as f64
                }
            }
        }
    }

    /// Distance between two coordinates. For radial fields this is the
    /// geodesic distance to the pole (sphere) or centre (ball) when one
    /// argument is 0; on the circle it is the periodic arclength.
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.kind {
            ModelKind::ProductCircle { radius } => {
                let l = 2.0 * PI * radius;
                let d = d % l;
                d.min(l - d)
            }
            _ => d,
        }
    }

    /// Scalar curvature of the model metric.
    pub fn scalar_curvature(&self) -> f64 {
        let n = self.dim as f64;
        match self.kind {
            ModelKind::SphereRadial => n * (n - 1.0),
            ModelKind::ProductCircle { .. } => (n - 1.0) * (n - 2.0),
            ModelKind::EuclideanBallRadial { .. } => 0.0,
        }
    }

    /// Potential of the conformal Laplacian, `(n-2)/(4(n-1)) S_g`.
    pub fn geometric_potential(&self) -> f64 {
        let n = self.dim as f64;
        (n - 2.0) / (4.0 * (n - 1.0)) * self.scalar_curvature()
    }

    /// Sparse rows of the discrete operator.
    pub fn stencil(&self) -> &SparseRows {
        &self.stencil
    }

    /// Half the gradient of [`Self::dirichlet_energy`] with respect to the
    /// weighted inner product. Agrees with the Laplacian everywhere except at
    /// the outer row of the ball, where the Laplacian uses a pointwise closure.
    pub fn energy_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        let w = self.weights();
        let mut out = vec![0.0; n];
        let mut face = |a: usize, b: usize, c: f64| {
            let d = c * (f[a] - f[b]);
            out[a] += d / w[a];
            out[b] -= d / w[b];
        };
        for k in 1..n {
            face(k, k - 1, self.face_flux[k]);
        }
        if self.is_periodic() {
            face(0, n - 1, self.face_flux[0]);
        }
        out
    }

    /// Applies the discrete Laplace–Beltrami operator (nonnegative convention).
    pub fn apply_laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.len() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} nodes",
                f.len(),
                self.len()
            )));
        }
        Ok(self.laplacian_values(f))
    }

    /// The Laplacian evaluated in difference form, so constants map to
    /// exactly zero whatever the grid size. Unchecked length.
    pub(crate) fn laplacian_values(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.energy_laplacian(f);
        if let ModelKind::EuclideanBallRadial { .. } = self.kind {
            let last = self.len() - 1;
            out[last] = self.stencil.row(last).iter().map(|&(j, v)| v * (f[j] - f[last])).sum();
        }
        out
    }

    /// Discrete Dirichlet energy `Σ_faces flux (Δ_face f)²`; equals `⟨Δf, f⟩_w`
    /// on the sphere and circle.
    pub fn dirichlet_energy(&self, f: &[f64]) -> f64 {
        let n = self.len();
        let mut e = 0.0;
        for face in 1..n {
            let d = f[face] - f[face - 1];
            e += self.face_flux[face] * d * d;
        }
        if self.is_periodic() {
            let d = f[0] - f[n - 1];
            e += self.face_flux[0] * d * d;
        }
        e
    }

    /// Dirichlet energy restricted to the faces within `radius` of `center`.
    /// Face `k` sits at coordinate `k·h`.
    pub fn dirichlet_energy_near(&self, f: &[f64], center: f64, radius: f64) -> f64 {
        let n = self.len();
        let h = self.spacing();
        let mut e = 0.0;
        for face in 1..n {
            if self.distance(face as f64 * h, center) <= radius {
                let d = f[face] - f[face - 1];
                e += self.face_flux[face] * d * d;
            }
        }
        if self.is_periodic() && self.distance(0.0, center) <= radius {
            let d = f[0] - f[n - 1];
            e += self.face_flux[0] * d * d;
        }
        e
    }

    /// Index of the grid node nearest to a coordinate.
    pub fn nearest_node(&self, x: f64) -> usize {
        let h = self.spacing();
        let j = ((x / h) - 0.5).round();
        if self.is_periodic() {
            let n = self.len() as f64;
            (((j % n) + n) % n) as usize
        } else {
            j.clamp(0.0, self.len() as f64 - 1.0) as usize
        }
    }

    /// Linear interpolation of nodal values at coordinate `x`. Outside the
    /// node range the reflection parity of the closure is used at the pole or
    /// centre and the end value is held elsewhere.
    pub fn interpolate(&self, f: &[f64], x: f64) -> f64 {
        let h = self.spacing();
        let n = self.len();
        if self.is_periodic() {
            let l = self.extent();
            let xr = ((x % l) + l) % l;
            let s = xr / h - 0.5;
            let j0 = s.floor();
            let t = s - j0;
            let a = (((j0 as isize) % n as isize + n as isize) % n as isize) as usize;
            let b = (a + 1) % n;
            return (1.0 - t) * f[a] + t * f[b];
        }
        let s = x / h - 0.5;
        if s <= 0.0 {
            // even reflection about the pole/centre
            return f[0];
        }
        if s >= (n - 1) as f64 {
            if matches!(self.kind, ModelKind::SphereRadial) {
                return f[n - 1];
            }
            let t = s - (n - 2) as f64;
            return (1.0 - t) * f[n - 2] + t * f[n - 1];
        }
        let j0 = s.floor() as usize;
        let t = s - j0 as f64;
        (1.0 - t) * f[j0] + t * f[j0 + 1]
    }
}

/// Pointwise first and second derivatives by centred differences with a
/// parity reflection at the first node (`even` for smooth radial functions,
/// odd for functions vanishing at the origin) and one-sided second-order
/// differences at the last node.
pub fn radial_derivatives(f: &[f64], h: f64, even: bool) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    let ghost = if even { f[0] } else { -f[0] };
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for j in 0..n {
        if j + 1 < n {
            let left = if j == 0 { ghost } else { f[j - 1] };
            d1[j] = (f[j + 1] - left) / (2.0 * h);
            d2[j] = (f[j + 1] - 2.0 * f[j] + left) / (h * h);
        } else {
            d1[j] = (3.0 * f[j] - 4.0 * f[j - 1] + f[j - 2]) / (2.0 * h);
            d2[j] = (2.0 * f[j] - 5.0 * f[j - 1] + 4.0 * f[j - 2] - f[j - 3]) / (h * h);
        }
    }
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn sphere_volumes() {
        assert!((sphere_volume(1).unwrap() - 2.0 * PI).abs() < 1e-13);
        // Γ(2) = 1
        assert!((sphere_volume(3).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        // Γ(5/2) = 3√π/4
        let oracle = 2.0 * PI.powf(2.5) / (3.0 * PI.sqrt() / 4.0);
        assert!((sphere_volume(4).unwrap() - oracle).abs() < 1e-12);
        assert!((sphere_volume(4).unwrap() - 26.318_945_069_571_6).abs() < 1e-9);
        assert!(matches!(sphere_volume(0), Err(Error::Domain(_))));
    }

    #[test]
    fn quadrature_totals() {
        let m = build_model(ModelKind::SphereRadial, 4, 256).unwrap();
        let h = m.spacing();
        assert!((m.volume() - sphere_volume(4).unwrap()).abs() <= 10.0 * h * h * m.volume());
        let c = build_model(ModelKind::ProductCircle { radius: 5.0 }, 4, 256).unwrap();
        let expect = 2.0 * PI * 5.0 * sphere_volume(3).unwrap();
        assert!((c.volume() - expect).abs() < 1e-10 * expect);
        let b = build_model(ModelKind::EuclideanBallRadial { radius: 2.0 }, 5, 64).unwrap();
        let expect = sphere_volume(4).unwrap() * 32.0 / 5.0;
        assert!((b.volume() - expect).abs() < 1e-12 * expect);
        assert!(m.weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn interior_weights_match_midpoint_rule_to_second_order() {
        let m = build_model(ModelKind::SphereRadial, 4, 512).unwrap();
        let h = m.spacing();
        let om = sphere_volume(3).unwrap();
        for j in [100, 256, 400] {
            let mid = om * m.nodes()[j].sin().powi(3) * h;
            assert!((m.weights()[j] - mid).abs() < 10.0 * h * h * mid);
        }
    }

    #[test]
    fn invalid_models() {
        assert!(matches!(build_model(ModelKind::SphereRadial, 2, 64), Err(Error::Config(_))));
        assert!(build_model(ModelKind::SphereRadial, 4, 8).is_err());
        assert!(build_model(ModelKind::ProductCircle { radius: 0.0 }, 4, 64).is_err());
        assert!(build_model(ModelKind::EuclideanBallRadial { radius: -1.0 }, 4, 64).is_err());
    }

    #[test]
    fn constant_is_harmonic() {
        for kind in [
            ModelKind::SphereRadial,
            ModelKind::ProductCircle { radius: 2.0 },
            ModelKind::EuclideanBallRadial { radius: 1.0 },
        ] {
            let m = build_model(kind, 5, 64).unwrap();
            let lap = m.apply_laplacian(&vec![3.5; 64]).unwrap();
            assert!(lap.iter().all(|v| v.abs() < 1e-9), "{kind:?}");
        }
    }

    #[test]
    fn first_spherical_harmonic() {
        for n in [3usize, 4, 6] {
            let m = build_model(ModelKind::SphereRadial, n, 512).unwrap();
            let h = m.spacing();
            let f: Vec<f64> = m.nodes().iter().map(|t| t.cos()).collect();
            let lap = m.apply_laplacian(&f).unwrap();
            let expect: Vec<f64> = f.iter().map(|c| n as f64 * c).collect();
            assert!(sup_err(&lap, &expect) <= 10.0 * h * h, "n={n}");
        }
    }

    #[test]
    fn circle_mode() {
        let t = 3.0;
        let m = build_model(ModelKind::ProductCircle { radius: t }, 4, 512).unwrap();
        let h = m.spacing();
        let f: Vec<f64> = m.nodes().iter().map(|x| (x / t).cos()).collect();
        let lap = m.apply_laplacian(&f).unwrap();
        let expect: Vec<f64> = f.iter().map(|c| c / (t * t)).collect();
        assert!(sup_err(&lap, &expect) <= 10.0 * h * h);
    }

    #[test]
    fn ball_quadratic_and_outer_row() {
        // -Δ r² = -2n in ℝ^n, so Δ r² = -2n with the nonnegative convention.
        let m = build_model(ModelKind::EuclideanBallRadial { radius: 1.5 }, 4, 128).unwrap();
        let f: Vec<f64> = m.nodes().iter().map(|r| r * r).collect();
        let lap = m.apply_laplacian(&f).unwrap();
        assert!(lap.iter().all(|v| (v + 8.0).abs() < 1e-8));
    }

    #[test]
    fn wrong_size_is_shape_error() {
        let m = build_model(ModelKind::SphereRadial, 4, 32).unwrap();
        assert!(matches!(m.apply_laplacian(&[1.0; 31]), Err(Error::Shape(_))));
    }

    #[test]
    fn second_order_convergence() {
        let err = |nodes: usize| {
            let m = build_model(ModelKind::SphereRadial, 4, nodes).unwrap();
            let f: Vec<f64> = m.nodes().iter().map(|t| t.cos()).collect();
            let lap = m.apply_laplacian(&f).unwrap();
            f.iter().zip(&lap).map(|(c, l)| (l - 4.0 * c).abs()).fold(0.0, f64::max)
        };
        let ratio = err(256) / err(512);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn symmetric_and_nonnegative() {
        let m = build_model(ModelKind::SphereRadial, 5, 200).unwrap();
        let w = m.weights();
        let f: Vec<f64> = m.nodes().iter().map(|t| (2.0 * t).cos() + 0.3 * t.cos()).collect();
        let g: Vec<f64> = m.nodes().iter().map(|t| (3.0 * t).cos()).collect();
        let lf = m.apply_laplacian(&f).unwrap();
        let lg = m.apply_laplacian(&g).unwrap();
        let a: f64 = (0..200).map(|j| w[j] * lf[j] * g[j]).sum();
        let b: f64 = (0..200).map(|j| w[j] * f[j] * lg[j]).sum();
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        let e: f64 = (0..200).map(|j| w[j] * lf[j] * f[j]).sum();
        assert!((e - m.dirichlet_energy(&f)).abs() < 1e-10 * e);
        assert!(e >= 0.0);
    }

    #[test]
    fn periodic_distance_and_interpolation() {
        let m = build_model(ModelKind::ProductCircle { radius: 1.0 }, 4, 64).unwrap();
        let l = 2.0 * PI;
        assert!((m.distance(0.1, l - 0.1) - 0.2).abs() < 1e-12);
        let f: Vec<f64> = m.nodes().iter().map(|t| t.sin()).collect();
        let v = m.interpolate(&f, l + 0.3);
        assert!((v - 0.3f64.sin()).abs() < 2e-3);
        assert_eq!(m.nearest_node(m.nodes()[5] + 1e-9), 5);
    }
}
