//! Blow-up families and their diagnostics: bubble extraction, energy
//! splitting, exterior L² mass, pointwise envelopes, local balance
//! inequalities, rescaling, asymptotic fits, and Pohozaev sides.
//!
//! Centers are coordinates of the reduced model. On the radial models a
//! center at the first node is taken to be the pole (or origin) whenever a
//! geometric center is needed, and balls around other centers are coordinate
//! bands.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytic::{
    blowup_pair_coupling, constant_yamabe_value, critical_exponent, named_matrix, sharp_constant,
    shifted_bubble_system, sphere_bubble_field, sphere_potential, Coupling, NamedMatrix,
};
use crate::error::{config, domain, Error, Result};
use crate::fields::{Field, PMap};
use crate::geometry::{build_model, radial_derivatives, ManifoldModel, Model, ModelKind};
use crate::variational::free_energy;

/// Grid maximum of a map and the weight it determines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BubbleLocation {
    pub center: f64,
    pub weight: f64,
    pub component: usize,
    pub node: usize,
}

/// Locates the grid maximum over all components. Ties go to the smallest
/// coordinate, then the smallest component. The weight is
/// `max^{-2/(n-2)}`.
pub fn extract_center_weight(u: &PMap) -> Result<BubbleLocation> {
    let model = u.model();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for j in 0..model.len() {
        for (i, c) in u.components().iter().enumerate() {
            let v = c.values()[j];
            if v > best.0 {
                best = (v, j, i);
            }
        }
    }
    let (max, node, component) = best;
    if !(max > 0.0) {
        return domain("cannot extract a bubble from a map with no positive value");
    }
    let n = model.dim() as f64;
    Ok(BubbleLocation {
        center: model.nodes()[node],
        weight: max.powf(-2.0 / (n - 2.0)),
        component,
        node,
    })
}

/// Geometric center of a grid coordinate: the first node of a radial model is
/// the pole or origin.
fn geometric_center(model: &ManifoldModel, c: f64) -> f64 {
    if !model.is_periodic() && c < model.spacing() {
        0.0
    } else {
        c
    }
}

/// Fraction of each cell covered by the ball `B(center, radius)`. Radial
/// cells are measured with the exact volume density, circle cells by length.
fn ball_fractions(model: &ManifoldModel, center: f64, radius: f64) -> Vec<f64> {
    let h = model.spacing();
    let c = geometric_center(model, center);
    let w = model.weights();
    model
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let (lo, hi) = (x - 0.5 * h, x + 0.5 * h);
            if model.is_periodic() {
                let l = model.extent();
                let mut overlap = 0.0;
                for k in -1..=1 {
                    let shift = k as f64 * l;
                    let a = lo.max(c - radius + shift);
                    let b = hi.min(c + radius + shift);
                    overlap += (b - a).max(0.0);
                }
                (overlap / h).min(1.0)
            } else {
                let (a, b) = (lo.max(c - radius), hi.min(c + radius));
                if b <= a {
                    0.0
                } else if a <= lo && b >= hi {
                    1.0
                } else {
                    (model.volume_between(a, b) / w[j]).min(1.0)
                }
            }
        })
        .collect()
}

/// Cellwise union of several balls, taking the largest covered fraction.
fn union_fractions(model: &ManifoldModel, centers: &[f64], radius: f64) -> Vec<f64> {
    let mut out = vec![0.0; model.len()];
    for &c in centers {
        for (o, f) in out.iter_mut().zip(ball_fractions(model, c, radius)) {
            *o = f64::max(*o, f);
        }
    }
    out
}

fn squared_norm_at(u: &PMap, j: usize) -> f64 {
    u.components().iter().map(|c| c.values()[j] * c.values()[j]).sum()
}

/// Exterior L² fraction `∫_{M∖∪B(c,δ)}|U|² / ∫_M|U|²`.
pub fn l2_concentration_ratio(u: &PMap, centers: &[f64], delta: f64) -> Result<f64> {
    let model = u.model();
    if centers.is_empty() {
        return domain("no centers given");
    }
    if !(delta > 0.0) || delta >= model.diameter() {
        return domain(format!("radius {delta} must lie in (0, {})", model.diameter()));
    }
    let frac = union_fractions(model, centers, delta);
    let w = model.weights();
    let mut total = 0.0;
    let mut outside = 0.0;
    for j in 0..model.len() {
        let s = w[j] * squared_norm_at(u, j);
        total += s;
        outside += (1.0 - frac[j]) * s;
    }
    if !(total > 0.0) {
        return domain("the map has zero L² norm");
    }
    Ok((outside / total).clamp(0.0, 1.0))
}

/// `sup_x d(x)^{(n-2)/2} |U(x) - U⁰(x)|` with `d` the distance to the
/// nearest center.
pub fn pointwise_envelope(u: &PMap, limit: &PMap, centers: &[f64]) -> Result<f64> {
    exterior_envelope(u, limit, centers, 0.0)
}

/// [`pointwise_envelope`] restricted to points at distance at least `radius`
/// from every center.
pub fn exterior_envelope(u: &PMap, limit: &PMap, centers: &[f64], radius: f64) -> Result<f64> {
    u.check_same_shape(limit)?;
    if centers.is_empty() {
        return domain("no centers given");
    }
    let model = u.model();
    let power = (model.dim() as f64 - 2.0) / 2.0;
    let cs: Vec<f64> = centers.iter().map(|&c| geometric_center(model, c)).collect();
    let mut sup = 0.0f64;
    for (j, &x) in model.nodes().iter().enumerate() {
        let d = cs.iter().map(|&c| model.distance(x, c)).fold(f64::INFINITY, f64::min);
        if d < radius {
            continue;
        }
        let dev: f64 = u
            .components()
            .iter()
            .zip(limit.components())
            .map(|(a, b)| (a.values()[j] - b.values()[j]).powi(2))
            .sum();
        sup = sup.max(d.powf(power) * dev.sqrt());
    }
    Ok(sup)
}

/// One inequality evaluated as both sides and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Balance {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl Balance {
    fn new(lhs: f64, rhs: f64) -> Self {
        Balance { lhs, rhs, ratio: lhs / rhs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceChecks {
    /// `max_{B(x,δ)} max_i |u_i|` against `(∫_{B(x,2δ)} Σ_i |u_i|^s)^{1/s}`.
    pub sup_bound: Balance,
    /// `∫ Σ_i |u_i|` against `∫ Σ_i |u_i|^{2*-1}`.
    pub controlled: Balance,
    /// `∫_{B(x,δ)} Σ_i |∇u_i|²` against `∫_{B(x,2δ)} Σ_i (1 + |u_i|^{2*-2}) u_i²`.
    pub gradient: Balance,
}

/// Local elliptic balance inequalities around `x` at scale `δ`.
pub fn local_balance_checks(u: &PMap, x: f64, delta: f64, s: f64) -> Result<BalanceChecks> {
    let model = u.model();
    if !(delta > 0.0) || !(s >= 1.0) {
        return domain(format!("need δ > 0 and s >= 1, got δ = {delta}, s = {s}"));
    }
    let c = geometric_center(model, x);
    let fits = if model.is_periodic() {
        2.0 * delta < model.diameter()
    } else {
        (c == 0.0 || c - 2.0 * delta >= 0.0) && c + 2.0 * delta <= model.extent()
    };
    if !fits {
        return domain(format!("the ball of radius {} around {x} leaves the model", 2.0 * delta));
    }
    let q = critical_exponent(model.dim());
    let w = model.weights();
    let wide = ball_fractions(model, c, 2.0 * delta);
    let mut sup = 0.0f64;
    let (mut ls, mut l1, mut lq, mut local) = (0.0, 0.0, 0.0, 0.0);
    for (j, &xj) in model.nodes().iter().enumerate() {
        let inner = model.distance(xj, c) <= delta;
        for comp in u.components() {
            let v = comp.values()[j].abs();
            if inner {
                sup = sup.max(v);
            }
            ls += wide[j] * w[j] * v.powf(s);
            l1 += w[j] * v;
            lq += w[j] * v.powf(q - 1.0);
            local += wide[j] * w[j] * (1.0 + v.powf(q - 2.0)) * v * v;
        }
    }
    let grad: f64 = u.components().iter().map(|f| model.dirichlet_energy_near(f.values(), c, delta)).sum();
    Ok(BalanceChecks {
        sup_bound: Balance::new(sup, ls.powf(1.0 / s)),
        controlled: Balance::new(l1, lq),
        gradient: Balance::new(grad, local),
    })
}

/// Scaling of [`standard_rescale`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescalePower {
    /// Lengths scaled by `√μ`, amplitude unchanged.
    Half,
    /// Lengths scaled by `μ`, amplitude multiplied by `μ^{(n-2)/2}`.
    One,
}

/// Samples `U` at distance `scale·ρ` from `center` for `ρ` on a uniform
/// radial grid of `nodes` cells over `[0, window]`, with linear
/// interpolation. Off-pole centers average the two directions along the
/// coordinate.
pub fn standard_rescale(
    u: &PMap,
    center: f64,
    mu: f64,
    power: RescalePower,
    window: f64,
    nodes: usize,
) -> Result<PMap> {
    let model = u.model();
    let n = model.dim();
    if !(mu > 0.0) || !(window > 0.0) {
        return domain(format!("need μ > 0 and window > 0, got μ = {mu}, window = {window}"));
    }
    let (scale, amp) = match power {
        RescalePower::Half => (mu.sqrt(), 1.0),
        RescalePower::One => (mu, mu.powf((n as f64 - 2.0) / 2.0)),
    };
    let c = geometric_center(model, center);
    let reach = scale * window;
    let inside = if model.is_periodic() { reach <= model.diameter() } else { c + reach <= model.extent() };
    if !inside {
        return domain(format!("rescaled window reaches {reach} from {c}, beyond the model"));
    }
    let local = build_model(ModelKind::EuclideanBallRadial { radius: window }, n, nodes)?;
    let comps = u
        .components()
        .iter()
        .map(|f| {
            let vals = local
                .nodes()
                .iter()
                .map(|&rho| {
                    let fwd = c + scale * rho;
                    let mut back = c - scale * rho;
                    if !model.is_periodic() {
                        back = back.abs();
                    }
                    amp * 0.5 * (model.interpolate(f.values(), fwd) + model.interpolate(f.values(), back))
                })
                .collect();
            Field::new(&local, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    PMap::new(comps)
}

fn require_ball(model: &ManifoldModel) -> Result<f64> {
    match model.kind() {
        ModelKind::EuclideanBallRadial { radius } => Ok(radius),
        k => domain(format!("expected a Euclidean ball model, got {}", k.label())),
    }
}

/// Least-squares fit of `A/r^{n-2} + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub a: f64,
    pub c: f64,
    /// `‖f − fit‖₂ / ‖f‖₂` over the annulus nodes.
    pub residual: f64,
}

/// Fits `A r^{2-n} + c` to the nodal values of a radial field in the annulus
/// `r1 ≤ r ≤ r2`.
pub fn sharp_asymptotics_fit(f: &Field, r1: f64, r2: f64) -> Result<AsymptoticFit> {
    let model = f.model();
    let radius = require_ball(model)?;
    if !(r1 > 0.0 && r1 < r2 && r2 <= radius) {
        return domain(format!("annulus [{r1}, {r2}] must satisfy 0 < r1 < r2 <= {radius}"));
    }
    let e = model.dim() as i32 - 2;
    let pts: Vec<(f64, f64)> = model
        .nodes()
        .iter()
        .zip(f.values())
        .filter(|(r, _)| **r >= r1 && **r <= r2)
        .map(|(r, v)| (r.powi(-e), *v))
        .collect();
    if pts.len() < 3 {
        return domain(format!("annulus [{r1}, {r2}] holds fewer than 3 nodes"));
    }
    let m = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    if !(sxx > 0.0) {
        return domain("degenerate annulus");
    }
    let a = sxy / sxx;
    let c = ybar - a * xbar;
    let err: f64 = pts.iter().map(|p| (p.1 - a * p.0 - c).powi(2)).sum();
    let norm: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    let residual = if norm > 0.0 { (err / norm).sqrt() } else { err.sqrt() };
    Ok(AsymptoticFit { a, c, residual })
}

/// Interior and boundary sides of the Pohozaev identity on `B_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PohozaevSides {
    pub lhs: f64,
    pub rhs: f64,
    /// Radius actually used: `r` rounded to the nearest cell face.
    pub radius: f64,
}

impl PohozaevSides {
    pub fn gap(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Face index for radius `r`, and the sphere factor `ω_{n-1}`.
fn pohozaev_setup(model: &ManifoldModel, r: f64) -> Result<(usize, f64)> {
    let radius = require_ball(model)?;
    let h = model.spacing();
    let k = (r / h).round() as usize;
    if !(r > 0.0) || k < 1 || k + 1 > model.len() || r > radius {
        return domain(format!("Pohozaev radius {r} must lie in [h, R - h] with R = {radius}"));
    }
    Ok((k, crate::geometry::sphere_volume(model.dim() - 1)?))
}

/// Pohozaev sides for a radial `u`:
/// `∫(x·∇u)Δu + (n-2)/2 ∫uΔu` against
/// `−∫_{∂B}(x·∇u)∂_νu + ½∫_{∂B}(x·ν)|∇u|² − (n-2)/2 ∫_{∂B}u∂_νu`.
pub fn pohozaev_residual(u: &Field, r: f64) -> Result<PohozaevSides> {
    pohozaev_by_harmonic(u, r, 0)
}

/// Pohozaev sides for `u = f(ρ)·x₁/ρ` given the radial profile `f`. The
/// sphere averages use `∫x₁² dσ = ω_{n-1}/n` on the unit sphere.
pub fn pohozaev_residual_first_harmonic(profile: &Field, r: f64) -> Result<PohozaevSides> {
    pohozaev_by_harmonic(profile, r, 1)
}

fn pohozaev_by_harmonic(u: &Field, r: f64, degree: usize) -> Result<PohozaevSides> {
    let model = u.model();
    let (k, omega) = pohozaev_setup(model, r)?;
    let n = model.dim() as f64;
    let h = model.spacing();
    let f = u.values();
    let (d1, d2) = radial_derivatives(f, h, degree == 0);
    // angular eigenvalue and mean of Y² over the unit sphere
    let (eig, avg) = if degree == 0 { (0.0, 1.0) } else { (n - 1.0, 1.0 / n) };
    let w = model.weights();
    let mut lhs = 0.0;
    for j in 0..k {
        let rho = model.nodes()[j];
        let lap = -d2[j] - (n - 1.0) / rho * d1[j] + eig * f[j] / (rho * rho);
        lhs += w[j] * avg * (rho * d1[j] + 0.5 * (n - 2.0) * f[j]) * lap;
    }
    let rb = k as f64 * h;
    let fb = 0.5 * (f[k - 1] + f[k]);
    let db = (f[k] - f[k - 1]) / h;
    let grad2 = db * db + eig * fb * fb / (rb * rb);
    let rhs = omega * rb.powf(n - 1.0) * avg * (-rb * db * db + 0.5 * rb * grad2 - 0.5 * (n - 2.0) * fb * db);
    Ok(PohozaevSides { lhs, rhs, radius: rb })
}

/// Maps indexed by a strictly monotone family parameter, their couplings,
/// and optionally the declared weak limit and bubble count per component.
#[derive(Debug, Clone)]
pub struct BlowupSequence {
    model: Model,
    params: Vec<f64>,
    maps: Vec<PMap>,
    couplings: Vec<Coupling>,
    limit: Option<(PMap, Coupling)>,
    bubble_counts: Option<Vec<usize>>,
}

impl BlowupSequence {
    pub fn new(model: &Model, params: Vec<f64>, maps: Vec<PMap>, couplings: Vec<Coupling>) -> Result<Self> {
        if params.is_empty() || params.len() != maps.len() || maps.len() != couplings.len() {
            return Err(Error::Shape(format!(
                "{} parameters, {} maps, {} couplings",
                params.len(),
                maps.len(),
                couplings.len()
            )));
        }
        let up = params.windows(2).all(|w| w[1] > w[0]);
        let down = params.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return config("family parameters must be strictly monotone");
        }
        let p = maps[0].p();
        for (u, a) in maps.iter().zip(&couplings) {
            if !crate::fields::same_grid(u.model(), model) || u.p() != p {
                return Err(Error::Shape("all maps must share the model and component count".into()));
            }
            a.check_shape(p, model.len())?;
        }
        Ok(BlowupSequence { model: model.clone(), params, maps, couplings, limit: None, bubble_counts: None })
    }

    /// Declares the weak limit with its coupling and the number of bubbles
    /// carried by each component.
    pub fn with_limit(mut self, limit: PMap, coupling: Coupling, bubble_counts: Vec<usize>) -> Result<Self> {
        let p = self.maps[0].p();
        if limit.p() != p || bubble_counts.len() != p || !crate::fields::same_grid(limit.model(), &self.model) {
            return Err(Error::Shape("limit and bubble counts must match the family".into()));
        }
        coupling.check_shape(p, self.model.len())?;
        self.limit = Some((limit, coupling));
        self.bubble_counts = Some(bubble_counts);
        Ok(self)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn maps(&self) -> &[PMap] {
        &self.maps
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn limit(&self) -> Option<&PMap> {
        self.limit.as_ref().map(|l| &l.0)
    }

    pub fn limit_coupling(&self) -> Option<&Coupling> {
        self.limit.as_ref().map(|l| &l.1)
    }

    pub fn bubble_counts(&self) -> Option<&[usize]> {
        self.bubble_counts.as_deref()
    }

    /// Total bubble count.
    pub fn bubbles(&self) -> Option<usize> {
        self.bubble_counts.as_ref().map(|c| c.iter().sum())
    }

    /// Product family: components of `self` followed by those of `other`,
    /// block-diagonal couplings, concatenated limits and counts.
    pub fn concat_components(&self, other: &BlowupSequence) -> Result<BlowupSequence> {
        if self.params != other.params {
            return config("families must share their parameter grid");
        }
        let maps = self.maps.iter().zip(&other.maps).map(|(a, b)| a.concat(b)).collect::<Result<_>>()?;
        let couplings = self
            .couplings
            .iter()
            .zip(&other.couplings)
            .map(|(a, b)| a.block_diag(b))
            .collect::<Result<_>>()?;
        let seq = BlowupSequence::new(&self.model, self.params.clone(), maps, couplings)?;
        match (&self.limit, &other.limit, &self.bubble_counts, &other.bubble_counts) {
            (Some((la, ca)), Some((lb, cb)), Some(ka), Some(kb)) => {
                let counts = ka.iter().chain(kb).copied().collect();
                seq.with_limit(la.concat(lb)?, ca.block_diag(cb)?, counts)
            }
            _ => Ok(seq),
        }
    }
}

/// Per map, `|F(U_α, A_α) − F(U⁰, A_∞) − (k/n) K_n^{-n}|` with `F` the free
/// energy, `U⁰, A_∞` the declared limit, and `k` the declared bubble count.
pub fn energy_splitting_residual(seq: &BlowupSequence) -> Result<Vec<f64>> {
    let (Some((limit, a_lim)), Some(k)) = (&seq.limit, seq.bubbles()) else {
        return config("energy splitting needs a declared limit and bubble count");
    };
    let n = seq.model.dim();
    let quantum = sharp_constant(n)?.powi(-(n as i32)) / n as f64;
    let base = free_energy(limit, a_lim)?;
    seq.maps
        .iter()
        .zip(&seq.couplings)
        .map(|(u, a)| Ok((free_energy(u, a)? - base - k as f64 * quantum).abs()))
        .collect()
}

/// Per map, `Σ_i ∫_{B(x, δ√μ)} u_i² / μ²` with `(x, μ)` from
/// [`extract_center_weight`].
pub fn concentration_lower_ratio(seq: &BlowupSequence, delta: f64) -> Result<Vec<f64>> {
    seq.maps.iter().map(|u| concentration_ratio(u, delta)).collect()
}

fn concentration_ratio(u: &PMap, delta: f64) -> Result<f64> {
    let loc = extract_center_weight(u)?;
    if loc.weight < 1e-12 {
        return domain(format!("weight {} is below 1e-12", loc.weight));
    }
    let model = u.model();
    let radius = delta * loc.weight.sqrt();
    if !(delta > 0.0) || radius >= model.diameter() {
        return domain(format!("ball radius {radius} must lie in (0, {})", model.diameter()));
    }
    let frac = ball_fractions(model, loc.center, radius);
    let mass: f64 = (0..model.len()).map(|j| frac[j] * model.weights()[j] * squared_norm_at(u, j)).sum();
    Ok(mass / (loc.weight * loc.weight))
}

/// Families with closed-form members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// Sphere bubbles `u_λ` with the sphere potential.
    #[serde(rename = "sphere_yamabe")]
    SphereYamabe,
    /// `(u_λ − min u_λ, u_λ)` with its nodal coupling.
    #[serde(rename = "remark11")]
    ShiftedBubble,
    /// `(u_λ, c)` with `c` the constant solution and the pair coupling with a
    /// vanishing off-diagonal schedule `β`.
    #[serde(rename = "prop91_pair")]
    BubblePair,
    /// `(u_λ, u_λ)` with a constant matrix of equal row sums.
    #[serde(rename = "remark91_triple")]
    EqualRowsPair,
}

impl FamilyKind {
    pub const NAMES: [&'static str; 4] = ["sphere_yamabe", "remark11", "prop91_pair", "remark91_triple"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sphere_yamabe" => Ok(FamilyKind::SphereYamabe),
            "remark11" => Ok(FamilyKind::ShiftedBubble),
            "prop91_pair" => Ok(FamilyKind::BubblePair),
            "remark91_triple" => Ok(FamilyKind::EqualRowsPair),
            other => config(format!("unknown family {other:?}; expected one of {:?}", Self::NAMES)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::SphereYamabe => Self::NAMES[0],
            FamilyKind::ShiftedBubble => Self::NAMES[1],
            FamilyKind::BubblePair => Self::NAMES[2],
            FamilyKind::EqualRowsPair => Self::NAMES[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyOptions {
    /// Sign of the pair coupling.
    pub sign: i32,
    /// Off-diagonal schedule `β = μ^e`; `None` means `e = n - 2`.
    pub beta_exponent: Option<f64>,
    /// Explicit off-diagonal values, one per member; overrides the exponent.
    pub beta: Option<Vec<f64>>,
    /// `(a, b, c)` of the equal-row-sum matrix; `None` means all `n(n-2)/8`.
    pub row_sums: Option<[f64; 3]>,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions { sign: 1, beta_exponent: None, beta: None, row_sums: None }
    }
}

/// Builds a family on a sphere model for a strictly monotone grid of
/// parameters `λ > 1`.
pub fn build_family(kind: FamilyKind, model: &Model, params: &[f64], opts: &FamilyOptions) -> Result<BlowupSequence> {
    if model.kind() != ModelKind::SphereRadial {
        return config(format!("families live on the sphere model, got {}", model.kind().label()));
    }
    if let Some(b) = &opts.beta {
        if b.len() != params.len() || b.iter().any(|v| !(*v > 0.0)) {
            return config("explicit β schedule needs one positive value per member");
        }
    }
    let n = model.dim();
    let ln = sphere_potential(n);
    let mut maps = Vec::with_capacity(params.len());
    let mut couplings = Vec::with_capacity(params.len());
    for (idx, &lambda) in params.iter().enumerate() {
        let u = sphere_bubble_field(model, lambda)?;
        let (map, a) = match kind {
            FamilyKind::SphereYamabe => (PMap::new(vec![u])?, Coupling::scaled_identity(1, ln)?),
            FamilyKind::ShiftedBubble => shifted_bubble_system(model, lambda)?,
            FamilyKind::BubblePair => {
                let c = Field::constant(model, constant_yamabe_value(n))?;
                let beta = match &opts.beta {
                    Some(b) => b[idx],
                    None => {
                        let mu = extract_center_weight(&PMap::new(vec![u.clone()])?)?.weight;
                        mu.powf(opts.beta_exponent.unwrap_or(n as f64 - 2.0))
                    }
                };
                let pot = Field::constant(model, ln)?;
                let a = blowup_pair_coupling(&u, &c, &Field::constant(model, beta)?, opts.sign, &pot, &pot)?;
                (PMap::new(vec![u, c])?, a)
            }
            FamilyKind::EqualRowsPair => {
                let [a, b, c] = opts.row_sums.unwrap_or([ln / 2.0; 3]);
                let m = named_matrix(&NamedMatrix::EqualRowSums { n, a, b, c })?;
                (PMap::new(vec![u.clone(), u])?, m)
            }
        };
        maps.push(map);
        couplings.push(a);
    }
    let seq = BlowupSequence::new(model, params.to_vec(), maps, couplings)?;
    let p = seq.maps[0].p();
    let (limit, a_lim, counts) = match kind {
        FamilyKind::SphereYamabe => (PMap::zeros(model, 1)?, Coupling::scaled_identity(1, ln)?, vec![1]),
        FamilyKind::ShiftedBubble => (PMap::zeros(model, 2)?, Coupling::scaled_identity(2, ln)?, vec![1, 1]),
        FamilyKind::BubblePair => (
            PMap::constants(model, &[0.0, constant_yamabe_value(n)])?,
            Coupling::scaled_identity(2, ln)?,
            vec![1, 0],
        ),
        FamilyKind::EqualRowsPair => (PMap::zeros(model, p)?, seq.couplings[0].clone(), vec![1, 1]),
    };
    seq.with_limit(limit, a_lim, counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseOptions {
    /// Ball radius for the exterior L² fraction and the lower ratio.
    pub delta: f64,
    /// Rescaled window for the asymptotic fit; `None` means `delta`.
    pub fit_window: Option<f64>,
    /// Fit annulus as fractions of the window.
    pub annulus: [f64; 2],
    /// Cells of the local rescaled grids.
    pub rescale_nodes: usize,
    /// Radius of the Pohozaev ball on the unit-weight rescaling.
    pub pohozaev_radius: f64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions { delta: 0.5, fit_window: None, annulus: [0.2, 0.8], rescale_nodes: 2048, pohozaev_radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberDiagnostics {
    pub index: usize,
    pub parameter: f64,
    pub center: f64,
    pub weight: f64,
    pub component: usize,
    pub exterior_ratio: f64,
    pub envelope: f64,
    pub splitting_residual: Option<f64>,
    /// One fit per component of the `√μ` rescaling.
    pub fits: Vec<AsymptoticFit>,
    pub pohozaev: PohozaevSides,
    pub lower_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub dimension: usize,
    pub options: DiagnoseOptions,
    pub members: Vec<MemberDiagnostics>,
}

impl BlowupReport {
    pub const CSV_HEADER: &'static str = "index,lambda,mu,R_delta,envelope,splitting_residual,A_fit,c_fit,pohozaev_gap";

    /// One row per member; the fit columns refer to the component carrying
    /// the maximum.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for m in &self.members {
            let fit = m.fits[m.component];
            let split = m.splitting_residual.map(|v| format!("{v:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                m.index,
                m.parameter,
                m.weight,
                m.exterior_ratio,
                m.envelope,
                split,
                fit.a,
                fit.c,
                m.pohozaev.gap()
            )?;
        }
        Ok(())
    }
}

/// Runs every diagnostic on each member, in index order.
pub fn diagnose(seq: &BlowupSequence, opts: &DiagnoseOptions) -> Result<BlowupReport> {
    let [f1, f2] = opts.annulus;
    if !(0.0 < f1 && f1 < f2 && f2 <= 1.0) {
        return config(format!("annulus fractions [{f1}, {f2}] must satisfy 0 < a < b <= 1"));
    }
    let window = opts.fit_window.unwrap_or(opts.delta);
    let splitting = match seq.limit {
        Some(_) => Some(energy_splitting_residual(seq)?),
        None => None,
    };
    let zero = PMap::zeros(&seq.model, seq.maps[0].p())?;
    let limit = seq.limit().unwrap_or(&zero);
    let mut members = Vec::with_capacity(seq.len());
    for (index, u) in seq.maps.iter().enumerate() {
        let loc = extract_center_weight(u)?;
        let exterior_ratio = l2_concentration_ratio(u, &[loc.center], opts.delta)?;
        let envelope = pointwise_envelope(u, limit, &[loc.center])?;
        let half = standard_rescale(u, loc.center, loc.weight, RescalePower::Half, window, opts.rescale_nodes)?;
        let fits = half
            .components()
            .iter()
            .map(|f| sharp_asymptotics_fit(f, f1 * window, f2 * window))
            .collect::<Result<Vec<_>>>()?;
        let one = standard_rescale(
            u,
            loc.center,
            loc.weight,
            RescalePower::One,
            2.0 * opts.pohozaev_radius,
            opts.rescale_nodes,
        )?;
        let pohozaev = pohozaev_residual(one.component(loc.component), opts.pohozaev_radius)?;
        members.push(MemberDiagnostics {
            index,
            parameter: seq.params[index],
            center: loc.center,
            weight: loc.weight,
            component: loc.component,
            exterior_ratio,
            envelope,
            splitting_residual: splitting.as_ref().map(|s| s[index]),
            fits,
            pohozaev,
            lower_ratio: concentration_ratio(u, opts.delta)?,
        });
    }
    Ok(BlowupReport { dimension: seq.model.dim(), options: opts.clone(), members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{euclid_bubble_radial, manifold_bubble, BubbleParams};
    use crate::variational::gradient_residual;
    use proptest::prelude::*;

    fn sphere(n: usize, nodes: usize) -> Model {
        build_model(ModelKind::SphereRadial, n, nodes).unwrap()
    }

    fn ball(n: usize, radius: f64, nodes: usize) -> Model {
        build_model(ModelKind::EuclideanBallRadial { radius }, n, nodes).unwrap()
    }

    const GRID: [f64; 4] = [1.5, 1.1, 1.01, 1.001];

    #[test]
    fn extraction_of_exact_bubble() {
        let m = sphere(4, 1024);
        let center = m.nodes()[300];
        let f = manifold_bubble(&BubbleParams { center, weight: 0.05, n: 4 }, &m).unwrap();
        let loc = extract_center_weight(&PMap::new(vec![f]).unwrap()).unwrap();
        assert_eq!(loc.node, 300);
        assert_eq!(loc.center, center);
        assert!((loc.weight - 0.05).abs() < 1e-14);
    }

    #[test]
    fn extraction_of_constants_and_zero() {
        let m = sphere(5, 64);
        let u = PMap::constants(&m, &[2.0, 2.0]).unwrap();
        let loc = extract_center_weight(&u).unwrap();
        assert_eq!((loc.node, loc.component), (0, 0));
        assert!((loc.weight - 2f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        let z = PMap::zeros(&m, 2).unwrap();
        assert!(matches!(extract_center_weight(&z), Err(Error::Domain(_))));
    }

    #[test]
    fn sphere_weights_decrease_to_zero() {
        let m = sphere(4, 2048);
        let seq = build_family(FamilyKind::SphereYamabe, &m, &GRID, &FamilyOptions::default()).unwrap();
        let w: Vec<f64> = seq.maps().iter().map(|u| extract_center_weight(u).unwrap().weight).collect();
        assert!(w.windows(2).all(|p| p[1] < p[0]));
        assert!(w[3] < 0.02);
    }

    #[test]
    fn splitting_of_sphere_family() {
        let m = sphere(4, 4096);
        let seq = build_family(FamilyKind::SphereYamabe, &m, &[1.01], &FamilyOptions::default()).unwrap();
        let r = energy_splitting_residual(&seq).unwrap()[0];
        let quantum = sharp_constant(4).unwrap().powi(-4) / 4.0;
        assert!(r <= 0.01 * quantum, "{r} vs {quantum}");
    }

    #[test]
    fn splitting_of_copies_of_a_solution() {
        let m = sphere(4, 1024);
        let c = constant_yamabe_value(4);
        let u = PMap::constants(&m, &[c]).unwrap();
        let a = Coupling::scaled_identity(1, sphere_potential(4)).unwrap();
        let seq = BlowupSequence::new(&m, vec![1.0, 2.0], vec![u.clone(), u.clone()], vec![a.clone(), a.clone()])
            .unwrap()
            .with_limit(u.clone(), a.clone(), vec![0])
            .unwrap();
        let res = gradient_residual(&u, &a, 1.0).unwrap().sup_abs();
        for r in energy_splitting_residual(&seq).unwrap() {
            assert!(r <= 10.0 * res + 1e-15);
        }
        let bare = BlowupSequence::new(&m, vec![1.0], vec![u], vec![a]).unwrap();
        assert!(matches!(energy_splitting_residual(&bare), Err(Error::Config(_))));
    }

    #[test]
    fn splitting_of_bubble_pair() {
        let m = sphere(4, 4096);
        let seq = build_family(FamilyKind::BubblePair, &m, &GRID, &FamilyOptions::default()).unwrap();
        let r = energy_splitting_residual(&seq).unwrap();
        let quantum = sharp_constant(4).unwrap().powi(-4) / 4.0;
        assert!(r.iter().all(|v| *v <= 0.01 * quantum), "{r:?}");
    }

    #[test]
    fn splitting_additivity() {
        let m = sphere(4, 4096);
        let one = build_family(FamilyKind::SphereYamabe, &m, &[1.01], &FamilyOptions::default()).unwrap();
        let two = one.concat_components(&one).unwrap();
        assert_eq!(two.bubbles(), Some(2));
        let r = energy_splitting_residual(&two).unwrap()[0];
        let quantum = sharp_constant(4).unwrap().powi(-4) / 4.0;
        assert!(r <= 0.02 * quantum);
    }

    #[test]
    fn family_parameters_must_be_monotone() {
        let m = sphere(4, 64);
        let e = build_family(FamilyKind::SphereYamabe, &m, &[1.5, 1.1, 1.2], &FamilyOptions::default());
        assert!(matches!(e, Err(Error::Config(_))));
        assert!(matches!(FamilyKind::from_name("remark99"), Err(Error::Config(_))));
    }

    #[test]
    fn family_members_solve_their_systems() {
        let m = sphere(4, 4096);
        let h2 = m.spacing().powi(2);
        for kind in [FamilyKind::SphereYamabe, FamilyKind::BubblePair, FamilyKind::EqualRowsPair] {
            let seq = build_family(kind, &m, &[3.0, 2.0], &FamilyOptions::default()).unwrap();
            for (u, a) in seq.maps().iter().zip(seq.couplings()) {
                let r = gradient_residual(u, a, 1.0).unwrap().sup_abs();
                assert!(r <= 20.0 * h2, "{kind:?}: {r}");
            }
        }
        let pair = build_family(FamilyKind::BubblePair, &m, &GRID, &FamilyOptions::default()).unwrap();
        assert!(pair.couplings().iter().all(|a| crate::analytic::structure_tests(a).cooperative));
    }

    #[test]
    fn exterior_ratio_dichotomy() {
        let m4 = sphere(4, 4096);
        let seq = build_family(FamilyKind::SphereYamabe, &m4, &GRID, &FamilyOptions::default()).unwrap();
        let r4: Vec<f64> = seq
            .maps()
            .iter()
            .map(|u| l2_concentration_ratio(u, &[extract_center_weight(u).unwrap().center], 0.5).unwrap())
            .collect();
        assert!(r4.windows(2).all(|p| p[1] < p[0]), "{r4:?}");
        assert!(r4[3] < 0.35, "{r4:?}");
        let m3 = sphere(3, 4096);
        let seq = build_family(FamilyKind::SphereYamabe, &m3, &GRID, &FamilyOptions::default()).unwrap();
        for u in seq.maps() {
            let r = l2_concentration_ratio(u, &[0.0], 0.5).unwrap();
            assert!(r > 0.5, "{r}");
        }
    }

    #[test]
    fn exterior_ratio_monotone_in_every_radius() {
        let m = sphere(5, 4096);
        let seq = build_family(FamilyKind::SphereYamabe, &m, &GRID, &FamilyOptions::default()).unwrap();
        for delta in [0.2, 0.5, 1.0] {
            let r: Vec<f64> = seq.maps().iter().map(|u| l2_concentration_ratio(u, &[0.0], delta).unwrap()).collect();
            assert!(r.windows(2).all(|p| p[1] < p[0]), "δ = {delta}: {r:?}");
        }
    }

    #[test]
    fn exterior_ratio_edge_cases() {
        let m = sphere(4, 1024);
        let trunc = Field::from_fn(&m, |t| if t < 0.4 { 1.0 + t } else { 0.0 }).unwrap();
        let u = PMap::new(vec![trunc]).unwrap();
        assert!(l2_concentration_ratio(&u, &[0.0], 0.5).unwrap() <= 1e-3);
        assert!(matches!(l2_concentration_ratio(&u, &[0.0], 4.0), Err(Error::Domain(_))));
        let c = PMap::constants(&m, &[1.0]).unwrap();
        let exact = 1.0 - m.volume_between(0.0, 1.0) / m.volume();
        assert!((l2_concentration_ratio(&c, &[0.0], 1.0).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn envelope_bounds() {
        let m = sphere(4, 4096);
        let seq = build_family(FamilyKind::SphereYamabe, &m, &[1.5, 1.1, 1.01, 1.001], &FamilyOptions::default())
            .unwrap();
        let zero = PMap::zeros(&m, 1).unwrap();
        let env: Vec<f64> = seq.maps().iter().map(|u| pointwise_envelope(u, &zero, &[0.0]).unwrap()).collect();
        let (lo, hi) = env.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 2.0, "{env:?}");
        let u = &seq.maps()[3];
        assert_eq!(pointwise_envelope(u, u, &[0.0]).unwrap(), 0.0);
        let mu = extract_center_weight(u).unwrap().weight;
        let ext: Vec<f64> =
            [1.0, 4.0, 16.0].iter().map(|r| exterior_envelope(u, &zero, &[0.0], r * mu.sqrt()).unwrap()).collect();
        assert!(ext[1] < ext[0] && ext[2] < ext[1], "{ext:?}");
        assert!(matches!(pointwise_envelope(u, &zero, &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn balance_on_constants_is_volume_arithmetic() {
        let m = sphere(4, 512);
        let c = 1.7;
        let u = PMap::constants(&m, &[c, c]).unwrap();
        let b = local_balance_checks(&u, 0.0, 0.3, 2.0).unwrap();
        let vol = m.volume_between(0.0, 0.6);
        assert_eq!(b.sup_bound.lhs, c);
        assert!((b.sup_bound.rhs - (2.0 * c * c * vol).sqrt()).abs() < 1e-10);
        assert!((b.controlled.ratio - 1.0 / c.powf(2.0)).abs() < 1e-12);
        assert_eq!(b.gradient.lhs, 0.0);
        assert!((b.gradient.rhs - 2.0 * (1.0 + c * c) * c * c * vol).abs() < 1e-10);
        assert!(matches!(local_balance_checks(&u, 1.5, 1.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn balance_ratios_stay_bounded_along_family() {
        let m = sphere(4, 4096);
        let seq = build_family(FamilyKind::SphereYamabe, &m, &GRID, &FamilyOptions::default()).unwrap();
        let checks: Vec<BalanceChecks> = seq
            .maps()
            .iter()
            .map(|u| local_balance_checks(u, std::f64::consts::FRAC_PI_2, 0.3, 2.0).unwrap())
            .collect();
        let spread = |f: &dyn Fn(&BalanceChecks) -> f64| {
            let v: Vec<f64> = checks.iter().map(f).collect();
            v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        assert!(spread(&|b| b.sup_bound.ratio) < 2.0);
        assert!(checks.iter().all(|b| b.controlled.ratio.is_finite() && b.controlled.ratio > 0.0));
        assert!(spread(&|b| b.controlled.ratio) < 4.0);
    }

    #[test]
    fn rescaled_bubble_tends_to_standard_profile() {
        let n = 4;
        let m = sphere(n, 16384);
        let mu = 1e-3;
        let f = manifold_bubble(&BubbleParams { center: 0.0, weight: mu, n }, &m).unwrap();
        let u = PMap::new(vec![f]).unwrap();
        let r = standard_rescale(&u, 0.0, mu, RescalePower::One, 4.0, 512).unwrap();
        let err = r
            .component(0)
            .model()
            .nodes()
            .iter()
            .zip(r.component(0).values())
            .map(|(x, v)| (v - euclid_bubble_radial(*x, 1.0, n)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 0.02, "{err}");
    }

    #[test]
    fn rescale_identity_on_flat_model() {
        let m = ball(4, 2.0, 256);
        let f = Field::from_fn(&m, |r| 1.0 + r * r).unwrap();
        let u = PMap::new(vec![f]).unwrap();
        let r = standard_rescale(&u, 0.0, 1.0, RescalePower::One, 1.5, 200).unwrap();
        for (x, v) in r.model().nodes().iter().zip(r.component(0).values()) {
            let h = m.spacing();
            assert!((v - (1.0 + x * x)).abs() <= h * h, "{x}: {v}");
        }
        assert!(matches!(
            standard_rescale(&u, 0.0, 1.0, RescalePower::One, 3.0, 200),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rescaling_is_consistent_with_extraction() {
        let m = sphere(4, 4096);
        let u = PMap::new(vec![sphere_bubble_field(&m, 1.01).unwrap()]).unwrap();
        let loc = extract_center_weight(&u).unwrap();
        let r = standard_rescale(&u, loc.center, loc.weight, RescalePower::One, 3.0, 1024).unwrap();
        let again = extract_center_weight(&r).unwrap();
        assert_eq!(again.node, 0);
        assert!((again.weight - 1.0).abs() < 1e-12);
        assert!((r.sup_abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn synthetic_fit_recovers_coefficients() {
        let m = ball(4, 2.0, 1024);
        let f = Field::from_fn(&m, |r| 3.0 / (r * r) + 5.0).unwrap();
        let fit = sharp_asymptotics_fit(&f, 0.4, 1.6).unwrap();
        assert!((fit.a - 3.0).abs() < 1e-8 && (fit.c - 5.0).abs() < 1e-8);
        assert!(fit.residual < 1e-12);
        assert!(matches!(sharp_asymptotics_fit(&f, 0.8, 0.4), Err(Error::Domain(_))));
        assert!(matches!(sharp_asymptotics_fit(&f, 0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn sphere_family_fit() {
        let m = sphere(4, 8192);
        let seq = build_family(FamilyKind::BubblePair, &m, &[1.001], &FamilyOptions::default()).unwrap();
        let u = &seq.maps()[0];
        let loc = extract_center_weight(u).unwrap();
        let r = standard_rescale(u, loc.center, loc.weight, RescalePower::Half, 4.0, 2048).unwrap();
        let blowing = sharp_asymptotics_fit(r.component(0), 0.8, 3.2).unwrap();
        let fixed = sharp_asymptotics_fit(r.component(1), 0.8, 3.2).unwrap();
        assert!(blowing.a > 0.0 && blowing.residual <= 0.05, "{blowing:?}");
        assert!(fixed.a.abs() <= 1e-3 * blowing.a, "{fixed:?}");
        let moved = sharp_asymptotics_fit(r.component(0), 0.88, 3.52).unwrap();
        assert!(((moved.a - blowing.a) / blowing.a).abs() <= 0.01 || blowing.residual > 0.01);
    }

    #[test]
    fn pohozaev_exact_cases() {
        let m = ball(4, 2.0, 1024);
        let c = Field::constant(&m, 2.5).unwrap();
        let s = pohozaev_residual(&c, 1.0).unwrap();
        assert_eq!((s.lhs, s.rhs), (0.0, 0.0));
        for n in [3, 4, 5] {
            let m = ball(n, 2.0, 1024);
            let lin = Field::from_fn(&m, |r| r).unwrap();
            let s = pohozaev_residual_first_harmonic(&lin, 1.0).unwrap();
            assert!(s.lhs.abs() < 1e-12 && s.rhs.abs() < 1e-12, "{s:?}");
        }
        assert!(matches!(pohozaev_residual(&c, 2.5), Err(Error::Domain(_))));
    }

    #[test]
    fn pohozaev_bubble_second_order() {
        let gap = |nodes: usize| {
            let m = ball(4, 2.0, nodes);
            let f = Field::from_fn(&m, |r| euclid_bubble_radial(r, 1.0, 4)).unwrap();
            let s = pohozaev_residual(&f, 1.0).unwrap();
            (s.gap(), s.lhs, m.spacing())
        };
        let (g, lhs, h) = gap(8192);
        assert!(g <= 50.0 * h * h * lhs.abs(), "{g} {lhs}");
        let (g2, _, _) = gap(4096);
        let ratio = g2 / g;
        assert!((3.0..=5.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn lower_ratio_along_family() {
        let m = sphere(5, 4096);
        let seq = build_family(FamilyKind::SphereYamabe, &m, &GRID, &FamilyOptions::default()).unwrap();
        let r = concentration_lower_ratio(&seq, 4.0).unwrap();
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo <= 4.0, "{r:?}");
    }

    #[test]
    fn lower_ratio_guards_tiny_weights() {
        let m = sphere(4, 256);
        let u = PMap::constants(&m, &[1e13]).unwrap();
        let a = Coupling::scaled_identity(1, 2.0).unwrap();
        let seq = BlowupSequence::new(&m, vec![0.0], vec![u], vec![a]).unwrap();
        assert!(matches!(concentration_lower_ratio(&seq, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn diagnose_writes_one_row_per_member() {
        let m = sphere(4, 2048);
        let seq = build_family(FamilyKind::SphereYamabe, &m, &[1.5, 1.1], &FamilyOptions::default()).unwrap();
        let rep = diagnose(&seq, &DiagnoseOptions::default()).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(BlowupReport::CSV_HEADER));
        assert!(rep.members.iter().all(|m| m.weight > 0.0 && (0.0..=1.0).contains(&m.exterior_ratio)));
    }

    proptest! {
        #[test]
        fn exterior_ratio_is_a_fraction(delta in 0.05f64..3.0, c in 0.1f64..3.0, center in 0.0f64..3.0) {
            let m = sphere(4, 128);
            let u = PMap::new(vec![Field::from_fn(&m, |t| c + t.sin()).unwrap()]).unwrap();
            let r = l2_concentration_ratio(&u, &[center], delta).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn fit_is_exact_on_its_span(a in -10.0f64..10.0, c in -10.0f64..10.0, n in 3usize..7) {
            let m = ball(n, 1.0, 256);
            let e = n as i32 - 2;
            let f = Field::from_fn(&m, |r| a * r.powi(-e) + c).unwrap();
            let fit = sharp_asymptotics_fit(&f, 0.2, 0.8).unwrap();
            prop_assert!((fit.a - a).abs() < 1e-8 * (1.0 + a.abs()));
            prop_assert!((fit.c - c).abs() < 1e-7 * (1.0 + c.abs() + a.abs()));
        }
    }
}
