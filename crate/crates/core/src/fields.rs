//! Grid functions and p-maps with their weighted norms and integrals.

use std::io::Write;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::geometry::{ManifoldModel, Model};

/// One scalar component sampled on the nodes of a model.
#[derive(Debug, Clone)]
pub struct Field {
    model: Model,
    values: Vec<f64>,
}

pub(crate) fn same_grid(a: &ManifoldModel, b: &ManifoldModel) -> bool {
    std::ptr::eq(a, b)
        || (a.kind() == b.kind() && a.dim() == b.dim() && a.len() == b.len())
}

impl Field {
    pub fn new(model: &Model, values: Vec<f64>) -> Result<Self> {
        if values.len() != model.len() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                model.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite field value at node {j}")));
        }
        Ok(Self { model: Arc::clone(model), values })
    }

    pub fn from_fn(model: &Model, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(model, model.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn constant(model: &Model, c: f64) -> Result<Self> {
        Self::new(model, vec![c; model.len()])
    }

    pub fn zeros(model: &Model) -> Self {
        Self { model: Arc::clone(model), values: vec![0.0; model.len()] }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field { model: Arc::clone(&self.model), values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(&self.model, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ f dv_g`.
    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.model.weights()).map(|(v, w)| v * w).sum()
    }

    /// Applies the model Laplacian.
    pub fn laplacian(&self) -> Field {
        Field { model: Arc::clone(&self.model), values: self.model.laplacian_values(&self.values) }
    }

    /// Writes `coordinate,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "coordinate,value")?;
        for (x, v) in self.model.nodes().iter().zip(&self.values) {
            writeln!(out, "{x:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Laplacian of a field; errors when the field lives on another grid.
pub fn laplacian(f: &Field, model: &ManifoldModel) -> Result<Field> {
    if !same_grid(f.model(), model) {
        return Err(Error::Shape("field is not defined on this model".into()));
    }
    Ok(f.laplacian())
}

/// `(Σ_j w_j |f_j|^q)^{1/q}`.
pub fn lq_norm(f: &Field, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return domain(format!("norm exponent must be positive, got {q}"));
    }
    let w = f.model().weights();
    let s: f64 = f.values().iter().zip(w).map(|(v, w)| w * v.abs().powf(q)).sum();
    Ok(s.powf(1.0 / q))
}

/// Discrete `∫|∇f|² dv_g`, built from face differences and face areas.
pub fn grad_energy(f: &Field) -> f64 {
    f.model().dirichlet_energy(f.values())
}

/// An ordered list of p fields on one grid.
#[derive(Debug, Clone)]
pub struct PMap {
    components: Vec<Field>,
}

impl PMap {
    pub fn new(components: Vec<Field>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::Shape("a p-map needs at least one component".into()));
        };
        if components.iter().any(|c| !same_grid(c.model(), first.model())) {
            return Err(Error::Shape("components live on different grids".into()));
        }
        Ok(Self { components })
    }

    pub fn zeros(model: &Model, p: usize) -> Result<Self> {
        Self::new((0..p).map(|_| Field::zeros(model)).collect())
    }

    pub fn constants(model: &Model, values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&c| Field::constant(model, c)).collect::<Result<_>>()?)
    }

    /// Builds a map from node-major interleaved data (`data[j*p + i]` is
    /// component i at node j).
    pub fn from_interleaved(model: &Model, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != p * model.len() {
            return Err(Error::Shape("interleaved data has the wrong length".into()));
        }
        let comps = (0..p)
            .map(|i| Field::new(model, data.iter().skip(i).step_by(p).copied().collect()))
            .collect::<Result<_>>()?;
        Self::new(comps)
    }

    pub fn interleaved(&self) -> Vec<f64> {
        let p = self.p();
        let mut out = vec![0.0; p * self.model().len()];
        for (i, c) in self.components.iter().enumerate() {
            for (j, v) in c.values().iter().enumerate() {
                out[j * p + i] = *v;
            }
        }
        out
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    pub fn model(&self) -> &Model {
        self.components[0].model()
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Field {
        &self.components[i]
    }

    pub fn scaled(&self, c: f64) -> PMap {
        PMap { components: self.components.iter().map(|f| f.scaled(c)).collect() }
    }

    pub fn abs(&self) -> PMap {
        PMap {
            components: self
                .components
                .iter()
                .map(|f| Field { model: Arc::clone(f.model()), values: f.values.iter().map(|v| v.abs()).collect() })
                .collect(),
        }
    }

    /// Largest absolute nodal value over all components.
    pub fn sup_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.sup_abs()))
    }

    pub fn check_same_shape(&self, other: &PMap) -> Result<()> {
        if self.p() != other.p() || !same_grid(self.model(), other.model()) {
            return Err(Error::Shape(format!(
                "maps differ in shape ({} vs {} components)",
                self.p(),
                other.p()
            )));
        }
        Ok(())
    }

    /// Concatenates the components of two maps on the same grid.
    pub fn concat(&self, other: &PMap) -> Result<PMap> {
        let mut comps = self.components.clone();
        comps.extend(other.components.iter().cloned());
        PMap::new(comps)
    }
}

/// Pointwise `|U|^q = Σ_i |u_i|^q`.
pub fn pmap_abs_q(u: &PMap, q: f64) -> Result<Field> {
    if !(q > 0.0) {
        return domain(format!("exponent must be positive, got {q}"));
    }
    let n = u.model().len();
    let mut out = vec![0.0; n];
    for c in u.components() {
        for (o, v) in out.iter_mut().zip(c.values()) {
            *o += v.abs().powf(q);
        }
    }
    Field::new(u.model(), out)
}
