//! Run configuration: one TOML document with a section per command, plus the
//! compact `kind:key=value,...` forms accepted on the command line.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use critsys::blowup::FamilyOptions;
use critsys::{
    build_model, sphere_potential, Coupling, DiagnoseOptions, MinimizeOptions, Model, ModelKind,
    MultiplicityOptions, NamedMatrix, NewtonOptions,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    /// `sphere`, `circle`, or `ball`.
    pub kind: String,
    pub n: usize,
    pub nodes: usize,
    /// Circle or ball radius; ignored on the sphere.
    pub radius: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { kind: "sphere".into(), n: 4, nodes: 512, radius: 1.0 }
    }
}

impl ModelSpec {
    pub fn build(&self) -> critsys::Result<Model> {
        let kind = match self.kind.as_str() {
            "sphere" => ModelKind::SphereRadial,
            "circle" => ModelKind::ProductCircle { radius: self.radius },
            "ball" => ModelKind::EuclideanBallRadial { radius: self.radius },
            other => return Err(critsys::Error::Config(format!("unknown model kind {other:?}"))),
        };
        build_model(kind, self.n, self.nodes)
    }
}

/// Splits `kind:k=v,k=v` into the kind and its key–value pairs.
fn split_compact(s: &str) -> Result<(&str, Vec<(&str, &str)>)> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut pairs = Vec::new();
    for item in rest.split(',').filter(|t| !t.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| anyhow!("expected key=value, got {item:?}"))?;
        pairs.push((k.trim(), v.trim()));
    }
    Ok((kind.trim(), pairs))
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("cannot parse {key}={v:?}"))
}

impl FromStr for ModelSpec {
    type Err = anyhow::Error;

    /// `sphere:n=4`, `circle:n=4,T=40,N=1024`, `ball:n=4,R=2`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, pairs) = split_compact(s)?;
        let mut spec = ModelSpec { kind: kind.to_string(), ..Default::default() };
        for (k, v) in pairs {
            match k {
                "n" => spec.n = num(k, v)?,
                "N" | "nodes" => spec.nodes = num(k, v)?,
                "T" | "R" | "radius" => spec.radius = num(k, v)?,
                _ => bail!("unknown model key {k:?}"),
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    /// `n(n-2)/4 · Id_p`.
    YamabeDiag { p: usize },
    /// `(n-2)²/4 · Id_p`, the conformal potential of `S^1 × S^{n-1}`.
    CylinderDiag { p: usize },
    /// `c · Id_p`.
    ScaledIdentity { p: usize, c: f64 },
    /// `n(n-2)/4 · Id_2` plus `alpha` off the diagonal.
    OffDiagonal { alpha: f64 },
    /// Row-major symmetric constant matrix.
    Matrix { p: usize, entries: Vec<f64> },
    Named { matrix: NamedMatrix },
}

impl Default for CouplingSpec {
    fn default() -> Self {
        CouplingSpec::YamabeDiag { p: 2 }
    }
}

impl CouplingSpec {
    pub fn build(&self, n: usize) -> critsys::Result<Coupling> {
        let ln = sphere_potential(n);
        match self {
            CouplingSpec::YamabeDiag { p } => Coupling::scaled_identity(*p, ln),
            CouplingSpec::CylinderDiag { p } => Coupling::scaled_identity(*p, (n as f64 - 2.0).powi(2) / 4.0),
            CouplingSpec::ScaledIdentity { p, c } => Coupling::scaled_identity(*p, *c),
            CouplingSpec::OffDiagonal { alpha } => Coupling::constant(2, vec![ln, *alpha, *alpha, ln]),
            CouplingSpec::Matrix { p, entries } => Coupling::constant(*p, entries.clone()),
            CouplingSpec::Named { matrix } => critsys::named_matrix(matrix),
        }
    }
}

impl FromStr for CouplingSpec {
    type Err = anyhow::Error;

    /// `yamabe-diag:p=2`, `cylinder-diag:p=1`, `identity:p=2,c=1`, `offdiag:alpha=0.5`,
    /// `matrix:p=2,entries=1;0.5;0.5;1`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, pairs) = split_compact(s)?;
        let get = |key: &str| pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let need = |key: &str| get(key).ok_or_else(|| anyhow!("coupling {kind:?} needs {key}="));
        for (k, _) in &pairs {
            if !["p", "c", "alpha", "entries"].contains(k) {
                bail!("unknown coupling key {k:?}");
            }
        }
        let p = || -> Result<usize> { get("p").map(|v| num("p", v)).unwrap_or(Ok(1)) };
        Ok(match kind {
            "yamabe-diag" => CouplingSpec::YamabeDiag { p: p()? },
            "cylinder-diag" => CouplingSpec::CylinderDiag { p: p()? },
            "identity" => CouplingSpec::ScaledIdentity { p: p()?, c: num("c", need("c")?)? },
            "offdiag" => CouplingSpec::OffDiagonal { alpha: num("alpha", need("alpha")?)? },
            "matrix" => CouplingSpec::Matrix {
                p: p()?,
                entries: need("entries")?.split(';').map(|v| num("entries", v)).collect::<Result<_>>()?,
            },
            other => bail!("unknown coupling kind {other:?}"),
        })
    }
}

/// Dimension list: `4`, `3,5`, `3..8` (inclusive), or `3..=8`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (usize, usize) = (num("n", a)?, num("n", b)?);
        if a > b {
            bail!("empty dimension range {s:?}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| num("n", v.trim())).collect()
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| num("list entry", v.trim())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsConfig {
    pub dims: Vec<usize>,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig { dims: (3..=8).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// `remark13` (constant maps in dimension 6) or one of the blow-up
    /// family names.
    pub family: String,
    pub lambdas: Vec<f64>,
    /// Dimension for the blow-up families; the constant maps are fixed at 6.
    pub n: usize,
    pub nodes: usize,
    /// Residual bound for the constant maps.
    pub exact_tol: f64,
    /// Residual bound for the discretised families, in units of `h²`.
    pub h2_factor: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            family: "remark13".into(),
            lambdas: vec![0.5, 1.0, 2.0],
            n: 4,
            nodes: 4096,
            exact_tol: 1e-12,
            h2_factor: 20.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeConfig {
    pub model: ModelSpec,
    pub coupling: CouplingSpec,
    pub options: MinimizeOptions,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedSpec {
    /// `scale` times the constant solution in every component.
    Constant { scale: f64 },
    /// Sphere bubble with parameter `lambda` in every component.
    Bubble { lambda: f64 },
    /// Explicit constants, one per component.
    Values { values: Vec<f64> },
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Constant { scale: 1.05 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub model: ModelSpec,
    pub coupling: CouplingSpec,
    pub seed: SeedSpec,
    pub options: NewtonOptions,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupConfig {
    pub family: String,
    pub n: usize,
    pub nodes: usize,
    pub lambda_grid: Vec<f64>,
    pub family_options: FamilyOptions,
    pub diagnose: DiagnoseOptions,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        BlowupConfig {
            family: "sphere_yamabe".into(),
            n: 4,
            nodes: 4096,
            lambda_grid: vec![1.5, 1.1, 1.01, 1.001],
            family_options: FamilyOptions::default(),
            diagnose: DiagnoseOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplicityConfig {
    pub n: usize,
    /// Radius `T` of the big circle.
    pub radius: f64,
    pub k: usize,
    pub coupling: CouplingSpec,
    pub options: MultiplicityOptions,
}

impl Default for MultiplicityConfig {
    fn default() -> Self {
        MultiplicityConfig {
            n: 4,
            radius: 40.0,
            k: 3,
            coupling: CouplingSpec::CylinderDiag { p: 1 },
            options: MultiplicityOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub constants: ConstantsConfig,
    pub verify: VerifyConfig,
    pub minimize: MinimizeConfig,
    pub solve: SolveConfig,
    pub blowup: BlowupConfig,
    pub multiplicity: MultiplicityConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn defaults_toml() -> Result<String> {
        Ok(toml::to_string(&RunConfig::default())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_forms() {
        let m: ModelSpec = "circle:n=4,T=40,N=1024".parse().unwrap();
        assert_eq!((m.kind.as_str(), m.n, m.nodes, m.radius), ("circle", 4, 1024, 40.0));
        let c: CouplingSpec = "yamabe-diag:p=2".parse().unwrap();
        assert_eq!(c, CouplingSpec::YamabeDiag { p: 2 });
        let c: CouplingSpec = "matrix:p=2,entries=1;0.5;0.5;1".parse().unwrap();
        assert_eq!(c, CouplingSpec::Matrix { p: 2, entries: vec![1.0, 0.5, 0.5, 1.0] });
        assert!("sphere:q=1".parse::<ModelSpec>().is_err());
        assert!("bogus:p=1".parse::<CouplingSpec>().is_err());
    }

    #[test]
    fn dimension_lists() {
        assert_eq!(parse_dims("3..8").unwrap(), vec![3, 4, 5, 6, 7, 8]);
        assert_eq!(parse_dims("3..=5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_dims("4,6").unwrap(), vec![4, 6]);
        assert!(parse_dims("8..3").is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let text = RunConfig::defaults_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(toml::to_string(&back).unwrap(), text);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[verify]\nfamly = \"x\"\n").is_err());
        assert!(toml::from_str::<RunConfig>("[minimize.options]\ntoll = 1.0\n").is_err());
    }
}
