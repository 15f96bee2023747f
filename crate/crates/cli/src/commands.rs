//! One function per subcommand. Each returns the JSON result body, any CSV
//! artifacts, and whether the command's own checks passed.

use anyhow::{bail, Result};
use critsys::analytic::{
    blowup_pair_coupling, constant_triple_family, coupling_from_scalars, shifted_bubble_system, sphere_bubble_field,
};
use critsys::{
    build_family, build_model, constant_yamabe_value, critical_exponent, diagnose, free_energy, gradient_residual,
    minimize_quotient, multiplicity_energies, named_matrix, newton_solve, sharp_constant, sphere_potential,
    sphere_volume, critical_integral, Coupling, FamilyKind, Field, ModelKind, NamedMatrix, PMap, SolveReport,
};
use serde_json::{json, Value};

use crate::config::{
    BlowupConfig, ConstantsConfig, MinimizeConfig, MultiplicityConfig, SeedSpec, SolveConfig, VerifyConfig,
};

pub struct Outcome {
    pub result: Value,
    /// `(file name, contents)` pairs written next to the report.
    pub csv: Vec<(String, String)>,
    pub passed: bool,
}

pub fn constants(cfg: &ConstantsConfig) -> Result<Outcome> {
    let mut rows = Vec::new();
    for &n in &cfg.dims {
        let k = sharp_constant(n)?;
        rows.push(json!({
            "n": n,
            "critical_exponent": critical_exponent(n),
            "sphere_potential": sphere_potential(n),
            "sphere_volume": sphere_volume(n)?,
            "sharp_constant": k,
            "sobolev_bound": k.powi(-2),
            "constant_yamabe_value": constant_yamabe_value(n),
        }));
    }
    let mut text = String::from("n,sharp_constant,sphere_volume\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{:.12e},{:.12e}\n",
            r["n"],
            r["sharp_constant"].as_f64().unwrap_or(f64::NAN),
            r["sphere_volume"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    Ok(Outcome { result: json!({ "rows": rows }), csv: vec![("constants.csv".into(), text)], passed: true })
}

/// The systems checked by `verify`: maps, coupling, and the coefficient of
/// the nonlinearity.
fn verify_case(family: &str, n: usize, nodes: usize, lambda: f64) -> Result<(Vec<PMap>, Coupling, f64, f64)> {
    if family == "remark13" {
        let model = build_model(ModelKind::SphereRadial, 6, nodes)?;
        let (maps, a) = constant_triple_family(&model, lambda)?;
        return Ok((maps.to_vec(), a, -1.0, model.spacing()));
    }
    let model = build_model(ModelKind::SphereRadial, n, nodes)?;
    let ln = sphere_potential(n);
    let u = sphere_bubble_field(&model, lambda)?;
    let pot = Field::constant(&model, ln)?;
    let (map, a) = match family {
        "sphere_yamabe" => (PMap::new(vec![u])?, Coupling::scaled_identity(1, ln)?),
        "remark11" => shifted_bubble_system(&model, lambda)?,
        "scalar_pair" => {
            let v = sphere_bubble_field(&model, 2.0 * lambda)?;
            let beta = Field::constant(&model, 0.1)?;
            let a = coupling_from_scalars(&u, &v, &pot, &pot, &beta)?;
            (PMap::new(vec![u, v])?, a)
        }
        "prop91_pair" => {
            let c = Field::constant(&model, constant_yamabe_value(n))?;
            let beta = Field::constant(&model, 1e-3)?;
            let a = blowup_pair_coupling(&u, &c, &beta, 1, &pot, &pot)?;
            (PMap::new(vec![u, c])?, a)
        }
        "remark91" => {
            let h = ln / 2.0;
            let a = named_matrix(&NamedMatrix::EqualRowSums { n, a: h, b: h, c: h })?;
            (PMap::new(vec![u.clone(), u])?, a)
        }
        "remark92" => {
            let h = ln / 2.0;
            let a = named_matrix(&NamedMatrix::ChainTriple { n, a: h, b: h, c: h + 1.0, d: 1.0, e: ln + 1.0 })?;
            (PMap::new(vec![u.clone(), u.clone(), u])?, a)
        }
        "corollary91" => {
            let a = named_matrix(&NamedMatrix::ShiftedIdentity { n, t: 0.5, p: 2, base: vec![1.0, -1.0, -1.0, 1.0] })?;
            (PMap::new(vec![u.clone(), u])?, a)
        }
        "remark12" => {
            let a = named_matrix(&NamedMatrix::SignedBlock { potential: ln, alpha: 0.5, beta: 1.0 })?;
            let zero = Field::zeros(&model);
            (PMap::new(vec![u.clone(), u, zero])?, a)
        }
        other => bail!(critsys::Error::Config(format!(
            "unknown verify family {other:?}; expected remark13, sphere_yamabe, remark11, scalar_pair, prop91_pair, \
             remark91, remark92, corollary91, or remark12"
        ))),
    };
    Ok((vec![map], a, 1.0, model.spacing()))
}

pub fn verify(cfg: &VerifyConfig) -> Result<Outcome> {
    let exact = cfg.family == "remark13";
    let mut cases = Vec::new();
    let mut passed = true;
    for &lambda in &cfg.lambdas {
        let (maps, a, coef, h) = verify_case(&cfg.family, cfg.n, cfg.nodes, lambda)?;
        let bound = if exact { cfg.exact_tol } else { cfg.h2_factor * h * h };
        let mut residuals = Vec::new();
        let mut free = Vec::new();
        for u in &maps {
            residuals.push(gradient_residual(u, &a, coef)?.sup_abs());
            free.push(free_energy(u, &a)?);
        }
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        let ok = worst <= bound;
        passed &= ok;
        cases.push(json!({
            "lambda": lambda,
            "residuals": residuals,
            "residual_in_h2": worst / (h * h),
            "free_energy": free,
            "critical_integral": maps.iter().map(critical_integral).collect::<Vec<_>>(),
            "bound": bound,
            "passed": ok,
        }));
    }
    Ok(Outcome { result: json!({ "family": cfg.family, "cases": cases }), csv: Vec::new(), passed })
}

fn solution_csv(prefix: &str, u: &PMap) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    for (i, c) in u.components().iter().enumerate() {
        let mut buf = Vec::new();
        c.write_csv(&mut buf)?;
        files.push((format!("{prefix}_u{}.csv", i + 1), String::from_utf8(buf)?));
    }
    Ok(files)
}

fn solve_json(rep: &SolveReport) -> Result<Value> {
    Ok(serde_json::to_value(rep)?)
}

pub fn minimize(cfg: &MinimizeConfig) -> Result<Outcome> {
    let model = cfg.model.build()?;
    let a = cfg.coupling.build(model.dim())?;
    let rep = minimize_quotient(&a, &model, &cfg.options)?;
    let bound = sharp_constant(model.dim())?.powi(-2);
    let mut result = solve_json(&rep)?;
    result["sobolev_bound"] = json!(bound);
    result["relative_gap_to_bound"] = json!((rep.value - bound) / bound);
    Ok(Outcome { result, csv: solution_csv("minimize", &rep.solution)?, passed: rep.converged })
}

pub fn solve(cfg: &SolveConfig) -> Result<Outcome> {
    let model = cfg.model.build()?;
    let a = cfg.coupling.build(model.dim())?;
    let p = a.p();
    let seed = match &cfg.seed {
        SeedSpec::Constant { scale } => PMap::constants(&model, &vec![scale * constant_yamabe_value(model.dim()); p])?,
        SeedSpec::Bubble { lambda } => {
            let b = sphere_bubble_field(&model, *lambda)?;
            PMap::new(vec![b; p])?
        }
        SeedSpec::Values { values } => PMap::constants(&model, values)?,
    };
    let rep = newton_solve(&a, &model, &seed, &cfg.options)?;
    let mut result = solve_json(&rep)?;
    result["free_energy"] = json!(free_energy(&rep.solution, &a)?);
    Ok(Outcome { result, csv: solution_csv("solve", &rep.solution)?, passed: rep.converged })
}

pub fn blowup(cfg: &BlowupConfig) -> Result<Outcome> {
    let kind = FamilyKind::from_name(&cfg.family)?;
    let model = build_model(ModelKind::SphereRadial, cfg.n, cfg.nodes)?;
    let seq = build_family(kind, &model, &cfg.lambda_grid, &cfg.family_options)?;
    let report = diagnose(&seq, &cfg.diagnose)?;
    let passed = report.members.iter().all(|m| m.weight > 0.0 && (0.0..=1.0).contains(&m.exterior_ratio));
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    let result = json!({ "family": kind.name(), "report": serde_json::to_value(&report)? });
    Ok(Outcome { result, csv: vec![("blowup.csv".into(), String::from_utf8(buf)?)], passed })
}

pub fn multiplicity(cfg: &MultiplicityConfig) -> Result<Outcome> {
    let a = cfg.coupling.build(cfg.n)?;
    let rep = multiplicity_energies(&a, cfg.n, cfg.radius, cfg.k, &cfg.options)?;
    let increasing = rep.entries.windows(2).all(|w| w[0].energy < w[1].energy);
    let mut text = String::from("alpha,mu,energy,identity_gap,lift_residual\n");
    for e in &rep.entries {
        text.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            e.alpha, e.mu, e.energy, e.identity_gap, e.lift_residual
        ));
    }
    let mut result = serde_json::to_value(&rep)?;
    result["strictly_increasing"] = json!(increasing);
    Ok(Outcome { result, csv: vec![("multiplicity.csv".into(), text)], passed: rep.complete && increasing })
}
