use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::density::{coefficients_json, dense_approximant, Approximant, DenseApproximant};
use crate::dtn::{alessandrini_with, ball_spectrum_errors, dtn_diff_norm, steklov_eigenvalues, DtnOperator};
use crate::error::{LabError, Result, StageExt};
use crate::experiments::config::{DomainSpec, ExperimentKind, ScenarioConfig, SweepSpec};
use crate::fem::{boundary_trace, energy, Conductivity, Family, ScalarField};
use crate::fit::{fit_exponent, PowerFit};
use crate::geometry::{Domain, Mesh, Probe};
use crate::liouville::{
    energy_estimate_constants, hopf_ratio_bounds, liouville_residual, log_ratio_residual, log_ratio_residual_refined, q_from_sigma,
    smallest_eigenpair, transformed_dtn_residual, two_smallest_eigenvalues,
};
use crate::recovery::{
    build_psi_k, bump_family, concentration_with, csv_field, exterior_decay_with, kv_estimate, normal_layer_family,
    records_csv, singular_estimate_with, stability_sweep, DirichletEnergy,
};
use crate::trace::{boundary_forms, norm_equivalence_eigenvalue, TraceBasis};

/// Collar width of the eigenfunction-to-distance ratio.
pub const COLLAR_WIDTH: f64 = 0.125;

/// Random boundary data drawn by the validation checks.
const RANDOM_DATA: usize = 5;

/// Random fields drawn for the energy-estimate constants.
const ENERGY_SAMPLES: usize = 20;

/// Sup-gap above which two approximants count as distinct.
const DISTINCT_GAP: f64 = 1e-2;

/// DtN matrices up to this dimension are written as Matrix Market text.
const EXPORT_DTN_DIM: usize = 1000;

/// Approximants up to this degree are exported as coefficient tensors.
const EXPORT_DEGREE: usize = 16;

/// Columns of whitespace plot data, one row per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Everything one scenario produced. File names are relative to `dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub dir: PathBuf,
    pub kind: Option<ExperimentKind>,
    pub files: Vec<String>,
    pub plots: Vec<PlotData>,
    pub summary: Value,
}

impl Bundle {
    /// A bundle with no outputs.
    pub fn empty(dir: impl Into<PathBuf>) -> Self {
        Bundle { dir: dir.into(), kind: None, files: Vec::new(), plots: Vec::new(), summary: Value::Null }
    }
}

/// Collects outputs in a fixed order and writes them at the end.
struct Outputs {
    files: BTreeMap<String, String>,
    plots: Vec<PlotData>,
    results: serde_json::Map<String, Value>,
    fits: serde_json::Map<String, Value>,
}

impl Outputs {
    fn new() -> Self {
        Outputs { files: BTreeMap::new(), plots: Vec::new(), results: Default::default(), fits: Default::default() }
    }

    fn file(&mut self, name: impl Into<String>, text: String) {
        self.files.insert(name.into(), text);
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) {
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            let cells: Vec<String> = r.iter().map(|c| csv_field(c)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        self.file(name, s);
    }

    fn plot(&mut self, name: impl Into<String>, columns: &[&str], rows: Vec<Vec<f64>>) {
        self.plots.push(PlotData { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows });
    }

    fn result(&mut self, key: impl Into<String>, v: Value) {
        self.results.insert(key.into(), v);
    }

    /// Records a log-log fit when the data admit one, `null` otherwise.
    fn fit(&mut self, key: impl Into<String>, xs: &[f64], ys: &[f64]) -> Option<PowerFit> {
        let fit = fit_exponent(xs, ys).ok();
        self.fits.insert(key.into(), fit_json(fit.as_ref()));
        fit
    }
}

fn fit_json(fit: Option<&PowerFit>) -> Value {
    match fit {
        Some(f) => {
            let (lo, hi) = f.interval();
            json!({ "slope": f.slope, "intercept": f.intercept, "ci95": [lo, hi], "points": f.points })
        }
        None => Value::Null,
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn mesh_json(mesh: &Mesh) -> Value {
    json!({
        "id": mesh.id(),
        "vertices": mesh.n_vertices(),
        "tets": mesh.tets().len(),
        "boundary_vertices": mesh.n_boundary(),
        "h": mesh.h(),
    })
}

/// Runs the experiment of a resolved configuration and writes its CSV
/// tables, extra files and `summary.json` into the output directory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Bundle> {
    let kind = config.kind().stage("config")?;
    let dir = config.out_dir();
    let cond = Conductivity::from_family(config.conductivity.clone(), config.domain.domain()).stage("conductivity")?;
    let mut out = Outputs::new();
    match kind {
        ExperimentKind::DtnValidate => dtn_validate(config, &cond, &mut out)?,
        ExperimentKind::RecoverSigma => recover_sigma(config, &cond, &mut out)?,
        ExperimentKind::DecayProfile => decay_profile(config, &cond, &mut out)?,
        ExperimentKind::StabilitySweep => sweep(config, &mut out)?,
        ExperimentKind::Liouville => liouville(config, &cond, &mut out)?,
        ExperimentKind::Spectral => spectral(config, &cond, &mut out)?,
        ExperimentKind::Density => density(config, &cond, &mut out)?,
    }
    std::fs::create_dir_all(&dir).stage("write")?;
    for (name, text) in &out.files {
        std::fs::write(dir.join(name), text).stage("write")?;
    }
    let mut files: Vec<String> = out.files.keys().cloned().collect();
    let summary = json!({
        "kind": kind,
        "seed": config.seed_value(),
        "config": config,
        "conductivity_id": cond.id(),
        "results": Value::Object(out.results),
        "fits": Value::Object(out.fits),
        "files": files,
    });
    let text = serde_json::to_string_pretty(&summary).stage("write")?;
    std::fs::write(dir.join("summary.json"), text + "\n").stage("write")?;
    files.push("summary.json".into());
    Ok(Bundle { dir, kind: Some(kind), files, plots: out.plots, summary })
}

fn probes(config: &ScenarioConfig) -> Result<Vec<Probe>> {
    let domain = config.domain.domain();
    config.probes.iter().map(|p| p.build(domain)).collect::<Result<_>>().stage("probes")
}

fn mesh_and_basis(config: &ScenarioConfig) -> Result<(Mesh, TraceBasis)> {
    let mesh = config.domain.build().stage("mesh")?;
    let basis = TraceBasis::build(&mesh).stage("trace-basis")?;
    Ok((mesh, basis))
}

fn random_trace(mesh: &Mesh, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..mesh.n_boundary()).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dtn_validate(config: &ScenarioConfig, cond: &Conductivity, out: &mut Outputs) -> Result<()> {
    let mesh = config.domain.build().stage("mesh")?;
    out.result("mesh", mesh_json(&mesh));
    let op = DtnOperator::assemble(&mesh, cond).stage("assemble-dtn")?;
    let one = Conductivity::constant(1.0)?;
    let unit = if cond.id() == one.id() { op.clone() } else { DtnOperator::assemble(&mesh, &one).stage("assemble-dtn")? };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed_value());
    let conservation = op.apply(&vec![1.0; mesh.n_boundary()]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut pairing_gap, mut alessandrini_gap) = (0.0f64, 0.0f64);
    for _ in 0..RANDOM_DATA {
        let (g, h) = (random_trace(&mesh, &mut rng), random_trace(&mesh, &mut rng));
        let u = crate::fem::solve_dirichlet(&mesh, cond, &g).stage("solve")?;
        let q = energy(&mesh, cond, &u).stage("solve")?;
        pairing_gap = pairing_gap.max((op.pairing(&g, &g) - q).abs() / (1.0 + q.abs()));
        let (lhs, rhs) = alessandrini_with(&mesh, cond, &one, &op, &unit, &g, &h).stage("alessandrini")?;
        alessandrini_gap = alessandrini_gap.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    let checks = [
        ("asymmetry", op.asymmetry()),
        ("conservation", conservation),
        ("energy_pairing", pairing_gap),
        ("alessandrini", alessandrini_gap),
    ];
    out.table("checks.csv", &["check", "value"], checks.iter().map(|(k, v)| vec![k.to_string(), num(*v)]).collect());
    out.result("checks", json!(checks.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>()));

    let ev = steklov_eigenvalues(op.matrix(), &boundary_forms(&mesh).0).stage("steklov")?;
    out.table("steklov.csv", &["index", "eigenvalue"], ev.iter().enumerate().map(|(i, e)| vec![i.to_string(), num(*e)]).collect());
    out.plot("steklov", &["index", "eigenvalue"], ev.iter().enumerate().map(|(i, e)| vec![i as f64, *e]).collect());
    if let (Domain::Ball, Some(Family::Constant { value })) = (mesh.domain(), cond.family()) {
        let modes = ball_spectrum_errors(&ev, *value, 6).stage("steklov")?;
        out.table(
            "spectrum.csv",
            &["degree", "mean", "expected", "max_rel_error"],
            modes.iter().map(|m| vec![m.degree.to_string(), num(m.mean), num(m.expected), num(m.max_rel_error)]).collect(),
        );
        let worst = modes.iter().map(|m| m.max_rel_error).fold(0.0, f64::max);
        out.result("spectrum", json!({ "modes": modes, "max_rel_error": worst, "within_5_percent": worst < 0.05 }));
    }
    let exported = op.dim() <= EXPORT_DTN_DIM;
    if exported {
        let (mtx, meta) = op.export_text();
        out.file("dtn.mtx", mtx);
        out.file("dtn.meta", meta);
    }
    out.result("dtn_exported", json!(exported));
    Ok(())
}

fn recover_sigma(config: &ScenarioConfig, cond: &Conductivity, out: &mut Outputs) -> Result<()> {
    let (mesh, basis) = mesh_and_basis(config)?;
    out.result("mesh", mesh_json(&mesh));
    let sigma = DirichletEnergy::new(&mesh, cond).stage("factor")?;
    let unit = DirichletEnergy::new(&mesh, &Conductivity::constant(1.0)?).stage("factor")?;
    let (mut kv_rows, mut sing_rows, mut per_probe) = (Vec::new(), Vec::new(), Vec::new());
    for (i, probe) in probes(config)?.iter().enumerate() {
        let truth = cond.value(&probe.x0);
        let mut kv = Vec::new();
        for &k in &config.k {
            let datum = build_psi_k(&mesh, &basis, probe, k).stage("psi")?;
            let est = kv_estimate(&sigma, &unit, &datum).stage("kv-estimate")?;
            let err = (est - truth).abs() / truth;
            kv_rows.push(vec![i.to_string(), k.to_string(), num(est), num(truth), num(err)]);
            kv.push((k as f64, est, err));
        }
        let mut sing = Vec::new();
        for &delta in &config.delta {
            let s = singular_estimate_with(&mesh, &sigma, &unit, probe, delta).stage("singular-estimate")?;
            sing_rows.push(vec![
                i.to_string(),
                num(delta),
                num(s.sigma_hat),
                num(s.discrete_ratio),
                num(s.pole_energy),
                num(s.reference_energy),
                num(s.gradient_gap),
                num(truth),
            ]);
            sing.push(s);
        }
        let (ks, errs): (Vec<f64>, Vec<f64>) = kv.iter().map(|r| (r.0, r.2)).unzip();
        out.fit(format!("kv_error_vs_k/probe{i}"), &ks, &errs);
        out.plot(format!("kv_p{i}"), &["k", "sigma_hat", "rel_error"], kv.iter().map(|r| vec![r.0, r.1, r.2]).collect());
        out.plot(format!("singular_p{i}"), &["delta", "sigma_hat", "discrete_ratio"], sing.iter().map(|s| vec![s.delta, s.sigma_hat, s.discrete_ratio]).collect());
        let last = kv.last().copied();
        per_probe.push(json!({
            "x0": probe.x0,
            "sigma_true": truth,
            "kv_finest": last.map(|r| r.1),
            "kv_finest_rel_error": last.map(|r| r.2),
            "kv_monotone": kv.windows(2).all(|w| w[1].2 <= w[0].2),
            "singular": sing,
        }));
    }
    out.table("kv.csv", &["probe", "k", "sigma_hat", "sigma_true", "rel_error"], kv_rows);
    out.table(
        "singular.csv",
        &["probe", "delta", "sigma_hat", "discrete_ratio", "pole_energy", "reference_energy", "gradient_gap", "sigma_true"],
        sing_rows,
    );
    out.result("probes", Value::Array(per_probe));
    Ok(())
}

fn decay_profile(config: &ScenarioConfig, cond: &Conductivity, out: &mut Outputs) -> Result<()> {
    let (mesh, basis) = mesh_and_basis(config)?;
    out.result("mesh", mesh_json(&mesh));
    let sigma = DirichletEnergy::new(&mesh, cond).stage("factor")?;
    // ‖ψ_k‖ in H^{-s}, expected to scale like k^{-(1/2+s)}
    let orders = [-0.5, 0.0, 0.5];
    let (mut norm_rows, mut decay_rows, mut conc_rows) = (Vec::new(), Vec::new(), Vec::new());
    for (i, probe) in probes(config)?.iter().enumerate() {
        let mut norms: Vec<Vec<f64>> = vec![Vec::new(); orders.len()];
        let mut decay: Vec<Vec<f64>> = vec![Vec::new(); config.rho.len()];
        let mut weighted = Vec::new();
        for &k in &config.k {
            let datum = build_psi_k(&mesh, &basis, probe, k).stage("psi")?;
            for (j, &s) in orders.iter().enumerate() {
                let n = basis.hs_norm(&datum.trace.coeffs, -s).stage("psi")?;
                norm_rows.push(vec![i.to_string(), k.to_string(), s.to_string(), num(n)]);
                norms[j].push(n);
            }
            for (j, (rho, n)) in exterior_decay_with(&mesh, &sigma, &datum, &config.rho).stage("decay")?.into_iter().enumerate() {
                decay_rows.push(vec![i.to_string(), k.to_string(), num(rho), num(n)]);
                decay[j].push(n);
            }
            let c = concentration_with(&mesh, &sigma, &datum, config.rho[0]).stage("concentration")?;
            conc_rows.push(vec![
                i.to_string(),
                k.to_string(),
                num(c.rho),
                num(c.local_gradient),
                num(c.lower_bound_sum),
                num(c.weighted_energy),
            ]);
            weighted.push(c.weighted_energy);
        }
        let ks: Vec<f64> = config.k.iter().map(|&k| k as f64).collect();
        let mut order: Vec<usize> = (0..ks.len()).collect();
        order.sort_by(|&a, &b| ks[a].total_cmp(&ks[b]));
        for (j, s) in orders.iter().enumerate() {
            out.fit(format!("psi_h_minus_s_norm_vs_k/probe{i}/s={s}"), &ks, &norms[j]);
        }
        for (j, rho) in config.rho.iter().enumerate() {
            out.fit(format!("decay_vs_k/probe{i}/rho={rho}"), &ks, &decay[j]);
            out.plot(format!("decay_p{i}_rho{j}"), &["k", "norm"], order.iter().map(|&a| vec![ks[a], decay[j][a]]).collect());
        }
        out.fit(format!("weighted_energy_vs_k/probe{i}"), &ks, &weighted);
    }
    out.table("psi_norms.csv", &["probe", "k", "s", "norm_h_minus_s"], norm_rows);
    out.table("decay.csv", &["probe", "k", "rho", "norm"], decay_rows);
    out.table("concentration.csv", &["probe", "k", "rho", "local_gradient", "lower_bound_sum", "weighted_energy"], conc_rows);
    Ok(())
}

fn sweep(config: &ScenarioConfig, out: &mut Outputs) -> Result<()> {
    let (mesh, basis) = mesh_and_basis(config)?;
    out.result("mesh", mesh_json(&mesh));
    let domain = config.domain.domain();
    let pairs = match config.sweep.as_ref().ok_or_else(|| LabError::Config("missing sweep".into())).stage("config")? {
        SweepSpec::Bump { center, width, ts } => bump_family(domain, *center, *width, ts),
        SweepSpec::NormalLayer { ts } => normal_layer_family(domain, ts),
    }
    .stage("conductivity")?;
    let res = stability_sweep(&mesh, &basis, &pairs).stage("stability-sweep")?;
    out.file("stability.csv", records_csv(&res.records));
    out.plot("sweep", &["dtn_gap", "sup_gap", "normal_gap"], res.records.iter().map(|r| vec![r.dtn_gap, r.sup_gap, r.normal_gap]).collect());
    out.fits.insert("sup_gap_vs_dtn_gap".into(), fit_json(res.sup_fit.as_ref()));
    out.fits.insert("normal_gap_vs_dtn_gap".into(), fit_json(res.normal_fit.as_ref()));
    out.result("pairs", json!(res.records.len()));
    out.result("exponent_singular", json!(res.exponent_singular));
    out.result("exponent_oscillating", json!(res.exponent_oscillating));
    Ok(())
}

/// Successive ratios `r_i / r_{i+1}` of a residual sequence.
fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

fn liouville(config: &ScenarioConfig, cond: &Conductivity, out: &mut Outputs) -> Result<()> {
    const NAMES: [&str; 4] = ["liouville", "transformed_dtn", "log_ratio", "log_ratio_refined"];
    let (mut hs, mut res) = (Vec::new(), [Vec::new(), Vec::new(), Vec::new(), Vec::new()]);
    let mut rows = Vec::new();
    let one = Conductivity::constant(1.0)?;
    let mut fd = None;
    for &r in &config.refinements {
        let mesh = config.domain.at(r).build().stage("mesh")?;
        let basis = TraceBasis::build(&mesh).stage("trace-basis")?;
        let g = boundary_trace(&mesh, |p| 1.0 + p[0] + p[1] * p[2]);
        let a = liouville_residual(&mesh, cond, &g).stage("liouville")?;
        let b = transformed_dtn_residual(&mesh, &basis, cond).stage("transformed-dtn")?;
        let c = log_ratio_residual(&mesh, cond, &one).stage("log-ratio")?;
        // the richer test space needs nested structured meshes
        let d = match config.domain {
            DomainSpec::Cube { .. } => {
                let fine = DomainSpec::Cube { m: 2 * r }.build().stage("mesh")?;
                log_ratio_residual_refined(&mesh, &fine, cond, &one).stage("log-ratio")?
            }
            DomainSpec::Ball { .. } => f64::NAN,
        };
        rows.push(vec![r.to_string(), num(mesh.h()), num(a), num(b), num(c), num(d)]);
        hs.push(mesh.h());
        for (v, x) in res.iter_mut().zip([a, b, c, d]) {
            v.push(x);
        }
        let q = q_from_sigma(cond);
        fd = Some(json!({
            "analytic": q.is_analytic(),
            "fd_deviation": q.fd_deviation(&mesh, 100, config.seed_value()),
            "clipped_vertices": q.clipped_vertices(&mesh),
        }));
    }
    let mut header = vec!["resolution", "h"];
    header.extend(NAMES);
    out.table("liouville.csv", &header, rows);
    let mut columns = vec!["h"];
    columns.extend(NAMES);
    out.plot("liouville", &columns, (0..hs.len()).map(|i| vec![hs[i], res[0][i], res[1][i], res[2][i], res[3][i]]).collect());
    for (name, v) in NAMES.iter().zip(&res) {
        out.fit(format!("{name}_vs_h"), &hs, v);
        out.result(format!("{name}_ratios"), json!(ratios(v)));
    }
    out.result("potential", fd.unwrap_or(Value::Null));
    Ok(())
}

fn spectral(config: &ScenarioConfig, cond: &Conductivity, out: &mut Outputs) -> Result<()> {
    let expected = match (config.domain.domain(), cond.family()) {
        (Domain::Cube, Some(Family::Constant { value })) => Some(3.0 * std::f64::consts::PI.powi(2) * value),
        _ => None,
    };
    let (mut rows, mut energy_rows, mut hs, mut errs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut finest = None;
    for &r in &config.refinements {
        let mesh = config.domain.at(r).build().stage("mesh")?;
        let pair = smallest_eigenpair(&mesh, cond).stage("eigenpair")?;
        let (_, l2) = two_smallest_eigenvalues(&mesh, cond).stage("eigenpair")?;
        let (lo, hi) = hopf_ratio_bounds(&mesh, &pair, COLLAR_WIDTH).stage("collar-ratio")?;
        let basis = TraceBasis::build(&mesh).stage("trace-basis")?;
        let ne = norm_equivalence_eigenvalue(&mesh, &basis).stage("norm-equivalence")?;
        let est = energy_estimate_constants(&mesh, cond, ENERGY_SAMPLES, config.seed_value()).stage("energy-estimate")?;
        let err = expected.map(|e| (pair.lambda1 - e).abs() / e);
        rows.push(vec![
            r.to_string(),
            num(mesh.h()),
            num(pair.lambda1),
            num(l2),
            num(pair.residual),
            num(lo),
            num(hi),
            num(hi / lo),
            expected.map_or(String::new(), num),
            err.map_or(String::new(), num),
            num(ne),
        ]);
        energy_rows.push(vec![r.to_string(), est.samples.to_string(), num(est.max_constant), num(est.mean_constant)]);
        if let Some(e) = err {
            hs.push(mesh.h());
            errs.push(e);
        }
        let min_interior = mesh.interior_vertices().iter().map(|&v| pair.phi1[v]).fold(f64::INFINITY, f64::min);
        finest = Some((pair, hi / lo, min_interior));
    }
    out.table(
        "eigen.csv",
        &["resolution", "h", "lambda1", "lambda2", "residual", "ratio_min", "ratio_max", "ratio_spread", "expected", "rel_error", "norm_equivalence"],
        rows,
    );
    out.table("energy_estimate.csv", &["resolution", "samples", "max_constant", "mean_constant"], energy_rows);
    out.plot("eigen_error", &["h", "rel_error"], hs.iter().zip(&errs).map(|(h, e)| vec![*h, *e]).collect());
    out.fit("lambda1_error_vs_h", &hs, &errs);
    if let Some((pair, spread, min_interior)) = finest {
        out.result(
            "finest",
            json!({
                "lambda1": pair.lambda1,
                "expected": expected,
                "residual": pair.residual,
                "collar_ratio_spread": spread,
                "min_interior_phi1": min_interior,
            }),
        );
        out.file("phi1.csv", pair.to_csv());
    }
    Ok(())
}

/// `max |χ₁ − χ₂|` over the mesh vertices.
fn vertex_gap(mesh: &Mesh, a: &Approximant, b: &Approximant) -> f64 {
    mesh.vertices().iter().map(|p| (a.value(p) - b.value(p)).abs()).fold(0.0, f64::max)
}

fn density(config: &ScenarioConfig, cond: &Conductivity, out: &mut Outputs) -> Result<()> {
    let spec = config.density.as_ref().ok_or_else(|| LabError::Config("missing density".into())).stage("config")?;
    let (mesh, basis) = mesh_and_basis(config)?;
    out.result("mesh", mesh_json(&mesh));
    let domain = config.domain.domain();
    let reference = DtnOperator::assemble(&mesh, cond).stage("assemble-dtn")?;
    let mut rows = Vec::new();
    let mut done: Vec<(f64, DenseApproximant, DtnOperator, f64)> = Vec::new();
    let mut failures = Vec::new();
    for (i, &eps) in spec.eps.iter().enumerate() {
        let approx = match dense_approximant(cond, domain, eps, spec.method) {
            Ok(a) => a,
            Err(e @ LabError::NonConvergence(_)) => {
                rows.push(vec![num(eps), "non-convergence".into(), String::new(), String::new(), String::new(), String::new()]);
                failures.push(json!({ "eps": eps, "error": e.to_string() }));
                continue;
            }
            Err(e) => return Err(e).stage("approximant"),
        };
        let chi = approx.conductivity(&mesh).stage("approximant")?;
        let op = DtnOperator::assemble(&mesh, &chi).stage("assemble-dtn")?;
        let gap = dtn_diff_norm(&reference, &op, &basis).stage("dtn-gap")?;
        rows.push(vec![
            num(eps),
            "ok".into(),
            approx.k_used.to_string(),
            num(approx.sup_error),
            num(approx.min_value),
            num(gap),
        ]);
        if let Approximant::Bernstein(f) = &approx.chi {
            if f.k <= EXPORT_DEGREE {
                out.file(format!("approximant_{i}.json"), coefficients_json(f).stage("export")?);
            }
        }
        done.push((eps, approx, op, gap));
    }
    let (epss, gaps): (Vec<f64>, Vec<f64>) = done.iter().map(|d| (d.0, d.3)).unzip();
    out.table("density.csv", &["eps", "status", "k_used", "sup_error", "min_value", "dtn_gap"], rows);
    out.plot(
        "density",
        &["eps", "dtn_gap", "sup_error"],
        done.iter().map(|(eps, a, _, g)| vec![*eps, *g, a.sup_error]).collect(),
    );
    out.fit("dtn_gap_vs_eps", &epss, &gaps);

    let mut distinct = Vec::new();
    let mut min_gap: Option<f64> = None;
    for i in 0..done.len() {
        for j in i + 1..done.len() {
            let sup = vertex_gap(&mesh, &done[i].1.chi, &done[j].1.chi);
            if sup >= DISTINCT_GAP {
                let gap = dtn_diff_norm(&done[i].2, &done[j].2, &basis).stage("dtn-gap")?;
                min_gap = Some(min_gap.map_or(gap, |m: f64| m.min(gap)));
                distinct.push(vec![num(done[i].0), num(done[j].0), num(sup), num(gap)]);
            }
        }
    }
    out.table("distinct_pairs.csv", &["eps_a", "eps_b", "sup_gap", "dtn_gap"], distinct);
    out.result("min_distinct_dtn_gap", json!(min_gap));
    out.result("failures", Value::Array(failures));
    out.result("method", json!(spec.method));
    Ok(())
}

/// Reads every file of a finished bundle, keyed by name.
pub fn read_bundle_files(dir: &Path, files: &[String]) -> Result<BTreeMap<String, Vec<u8>>> {
    files.iter().map(|f| Ok((f.clone(), std::fs::read(dir.join(f))?))).collect()
}

/// Human-readable summary line per fit of a summary JSON.
pub fn describe_fits(summary: &Value) -> String {
    let mut s = String::new();
    if let Some(fits) = summary.get("fits").and_then(Value::as_object) {
        for (k, v) in fits {
            match (v.get("slope").and_then(Value::as_f64), v.get("ci95")) {
                (Some(slope), Some(ci)) => {
                    let _ = writeln!(s, "{k}: slope {slope:.4} (95% {ci})");
                }
                _ => {
                    let _ = writeln!(s, "{k}: no fit");
                }
            }
        }
    }
    s
}
