//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion does.

use std::time::Instant;

use dtnlab::density::{bernstein_grid, bernstein_nd, SampledField};
use dtnlab::dtn::{alessandrini_residual, ball_spectrum_errors, steklov_eigenvalues, DtnOperator};
use dtnlab::experiments::{export_report, read_bundle_files, run_scenario, ExperimentKind, Overrides, ScenarioConfig};
use dtnlab::fem::{energy, solve_dirichlet, Conductivity, Family};
use dtnlab::fit::fit_exponent;
use dtnlab::geometry::{build_ball_mesh, build_cube_mesh, Domain, Mesh, Probe};
use dtnlab::liouville::{
    hopf_ratio_bounds, liouville_residual, log_ratio_residual, log_ratio_residual_refined, smallest_eigenpair,
    transformed_dtn_residual,
};
use dtnlab::recovery::{
    admissible_window, build_psi_k, bump_family, exterior_decay_with, kv_estimate, normal_layer_family, stability_sweep,
    DirichletEnergy, DEFAULT_SCALE,
};
use dtnlab::trace::{boundary_forms, norm_equivalence_eigenvalue, TraceBasis};
use dtnlab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn affine_x1() -> Conductivity {
    Conductivity::from_family(Family::Affine { gradient: [1.0, 0.0, 0.0], offset: 1.0 }, Domain::Cube).unwrap()
}

fn product(beta: f64) -> Conductivity {
    Conductivity::from_family(Family::Product { beta }, Domain::Cube).unwrap()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn max_abs(m: faer::MatRef<'_, f64>) -> f64 {
    let mut w = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            w = w.max(m[(i, j)].abs());
        }
    }
    w
}

fn random_trace(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_conductivity(rng: &mut ChaCha8Rng) -> Conductivity {
    let family = match rng.gen_range(0..3) {
        0 => Family::GaussianBump {
            center: [rng.gen(), rng.gen(), rng.gen()],
            width: rng.gen_range(0.2..0.6),
            amplitude: rng.gen_range(0.0..1.0),
            base: 1.0,
        },
        1 => Family::Product { beta: rng.gen_range(0.0..0.5) },
        _ => Family::Affine {
            gradient: [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)],
            offset: 1.0,
        },
    };
    Conductivity::from_family(family, Domain::Cube).unwrap()
}

fn c1_ball_spectrum() -> Result<Outcome> {
    let start = Instant::now();
    let mesh = build_ball_mesh(6)?;
    let op = DtnOperator::assemble(&mesh, &Conductivity::constant(1.0)?)?;
    let ev = steklov_eigenvalues(op.matrix(), &boundary_forms(&mesh).0)?;
    let secs = start.elapsed().as_secs_f64();
    let modes = ball_spectrum_errors(&ev, 1.0, 6)?;
    let worst = modes.iter().map(|m| m.max_rel_error).fold(0.0, f64::max);
    outcome(worst < 0.05 && secs <= 60.0, format!("max relative error {worst:.3e} over l = 1..6, build+solve {secs:.1} s"))
}

fn c2_alessandrini() -> Result<Outcome> {
    let mesh = build_cube_mesh(4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (s1, s2) = (random_conductivity(&mut rng), random_conductivity(&mut rng));
        let (g, h) = (random_trace(mesh.n_boundary(), &mut rng), random_trace(mesh.n_boundary(), &mut rng));
        let (lhs, rhs) = alessandrini_residual(&mesh, &s1, &s2, &g, &h)?;
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    outcome(worst <= 1e-9, format!("max |lhs - rhs|/(1+|lhs|) = {worst:.2e} over 20 tuples"))
}

fn c3_dtn_battery() -> Result<Outcome> {
    let start = Instant::now();
    let mesh = build_cube_mesh(6)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let one = DtnOperator::assemble(&mesh, &Conductivity::constant(1.0)?)?;
    let scale = max_abs(one.matrix());
    let (mut asym, mut cons, mut lin, mut pairing) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for cond in [Conductivity::constant(1.0)?, affine_x1(), product(0.3), random_conductivity(&mut rng)] {
        let op = DtnOperator::assemble(&mesh, &cond)?;
        asym = asym.max(op.asymmetry() / scale);
        cons = cons.max(op.apply(&vec![1.0; mesh.n_boundary()]).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale);
        for _ in 0..3 {
            let g = random_trace(mesh.n_boundary(), &mut rng);
            let u = solve_dirichlet(&mesh, &cond, &g)?;
            let q = energy(&mesh, &cond, &u)?;
            pairing = pairing.max((op.pairing(&g, &g) - q).abs() / (1.0 + q));
        }
    }
    for c in [0.5, 2.5] {
        let op = DtnOperator::assemble(&mesh, &Conductivity::constant(c)?)?;
        let diff = faer::Mat::from_fn(op.dim(), op.dim(), |i, j| op.matrix()[(i, j)] - c * one.matrix()[(i, j)]);
        lin = lin.max(max_abs(diff.as_ref()) / scale);
    }
    let secs = start.elapsed().as_secs_f64();
    let worst = asym.max(cons).max(lin).max(pairing);
    outcome(
        worst <= 1e-9 && secs < 300.0,
        format!("symmetry {asym:.1e}, conservation {cons:.1e}, linearity {lin:.1e}, energy pairing {pairing:.1e}, {secs:.1} s"),
    )
}

/// The m = 24 cube setup shared by criteria 4 to 6.
struct FineCube {
    mesh: Mesh,
    basis: TraceBasis,
    probe: Probe,
    window: Vec<u32>,
}

fn fine_cube() -> Result<FineCube> {
    let mesh = build_cube_mesh(24)?;
    let basis = TraceBasis::build(&mesh)?;
    let probe = Probe::new(Domain::Cube, [1.0, 0.5, 0.5])?;
    let window = admissible_window(&mesh, DEFAULT_SCALE, 64);
    Ok(FineCube { mesh, basis, probe, window })
}

fn c4_psi_scalings(fc: &FineCube) -> Result<Outcome> {
    let ks: Vec<f64> = fc.window.iter().map(|&k| k as f64).collect();
    let mut pass = fc.window.len() >= 3;
    let mut parts = Vec::new();
    for s in [-0.5, 0.0, 0.5] {
        let norms: Vec<f64> = fc
            .window
            .iter()
            .map(|&k| build_psi_k(&fc.mesh, &fc.basis, &fc.probe, k).and_then(|d| fc.basis.hs_norm(&d.trace.coeffs, -s)))
            .collect::<Result<_>>()?;
        let slope = fit_exponent(&ks, &norms)?.slope;
        let target = -(0.5 + s);
        pass &= (slope - target).abs() <= 0.15;
        parts.push(format!("s={s}: {slope:.3} (target {target})"));
    }
    outcome(pass, format!("k window {:?}; {}", fc.window, parts.join(", ")))
}

fn c5_decay(fc: &FineCube) -> Result<Outcome> {
    let sigma = DirichletEnergy::new(&fc.mesh, &affine_x1())?;
    let ks: Vec<f64> = fc.window.iter().map(|&k| k as f64).collect();
    let norms: Vec<f64> = fc
        .window
        .iter()
        .map(|&k| {
            let d = build_psi_k(&fc.mesh, &fc.basis, &fc.probe, k)?;
            Ok(exterior_decay_with(&fc.mesh, &sigma, &d, &[1.0])?[0].1)
        })
        .collect::<Result<_>>()?;
    let fit = fit_exponent(&ks, &norms)?;
    outcome((fit.slope + 1.0).abs() <= 0.25, format!("slope {:.3} at rho = 1 over k {:?}", fit.slope, fc.window))
}

fn c6_kv(fc: &FineCube) -> Result<Outcome> {
    let sigma = DirichletEnergy::new(&fc.mesh, &affine_x1())?;
    let unit = DirichletEnergy::new(&fc.mesh, &Conductivity::constant(1.0)?)?;
    let truth = 2.0;
    let errs: Vec<f64> = fc
        .window
        .iter()
        .map(|&k| Ok((kv_estimate(&sigma, &unit, &build_psi_k(&fc.mesh, &fc.basis, &fc.probe, k)?)? - truth).abs() / truth))
        .collect::<Result<_>>()?;
    let last = *errs.last().unwrap_or(&f64::INFINITY);
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    outcome(last < 0.10 && monotone, format!("relative errors {} over k {:?}", sci(&errs), fc.window))
}

fn c7_stability() -> Result<Outcome> {
    let mesh = build_cube_mesh(12)?;
    let basis = TraceBasis::build(&mesh)?;
    let ts = [0.4, 0.2, 0.1, 0.05];
    let bump = stability_sweep(&mesh, &basis, &bump_family(Domain::Cube, [1.0, 0.5, 0.5], 0.3, &ts)?)?;
    let layer = stability_sweep(&mesh, &basis, &normal_layer_family(Domain::Cube, &ts)?)?;
    let sup = bump.sup_fit.map_or(f64::NAN, |f| f.slope);
    let normal = layer.normal_fit.map_or(f64::NAN, |f| f.slope);
    outcome(sup >= 0.9 && normal >= 0.35, format!("sup-gap slope {sup:.3} (bump family), normal-gap slope {normal:.3} (normal-layer family)"))
}

fn c8_eigen() -> Result<Outcome> {
    let mesh = build_cube_mesh(20)?;
    let pair = smallest_eigenpair(&mesh, &Conductivity::constant(1.0)?)?;
    let exact = 3.0 * std::f64::consts::PI.powi(2);
    let err = (pair.lambda1 - exact).abs() / exact;
    let positive = mesh.interior_vertices().iter().all(|&v| pair.phi1[v] > 0.0);
    let (lo, hi) = hopf_ratio_bounds(&mesh, &pair, 0.125)?;
    outcome(
        err < 0.02 && positive && hi / lo <= 25.0,
        format!("lambda1 relative error {err:.3e}, phi1 > 0 inside: {positive}, collar ratio max/min {:.2}", hi / lo),
    )
}

fn c9_liouville() -> Result<Outcome> {
    let p = product(0.3);
    let (mut lv, mut tr) = (Vec::new(), Vec::new());
    for m in [8, 16] {
        let mesh = build_cube_mesh(m)?;
        let basis = TraceBasis::build(&mesh)?;
        let g: Vec<f64> = mesh.boundary_points().iter().map(|x| 1.0 + x[0] + x[1] * x[2]).collect();
        lv.push(liouville_residual(&mesh, &p, &g)?);
        tr.push(transformed_dtn_residual(&mesh, &basis, &p)?);
    }
    let mesh = build_cube_mesh(4)?;
    let basis = TraceBasis::build(&mesh)?;
    let g: Vec<f64> = mesh.boundary_points().iter().map(|x| 1.0 + x[0] + x[1] * x[2]).collect();
    let mut exact = 0.0f64;
    for c in [1.0, 3.5] {
        let cond = Conductivity::constant(c)?;
        exact = exact.max(liouville_residual(&mesh, &cond, &g)?).max(transformed_dtn_residual(&mesh, &basis, &cond)?);
    }
    let (r1, r2) = (lv[0] / lv[1], tr[0] / tr[1]);
    outcome(
        r1 >= 1.6 && r2 >= 1.4 && exact <= 1e-9,
        format!("refinement factors {r1:.2} (Liouville) and {r2:.2} (transformed DtN), constant-sigma residual {exact:.1e}"),
    )
}

fn c10_log_ratio() -> Result<Outcome> {
    let mesh = build_cube_mesh(6)?;
    let p = product(0.3);
    let (a, b) = (Conductivity::constant(1.5)?, Conductivity::constant(3.0)?);
    let exact = log_ratio_residual(&mesh, &p, &p)?.max(log_ratio_residual(&mesh, &a, &b)?);
    let one = Conductivity::constant(1.0)?;
    let (mut refined, mut same) = (Vec::new(), Vec::new());
    for m in [4, 8, 16] {
        let coarse = build_cube_mesh(m)?;
        refined.push(log_ratio_residual_refined(&coarse, &build_cube_mesh(2 * m)?, &p, &one)?);
        same.push(log_ratio_residual(&coarse, &p, &one)?);
    }
    let ratios: Vec<f64> = refined.windows(2).map(|w| w[1] / w[0]).collect();
    let same_ratios: Vec<f64> = same.windows(2).map(|w| w[1] / w[0]).collect();
    let halves = ratios.iter().all(|r| (0.35..=0.65).contains(r));
    outcome(
        exact <= 1e-12 && halves,
        format!(
            "equal/constant residual {exact:.1e}; residual ratio per halving {ratios:.3?} (same-mesh test space: {same_ratios:.3?})"
        ),
    )
}

fn c11_bernstein() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let affine = |x: &[f64; 3]| 0.3 + 1.2 * x[0] - 0.7 * x[1] + 2.0 * x[2];
    let mut affine_err = 0.0f64;
    for k in [1, 3, 8, 17] {
        let f = SampledField::from_fn(-0.5, 1.5, k, affine)?;
        for _ in 0..50 {
            let x = [rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
            affine_err = affine_err.max((bernstein_nd(&f, &x)? - affine(&x)).abs());
        }
    }
    let mut positive = true;
    for k in [2, 5, 9] {
        let n = (k + 1) * (k + 1) * (k + 1);
        let floor = 0.25;
        let f = SampledField::new(0.0, 1.0, k, (0..n).map(|_| floor + rng.gen_range(0.0..2.0)).collect())?;
        for _ in 0..200 {
            let x = [rng.gen(), rng.gen(), rng.gen()];
            positive &= bernstein_nd(&f, &x)? >= floor;
        }
    }
    let axis: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
    let sup_errors = |f: fn(&[f64; 3]) -> f64| -> Result<Vec<f64>> {
        [4, 8, 16, 32]
            .iter()
            .map(|&k| {
                let field = SampledField::from_fn(0.0, 1.0, k, f)?;
                let vals = bernstein_grid(&field, [&axis, &axis, &axis])?;
                let mut e = 0.0f64;
                for (idx, v) in vals.iter().enumerate() {
                    let x = [axis[idx % 20], axis[(idx / 20) % 20], axis[idx / 400]];
                    e = e.max((v - f(&x)).abs());
                }
                Ok(e)
            })
            .collect()
    };
    let errs = sup_errors(|x| x[0] * x[1])?;
    // not part of the criterion: a target the operator does not reproduce
    let square = sup_errors(|x| x[0] * x[0])?;
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    outcome(
        affine_err <= 1e-12 && positive && monotone,
        format!(
            "affine error {affine_err:.1e}, positivity {positive}, x1*x2 sup errors {} (x1^2 for comparison: {})",
            sci(&errs),
            sci(&square)
        ),
    )
}

fn c12_norm_equivalence() -> Result<Outcome> {
    let vals: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&m| {
            let mesh = build_cube_mesh(m)?;
            norm_equivalence_eigenvalue(&mesh, &TraceBasis::build(&mesh)?)
        })
        .collect::<Result<_>>()?;
    let drops: Vec<f64> = vals.windows(2).map(|w| (w[0] - w[1]) / w[0]).collect();
    outcome(vals.iter().all(|v| *v > 0.0) && drops.iter().all(|d| *d < 0.2), format!("eigenvalues {vals:.4?} at m = 4, 8, 16"))
}

fn c13_determinism() -> Result<Outcome> {
    let tmp = tempfile::tempdir()?;
    let scenarios = [
        (ExperimentKind::StabilitySweep, "[domain]\nshape = \"cube\"\nm = 5\n[sweep]\nfamily = \"normal-layer\"\nts = [0.4, 0.2, 0.1]\n"),
        (ExperimentKind::DtnValidate, "seed = 9\n[domain]\nshape = \"cube\"\nm = 4\n[conductivity]\nfamily = \"product\"\nbeta = 0.3\n"),
        (ExperimentKind::Density, "[domain]\nshape = \"cube\"\nm = 4\n[conductivity]\nfamily = \"product\"\nbeta = 0.3\n[density]\nmethod = \"mollifier\"\neps = [0.1, 0.05]\n"),
    ];
    let mut identical = true;
    let mut count = 0;
    for (kind, text) in scenarios {
        let flags = Overrides { out: Some(tmp.path().join(kind.name())), seed: Some(5) };
        let cfg = ScenarioConfig::from_toml(text)?.resolve(kind, &flags)?;
        let mut runs = Vec::new();
        for _ in 0..2 {
            let bundle = run_scenario(&cfg)?;
            export_report(&bundle)?;
            let mut files = bundle.files.clone();
            files.extend(bundle.plots.iter().map(|p| format!("plot/{}.dat", p.name)));
            files.push("plot/manifest.json".into());
            runs.push(read_bundle_files(&bundle.dir, &files)?);
        }
        count += runs[0].len();
        identical &= runs[0] == runs[1];
    }
    outcome(identical, format!("{count} files from 3 scenarios compared byte for byte"))
}

#[test]
fn acceptance_criteria() {
    let mut failures = Vec::new();
    let mut report = |n: usize, name: &str, r: Result<Outcome>| {
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        println!("criterion {n:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failures.push(n);
        }
    };
    report(1, "ball DtN spectrum", c1_ball_spectrum());
    report(2, "Alessandrini identity", c2_alessandrini());
    report(3, "DtN invariants", c3_dtn_battery());
    match fine_cube() {
        Ok(fc) => {
            report(4, "oscillating datum norm scalings", c4_psi_scalings(&fc));
            report(5, "exterior decay rate", c5_decay(&fc));
            report(6, "oscillating-datum estimator", c6_kv(&fc));
        }
        Err(e) => {
            for (n, name) in [(4, "oscillating datum norm scalings"), (5, "exterior decay rate"), (6, "oscillating-datum estimator")] {
                report(n, name, Err(dtnlab::LabError::Usage(format!("setup failed: {e}"))));
            }
        }
    }
    report(7, "stability sweep exponents", c7_stability());
    report(8, "first Dirichlet eigenpair", c8_eigen());
    report(9, "Liouville identity and transformed DtN", c9_liouville());
    report(10, "log-ratio weak identity", c10_log_ratio());
    report(11, "Bernstein operator", c11_bernstein());
    report(12, "trace norm equivalence", c12_norm_equivalence());
    report(13, "determinism", c13_determinism());
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
