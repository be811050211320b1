use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtn::{dtn_diff_norm, DtnOperator};
use crate::error::{LabError, Result};
use crate::fem::{Conductivity, Family};
use crate::fit::{fit_exponent, PowerFit};
use crate::geometry::{Domain, Mesh};
use crate::trace::TraceBasis;
use crate::vec3::{self, Point};

/// Boundary points used for `C(Γ)` norms of the analytic fields.
pub const SUP_SAMPLES: usize = 10_000;

/// Two conductivities compared by the sweep; `alpha` is their Hölder class.
#[derive(Clone)]
pub struct StabilityPair {
    pub pair_id: String,
    pub sigma1: Conductivity,
    pub sigma2: Conductivity,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub pair_id: String,
    pub sup_gap: f64,
    pub normal_gap: f64,
    pub dtn_gap: f64,
    pub h: f64,
    pub alpha: f64,
}

/// Records plus log-log fits over the pairs with positive gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<StabilityRecord>,
    /// Fit of `sup_gap` against `dtn_gap`.
    pub sup_fit: Option<PowerFit>,
    /// Fit of `normal_gap` against `dtn_gap`.
    pub normal_fit: Option<PowerFit>,
    /// Normal-derivative exponent `α/(α+1)` of the singular-solution argument.
    pub exponent_singular: f64,
    /// Normal-derivative exponent `α/(2(1+α))` of the oscillating-datum argument.
    pub exponent_oscillating: f64,
}

/// `(‖σ₁−σ₂‖_{C(Γ)}, ‖∂_ν(σ₁−σ₂)‖_{C(Γ)})` over [`SUP_SAMPLES`] analytic boundary samples.
pub fn boundary_gaps(domain: Domain, c1: &Conductivity, c2: &Conductivity) -> (f64, f64) {
    domain.boundary_samples(SUP_SAMPLES).iter().fold((0.0f64, 0.0f64), |(s, n), (p, nu)| {
        let dg = vec3::sub(&c1.gradient(p), &c2.gradient(p));
        (s.max((c1.value(p) - c2.value(p)).abs()), n.max(vec3::dot(&dg, nu).abs()))
    })
}

fn fit_positive(records: &[StabilityRecord], y: impl Fn(&StabilityRecord) -> f64) -> Option<PowerFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        records.iter().filter(|r| r.dtn_gap > 0.0 && y(r) > 0.0).map(|r| (r.dtn_gap, y(r))).unzip();
    fit_exponent(&xs, &ys).ok()
}

pub fn stability_sweep(mesh: &Mesh, basis: &TraceBasis, pairs: &[StabilityPair]) -> Result<SweepResult> {
    if pairs.is_empty() {
        return Err(LabError::Usage("stability sweep needs at least one pair".into()));
    }
    let mut unique: BTreeMap<String, &Conductivity> = BTreeMap::new();
    for p in pairs {
        unique.entry(p.sigma1.id().to_string()).or_insert(&p.sigma1);
        unique.entry(p.sigma2.id().to_string()).or_insert(&p.sigma2);
    }
    let ops: BTreeMap<String, DtnOperator> = unique
        .into_par_iter()
        .map(|(id, c)| DtnOperator::assemble(mesh, c).map(|op| (id, op)))
        .collect::<Result<_>>()?;
    let mut records = pairs
        .par_iter()
        .map(|p| {
            let (sup_gap, normal_gap) = boundary_gaps(mesh.domain(), &p.sigma1, &p.sigma2);
            let dtn_gap = if p.sigma1.id() == p.sigma2.id() {
                0.0
            } else {
                dtn_diff_norm(&ops[p.sigma1.id()], &ops[p.sigma2.id()], basis)?
            };
            Ok(StabilityRecord { pair_id: p.pair_id.clone(), sup_gap, normal_gap, dtn_gap, h: mesh.h(), alpha: p.alpha })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let alpha = pairs.iter().map(|p| p.alpha).fold(f64::INFINITY, f64::min);
    Ok(SweepResult {
        sup_fit: fit_positive(&records, |r| r.sup_gap),
        normal_fit: fit_positive(&records, |r| r.normal_gap),
        exponent_singular: alpha / (alpha + 1.0),
        exponent_oscillating: alpha / (2.0 * (1.0 + alpha)),
        records,
    })
}

pub fn records_csv(records: &[StabilityRecord]) -> String {
    let mut s = String::from("pair_id,sup_gap,normal_gap,dtn_gap,h,alpha\n");
    for r in records {
        let _ = writeln!(s, "{},{:e},{:e},{:e},{:e},{}", csv_field(&r.pair_id), r.sup_gap, r.normal_gap, r.dtn_gap, r.h, r.alpha);
    }
    s
}

/// RFC-4180 quoting of one field.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `σ_t = 1 + t·exp(-|x − center|²/width²)` against `σ ≡ 1`.
pub fn bump_family(domain: Domain, center: Point, width: f64, ts: &[f64]) -> Result<Vec<StabilityPair>> {
    let one = Conductivity::constant(1.0)?;
    ts.iter()
        .enumerate()
        .map(|(i, &t)| {
            let c = Conductivity::from_family(Family::GaussianBump { center, width, amplitude: t, base: 1.0 }, domain)?;
            Ok(StabilityPair { pair_id: format!("bump-{i:02}"), sigma1: c, sigma2: one.clone(), alpha: 1.0 })
        })
        .collect()
}

/// Normal-layer pairs `σ_t = 1 + t·s·exp(-s/√t)`, `s = 1 − x₁`, against `σ ≡ 1`:
/// the trace gap vanishes on the plane `x₁ = 1` while the normal gap is `t`.
pub fn normal_layer_family(domain: Domain, ts: &[f64]) -> Result<Vec<StabilityPair>> {
    let one = Conductivity::constant(1.0)?;
    ts.iter()
        .enumerate()
        .map(|(i, &t)| {
            let c = Conductivity::from_family(Family::NormalLayer { amplitude: t, width: t.sqrt() }, domain)?;
            Ok(StabilityPair { pair_id: format!("layer-{i:02}"), sigma1: c, sigma2: one.clone(), alpha: 1.0 })
        })
        .collect()
}
