use std::sync::OnceLock;

use dtnlab::dtn::DtnOperator;
use dtnlab::experiments::{ExperimentKind, Overrides, ScenarioConfig};
use dtnlab::fem::{Conductivity, Family};
use dtnlab::geometry::{build_cube_mesh, Mesh};
use proptest::prelude::*;

fn mesh() -> &'static Mesh {
    static MESH: OnceLock<Mesh> = OnceLock::new();
    MESH.get_or_init(|| build_cube_mesh(3).unwrap())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dtn_is_symmetric_nonnegative_and_kills_constants(
        gradient in prop::array::uniform3(-0.4f64..0.4),
        offset in 1.5f64..3.0,
        seed in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let mesh = mesh();
        let cond = Conductivity::from_family(Family::Affine { gradient, offset }, mesh.domain()).unwrap();
        let op = DtnOperator::assemble(mesh, &cond).unwrap();
        let n = op.dim();
        let g: Vec<f64> = (0..n).map(|i| (seed[0] * i as f64).sin()).collect();
        let h: Vec<f64> = (0..n).map(|i| (seed[1] * i as f64 + 0.3).cos()).collect();
        let (lg, lh) = (op.apply(&g), op.apply(&h));
        let scale = dot(&lg, &lg).sqrt() * dot(&h, &h).sqrt() + 1e-300;
        prop_assert!((dot(&lg, &h) - dot(&lh, &g)).abs() <= 1e-10 * scale);
        prop_assert!(op.pairing(&g, &g) >= -1e-12);
        let ones = op.apply(&vec![1.0; n]);
        prop_assert!(ones.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn resolved_configs_survive_toml(seed in any::<u32>(), m in 2usize..20, beta in 0.0f64..1.0) {
        let text = format!(
            "seed = {seed}\n[domain]\nshape = \"cube\"\nm = {m}\n[conductivity]\nfamily = \"product\"\nbeta = {beta:?}\n"
        );
        let cfg = ScenarioConfig::from_toml(&text)
            .unwrap()
            .resolve(ExperimentKind::Density, &Overrides::default())
            .unwrap();
        let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
