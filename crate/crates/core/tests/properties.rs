use std::sync::OnceLock;

use proptest::prelude::*;
use wienerkin::decay::kappa_theory;
use wienerkin::estimates::wiener_convolution_check;
use wienerkin::grid::{ModelKind, VelocityGrid, WeightSpec, C64};
use wienerkin::lattice::ModeLattice;
use wienerkin::macro_micro::MacroProjector;
use wienerkin::torus::rotate;

fn projector() -> &'static MacroProjector {
    static P: OnceLock<MacroProjector> = OnceLock::new();
    P.get_or_init(|| MacroProjector::new(&VelocityGrid::new(8, 5.0).unwrap()))
}

fn field(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_micro_is_orthogonal(f in field(512)) {
        let p = projector();
        let (_, pf) = p.project(&f);
        let (_, ppf) = p.project(&pf);
        let scale = p.grid().norm(&f).max(1.0);
        for (a, b) in pf.iter().zip(&ppf) {
            prop_assert!((a - b).norm() < 1e-12 * scale);
        }
        let g = p.micro(&f);
        for inv in p.grid().collision_invariants() {
            let e: Vec<C64> = inv.iter().map(|x| C64::new(*x, 0.0)).collect();
            prop_assert!(p.grid().inner(&g, &e).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn transport_rotation_preserves_norm(f in field(512), k in prop::array::uniform3(-3i64..=3), tau in 0.0f64..5.0) {
        let grid = projector().grid();
        let mut g = f.clone();
        rotate(k, &mut g, grid, tau);
        prop_assert!((grid.norm(&g) - grid.norm(&f)).abs() < 1e-12 * grid.norm(&f).max(1.0));
    }

    #[test]
    fn wiener_inequality_holds(a in field(27), b in field(27)) {
        let lattice = ModeLattice::new(3, 1).unwrap();
        let (lhs, rhs) = wiener_convolution_check(lattice, &a, &b).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn soft_kappa_lies_in_unit_interval(gamma in -3.0f64..-2.01, theta in 0.25f64..2.0, soft_boltzmann in any::<bool>()) {
        let w = if soft_boltzmann {
            WeightSpec { q: 0.5, theta, model_kind: ModelKind::Boltzmann, gamma: gamma / 3.0, s: 0.25 }
        } else {
            WeightSpec { q: 0.5, theta, model_kind: ModelKind::Landau, gamma, s: 0.0 }
        };
        if let Ok(k) = kappa_theory(&w) {
            prop_assert!(k.value() > 0.0 && k.value() < 1.0);
            prop_assert!(k.numer > 0 && k.denom > k.numer);
        }
    }
}
