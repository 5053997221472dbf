mod common;

use common::*;
use perifem::diagnostics::{convergence_rate, masked_energy};
use perifem::kernel::{BoundaryProfile, ForceLaw, NeighborTable, NonlocalKernel};
use perifem::mesh::{build_quad_points, build_uniform_mesh, CrackSegment};
use perifem::quadrature::QuadratureRule;
use perifem::Vec2;
use proptest::prelude::*;

fn kernel(side: f64, h: f64, eps: f64) -> NonlocalKernel<f64> {
    let m = build_uniform_mesh(side, side, h, None).unwrap();
    let q = build_quad_points(&m, &QuadratureRule::interior_three_point());
    NonlocalKernel::new(
        &q,
        plexiglass(eps),
        m.domain,
        None,
        BoundaryProfile::Smoothstep,
    )
}

fn l2(k: &NonlocalKernel<f64>, f: &[Vec2<f64>]) -> f64 {
    f.iter()
        .zip(&k.weights)
        .map(|(v, w)| w * v.norm_squared())
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn lipschitz_bound(seed in any::<u64>(), amp in 1e-6f64..1e-4) {
        let disc = square(0.012, 0.001, plexiglass(0.004));
        let k = &disc.kernel;
        let n = disc.dofs();
        let u = disc.quad.interpolate(&disc.mesh, &random_vec(n, amp, seed));
        let v = disc.quad.interpolate(&disc.mesh, &random_vec(n, amp, seed ^ 0xabc));
        let (_, fu) = k.force_densities(&u, ForceLaw::Nonlinear).unwrap();
        let (_, fv) = k.force_densities(&v, ForceLaw::Nonlinear).unwrap();
        let df: Vec<Vec2<f64>> = fu.iter().zip(&fv).map(|(&a, &b)| a - b).collect();
        let du: Vec<Vec2<f64>> = u.iter().zip(&v).map(|(&a, &b)| a - b).collect();
        let bound = k.material.lipschitz_constant().unwrap();
        prop_assert!(l2(k, &df) <= 1.05 * bound * l2(k, &du));
    }

    #[test]
    fn translation_is_exact(ix in -64i32..64, iy in -64i32..64, seed in any::<u64>()) {
        // dyadic values keep the shifted differences exact
        let k = kernel(0.008, 0.001, 0.002);
        let r = random_vec(2 * k.len(), 1.0, seed);
        let u: Vec<Vec2<f64>> = r
            .chunks(2)
            .map(|c| Vec2::new((c[0] * 64.0).round() / 1048576.0, (c[1] * 64.0).round() / 1048576.0))
            .collect();
        let c = Vec2::new(ix as f64 / 16.0, iy as f64 / 16.0);
        let shifted: Vec<Vec2<f64>> = u.iter().map(|&x| x + c).collect();
        let a = k.force_densities(&u, ForceLaw::Nonlinear).unwrap();
        let b = k.force_densities(&shifted, ForceLaw::Nonlinear).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cracks_only_remove_bonds(x0 in 0.0f64..0.01, y0 in 0.0f64..0.01, x1 in 0.0f64..0.01, y1 in 0.0f64..0.01) {
        prop_assume!((x1 - x0).hypot(y1 - y0) > 1e-6);
        let m = build_uniform_mesh(0.01, 0.01, 0.001, None).unwrap();
        let q = build_quad_points(&m, &QuadratureRule::interior_three_point());
        let crack = CrackSegment::new(Vec2::new(x0, y0), Vec2::new(x1, y1)).unwrap();
        let plain = NeighborTable::build(&q.positions, 0.003, None);
        let cut = NeighborTable::build(&q.positions, 0.003, Some(&crack));
        prop_assert_eq!(plain.bond_count(), cut.bond_count());
        prop_assert!(cut.intact_bond_count() <= plain.intact_bond_count());
    }

    #[test]
    fn rate_is_scale_invariant(seed in any::<u64>(), s in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let f = |k: u64| -> Vec<Vec2<f64>> {
            random_vec(40, 1.0, seed.wrapping_add(k)).chunks(2).map(|c| Vec2::new(c[0], c[1])).collect()
        };
        let w = random_vec(20, 1.0, seed ^ 7).iter().map(|x| x.abs() + 0.1).collect::<Vec<_>>();
        let (a, b, c) = (f(1), f(2), f(3));
        let scale = |v: &[Vec2<f64>]| v.iter().map(|&x| x * s).collect::<Vec<_>>();
        let r0 = convergence_rate(&a, &b, &c, &w, 2.0).unwrap();
        let r1 = convergence_rate(&scale(&a), &scale(&b), &scale(&c), &w, 2.0).unwrap();
        prop_assert!((r0 - r1).abs() <= 1e-12 * r0.abs().max(1.0));
    }

    #[test]
    fn interpolation_is_a_partition_of_unity(x in 0.0f64..1.0, y in 0.0f64..1.0, cx in -5.0f64..5.0, cy in -5.0f64..5.0) {
        let m = build_uniform_mesh(1.0, 1.0, 0.125, None).unwrap();
        let u = m.sample_nodal(|_| Vec2::new(cx, cy));
        let v = m.interpolate(&u, Vec2::new(x, y)).unwrap();
        prop_assert!((v.x - cx).abs() <= 1e-14 * cx.abs().max(1.0));
        prop_assert!((v.y - cy).abs() <= 1e-14 * cy.abs().max(1.0));
    }

    #[test]
    fn zone_bond_energy_below_total(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let disc = square(0.008, 0.001, plexiglass(0.002));
        let u = random_vec(disc.dofs(), 2e-5, seed);
        let r = random_vec(disc.quad.len(), 1.0, seed ^ 1);
        let mask: Vec<bool> = r.iter().map(|x| (x + 1.0) / 2.0 < frac).collect();
        let all = vec![true; disc.quad.len()];
        let (zone, _) = masked_energy(&disc, &u, &mask, ForceLaw::Nonlinear).unwrap();
        let (total, _) = masked_energy(&disc, &u, &all, ForceLaw::Nonlinear).unwrap();
        prop_assert!(zone >= 0.0 && zone <= total);
    }
}
