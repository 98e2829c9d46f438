//! Property tests for the geometric predicates and the discrete duality
//! structure.

use neumann_green::coeffs::{make_checkerboard, make_time_oscillatory};
use neumann_green::fem::{assemble_mass, DiscreteSpace};
use neumann_green::mesh::{build_interval_mesh, build_polygon_mesh, parabolic_distance, SpaceTimePoint};
use neumann_green::parabolic::{m_inner, solve_backward, solve_forward};
use proptest::prelude::*;
use std::sync::Arc;

fn point() -> impl Strategy<Value = SpaceTimePoint> {
    (-5.0f64..5.0, -5.0f64..5.0, -10.0f64..10.0).prop_map(|(x, y, t)| SpaceTimePoint::new2(x, y, t))
}

proptest! {
    #[test]
    fn parabolic_distance_is_a_metric(a in point(), b in point(), c in point()) {
        let dab = parabolic_distance(&a, &b);
        let dba = parabolic_distance(&b, &a);
        prop_assert!((dab - dba).abs() <= 1e-12 * dab.max(1.0));
        prop_assert!(dab >= 0.0);
        // max-metric triangle inequality
        let dac = parabolic_distance(&a, &c);
        let dcb = parabolic_distance(&c, &b);
        prop_assert!(dab <= dac + dcb + 1e-12 * (dac + dcb).max(1.0));
    }

    #[test]
    fn interval_measure_is_exact(a in -10.0f64..10.0, len in 0.1f64..20.0, cells in 1usize..200) {
        let mesh = build_interval_mesh(a, a + len, cells).unwrap();
        let mut sum = 0.0;
        for e in 0..mesh.n_elems() {
            sum += mesh.elem_measure(e);
        }
        prop_assert!((sum - mesh.domain_measure).abs() <= 1e-12 * mesh.domain_measure);
        prop_assert!((mesh.domain_measure - len).abs() <= 1e-12 * len);
        prop_assert!(mesh.mesh_size <= mesh.domain_measure + 1e-12);
    }

    #[test]
    fn rectangle_measure_matches_area(w in 0.3f64..3.0, h in 0.3f64..3.0) {
        let verts = vec![[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
        let target = 0.4 * w.min(h);
        let mesh = build_polygon_mesh(&verts, target).unwrap();
        prop_assert!((mesh.domain_measure - w * h).abs() <= 1e-12 * (w * h));
        prop_assert!(mesh.mesh_size <= target + 1e-12);
    }
}

#[test]
fn forward_backward_pairing_holds_for_many_random_pairs() {
    let mesh = Arc::new(build_interval_mesh(0.0, 1.0, 40).unwrap());
    let space = DiscreteSpace::new(mesh, 1);
    let field = make_time_oscillatory(make_checkerboard(0.3, 1.0, 4, 1).unwrap(), 0.2, 9.0).unwrap();
    let mass = assemble_mass(&space);
    let mut state = 0x243f6a8885a308d3u64;
    let mut next = move || {
        // xorshift is plenty for test data
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for _ in 0..50 {
        let f: Vec<f64> = (0..space.n_dofs()).map(|_| next()).collect();
        let g: Vec<f64> = (0..space.n_dofs()).map(|_| next()).collect();
        let fwd = solve_forward(&space, &field, &f, None, 0.0, 0.2, 35).unwrap();
        let bwd = solve_backward(&space, &field, &g, None, 0.0, 0.2, 35).unwrap();
        let lhs = m_inner(&mass, fwd.slice(35), &g);
        let rhs = m_inner(&mass, &f, bwd.slice(0));
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}
