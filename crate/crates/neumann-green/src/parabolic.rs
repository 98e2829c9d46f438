//! Backward-Euler weak solvers for the forward and backward (adjoint) problems
//! on uniform time grids, plus the discrete energy norms.
//!
//! The two steppers are exact algebraic transposes of each other: the forward
//! march solves (M + tau K(t_m)) u_m = M u_{m-1}, the backward march solves the
//! transposed matrices over the same slices in reverse. The pairing
//! <forward(psi)(t_end), g>_M = <psi, backward(g)(t_start)>_M then holds to
//! solver tolerance, which is what every duality check in the crate exercises.

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, DiscreteSpace};
use crate::sparse::{dot, Csr, StepSolver, DEFAULT_DIRECT_THRESHOLD};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Nodal field over a uniform time grid.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    pub space: DiscreteSpace,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    /// (steps + 1) slices of length n_dofs
    pub values: Vec<Vec<f64>>,
    pub direction: Direction,
}

impl SpaceTimeField {
    pub fn tau(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        self.t_start + self.tau() * m as f64
    }

    pub fn slice(&self, m: usize) -> &[f64] {
        &self.values[m]
    }

    pub fn nearest_step(&self, t: f64) -> usize {
        let m = ((t - self.t_start) / self.tau()).round();
        (m.max(0.0) as usize).min(self.steps)
    }

    /// CSV snapshot: t, node_index, coordinates, component, value.
    pub fn export_csv(&self) -> String {
        let mesh = &self.space.mesh;
        let nc = self.space.components;
        let mut s = String::new();
        if mesh.dim == 1 {
            s.push_str("t,node_index,x,component,value\n");
        } else {
            s.push_str("t,node_index,x,y,component,value\n");
        }
        for m in 0..=self.steps {
            let t = self.time(m);
            for node in 0..mesh.n_nodes() {
                let x = mesh.node(node);
                for c in 0..nc {
                    let v = self.values[m][self.space.dof(node, c)];
                    if mesh.dim == 1 {
                        let _ = writeln!(s, "{t:.12e},{node},{:.12e},{c},{v:.17e}", x[0]);
                    } else {
                        let _ = writeln!(s, "{t:.12e},{node},{:.12e},{:.12e},{c},{v:.17e}", x[0], x[1]);
                    }
                }
            }
        }
        s
    }
}

/// Nodal source sampled at a time slice; `None` means zero source.
pub type Source<'a> = Option<&'a dyn Fn(f64) -> Vec<f64>>;

struct March<'a> {
    space: &'a DiscreteSpace,
    field: &'a CoefficientField,
    mass: Csr,
    tau: f64,
    cached: Option<StepSolver>,
}

impl<'a> March<'a> {
    fn new(space: &'a DiscreteSpace, field: &'a CoefficientField, tau: f64) -> March<'a> {
        March { space, field, mass: assemble_mass(space), tau, cached: None }
    }

    /// Stepping matrix M + tau K(t), transposed for the backward march.
    fn solver_at(&mut self, t: f64, transpose: bool) -> Result<&StepSolver> {
        let rebuild = self.cached.is_none() || self.field.time_dependent;
        if rebuild {
            let k = assemble_stiffness(self.space, self.field, t);
            let k = if transpose { k.transpose() } else { k };
            let a = self.mass.add_scaled(&k, self.tau);
            self.cached = Some(StepSolver::new(a, DEFAULT_DIRECT_THRESHOLD));
        }
        Ok(self.cached.as_ref().unwrap())
    }
}

/// Forward march from initial data `psi` at `t_start`. The Neumann condition is
/// natural: no boundary rows are touched. With zero source the total mass of
/// every component is conserved to solver tolerance.
pub fn solve_forward(
    space: &DiscreteSpace,
    field: &CoefficientField,
    psi: &[f64],
    f: Source,
    t_start: f64,
    t_end: f64,
    steps: usize,
) -> Result<SpaceTimeField> {
    march(space, field, psi, f, t_start, t_end, steps, Direction::Forward)
}

/// Backward march from terminal data `psi` at `t_end`, using the transposed
/// stepping matrices over the same coefficient slices as the forward march.
pub fn solve_backward(
    space: &DiscreteSpace,
    field: &CoefficientField,
    psi: &[f64],
    f: Source,
    t_start: f64,
    t_end: f64,
    steps: usize,
) -> Result<SpaceTimeField> {
    march(space, field, psi, f, t_start, t_end, steps, Direction::Backward)
}

#[allow(clippy::too_many_arguments)]
fn march(
    space: &DiscreteSpace,
    field: &CoefficientField,
    psi: &[f64],
    f: Source,
    t_start: f64,
    t_end: f64,
    steps: usize,
    direction: Direction,
) -> Result<SpaceTimeField> {
    if steps == 0 {
        return Err(Error::InvalidInput("time stepping needs steps >= 1".into()));
    }
    if !(t_end > t_start) {
        return Err(Error::InvalidInput(format!("time window must satisfy t_start < t_end, got [{t_start}, {t_end}]")));
    }
    if psi.len() != space.n_dofs() {
        return Err(Error::InvalidInput(format!(
            "initial data has {} entries for {} dofs",
            psi.len(),
            space.n_dofs()
        )));
    }
    let tau = (t_end - t_start) / steps as f64;
    let mut marcher = March::new(space, field, tau);
    let n = space.n_dofs();
    let mut values = vec![vec![0.0; n]; steps + 1];
    let mut rhs = vec![0.0; n];

    match direction {
        Direction::Forward => {
            values[0].copy_from_slice(psi);
            for m in 1..=steps {
                let t_new = t_start + tau * m as f64;
                let (prev, rest) = values.split_at_mut(m);
                marcher.mass.matvec(&prev[m - 1], &mut rhs);
                if let Some(src) = f {
                    let fv = src(t_new);
                    let mf = marcher.mass.matvec_alloc(&fv);
                    for i in 0..n {
                        rhs[i] += tau * mf[i];
                    }
                }
                let x = &mut rest[0];
                x.copy_from_slice(&prev[m - 1]);
                marcher.solver_at(t_new, false)?.solve(&rhs, x)?;
            }
        }
        Direction::Backward => {
            values[steps].copy_from_slice(psi);
            for m in (1..=steps).rev() {
                // the slice t_m is shared with the forward step m-1 -> m, which
                // is exactly what makes the two marches transposes
                let t_slice = t_start + tau * m as f64;
                let (head, tail) = values.split_at_mut(m);
                marcher.mass.matvec(&tail[0], &mut rhs);
                if let Some(src) = f {
                    let fv = src(t_slice);
                    let mf = marcher.mass.matvec_alloc(&fv);
                    for i in 0..n {
                        rhs[i] += tau * mf[i];
                    }
                }
                let x = &mut head[m - 1];
                x.copy_from_slice(&tail[0]);
                marcher.solver_at(t_slice, true)?.solve(&rhs, x)?;
            }
        }
    }
    Ok(SpaceTimeField { space: space.clone(), t_start, t_end, steps, values, direction })
}

pub fn m_inner(m: &Csr, a: &[f64], b: &[f64]) -> f64 {
    dot(a, &m.matvec_alloc(b))
}

/// Per-component total mass of one slice.
pub fn component_masses(space: &DiscreteSpace, mass: &Csr, slice: &[f64]) -> Vec<f64> {
    let mv = mass.matvec_alloc(slice);
    (0..space.components)
        .map(|c| {
            let ind = space.component_indicator(c);
            dot(&ind, &mv)
        })
        .collect()
}

/// Energy norm over a time window: gradient integral plus the slice supremum,
/// sqrt(sum_m tau u' K_lap u + max_m u' M u) over steps whose times lie in the
/// window.
pub fn triple_norm(u: &SpaceTimeField, window: (f64, f64)) -> f64 {
    let mass = assemble_mass(&u.space);
    let lap = assemble_stiffness(
        &u.space,
        &CoefficientField::identity(u.space.mesh.dim, u.space.components),
        0.0,
    );
    triple_norm_with(u, window, &mass, &lap)
}

pub fn triple_norm_with(u: &SpaceTimeField, window: (f64, f64), mass: &Csr, lap: &Csr) -> f64 {
    let tau = u.tau();
    let eps = 1e-12 * tau.abs().max(1.0);
    let included: Vec<usize> = (0..=u.steps)
        .filter(|&m| {
            let t = u.time(m);
            t >= window.0 - eps && t <= window.1 + eps
        })
        .collect();
    let mut grad = 0.0;
    let mut sup: f64 = 0.0;
    for (k, &m) in included.iter().enumerate() {
        let s = u.slice(m);
        // trapezoid weights in time
        let w = if k == 0 || k + 1 == included.len() { 0.5 * tau } else { tau };
        grad += w * dot(s, &lap.matvec_alloc(s));
        sup = sup.max(dot(s, &mass.matvec_alloc(s)));
    }
    (grad + sup).sqrt()
}

/// Ratio of the energy norm of a zero-source forward solution to the L2 norm of
/// its initial data. The constant in the underlying inequality depends only on
/// the ellipticity constant, so the check is boundedness under refinement, not a
/// specific value.
pub fn energy_inequality_check(u: &SpaceTimeField, psi: &[f64]) -> f64 {
    let mass = assemble_mass(&u.space);
    let lap = assemble_stiffness(
        &u.space,
        &CoefficientField::identity(u.space.mesh.dim, u.space.components),
        0.0,
    );
    let num = triple_norm_with(u, (u.t_start, u.t_end), &mass, &lap);
    let den = m_inner(&mass, psi, psi).sqrt();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{make_checkerboard, make_nonsymmetric_system, make_time_oscillatory};
    use crate::mesh::build_interval_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn space_1d(cells: usize, nc: usize) -> DiscreteSpace {
        DiscreteSpace::new(Arc::new(build_interval_mesh(0.0, 1.0, cells).unwrap()), nc)
    }

    #[test]
    fn constants_are_exact_solutions() {
        let space = space_1d(32, 1);
        let field = make_checkerboard(0.2, 1.0, 4, 1).unwrap();
        let psi = vec![3.5; space.n_dofs()];
        let u = solve_forward(&space, &field, &psi, None, 0.0, 0.5, 50).unwrap();
        for m in 0..=50 {
            for v in u.slice(m) {
                assert!((v - 3.5).abs() < 1e-9);
            }
        }
        let v = solve_backward(&space, &field, &psi, None, 0.0, 0.5, 50).unwrap();
        for m in 0..=50 {
            for val in v.slice(m) {
                assert!((val - 3.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cosine_mode_decays_at_pi_squared_rate() {
        let space = space_1d(256, 1);
        let field = CoefficientField::identity(1, 1);
        let mesh = &space.mesh;
        let psi: Vec<f64> = (0..mesh.n_nodes()).map(|p| (PI * mesh.node(p)[0]).cos()).collect();
        let dt = 0.1;
        let u = solve_forward(&space, &field, &psi, None, 0.0, dt, 1000).unwrap();
        let mass = assemble_mass(&space);
        let mut err2 = 0.0;
        let mut ref2 = 0.0;
        let last = u.slice(1000);
        let decay = (-PI * PI * dt).exp();
        let diff: Vec<f64> = (0..mesh.n_nodes())
            .map(|p| last[p] - decay * (PI * mesh.node(p)[0]).cos())
            .collect();
        let exact: Vec<f64> = (0..mesh.n_nodes()).map(|p| decay * (PI * mesh.node(p)[0]).cos()).collect();
        err2 += m_inner(&mass, &diff, &diff);
        ref2 += m_inner(&mass, &exact, &exact);
        let rel = (err2 / ref2).sqrt();
        assert!(rel <= 0.01, "relative L2 error {rel}");
    }

    #[test]
    fn mass_is_conserved_for_zero_source() {
        let space = space_1d(64, 1);
        let field = make_time_oscillatory(make_checkerboard(0.3, 1.0, 4, 1).unwrap(), 0.2, 9.0).unwrap();
        let mesh = &space.mesh;
        let psi: Vec<f64> = (0..mesh.n_nodes()).map(|p| (7.0 * mesh.node(p)[0]).sin().abs() + 0.1).collect();
        let u = solve_forward(&space, &field, &psi, None, 0.0, 0.3, 120).unwrap();
        let mass = assemble_mass(&space);
        let m0 = component_masses(&space, &mass, &psi)[0];
        let l1: f64 = psi.iter().map(|v| v.abs()).sum::<f64>() / psi.len() as f64;
        for m in 0..=120 {
            let mm = component_masses(&space, &mass, u.slice(m))[0];
            assert!((mm - m0).abs() <= 1e-10 * l1.max(1.0), "step {m}: {mm} vs {m0}");
        }
    }

    #[test]
    fn energy_decays_monotonically() {
        let space = space_1d(48, 2);
        let field = make_nonsymmetric_system(2, 0.1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen::<f64>() - 0.5).collect();
        let u = solve_forward(&space, &field, &psi, None, 0.0, 0.2, 80).unwrap();
        let mass = assemble_mass(&space);
        let mut prev = f64::INFINITY;
        for m in 0..=80 {
            let e = m_inner(&mass, u.slice(m), u.slice(m));
            assert!(e <= prev * (1.0 + 1e-12), "step {m}");
            prev = e;
        }
    }

    #[test]
    fn forward_backward_pairing_is_exact() {
        let space = space_1d(40, 2);
        let field = make_time_oscillatory(make_nonsymmetric_system(2, 0.1, 1).unwrap(), 0.3, 11.0).unwrap();
        let mass = assemble_mass(&space);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let f: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let g: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let fwd = solve_forward(&space, &field, &f, None, 0.0, 0.25, 40).unwrap();
            let bwd = solve_backward(&space, &field, &g, None, 0.0, 0.25, 40).unwrap();
            let lhs = m_inner(&mass, fwd.slice(40), &g);
            let rhs = m_inner(&mass, &f, bwd.slice(0));
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn self_adjoint_backward_is_time_reversed_forward() {
        let space = space_1d(32, 1);
        let field = make_checkerboard(0.4, 1.0, 4, 1).unwrap();
        let mesh = &space.mesh;
        let psi: Vec<f64> = (0..mesh.n_nodes()).map(|p| (3.0 * mesh.node(p)[0]).cos()).collect();
        let fwd = solve_forward(&space, &field, &psi, None, 0.0, 0.1, 20).unwrap();
        let bwd = solve_backward(&space, &field, &psi, None, 0.0, 0.1, 20).unwrap();
        for m in 0..=20 {
            let a = fwd.slice(m);
            let b = bwd.slice(20 - m);
            for i in 0..a.len() {
                assert!((a[i] - b[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn triple_norm_examples() {
        let space = space_1d(128, 1);
        let field = CoefficientField::identity(1, 1);
        let ones = vec![1.0; space.n_dofs()];
        let u = solve_forward(&space, &field, &ones, None, 0.0, 1.0, 25).unwrap();
        assert!((triple_norm(&u, (0.0, 1.0)) - 1.0).abs() < 1e-9);

        let zeros = vec![0.0; space.n_dofs()];
        let z = solve_forward(&space, &field, &zeros, None, 0.0, 1.0, 25).unwrap();
        assert_eq!(triple_norm(&z, (0.0, 1.0)), 0.0);

        // cos(pi x) frozen in time: sqrt(pi^2/2 + 1/2)
        let mesh = &space.mesh;
        let cosv: Vec<f64> = (0..mesh.n_nodes()).map(|p| (PI * mesh.node(p)[0]).cos()).collect();
        let steps = 25;
        let frozen = SpaceTimeField {
            space: space.clone(),
            t_start: 0.0,
            t_end: 1.0,
            steps,
            values: vec![cosv; steps + 1],
            direction: Direction::Forward,
        };
        let expect = (PI * PI / 2.0 + 0.5).sqrt();
        let got = triple_norm(&frozen, (0.0, 1.0));
        assert!((got - expect).abs() / expect < 0.01, "{got} vs {expect}");
    }

    #[test]
    fn energy_ratio_examples() {
        let space = space_1d(128, 1);
        let field = CoefficientField::identity(1, 1);
        let ones = vec![1.0; space.n_dofs()];
        let u = solve_forward(&space, &field, &ones, None, 0.0, 0.5, 50).unwrap();
        assert!((energy_inequality_check(&u, &ones) - 1.0).abs() < 1e-9);

        // raising the low coefficient value does not raise the ratio
        let mesh = &space.mesh;
        let psi: Vec<f64> = (0..mesh.n_nodes()).map(|p| (PI * mesh.node(p)[0]).cos()).collect();
        let f_low = make_checkerboard(0.2, 1.0, 4, 1).unwrap();
        let f_high = make_checkerboard(0.5, 1.0, 4, 1).unwrap();
        let u_low = solve_forward(&space, &f_low, &psi, None, 0.0, 0.5, 200).unwrap();
        let u_high = solve_forward(&space, &f_high, &psi, None, 0.0, 0.5, 200).unwrap();
        let r_low = energy_inequality_check(&u_low, &psi);
        let r_high = energy_inequality_check(&u_high, &psi);
        assert!(r_high <= r_low + 1e-12, "{r_high} vs {r_low}");

        // stability of the ratio under halving the time step
        let u2 = solve_forward(&space, &f_low, &psi, None, 0.0, 0.5, 400).unwrap();
        let r2 = energy_inequality_check(&u2, &psi);
        assert!((r2 - r_low).abs() / r_low < 0.05, "{r2} vs {r_low}");
    }

    #[test]
    fn convergence_order_against_cosine_oracle() {
        let field = CoefficientField::identity(1, 1);
        let dt = 0.1;
        let mut errs = Vec::new();
        for &cells in &[32usize, 64, 128] {
            let space = space_1d(cells, 1);
            let mesh = &space.mesh;
            let h = 1.0 / cells as f64;
            let tau = 0.64 * h * h;
            let steps = (dt / tau).round() as usize;
            let psi: Vec<f64> = (0..mesh.n_nodes()).map(|p| (PI * mesh.node(p)[0]).cos()).collect();
            let u = solve_forward(&space, &field, &psi, None, 0.0, dt, steps).unwrap();
            let mass = assemble_mass(&space);
            let decay = (-PI * PI * dt).exp();
            let diff: Vec<f64> = (0..mesh.n_nodes())
                .map(|p| u.slice(steps)[p] - decay * (PI * mesh.node(p)[0]).cos())
                .collect();
            errs.push(m_inner(&mass, &diff, &diff).sqrt());
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 >= 1.8 && order2 >= 1.8, "orders {order1}, {order2}");
    }

    #[test]
    fn csv_export_has_expected_shape() {
        let space = space_1d(4, 2);
        let field = CoefficientField::identity(1, 2);
        let psi = vec![1.0; space.n_dofs()];
        let u = solve_forward(&space, &field, &psi, None, 0.0, 0.1, 2).unwrap();
        let csv = u.export_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,node_index,x,component,value");
        assert_eq!(lines.len(), 1 + 3 * 5 * 2);
    }
}
