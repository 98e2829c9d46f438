//! Exponential-weight conjugation of the discrete evolution: the twisted
//! operator norm against its certified growth bound, the twisted duality
//! identity, and the pointwise off-diagonal consequence with the optimized
//! truncated-cone weight.

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, DiscreteSpace};
use crate::green::GreenTable;
use crate::parabolic::m_inner;
use crate::sparse::{Csr, StepSolver, DEFAULT_DIRECT_THRESHOLD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Weight families for the conjugation. The truncated cone grows with unit
/// slope away from the apex and flattens at the plateau radius, which keeps it
/// bounded and exactly 1-Lipschitz.
#[derive(Debug, Clone, Copy)]
pub enum PsiSpec {
    Zero,
    Cone { apex: [f64; 2], plateau: f64 },
}

impl PsiSpec {
    /// Pointwise weight before the Lipschitz scale is applied.
    pub fn profile(&self, x: &[f64; 2]) -> f64 {
        match self {
            PsiSpec::Zero => 0.0,
            PsiSpec::Cone { apex, plateau } => {
                let r = ((x[0] - apex[0]).powi(2) + (x[1] - apex[1]).powi(2)).sqrt();
                r.min(*plateau)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DaviesOutcome {
    pub lipschitz: f64,
    /// lambda^{-3}
    pub theta: f64,
    pub measured_norm: f64,
    /// e^{theta M^2 (t - s)}
    pub certified_bound: f64,
    pub duality_defect: f64,
    pub max_edge_slope: f64,
    pub power_iterations: usize,
}

struct TwistedEvolution {
    space: DiscreteSpace,
    mass: Csr,
    mass_solver: StepSolver,
    forward: Vec<StepSolver>,
    backward: Vec<StepSolver>,
    e_plus: Vec<f64>,
    e_minus: Vec<f64>,
}

impl TwistedEvolution {
    fn new(
        space: &DiscreteSpace,
        field: &CoefficientField,
        psi_nodal: &[f64],
        t_start: f64,
        t_end: f64,
        steps: usize,
    ) -> Result<TwistedEvolution> {
        let mass = assemble_mass(space);
        let tau = (t_end - t_start) / steps as f64;
        let mut forward = Vec::with_capacity(steps);
        let mut backward = Vec::with_capacity(steps);
        let mut shared: Option<(Csr, Csr)> = None;
        for m in 1..=steps {
            let t = t_start + tau * m as f64;
            let build = shared.is_none() || field.time_dependent;
            if build {
                let k = assemble_stiffness(space, field, t);
                let a = mass.add_scaled(&k, tau);
                let at = a.transpose();
                shared = Some((a, at));
            }
            let (a, at) = shared.clone().unwrap();
            forward.push(StepSolver::new(a, DEFAULT_DIRECT_THRESHOLD));
            backward.push(StepSolver::new(at, DEFAULT_DIRECT_THRESHOLD));
        }
        let n = space.n_dofs();
        let mut e_plus = vec![0.0; n];
        let mut e_minus = vec![0.0; n];
        for node in 0..space.mesh.n_nodes() {
            for c in 0..space.components {
                let dof = space.dof(node, c);
                e_plus[dof] = psi_nodal[node].exp();
                e_minus[dof] = (-psi_nodal[node]).exp();
            }
        }
        let mass_solver = StepSolver::new(mass.clone(), DEFAULT_DIRECT_THRESHOLD);
        Ok(TwistedEvolution { space: space.clone(), mass, mass_solver, forward, backward, e_plus, e_minus })
    }

    /// e^{psi} S e^{-psi} f, marching the plain evolution between the weights.
    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.space.n_dofs();
        let mut u: Vec<f64> = (0..n).map(|i| self.e_minus[i] * f[i]).collect();
        let mut rhs = vec![0.0; n];
        for solver in &self.forward {
            self.mass.matvec(&u, &mut rhs);
            solver.solve(&rhs, &mut u)?;
        }
        for i in 0..n {
            u[i] *= self.e_plus[i];
        }
        Ok(u)
    }

    /// Adjoint of `apply` in the mass inner product: the reversed march through
    /// the transposed matrices, with the mass-conjugated weights.
    fn apply_adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        let n = self.space.n_dofs();
        let mut z = self.mass.matvec_alloc(g);
        for i in 0..n {
            z[i] *= self.e_plus[i];
        }
        let mut w = vec![0.0; n];
        self.mass_solver.solve(&z.clone(), &mut w)?;
        let mut rhs = vec![0.0; n];
        for solver in self.backward.iter().rev() {
            self.mass.matvec(&w, &mut rhs);
            solver.solve(&rhs, &mut w)?;
        }
        let mut z = self.mass.matvec_alloc(&w);
        for i in 0..n {
            z[i] *= self.e_minus[i];
        }
        let mut out = vec![0.0; n];
        self.mass_solver.solve(&z.clone(), &mut out)?;
        Ok(out)
    }
}

/// Runs the conjugated evolution for one Lipschitz scale: estimates its
/// L2-to-L2 norm by power iteration on the adjoint composition, certifies the
/// weight's edge slopes, and checks the forward/backward duality display.
#[allow(clippy::too_many_arguments)]
pub fn davies_experiment(
    space: &DiscreteSpace,
    field: &CoefficientField,
    psi: &PsiSpec,
    lipschitz: f64,
    t_start: f64,
    t_end: f64,
    steps: usize,
    seed: u64,
) -> Result<DaviesOutcome> {
    if lipschitz < 0.0 {
        return Err(Error::InvalidInput("the Lipschitz scale must be nonnegative".into()));
    }
    let mesh = &space.mesh;
    let psi_nodal: Vec<f64> = (0..mesh.n_nodes()).map(|p| lipschitz * psi.profile(&mesh.node(p))).collect();

    // certify edge slopes against the declared constant
    let mut max_slope = 0.0f64;
    for e in 0..mesh.n_elems() {
        let verts = mesh.elem(e);
        for i in 0..verts.len() {
            for j in (i + 1)..verts.len() {
                let a = mesh.node(verts[i]);
                let b = mesh.node(verts[j]);
                let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                let slope = (psi_nodal[verts[i]] - psi_nodal[verts[j]]).abs() / len;
                max_slope = max_slope.max(slope);
            }
        }
    }
    if max_slope > lipschitz * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::LipschitzViolation { slope: max_slope, bound: lipschitz });
    }

    let evo = TwistedEvolution::new(space, field, &psi_nodal, t_start, t_end, steps)?;
    let n = space.n_dofs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // duality display on random pairs
    let mut duality_defect = 0.0f64;
    for _ in 0..10 {
        let f: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let lhs = m_inner(&evo.mass, &evo.apply(&f)?, &g);
        let rhs = m_inner(&evo.mass, &f, &evo.apply_adjoint(&g)?);
        duality_defect = duality_defect.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }

    // power iteration on P*P in the mass inner product
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let nrm = m_inner(&evo.mass, &v, &v).sqrt();
    for x in &mut v {
        *x /= nrm;
    }
    let mut sigma2 = 0.0f64;
    let mut iterations = 0usize;
    for it in 0..30 {
        iterations = it + 1;
        let pv = evo.apply(&v)?;
        let new_sigma2 = m_inner(&evo.mass, &pv, &pv) / m_inner(&evo.mass, &v, &v);
        let mut w = evo.apply_adjoint(&pv)?;
        let nrm = m_inner(&evo.mass, &w, &w).sqrt();
        if nrm == 0.0 {
            sigma2 = 0.0;
            break;
        }
        for x in &mut w {
            *x /= nrm;
        }
        v = w;
        if (new_sigma2 - sigma2).abs() <= 1e-8 * new_sigma2.abs().max(1e-300) {
            sigma2 = new_sigma2;
            break;
        }
        sigma2 = new_sigma2;
    }

    let theta = field.lambda.powi(-3);
    let certified = (theta * lipschitz * lipschitz * (t_end - t_start)).exp();
    Ok(DaviesOutcome {
        lipschitz,
        theta,
        measured_norm: sigma2.sqrt(),
        certified_bound: certified,
        duality_defect,
        max_edge_slope: max_slope,
        power_iterations: iterations,
    })
}

/// Envelope constant of the pointwise off-diagonal consequence: with the
/// optimized cone weight, e^{psi(x) - psi(y)} |N| stays under
/// C rho^{-n} e^{2 rho M + theta M^2 (t-s)} with rho = sqrt(t-s) capped at the
/// domain scale. Returns the largest sampled ratio.
pub fn cone_pointwise_constant(table: &GreenTable, max_samples: usize, seed: u64) -> Result<f64> {
    let mesh = &table.space.mesh;
    let n = mesh.dim as f64;
    let pole = table.pole;
    let theta = table.lambda.powi(-3);
    let r_m = mesh.domain_measure.powf(1.0 / mesh.dim as f64);
    let nc = table.components();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c83 = 0.0f64;
    let mut used = 0usize;
    let mut attempts = 0usize;
    while used < max_samples && attempts < 50 * max_samples {
        attempts += 1;
        let m = rng.gen_range(1..=table.steps());
        let node = rng.gen_range(0..mesh.n_nodes());
        let dt = table.columns[0].time(m) - pole.t;
        if dt < 4.0 * table.eps * table.eps {
            continue;
        }
        let x = mesh.node(node);
        let dist = ((x[0] - pole.x[0]).powi(2) + (x[1] - pole.x[1]).powi(2)).sqrt();
        if dist < 4.0 * table.eps {
            continue;
        }
        // the optimized slope for this (x, t) pair
        let m_opt = dist / (2.0 * theta * dt);
        let rho = dt.sqrt().min(r_m);
        let mut val2 = 0.0;
        for col in &table.columns {
            for j in 0..nc {
                let v = col.slice(m)[table.space.dof(node, j)];
                val2 += v * v;
            }
        }
        let lhs = (m_opt * dist).exp() * val2.sqrt();
        let env = rho.powf(-n) * (2.0 * rho * m_opt + theta * m_opt * m_opt * dt).exp();
        c83 = c83.max(lhs / env);
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoValidSamples("no sample outside the mollification scale".into()));
    }
    Ok(c83)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::make_checkerboard;
    use crate::green::build_mollified_green;
    use crate::mesh::{build_interval_mesh, SpaceTimePoint};
    use std::sync::Arc;

    fn interval_space(cells: usize) -> DiscreteSpace {
        DiscreteSpace::new(Arc::new(build_interval_mesh(0.0, 1.0, cells).unwrap()), 1)
    }

    #[test]
    fn zero_weight_is_a_contraction() {
        let space = interval_space(64);
        let field = CoefficientField::identity(1, 1);
        let out = davies_experiment(&space, &field, &PsiSpec::Zero, 0.0, 0.0, 0.25, 100, 17).unwrap();
        assert!(out.measured_norm <= 1.0 + 1e-10, "norm {}", out.measured_norm);
        assert!(out.duality_defect <= 1e-9, "duality {}", out.duality_defect);
    }

    #[test]
    fn cone_weight_stays_under_certified_growth() {
        let space = interval_space(128);
        let field = CoefficientField::identity(1, 1);
        let psi = PsiSpec::Cone { apex: [0.25, 0.0], plateau: 0.5 };
        for m in [0.5, 1.0, 2.0] {
            let out = davies_experiment(&space, &field, &psi, m, 0.0, 0.25, 200, 17).unwrap();
            assert!(
                out.measured_norm <= out.certified_bound * 1.05,
                "M = {m}: {} vs {}",
                out.measured_norm,
                out.certified_bound
            );
            assert!(out.duality_defect <= 1e-9);
            assert!(out.max_edge_slope <= m * (1.0 + 1e-12));
        }
        // doubling the slope quadruples the log of the certified bound
        let a = davies_experiment(&space, &field, &psi, 1.0, 0.0, 0.25, 200, 17).unwrap();
        let b = davies_experiment(&space, &field, &psi, 2.0, 0.0, 0.25, 200, 17).unwrap();
        let ratio = b.certified_bound.ln() / a.certified_bound.ln();
        assert!((ratio - 4.0).abs() < 1e-12);
        assert!(b.measured_norm <= b.certified_bound * 1.05);
    }

    #[test]
    fn rough_field_uses_its_own_theta() {
        let space = interval_space(64);
        let field = make_checkerboard(0.2, 1.0, 4, 1).unwrap();
        let psi = PsiSpec::Cone { apex: [0.5, 0.0], plateau: 0.4 };
        let out = davies_experiment(&space, &field, &psi, 1.0, 0.0, 0.2, 100, 23).unwrap();
        assert!((out.theta - 125.0).abs() < 1e-9);
        assert!(out.measured_norm <= out.certified_bound * 1.05);
    }

    #[test]
    fn cone_pointwise_envelope_is_finite() {
        let mesh = Arc::new(build_interval_mesh(0.0, 1.0, 128).unwrap());
        let space = DiscreteSpace::new(mesh, 1);
        let field = CoefficientField::identity(1, 1);
        let table =
            build_mollified_green(&space, &field, SpaceTimePoint::new1(0.3, 0.0), 1.0 / 32.0, 0.2, 400).unwrap();
        let c = cone_pointwise_constant(&table, 2000, 31).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }
}
