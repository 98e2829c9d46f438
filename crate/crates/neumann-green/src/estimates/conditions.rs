//! Measurable forms of the three structural conditions: the multiplicative
//! embedding constant, the interior Hölder estimate, and the up-to-the-boundary
//! local boundedness estimate with its measure-density byproduct.

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};
use crate::estimates::norms::spatial_lq;
use crate::estimates::ols_fit;
use crate::fem::{assemble_mass, assemble_stiffness, elem_l2sq, DiscreteSpace};
use crate::mesh::{parabolic_distance, refine, SpaceTimePoint};
use crate::parabolic::{solve_forward, SpaceTimeField};
use crate::sparse::dot;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Outcome of the embedding probe on one mesh and its refinement.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingEstimate {
    pub gamma_hat: f64,
    pub gamma_refined: f64,
    /// relative growth under one refinement
    pub growth: f64,
}

fn zero_mean(space: &DiscreteSpace, mass: &crate::sparse::Csr, u: &mut [f64]) {
    let measure = space.mesh.domain_measure;
    for c in 0..space.components {
        let ind = space.component_indicator(c);
        let mean = dot(&ind, &mass.matvec_alloc(u)) / measure;
        for node in 0..space.mesh.n_nodes() {
            u[space.dof(node, c)] -= mean;
        }
    }
}

fn embedding_ratio(space: &DiscreteSpace, mass: &crate::sparse::Csr, lap: &crate::sparse::Csr, u: &[f64]) -> f64 {
    let n = space.mesh.dim as f64;
    let p = 2.0 * (n + 2.0) / n;
    let lp = spatial_lq(space, u, p);
    let grad = dot(u, &lap.matvec_alloc(u)).sqrt();
    let l2 = dot(u, &mass.matvec_alloc(u)).sqrt();
    if grad == 0.0 || l2 == 0.0 {
        return 0.0;
    }
    lp / (grad.powf(n / (n + 2.0)) * l2.powf(2.0 / (n + 2.0)))
}

fn gamma_on_space(space: &DiscreteSpace, random_fields: usize, seed: u64) -> f64 {
    let mass = assemble_mass(space);
    let lap = assemble_stiffness(space, &CoefficientField::identity(space.mesh.dim, space.components), 0.0);
    let mesh = &space.mesh;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut try_candidate = |u: &mut Vec<f64>| {
        zero_mean(space, &mass, u);
        let r = embedding_ratio(space, &mass, &lap, u);
        if r > best {
            best = r;
        }
    };
    // random mean-free fields
    for _ in 0..random_fields {
        let mut u: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen::<f64>() - 0.5).collect();
        try_candidate(&mut u);
    }
    // concentrated bumps at several scales and centers: these saturate the
    // scale-invariant ratio and are the adversarial family
    let diam = mesh.domain_measure.powf(1.0 / mesh.dim as f64);
    let interior: Vec<usize> = (0..mesh.n_nodes())
        .filter(|&p| mesh.boundary_distance(&mesh.node(p)) > 0.2 * diam)
        .collect();
    let centers: Vec<usize> = (0..6.min(interior.len()))
        .map(|_| interior[rng.gen_range(0..interior.len())])
        .collect();
    for &c in &centers {
        let xc = mesh.node(c);
        for scale in [0.05, 0.1, 0.2] {
            let delta = scale * diam;
            let mut u: Vec<f64> = (0..space.n_dofs()).map(|_| 0.0).collect();
            for node in 0..mesh.n_nodes() {
                let x = mesh.node(node);
                let r2 = ((x[0] - xc[0]).powi(2) + (x[1] - xc[1]).powi(2)) / (delta * delta);
                let v = (-r2).exp();
                for comp in 0..space.components {
                    u[space.dof(node, comp)] = v;
                }
            }
            try_candidate(&mut u);
        }
    }
    // smooth oscillatory candidates
    for k in 1..=3u32 {
        let mut u: Vec<f64> = (0..space.n_dofs()).map(|_| 0.0).collect();
        for node in 0..mesh.n_nodes() {
            let x = mesh.node(node);
            let v = (k as f64 * std::f64::consts::PI * x[0]).cos();
            for comp in 0..space.components {
                u[space.dof(node, comp)] = v;
            }
        }
        try_candidate(&mut u);
    }
    best
}

/// Largest sampled ratio in the multiplicative embedding inequality over
/// mean-free candidates, together with its growth under one mesh refinement.
pub fn verify_embedding_a1(space: &DiscreteSpace, random_fields: usize, seed: u64) -> Result<EmbeddingEstimate> {
    if random_fields == 0 {
        return Err(Error::InvalidInput("need at least one random field".into()));
    }
    let gamma_hat = gamma_on_space(space, random_fields, seed);
    let fine = DiscreteSpace::new(Arc::new(refine(&space.mesh)), space.components);
    let gamma_refined = gamma_on_space(&fine, random_fields, seed);
    Ok(EmbeddingEstimate { gamma_hat, gamma_refined, growth: gamma_refined / gamma_hat - 1.0 })
}

/// Hand value of the embedding ratio for the cos(pi x) candidate on the unit
/// square, used as the oracle for the verifier itself.
pub fn square_cosine_embedding_ratio() -> f64 {
    // ||u||_4 = (3/8)^{1/4}, ||Du|| = (pi^2/2)^{1/2}, ||u|| = (1/2)^{1/2}
    let l4 = (3.0f64 / 8.0).powf(0.25);
    let grad = (std::f64::consts::PI.powi(2) / 2.0).sqrt();
    let l2 = 0.5f64.sqrt();
    l4 / (grad.sqrt() * l2.sqrt())
}

/// Fitted interior Hölder data: the exponent floor over trials and the largest
/// normalized constant.
#[derive(Debug, Clone, Copy)]
pub struct InteriorHolderEstimate {
    pub mu0_hat: f64,
    pub b0_hat: f64,
}

/// Measures the interior Hölder exponent of weak solutions on backward
/// cylinders strictly inside the domain. Solutions are generated from random
/// initial data with two steps of burn-in before the cylinder opens.
pub fn estimate_interior_holder_a2(
    space: &DiscreteSpace,
    field: &CoefficientField,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<InteriorHolderEstimate> {
    let mesh = &space.mesh;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior: Vec<usize> = (0..mesh.n_nodes())
        .filter(|&p| mesh.boundary_distance(&mesh.node(p)) > radius * 1.05)
        .collect();
    if interior.is_empty() {
        return Err(Error::NoValidSamples(format!("no node sits {radius} inside the boundary")));
    }
    let steps_in_r2 = 32usize;
    let tau = radius * radius / steps_in_r2 as f64;
    let t_end = radius * radius + 2.0 * tau;
    let steps = steps_in_r2 + 2;

    let mut mu_min = f64::INFINITY;
    let mut b0_max = 0.0f64;
    for _ in 0..trials {
        let center_node = interior[rng.gen_range(0..interior.len())];
        let x0 = mesh.node(center_node);
        let psi: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let u = solve_forward(space, field, &psi, None, 0.0, t_end, steps)?;
        let (mu, b0) = holder_fit_on_cylinder(&u, &x0, t_end, radius, &mut rng)?;
        mu_min = mu_min.min(mu);
        b0_max = b0_max.max(b0);
    }
    if !(mu_min > 0.05) {
        return Err(Error::FitFailure(format!("interior Hölder exponent {mu_min} at or below the 0.05 floor")));
    }
    Ok(InteriorHolderEstimate { mu0_hat: mu_min, b0_hat: b0_max })
}

/// Fits the exponent from max increments over dyadic parabolic scales inside
/// the half cylinder, then normalizes the constant by the cylinder average.
fn holder_fit_on_cylinder(
    u: &SpaceTimeField,
    x0: &[f64; 2],
    t0: f64,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let space = &u.space;
    let mesh = &space.mesh;
    let nc = space.components;
    let half = radius / 2.0;
    // grid points of the half cylinder
    let mut pts: Vec<(usize, usize)> = Vec::new();
    for m in 0..=u.steps {
        let t = u.time(m);
        if t < t0 - half * half - 1e-14 || t > t0 + 1e-14 {
            continue;
        }
        for node in 0..mesh.n_nodes() {
            let x = mesh.node(node);
            let d = ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)).sqrt();
            if d <= half {
                pts.push((node, m));
            }
        }
    }
    if pts.len() < 8 {
        return Err(Error::NoValidSamples("half cylinder contains too few grid points".into()));
    }
    let point = |p: (usize, usize)| SpaceTimePoint { x: mesh.node(p.0), t: u.time(p.1) };
    let diff = |a: (usize, usize), b: (usize, usize)| -> f64 {
        let sa = u.slice(a.1);
        let sb = u.slice(b.1);
        let mut acc = 0.0;
        for c in 0..nc {
            let d = sa[space.dof(a.0, c)] - sb[space.dof(b.0, c)];
            acc += d * d;
        }
        acc.sqrt()
    };
    // dyadic scales down to what the mesh resolves
    let scale_floor = 2.0 * mesh.mesh_size;
    let scales: Vec<f64> = (0..4).map(|j| half / (1 << j) as f64).filter(|&r| r >= scale_floor).collect();
    if scales.len() < 3 {
        return Err(Error::NoValidSamples(format!(
            "mesh size {} too coarse for a dyadic sweep under half radius {half}",
            mesh.mesh_size
        )));
    }
    let mut max_inc = vec![0.0f64; scales.len()];
    let attempts = 4000usize;
    for _ in 0..attempts {
        let a = pts[rng.gen_range(0..pts.len())];
        let b = pts[rng.gen_range(0..pts.len())];
        let d = parabolic_distance(&point(a), &point(b));
        for (j, &r) in scales.iter().enumerate() {
            if d >= 0.5 * r && d <= r {
                let inc = diff(a, b);
                if inc > max_inc[j] {
                    max_inc[j] = inc;
                }
            }
        }
    }
    if max_inc.iter().any(|&v| v == 0.0) {
        return Err(Error::NoValidSamples("a dyadic scale bin collected no increments (constant solution?)".into()));
    }
    // increments should shrink with the scale; tolerate mild inversion only
    for j in 1..max_inc.len() {
        if max_inc[j] > 1.5 * max_inc[j - 1] {
            return Err(Error::FitFailure("increment profile is non-monotone across scales".into()));
        }
    }
    let xs: Vec<f64> = scales.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = max_inc.iter().map(|v| v.ln()).collect();
    let (_, slope, _) = ols_fit(&xs, &ys).ok_or_else(|| Error::FitFailure("degenerate scale fit".into()))?;
    // the condition's exponent lives in (0, 1]
    let mu = slope.clamp(0.01, 1.0);

    // cylinder average of |u|^2 over the full cylinder
    let mut l2 = 0.0;
    let mut vol = 0.0;
    let tau = u.tau();
    for m in 0..=u.steps {
        let t = u.time(m);
        if t < t0 - radius * radius - 1e-14 || t > t0 + 1e-14 {
            continue;
        }
        for e in 0..mesh.n_elems() {
            let bc = mesh.elem_barycenter(e);
            let d = ((bc[0] - x0[0]).powi(2) + (bc[1] - x0[1]).powi(2)).sqrt();
            if d <= radius {
                let verts = mesh.elem(e);
                for c in 0..nc {
                    let local: Vec<f64> = verts.iter().map(|&p| u.slice(m)[space.dof(p, c)]).collect();
                    l2 += tau * elem_l2sq(mesh, e, &local);
                }
                vol += tau * mesh.elem_measure(e);
            }
        }
    }
    let avg = (l2 / vol.max(1e-300)).sqrt();
    // constant normalized as in the interior estimate
    let mut b0 = 0.0f64;
    for _ in 0..1000 {
        let a = pts[rng.gen_range(0..pts.len())];
        let b = pts[rng.gen_range(0..pts.len())];
        let d = parabolic_distance(&point(a), &point(b));
        if d == 0.0 {
            continue;
        }
        let q = diff(a, b) / d.powf(mu);
        b0 = b0.max(q * radius.powf(mu) / avg.max(1e-300));
    }
    Ok((mu, b0))
}

/// The up-to-the-boundary boundedness constant and the measure-density constant
/// it implies.
#[derive(Debug, Clone, Copy)]
pub struct LocalBoundednessEstimate {
    pub b1_hat: f64,
    pub theta_hat: f64,
}

/// Probes the boundary-touching boundedness estimate with zero-flux solutions,
/// the constant function included so the measure-density consequence (theta at
/// least 1/B1^2, from taking u = 1) is exercised by construction.
pub fn estimate_local_boundedness_a3(
    space: &DiscreteSpace,
    field: &CoefficientField,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<LocalBoundednessEstimate> {
    let mesh = &space.mesh;
    let r_m = mesh.domain_measure.powf(1.0 / mesh.dim as f64);
    if !(radius < r_m) {
        return Err(Error::InvalidInput(format!("radius {radius} must stay below the domain scale {r_m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // boundary nodes first (the point of this condition), then a few interior
    let mut centers: Vec<usize> = (0..mesh.n_nodes())
        .filter(|&p| mesh.boundary_distance(&mesh.node(p)) < 1e-12)
        .collect();
    let step = (centers.len() / 8).max(1);
    centers = centers.into_iter().step_by(step).collect();
    for _ in 0..4 {
        centers.push(rng.gen_range(0..mesh.n_nodes()));
    }

    let steps_in_r2 = 32usize;
    let tau = radius * radius / steps_in_r2 as f64;
    let t_end = radius * radius + 2.0 * tau;
    let steps = steps_in_r2 + 2;

    let mut solutions: Vec<SpaceTimeField> = Vec::new();
    // the constant solution
    solutions.push(solve_forward(space, field, &vec![1.0; space.n_dofs()], None, 0.0, t_end, steps)?);
    for _ in 0..trials {
        let psi: Vec<f64> = (0..space.n_dofs()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        solutions.push(solve_forward(space, field, &psi, None, 0.0, t_end, steps)?);
    }

    let n = mesh.dim as f64;
    let mut b1 = 0.0f64;
    let mut theta = f64::INFINITY;
    for &cn in &centers {
        let x0 = mesh.node(cn);
        // discrete measure of the ball intersection
        let mut ball_measure = 0.0;
        for e in 0..mesh.n_elems() {
            let bc = mesh.elem_barycenter(e);
            if ((bc[0] - x0[0]).powi(2) + (bc[1] - x0[1]).powi(2)).sqrt() <= radius {
                ball_measure += mesh.elem_measure(e);
            }
        }
        if ball_measure == 0.0 {
            continue;
        }
        theta = theta.min(ball_measure / radius.powf(n));
        for u in &solutions {
            let ratio = boundedness_ratio(u, &x0, t_end, radius)?;
            b1 = b1.max(ratio);
        }
    }
    if theta.is_infinite() || b1 == 0.0 {
        return Err(Error::NoValidSamples("no usable cylinder centers".into()));
    }
    Ok(LocalBoundednessEstimate { b1_hat: b1, theta_hat: theta })
}

fn boundedness_ratio(u: &SpaceTimeField, x0: &[f64; 2], t0: f64, radius: f64) -> Result<f64> {
    let space = &u.space;
    let mesh = &space.mesh;
    let nc = space.components;
    let n = mesh.dim as f64;
    let tau = u.tau();
    let half = radius / 2.0;
    let mut sup = 0.0f64;
    let mut l2 = 0.0;
    for m in 0..=u.steps {
        let t = u.time(m);
        let in_full = t >= t0 - radius * radius - 1e-14 && t <= t0 + 1e-14;
        let in_half = t >= t0 - half * half - 1e-14 && t <= t0 + 1e-14;
        if !in_full {
            continue;
        }
        if in_half {
            for node in 0..mesh.n_nodes() {
                let x = mesh.node(node);
                if ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)).sqrt() <= half {
                    let mut mag2 = 0.0;
                    for c in 0..nc {
                        let v = u.slice(m)[space.dof(node, c)];
                        mag2 += v * v;
                    }
                    sup = sup.max(mag2.sqrt());
                }
            }
        }
        for e in 0..mesh.n_elems() {
            let bc = mesh.elem_barycenter(e);
            if ((bc[0] - x0[0]).powi(2) + (bc[1] - x0[1]).powi(2)).sqrt() <= radius {
                let verts = mesh.elem(e);
                for c in 0..nc {
                    let local: Vec<f64> = verts.iter().map(|&p| u.slice(m)[space.dof(p, c)]).collect();
                    l2 += tau * elem_l2sq(mesh, e, &local);
                }
            }
        }
    }
    if l2 == 0.0 {
        return Err(Error::NoValidSamples("empty cylinder".into()));
    }
    Ok(sup * radius.powf((n + 2.0) / 2.0) / l2.sqrt())
}

/// Closes the equivalence loop: a certified Gaussian envelope feeds back into
/// the boundedness probe, whose constant must stay finite and stable under one
/// refinement. Refuses to run without a fit.
pub fn verify_converse_gaussian(
    space: &DiscreteSpace,
    field: &CoefficientField,
    fit: Option<&crate::estimates::GaussianFit>,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let _fit = fit.ok_or_else(|| {
        Error::InvalidInput("converse check requires a completed Gaussian envelope fit".into())
    })?;
    let coarse = estimate_local_boundedness_a3(space, field, radius, trials, seed)?;
    let fine_space = DiscreteSpace::new(Arc::new(refine(&space.mesh)), space.components);
    let fine = estimate_local_boundedness_a3(&fine_space, field, radius, trials, seed)?;
    Ok((coarse.b1_hat, fine.b1_hat))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::make_checkerboard;
    use crate::mesh::{build_interval_mesh, build_polygon_mesh, l_shape, unit_square};

    #[test]
    fn embedding_gamma_on_square_and_lshape() {
        for verts in [unit_square(), l_shape()] {
            let mesh = Arc::new(build_polygon_mesh(&verts, 0.11).unwrap());
            let space = DiscreteSpace::new(mesh, 1);
            let est = verify_embedding_a1(&space, 30, 42).unwrap();
            assert!(est.gamma_hat.is_finite() && est.gamma_hat > 0.0);
            assert!(est.growth <= 0.10, "gamma grew {} under refinement", est.growth);
        }
    }

    #[test]
    fn embedding_matches_cosine_hand_value() {
        let mesh = Arc::new(build_polygon_mesh(&unit_square(), 0.04).unwrap());
        let space = DiscreteSpace::new(mesh.clone(), 1);
        let mass = assemble_mass(&space);
        let lap = assemble_stiffness(&space, &CoefficientField::identity(2, 1), 0.0);
        let mut u: Vec<f64> = (0..mesh.n_nodes()).map(|p| (std::f64::consts::PI * mesh.node(p)[0]).cos()).collect();
        zero_mean(&space, &mass, &mut u);
        let ratio = embedding_ratio(&space, &mass, &lap, &u);
        let expect = square_cosine_embedding_ratio();
        assert!((ratio - expect).abs() / expect < 0.01, "{ratio} vs {expect}");
    }

    #[test]
    fn interior_holder_smooth_field_is_lipschitz() {
        let mesh = Arc::new(build_interval_mesh(0.0, 1.0, 256).unwrap());
        let space = DiscreteSpace::new(mesh, 1);
        let field = CoefficientField::identity(1, 1);
        let est = estimate_interior_holder_a2(&space, &field, 0.25, 4, 7).unwrap();
        assert!(est.mu0_hat >= 0.85 && est.mu0_hat <= 1.0, "mu {}", est.mu0_hat);
        assert!(est.b0_hat.is_finite() && est.b0_hat > 0.0);
    }

    #[test]
    fn interior_holder_checkerboard_positive_exponent() {
        let mesh = Arc::new(build_polygon_mesh(&unit_square(), 1.0 / 40.0).unwrap());
        let space = DiscreteSpace::new(mesh, 1);
        let field = make_checkerboard(0.2, 1.0, 4, 2).unwrap();
        let est = estimate_interior_holder_a2(&space, &field, 0.45, 3, 11).unwrap();
        assert!(est.mu0_hat > 0.05 && est.mu0_hat <= 1.0, "mu {}", est.mu0_hat);
    }

    #[test]
    fn local_boundedness_constant_function_and_theta() {
        let mesh = Arc::new(build_polygon_mesh(&unit_square(), 1.0 / 24.0).unwrap());
        let space = DiscreteSpace::new(mesh, 1);
        let field = make_checkerboard(0.2, 1.0, 4, 2).unwrap();
        let est = estimate_local_boundedness_a3(&space, &field, 0.25, 3, 13).unwrap();
        assert!(est.b1_hat.is_finite() && est.b1_hat > 0.0);
        // measure density: the constant trial forces 1/B1^2 <= theta
        assert!(1.0 / (est.b1_hat * est.b1_hat) <= est.theta_hat + 1e-9);
        // on the square the worst ball fraction sits at a corner
        assert!(est.theta_hat >= std::f64::consts::PI / 4.0 - 0.15, "theta {}", est.theta_hat);
    }

    #[test]
    fn converse_requires_a_fit() {
        let mesh = Arc::new(build_interval_mesh(0.0, 1.0, 64).unwrap());
        let space = DiscreteSpace::new(mesh, 1);
        let field = CoefficientField::identity(1, 1);
        assert!(verify_converse_gaussian(&space, &field, None, 0.2, 2, 3).is_err());
    }
}
