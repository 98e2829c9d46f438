//! Growth and decay bounds of the tabulated kernel: pointwise and Hölder
//! estimates near the pole, the Gaussian envelope with the ellipticity-cubed
//! rate, and the family of L^p / distribution scalings on dyadic cylinders.

use crate::error::{Error, Result};
use crate::estimates::ols_fit;
use crate::green::{GreenTable, Variant};
use crate::mesh::{parabolic_distance, SpaceTimePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Admissible grid samples around a pole: inside the half interior-distance
/// ball in the parabolic metric, outside the mollification scale.
fn admissible_points(table: &GreenTable) -> Vec<(usize, usize, f64)> {
    let mesh = &table.space.mesh;
    let pole = table.pole;
    let d_bar = mesh.boundary_distance(&pole.x);
    let floor = 4.0 * table.eps;
    let mut out = Vec::new();
    for m in 0..=table.steps() {
        let t = table.columns[0].time(m);
        for node in 0..mesh.n_nodes() {
            let p = SpaceTimePoint { x: mesh.node(node), t };
            let d = parabolic_distance(&p, &pole);
            if d >= floor && d < 0.5 * d_bar {
                out.push((node, m, d));
            }
        }
    }
    out
}

/// Matrix magnitude of the table at a node and step.
fn node_abs(table: &GreenTable, node: usize, m: usize) -> f64 {
    let nc = table.components();
    let mut acc = 0.0;
    for col in &table.columns {
        for j in 0..nc {
            let v = col.slice(m)[table.space.dof(node, j)];
            acc += v * v;
        }
    }
    acc.sqrt()
}

/// Largest |N| |X - Y|_P^n over admissible samples.
pub fn verify_pointwise_bound(table: &GreenTable, max_samples: usize, seed: u64) -> Result<f64> {
    let pts = admissible_points(table);
    if pts.is_empty() {
        return Err(Error::NoValidSamples("no grid point in the admissible annulus".into()));
    }
    let n = table.space.mesh.dim as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_hat = 0.0f64;
    let count = max_samples.min(pts.len());
    for i in 0..count {
        let (node, m, d) = if count == pts.len() { pts[i] } else { pts[rng.gen_range(0..pts.len())] };
        let v = node_abs(table, node, m);
        c_hat = c_hat.max(v * d.powf(n));
    }
    Ok(c_hat)
}

/// Largest normalized Hölder quotient |N(X) - N(X')| |X - X'|^{-mu} |X - Y|^{n + mu}
/// over sampled admissible triples with the separation constraint.
pub fn verify_holder_bound(table: &GreenTable, mu: f64, max_samples: usize, seed: u64) -> Result<f64> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidInput(format!("exponent must lie in (0, 1], got {mu}")));
    }
    let pts = admissible_points(table);
    if pts.len() < 2 {
        return Err(Error::NoValidSamples("not enough admissible grid points".into()));
    }
    let mesh = &table.space.mesh;
    let n = mesh.dim as f64;
    let nc = table.components();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_hat = 0.0f64;
    let mut used = 0usize;
    let mut attempts = 0usize;
    while used < max_samples && attempts < 50 * max_samples {
        attempts += 1;
        let (na, ma, da) = pts[rng.gen_range(0..pts.len())];
        let (nb, mb, _db) = pts[rng.gen_range(0..pts.len())];
        if (na, ma) == (nb, mb) {
            continue;
        }
        let pa = SpaceTimePoint { x: mesh.node(na), t: table.columns[0].time(ma) };
        let pb = SpaceTimePoint { x: mesh.node(nb), t: table.columns[0].time(mb) };
        let sep = parabolic_distance(&pa, &pb);
        // X' must sit strictly closer to X than X does to the pole
        if sep == 0.0 || 2.0 * sep >= da {
            continue;
        }
        let mut diff2 = 0.0;
        for col in &table.columns {
            for j in 0..nc {
                let d = col.slice(ma)[table.space.dof(na, j)] - col.slice(mb)[table.space.dof(nb, j)];
                diff2 += d * d;
            }
        }
        let q = diff2.sqrt() / sep.powf(mu) * da.powf(n + mu);
        c_hat = c_hat.max(q);
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoValidSamples("no triple satisfied the separation constraint".into()));
    }
    Ok(c_hat)
}

/// Gaussian envelope data: the decay rate fitted freely and the envelope
/// constant at the certified rate lambda^3 / 8.
#[derive(Debug, Clone, Copy)]
pub struct GaussianFit {
    pub c_hat: f64,
    pub kappa_hat: f64,
    pub kappa_ref: f64,
    pub r_m: f64,
    pub n_samples: usize,
}

struct GaussianSample {
    val: f64,
    g: f64,
}

fn gaussian_samples(table: &GreenTable, t_window: (f64, f64), r_m: f64) -> Vec<GaussianSample> {
    let mesh = &table.space.mesh;
    let n = mesh.dim as f64;
    let pole = table.pole;
    let t_floor = t_window.0.max(4.0 * table.eps * table.eps);
    let tau = table.tau();
    // the implicit stepper's spatial tail is exponential at rate 1/sqrt(a tau)
    // and overtakes the Gaussian past dist = 4 sqrt(a) dt / sqrt(tau); samples
    // beyond that crossover measure the stepper, not the kernel
    let tail_cap = 3.2 * table.lambda.sqrt() / tau.sqrt();
    let mut out = Vec::new();
    for m in 0..=table.steps() {
        let dt = table.columns[0].time(m) - pole.t;
        if dt < t_floor || dt > t_window.1 {
            continue;
        }
        let dist_cap = tail_cap * dt;
        for node in 0..mesh.n_nodes() {
            let x = mesh.node(node);
            let dist = ((x[0] - pole.x[0]).powi(2) + (x[1] - pole.x[1]).powi(2)).sqrt();
            if dist < 4.0 * table.eps || dist > dist_cap {
                continue;
            }
            let v = node_abs(table, node, m);
            // below this floor the tabulated values are solver residue
            if v <= 1e-9 {
                continue;
            }
            let val = v * dt.min(r_m * r_m).powf(n / 2.0);
            out.push(GaussianSample { val, g: dist * dist / dt });
        }
    }
    out
}

/// Fits the off-diagonal decay of the given tables. The free least-squares
/// slope over the early-time window reports the observed rate (late times are
/// dominated by the constant steady state and carry no off-diagonal signal);
/// the envelope constant at the certified rate is taken over the full window so
/// the bound can be re-asserted on any sample set.
pub fn fit_gaussian_bound(
    tables: &[&GreenTable],
    kappa_window: (f64, f64),
    envelope_window: (f64, f64),
) -> Result<GaussianFit> {
    if tables.is_empty() {
        return Err(Error::InvalidInput("need at least one table".into()));
    }
    let lambda = tables[0].lambda;
    let mesh = &tables[0].space.mesh;
    let r_m = mesh.domain_measure.powf(1.0 / mesh.dim as f64);
    let kappa_ref = lambda.powi(3) / 8.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut c_hat = 0.0f64;
    for table in tables {
        for s in gaussian_samples(table, kappa_window, r_m) {
            xs.push(-s.g);
            ys.push(s.val.ln());
        }
        for s in gaussian_samples(table, envelope_window, r_m) {
            c_hat = c_hat.max(s.val * (kappa_ref * s.g).exp());
        }
    }
    if xs.len() < 50 {
        return Err(Error::FitFailure(format!("only {} admissible samples for the envelope fit", xs.len())));
    }
    let (_, slope, _) = ols_fit(&xs, &ys).ok_or_else(|| Error::FitFailure("degenerate envelope fit".into()))?;
    Ok(GaussianFit { c_hat, kappa_hat: slope, kappa_ref, r_m, n_samples: xs.len() })
}

/// Worst ratio of sampled values to the certified envelope C e^{-kappa_ref g};
/// at or below one means the bound holds on this sample set.
pub fn gaussian_envelope_margin(tables: &[&GreenTable], t_window: (f64, f64), fit: &GaussianFit) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for table in tables {
        for s in gaussian_samples(table, t_window, fit.r_m) {
            worst = worst.max(s.val / (fit.c_hat * (-fit.kappa_ref * s.g).exp()));
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoValidSamples("no admissible sample for the envelope margin".into()));
    }
    Ok(worst)
}

/// Prefactor saturation past the domain scale: without the cap the normalized
/// kernel keeps growing once t - s crosses R_M^2, with it the envelope stays
/// honored.
#[derive(Debug, Clone, Copy)]
pub struct SaturationCheck {
    /// growth factor of |N| (t-s)^{n/2} e^{kappa g} from R_M^2 to the horizon
    pub uncapped_growth: f64,
    /// envelope margin over the saturated region
    pub capped_margin: f64,
}

pub fn check_prefactor_saturation(table: &GreenTable, fit: &GaussianFit) -> Result<SaturationCheck> {
    let mesh = &table.space.mesh;
    let n = mesh.dim as f64;
    let pole = table.pole;
    let r_m2 = fit.r_m * fit.r_m;
    let horizon = table.t_end() - pole.t;
    if horizon < 2.0 * r_m2 {
        return Err(Error::NoValidSamples(format!(
            "horizon {horizon} does not reach past the saturation scale {r_m2}"
        )));
    }
    let m1 = table.columns[0].nearest_step(pole.t + r_m2);
    let m2 = table.steps();
    let mut q1 = 0.0f64;
    let mut q2 = 0.0f64;
    let mut margin = 0.0f64;
    for node in 0..mesh.n_nodes() {
        let x = mesh.node(node);
        let dist = ((x[0] - pole.x[0]).powi(2) + (x[1] - pole.x[1]).powi(2)).sqrt();
        if dist < 4.0 * table.eps {
            continue;
        }
        for (m, q) in [(m1, &mut q1), (m2, &mut q2)] {
            let dt = table.columns[0].time(m) - pole.t;
            let g = dist * dist / dt;
            let v = node_abs(table, node, m);
            *q = q.max(v * dt.powf(n / 2.0) * (fit.kappa_ref * g).exp());
            let capped = v * dt.min(r_m2).powf(n / 2.0) * (fit.kappa_ref * g).exp();
            margin = margin.max(capped / fit.c_hat);
        }
    }
    if q1 == 0.0 {
        return Err(Error::NoValidSamples("no sample at the saturation scale".into()));
    }
    Ok(SaturationCheck { uncapped_growth: q2 / q1, capped_margin: margin })
}

/// One slope verdict of the dyadic scaling family.
#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub item: String,
    pub p: f64,
    pub slope: f64,
    pub expected: f64,
    /// bound respected on the sweep (direction depends on whether the bound is
    /// examined toward small radii or large ones)
    pub pass: bool,
    /// exponent also reproduced within the two-sided tolerance
    pub sharp: bool,
}

const SLOPE_TOL: f64 = 0.2;

/// Slopes of the kernel's local norms over a dyadic radius sweep. The
/// distribution-function items need a finer time grid near the pole and live in
/// `verify_distribution_scalings`.
pub fn verify_lp_scalings(raw: &GreenTable, tilde: &GreenTable, radii: &[f64]) -> Result<Vec<ScalingRow>> {
    if raw.variant != Variant::Raw || tilde.variant != Variant::Tilde {
        return Err(Error::InvalidInput("scaling sweep needs the raw table and its tilde variant".into()));
    }
    if radii.len() < 4 {
        return Err(Error::FitFailure("radius sweep needs at least four dyadic values".into()));
    }
    let mesh = &raw.space.mesh;
    let n = mesh.dim as f64;
    let nc = raw.components();
    let pole = raw.pole;
    let d_bar = mesh.boundary_distance(&pole.x);
    let floor = 4.0 * raw.eps;
    for &r in radii {
        if r <= floor || r >= d_bar {
            return Err(Error::InvalidInput(format!(
                "radius {r} outside the admissible window ({floor}, {d_bar})"
            )));
        }
    }
    let tau = raw.tau();
    let steps = raw.steps();
    let n_elems = mesh.n_elems();

    let p_v = [1.0, (n + 2.0) / n - 0.1];
    let p_vi = [1.0, (n + 2.0) / (n + 1.0) - 0.05];

    let nr = radii.len();
    // accumulators per radius
    let mut grad_outside = vec![0.0f64; nr];
    let mut sup_outside = vec![0.0f64; nr];
    let mut lqn_outside = vec![0.0f64; nr]; // tilde L_{2(n+2)/n} integrand accumulator
    let mut lp_v = vec![[0.0f64; 2]; nr];
    let mut lp_vi = vec![[0.0f64; 2]; nr];
    let q_exp = 2.0 * (n + 2.0) / n;

    // precompute element geometry
    let elem_bc: Vec<[f64; 2]> = (0..n_elems).map(|e| mesh.elem_barycenter(e)).collect();
    let elem_measure: Vec<f64> = (0..n_elems).map(|e| mesh.elem_measure(e)).collect();
    let elem_dist: Vec<f64> = elem_bc
        .iter()
        .map(|bc| ((bc[0] - pole.x[0]).powi(2) + (bc[1] - pole.x[1]).powi(2)).sqrt())
        .collect();

    // local integrals skip the mollification collar in time, where the bump
    // rather than the kernel is being integrated
    let collar = 4.0 * raw.eps * raw.eps;
    for m in 0..=steps {
        let t = raw.columns[0].time(m);
        let dt = t - pole.t;
        let sqrt_dt = dt.max(0.0).sqrt();
        let w = if m == 0 || m == steps { 0.5 * tau } else { tau };
        let in_collar = dt < collar;
        let mut sup_step = vec![0.0f64; nr];
        for e in 0..n_elems {
            let verts = mesh.elem(e);
            let grads = mesh.elem_grads(e);
            let measure = elem_measure[e];
            let par_dist = elem_dist[e].max(sqrt_dt);

            // matrix magnitude at the barycenter and element gradient magnitude
            let mut bc_abs2_raw = 0.0;
            let mut bc_abs2_tilde = 0.0;
            let mut grad_abs2 = 0.0;
            let mut l2_raw = 0.0;
            for k in 0..nc {
                let slice_raw = raw.columns[k].slice(m);
                let slice_tilde = tilde.columns[k].slice(m);
                for j in 0..nc {
                    let mut v_raw = 0.0;
                    let mut v_tilde = 0.0;
                    let mut g = [0.0f64; 2];
                    for (loc, &pnode) in verts.iter().enumerate() {
                        let a = slice_raw[raw.space.dof(pnode, j)];
                        let b = slice_tilde[raw.space.dof(pnode, j)];
                        v_raw += a / (mesh.dim as f64 + 1.0);
                        v_tilde += b / (mesh.dim as f64 + 1.0);
                        g[0] += a * grads[loc][0];
                        g[1] += a * grads[loc][1];
                    }
                    bc_abs2_raw += v_raw * v_raw;
                    bc_abs2_tilde += v_tilde * v_tilde;
                    grad_abs2 += g[0] * g[0] + g[1] * g[1];
                    // exact P1 square integral of this entry
                    let local: Vec<f64> = verts.iter().map(|&pn| slice_raw[raw.space.dof(pn, j)]).collect();
                    l2_raw += crate::fem::elem_l2sq(mesh, e, &local);
                }
            }
            let bc_abs_raw = bc_abs2_raw.sqrt();
            let bc_abs_tilde = bc_abs2_tilde.sqrt();
            let grad_abs = grad_abs2.sqrt();

            for (ri, &r) in radii.iter().enumerate() {
                let inside = par_dist <= r;
                if inside {
                    if in_collar {
                        continue;
                    }
                    // local L^p masses over the cylinder
                    for (pi, &p) in p_v.iter().enumerate() {
                        lp_v[ri][pi] += w * measure * bc_abs_raw.powf(p);
                    }
                    for (pi, &p) in p_vi.iter().enumerate() {
                        lp_vi[ri][pi] += w * measure * grad_abs.powf(p);
                    }
                } else {
                    grad_outside[ri] += w * measure * grad_abs2;
                    sup_step[ri] += l2_raw;
                    lqn_outside[ri] += w * measure * bc_abs_tilde.powf(q_exp);
                }
            }
        }
        for ri in 0..nr {
            sup_outside[ri] = sup_outside[ri].max(sup_step[ri]);
        }
    }

    let log_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let mut rows = Vec::new();
    let mut push_row =
        |item: &str, p: f64, values: Vec<f64>, xs: &[f64], expected: f64, toward_small: bool| -> Result<()> {
            if values.iter().any(|&v| v <= 0.0) {
                return Err(Error::FitFailure(format!("{item}: nonpositive sweep value")));
            }
            let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
            let (_, slope, _) =
                ols_fit(xs, &ys).ok_or_else(|| Error::FitFailure(format!("{item}: degenerate sweep")))?;
            let pass = if toward_small { slope >= expected - SLOPE_TOL } else { slope <= expected + SLOPE_TOL };
            let sharp = (slope - expected).abs() <= SLOPE_TOL;
            rows.push(ScalingRow { item: item.to_string(), p, slope, expected, pass: pass || sharp, sharp });
            Ok(())
        };

    // i) energy norm outside the cylinder, decays like R^{-n/2}
    let tri: Vec<f64> = (0..nr).map(|ri| (grad_outside[ri] + sup_outside[ri]).sqrt()).collect();
    push_row("energy_outside", 0.0, tri, &log_r, -n / 2.0, false)?;
    // ii) the zero-mean kernel's space-time L^{2(n+2)/n} norm outside
    let lqn: Vec<f64> = lqn_outside.iter().map(|v| v.powf(1.0 / q_exp)).collect();
    push_row("tilde_lq_outside", q_exp, lqn, &log_r, -n / 2.0, false)?;
    // v) local L^p mass of the kernel, grows like R^{-n + (n+2)/p}
    for (pi, &p) in p_v.iter().enumerate() {
        let vals: Vec<f64> = (0..nr).map(|ri| lp_v[ri][pi].powf(1.0 / p)).collect();
        push_row("kernel_lp_local", p, vals, &log_r, -n + (n + 2.0) / p, true)?;
    }
    // vi) local L^p mass of the gradient
    for (pi, &p) in p_vi.iter().enumerate() {
        let vals: Vec<f64> = (0..nr).map(|ri| lp_vi[ri][pi].powf(1.0 / p)).collect();
        push_row("gradient_lp_local", p, vals, &log_r, -n - 1.0 + (n + 2.0) / p, true)?;
    }
    Ok(rows)
}

/// Weak-type distribution slopes of the zero-mean kernel and of the kernel
/// gradient over dyadic thresholds. The sweep sits in the deep near-pole regime
/// where the asymptotic exponent is visible, so the table must resolve times
/// down to the mollification scale; thresholds adapt to the tabulated supremum
/// while staying above the legality floors.
pub fn verify_distribution_scalings(raw: &GreenTable, tilde: &GreenTable) -> Result<Vec<ScalingRow>> {
    if raw.variant != Variant::Raw || tilde.variant != Variant::Tilde {
        return Err(Error::InvalidInput("distribution sweep needs the raw table and its tilde variant".into()));
    }
    let mesh = &raw.space.mesh;
    let n = mesh.dim as f64;
    let nc = raw.components();
    let pole = raw.pole;
    let d_bar = mesh.boundary_distance(&pole.x);
    let tau = raw.tau();
    let steps = raw.steps();
    let n_elems = mesh.n_elems();

    // pass 1: supremum of the two magnitudes at the quadrature level
    let mut sup_tilde = 0.0f64;
    let mut sup_grad = 0.0f64;
    let mut magnitudes: Vec<(f64, f64, f64)> = Vec::with_capacity((steps + 1) * n_elems);
    for m in 0..=steps {
        let w = if m == 0 || m == steps { 0.5 * tau } else { tau };
        for e in 0..n_elems {
            let verts = mesh.elem(e);
            let grads = mesh.elem_grads(e);
            let measure = mesh.elem_measure(e);
            let mut bc_abs2_tilde = 0.0;
            let mut grad_abs2 = 0.0;
            for k in 0..nc {
                let slice_raw = raw.columns[k].slice(m);
                let slice_tilde = tilde.columns[k].slice(m);
                for j in 0..nc {
                    let mut v_tilde = 0.0;
                    let mut g = [0.0f64; 2];
                    for (loc, &pnode) in verts.iter().enumerate() {
                        v_tilde += slice_tilde[raw.space.dof(pnode, j)] / (mesh.dim as f64 + 1.0);
                        let a = slice_raw[raw.space.dof(pnode, j)];
                        g[0] += a * grads[loc][0];
                        g[1] += a * grads[loc][1];
                    }
                    bc_abs2_tilde += v_tilde * v_tilde;
                    grad_abs2 += g[0] * g[0] + g[1] * g[1];
                }
            }
            let t_abs = bc_abs2_tilde.sqrt();
            let g_abs = grad_abs2.sqrt();
            sup_tilde = sup_tilde.max(t_abs);
            sup_grad = sup_grad.max(g_abs);
            magnitudes.push((w * measure, t_abs, g_abs));
        }
    }
    let floor_tilde = d_bar.powf(-n);
    let floor_grad = d_bar.powf(-(n + 1.0));
    if sup_tilde / 2.0 <= 8.0 * floor_tilde || sup_grad / 2.0 <= 8.0 * floor_grad {
        return Err(Error::NoValidSamples(
            "kernel supremum too small for a dyadic threshold sweep above the legality floor".into(),
        ));
    }
    let thr_tilde: Vec<f64> = (0..4).map(|j| sup_tilde / 2.0 / (1 << (3 - j)) as f64).collect();
    let thr_grad: Vec<f64> = (0..4).map(|j| sup_grad / 2.0 / (1 << (3 - j)) as f64).collect();
    let mut dist_tilde = vec![0.0f64; 4];
    let mut dist_grad = vec![0.0f64; 4];
    for &(w, t_abs, g_abs) in &magnitudes {
        for (ti, &thr) in thr_tilde.iter().enumerate() {
            if t_abs > thr {
                dist_tilde[ti] += w;
            }
        }
        for (ti, &thr) in thr_grad.iter().enumerate() {
            if g_abs > thr {
                dist_grad[ti] += w;
            }
        }
    }
    let mut rows = Vec::new();
    for (item, thresholds, values, expected) in [
        ("tilde_distribution", &thr_tilde, &dist_tilde, -(n + 2.0) / n),
        ("gradient_distribution", &thr_grad, &dist_grad, -(n + 2.0) / (n + 1.0)),
    ] {
        if values.iter().any(|&v| v <= 0.0) {
            return Err(Error::FitFailure(format!("{item}: empty superlevel set in the sweep")));
        }
        let xs: Vec<f64> = thresholds.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let (_, slope, _) = ols_fit(&xs, &ys).ok_or_else(|| Error::FitFailure(format!("{item}: degenerate sweep")))?;
        let pass = slope <= expected + SLOPE_TOL;
        let sharp = (slope - expected).abs() <= SLOPE_TOL;
        rows.push(ScalingRow { item: item.to_string(), p: 0.0, slope, expected, pass: pass || sharp, sharp });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientField;
    use crate::fem::DiscreteSpace;
    use crate::green::{build_mollified_green, tilde_normalize};
    use crate::mesh::build_interval_mesh;
    use std::sync::Arc;

    fn small_table(cells: usize, eps: f64, horizon: f64, steps: usize) -> GreenTable {
        let mesh = Arc::new(build_interval_mesh(0.0, 1.0, cells).unwrap());
        let space = DiscreteSpace::new(mesh, 1);
        let field = CoefficientField::identity(1, 1);
        build_mollified_green(&space, &field, SpaceTimePoint::new1(0.5, 0.0), eps, horizon, steps).unwrap()
    }

    #[test]
    fn pointwise_bound_tracks_free_kernel() {
        let table = small_table(256, 1.0 / 32.0, 0.05, 500);
        let c_hat = verify_pointwise_bound(&table, 5000, 3).unwrap();
        assert!(c_hat.is_finite() && c_hat > 0.0);
        // doubling samples barely moves the constant
        let c2 = verify_pointwise_bound(&table, 10000, 3).unwrap();
        assert!((c2 - c_hat).abs() / c_hat <= 0.05, "{c_hat} vs {c2}");
    }

    #[test]
    fn holder_bound_is_finite() {
        let table = small_table(256, 1.0 / 32.0, 0.05, 500);
        let c = verify_holder_bound(&table, 1.0, 3000, 5).unwrap();
        assert!(c.is_finite() && c > 0.0);
        assert!(verify_holder_bound(&table, 1.4, 10, 5).is_err());
    }

    #[test]
    fn gaussian_fit_identity_interval() {
        let table = small_table(256, 1.0 / 64.0, 0.05, 500);
        let fit = fit_gaussian_bound(&[&table], (0.0, 0.05), (0.0, 0.05)).unwrap();
        assert!(fit.kappa_hat >= fit.kappa_ref, "kappa {} vs ref {}", fit.kappa_hat, fit.kappa_ref);
        // free-space rate is about 1/4
        assert!(fit.kappa_hat > 0.15 && fit.kappa_hat < 0.4, "kappa {}", fit.kappa_hat);
        let margin = gaussian_envelope_margin(&[&table], (0.0, 0.05), &fit).unwrap();
        assert!(margin <= 1.0 + 1e-12, "margin {margin}");
    }

    #[test]
    fn scaling_sweep_identity_interval() {
        // pole at 0.5: interior distance 0.5, mollifier scale small enough for
        // a four-point dyadic sweep
        let table = small_table(512, 1.0 / 96.0, 0.3, 1200);
        let tilde = tilde_normalize(&table).unwrap();
        let radii = [0.062, 0.124, 0.248, 0.496];
        let rows = verify_lp_scalings(&table, &tilde, &radii).unwrap();
        for row in &rows {
            assert!(row.pass, "{} (p = {}) slope {} expected {}", row.item, row.p, row.slope, row.expected);
        }
        // the local kernel mass at p = 1 is the sharp R^2 law
        let v1 = rows.iter().find(|r| r.item == "kernel_lp_local" && r.p == 1.0).unwrap();
        assert!(v1.sharp, "kernel L1 slope {} should be near {}", v1.slope, v1.expected);
    }

    #[test]
    fn distribution_sweep_identity_interval() {
        // deep near-pole window with a fine time grid
        let table = small_table(512, 1.0 / 128.0, 0.004, 2000);
        let tilde = tilde_normalize(&table).unwrap();
        let rows = verify_distribution_scalings(&table, &tilde).unwrap();
        for row in &rows {
            assert!(row.pass, "{} slope {} expected {}", row.item, row.slope, row.expected);
        }
    }
}
