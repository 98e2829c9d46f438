//! Discrete mixed norms and the parabolic Hölder seminorm.

use crate::error::{Error, Result};
use crate::fem::DiscreteSpace;
use crate::mesh::{parabolic_distance, SpaceTimePoint};
use crate::parabolic::SpaceTimeField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Gauss rule on [0,1], degree 7: exact for |linear|^6 in 1D.
const GAUSS4_X: [f64; 4] = [
    0.5 - 0.430568155797026 / 1.0,
    0.5 - 0.169990521792428 / 1.0,
    0.5 + 0.169990521792428 / 1.0,
    0.5 + 0.430568155797026 / 1.0,
];
const GAUSS4_W: [f64; 4] = [
    0.173927422568727,
    0.326072577431273,
    0.326072577431273,
    0.173927422568727,
];

// Degree-4 six-point triangle rule in barycentric coordinates (weights sum to 1).
const TRI6: [([f64; 3], f64); 6] = [
    ([0.108103018168070, 0.445948490915965, 0.445948490915965], 0.223381589678011),
    ([0.445948490915965, 0.108103018168070, 0.445948490915965], 0.223381589678011),
    ([0.445948490915965, 0.445948490915965, 0.108103018168070], 0.223381589678011),
    ([0.816847572980459, 0.091576213509771, 0.091576213509771], 0.109951743655322),
    ([0.091576213509771, 0.816847572980459, 0.091576213509771], 0.109951743655322),
    ([0.091576213509771, 0.091576213509771, 0.816847572980459], 0.109951743655322),
];

/// Integral of |u|^q over one element; u may have several components. Exact for
/// q in {2, 4} (1D also 6) and a close quadrature otherwise.
fn elem_lq_integral(space: &DiscreteSpace, e: usize, slice: &[f64], q: f64) -> f64 {
    let mesh = &space.mesh;
    let verts = mesh.elem(e);
    let measure = mesh.elem_measure(e);
    let nc = space.components;
    let mut acc = 0.0;
    if mesh.dim == 1 {
        for (x, w) in GAUSS4_X.iter().zip(&GAUSS4_W) {
            let lam = [1.0 - x, *x];
            let mut mag2 = 0.0;
            for c in 0..nc {
                let v = lam[0] * slice[space.dof(verts[0], c)] + lam[1] * slice[space.dof(verts[1], c)];
                mag2 += v * v;
            }
            acc += w * mag2.powf(q / 2.0);
        }
    } else {
        for (lam, w) in TRI6.iter() {
            let mut mag2 = 0.0;
            for c in 0..nc {
                let mut v = 0.0;
                for (loc, &p) in verts.iter().enumerate() {
                    v += lam[loc] * slice[space.dof(p, c)];
                }
                mag2 += v * v;
            }
            acc += w * mag2.powf(q / 2.0);
        }
    }
    acc * measure
}

/// Spatial L^q norm of one slice; q = infinity takes the nodal supremum of the
/// componentwise Euclidean magnitude.
pub fn spatial_lq(space: &DiscreteSpace, slice: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        let nc = space.components;
        let mut sup = 0.0f64;
        for node in 0..space.mesh.n_nodes() {
            let mut mag2 = 0.0;
            for c in 0..nc {
                let v = slice[space.dof(node, c)];
                mag2 += v * v;
            }
            sup = sup.max(mag2.sqrt());
        }
        return sup;
    }
    let mut acc = 0.0;
    for e in 0..space.mesh.n_elems() {
        acc += elem_lq_integral(space, e, slice, q);
    }
    acc.powf(1.0 / q)
}

/// Mixed space-time norm (integral in space to power q, then in time to power
/// r); either exponent may be infinite.
pub fn lqr_norm(u: &SpaceTimeField, q: f64, r: f64, window: (f64, f64)) -> Result<f64> {
    if q < 1.0 || r < 1.0 {
        return Err(Error::InvalidInput("mixed norm exponents must be at least 1".into()));
    }
    let tau = u.tau();
    let eps = 1e-12 * tau.max(1.0);
    let included: Vec<usize> = (0..=u.steps)
        .filter(|&m| {
            let t = u.time(m);
            t >= window.0 - eps && t <= window.1 + eps
        })
        .collect();
    if included.is_empty() {
        return Err(Error::InvalidInput("window contains no time slices".into()));
    }
    if r.is_infinite() {
        let mut sup = 0.0f64;
        for &m in &included {
            sup = sup.max(spatial_lq(&u.space, u.slice(m), q));
        }
        return Ok(sup);
    }
    let mut acc = 0.0;
    for (k, &m) in included.iter().enumerate() {
        let w = if k == 0 || k + 1 == included.len() { 0.5 * tau } else { tau };
        let sq = spatial_lq(&u.space, u.slice(m), q);
        acc += w * sq.powf(r);
    }
    Ok(acc.powf(1.0 / r))
}

/// Axis-aligned space-time sampling region.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub x_lo: [f64; 2],
    pub x_hi: [f64; 2],
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Region {
    pub fn contains(&self, x: &[f64; 2], t: f64) -> bool {
        x[0] >= self.x_lo[0]
            && x[0] <= self.x_hi[0]
            && x[1] >= self.x_lo[1]
            && x[1] <= self.x_hi[1]
            && t >= self.t_lo
            && t <= self.t_hi
    }
}

/// Max Hölder quotient |u(X) - u(Y)| / |X - Y|_P^mu over deterministically
/// sampled grid point pairs inside the region. Same-time and same-place pairs
/// are included so purely spatial and purely temporal increments are probed.
pub fn parabolic_holder_seminorm(
    u: &SpaceTimeField,
    mu: f64,
    region: &Region,
    sample_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidInput(format!("exponent mu must lie in (0, 1], got {mu}")));
    }
    let mesh = &u.space.mesh;
    let nc = u.space.components;
    let mut points: Vec<(usize, usize)> = Vec::new();
    for m in 0..=u.steps {
        let t = u.time(m);
        for node in 0..mesh.n_nodes() {
            let x = mesh.node(node);
            if region.contains(&x, t) {
                points.push((node, m));
            }
        }
    }
    if points.len() < 2 {
        return Err(Error::NoValidSamples("region contains fewer than two grid points".into()));
    }
    let magnitude = |node: usize, m: usize| -> f64 {
        let slice = u.slice(m);
        let mut v = 0.0;
        for c in 0..nc {
            let d = slice[u.space.dof(node, c)];
            v += d * d;
        }
        v.sqrt()
    };
    let value_diff = |a: (usize, usize), b: (usize, usize)| -> f64 {
        let sa = u.slice(a.1);
        let sb = u.slice(b.1);
        let mut acc = 0.0;
        for c in 0..nc {
            let d = sa[u.space.dof(a.0, c)] - sb[u.space.dof(b.0, c)];
            acc += d * d;
        }
        acc.sqrt()
    };
    let _ = magnitude;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup = 0.0f64;
    let mut consider = |a: (usize, usize), b: (usize, usize)| {
        if a == b {
            return;
        }
        let pa = SpaceTimePoint { x: mesh.node(a.0), t: u.time(a.1) };
        let pb = SpaceTimePoint { x: mesh.node(b.0), t: u.time(b.1) };
        let d = parabolic_distance(&pa, &pb);
        if d == 0.0 {
            return;
        }
        let q = value_diff(a, b) / d.powf(mu);
        if q > sup {
            sup = q;
        }
    };
    for _ in 0..sample_pairs {
        let a = points[rng.gen_range(0..points.len())];
        let b = points[rng.gen_range(0..points.len())];
        consider(a, b);
        // same-time partner
        let c = points[rng.gen_range(0..points.len())];
        if let Some(&d) = points.iter().find(|p| p.1 == c.1 && p.0 != c.0) {
            consider(c, d);
        }
        // same-place partner
        let e = points[rng.gen_range(0..points.len())];
        if let Some(&f) = points.iter().find(|p| p.0 == e.0 && p.1 != e.1) {
            consider(e, f);
        }
    }
    Ok(sup)
}
