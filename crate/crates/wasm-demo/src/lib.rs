//! Browser bindings for three interactive views of the construction: the 1D
//! kernel evolution with its Gaussian envelope, the 2D kernel heat map on the
//! unit square, and the 1D elliptic Neumann function with its closed form.

use neumann_green::coeffs::parse_field_name;
use neumann_green::elliptic::{build_elliptic_neumann, interval_identity_green, EllipticNeumannTable};
use neumann_green::fem::DiscreteSpace;
use neumann_green::green::{build_mollified_green, GreenTable};
use neumann_green::mesh::{build_interval_mesh, build_polygon_mesh, unit_square, SpaceTimePoint};
use std::sync::Arc;
use wasm_bindgen::prelude::*;

fn err_js(e: neumann_green::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// One-dimensional kernel tabulation on the unit interval.
#[wasm_bindgen]
pub struct KernelSim {
    table: GreenTable,
    lambda: f64,
    pole: f64,
}

#[wasm_bindgen]
impl KernelSim {
    /// `family` uses the bundled grammar, e.g. "identity" or
    /// "checkerboard(0.2,1.0,4)".
    #[wasm_bindgen(constructor)]
    pub fn new(family: &str, pole: f64, eps: f64, cells: usize, horizon: f64, steps: usize) -> Result<KernelSim, JsValue> {
        let mesh = Arc::new(build_interval_mesh(0.0, 1.0, cells).map_err(err_js)?);
        let field = parse_field_name(family, 1).map_err(err_js)?;
        if field.components != 1 {
            return Err(JsValue::from_str("the interval view draws scalar kernels"));
        }
        let space = DiscreteSpace::new(mesh, 1);
        let table = build_mollified_green(
            &space,
            &field,
            SpaceTimePoint::new1(pole, 0.0),
            eps,
            horizon,
            steps,
        )
        .map_err(err_js)?;
        Ok(KernelSim { table, lambda: field.lambda, pole })
    }

    pub fn steps(&self) -> usize {
        self.table.steps()
    }

    pub fn time(&self, step: usize) -> f64 {
        self.table.columns[0].time(step)
    }

    pub fn xs(&self) -> Vec<f64> {
        let mesh = &self.table.space.mesh;
        (0..mesh.n_nodes()).map(|p| mesh.node(p)[0]).collect()
    }

    pub fn slice(&self, step: usize) -> Vec<f64> {
        self.table.columns[0].slice(step.min(self.table.steps())).to_vec()
    }

    /// Gaussian envelope C {t ^ R_M^2}^{-1/2} exp(-lambda^3/8 |x-y|^2/t) at the
    /// given step, scaled to touch the kernel's current maximum.
    pub fn envelope(&self, step: usize) -> Vec<f64> {
        let m = step.min(self.table.steps()).max(1);
        let dt = self.table.columns[0].time(m);
        let kappa = self.lambda.powi(3) / 8.0;
        let slice = self.table.columns[0].slice(m);
        let mesh = &self.table.space.mesh;
        let pref = 1.0 / dt.min(1.0).sqrt();
        // anchor the constant at the on-diagonal value
        let peak = slice.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let c = peak / pref;
        (0..mesh.n_nodes())
            .map(|p| {
                let x = mesh.node(p)[0];
                c * pref * (-kappa * (x - self.pole) * (x - self.pole) / dt).exp()
            })
            .collect()
    }

    pub fn conservation_defect(&self) -> f64 {
        neumann_green::green::verify_conservation(&self.table, 1.0).unwrap_or(f64::NAN)
    }
}

/// Two-dimensional kernel on the unit square, sampled onto a regular image
/// grid for canvas rendering.
#[wasm_bindgen]
pub struct SquareSim {
    table: GreenTable,
    resolution: usize,
}

#[wasm_bindgen]
impl SquareSim {
    #[wasm_bindgen(constructor)]
    pub fn new(
        family: &str,
        pole_x: f64,
        pole_y: f64,
        eps: f64,
        target_h: f64,
        horizon: f64,
        steps: usize,
        resolution: usize,
    ) -> Result<SquareSim, JsValue> {
        let mesh = Arc::new(build_polygon_mesh(&unit_square(), target_h).map_err(err_js)?);
        let field = parse_field_name(family, 2).map_err(err_js)?;
        if field.components != 1 {
            return Err(JsValue::from_str("the square view draws scalar kernels"));
        }
        let space = DiscreteSpace::new(mesh, 1);
        let table = build_mollified_green(
            &space,
            &field,
            SpaceTimePoint::new2(pole_x, pole_y, 0.0),
            eps,
            horizon,
            steps,
        )
        .map_err(err_js)?;
        Ok(SquareSim { table, resolution: resolution.clamp(16, 256) })
    }

    pub fn steps(&self) -> usize {
        self.table.steps()
    }

    pub fn time(&self, step: usize) -> f64 {
        self.table.columns[0].time(step)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Row-major image of the kernel at one step.
    pub fn frame(&self, step: usize) -> Vec<f64> {
        let m = step.min(self.table.steps());
        let r = self.resolution;
        let mesh = &self.table.space.mesh;
        let slice = self.table.columns[0].slice(m);
        let mut out = Vec::with_capacity(r * r);
        for iy in 0..r {
            for ix in 0..r {
                let x = [(ix as f64 + 0.5) / r as f64, (iy as f64 + 0.5) / r as f64];
                let v = match mesh.locate(&x) {
                    Some((e, bary)) => {
                        let verts = mesh.elem(e);
                        verts.iter().enumerate().map(|(loc, &p)| bary[loc] * slice[p]).sum()
                    }
                    None => 0.0,
                };
                out.push(v);
            }
        }
        out
    }
}

/// One-dimensional elliptic Neumann function with the closed-form reference of
/// the identity family.
#[wasm_bindgen]
pub struct EllipticSim {
    table: EllipticNeumannTable,
    identity: bool,
    pole: f64,
}

#[wasm_bindgen]
impl EllipticSim {
    #[wasm_bindgen(constructor)]
    pub fn new(family: &str, pole: f64, eps: f64, cells: usize) -> Result<EllipticSim, JsValue> {
        let mesh = Arc::new(build_interval_mesh(0.0, 1.0, cells).map_err(err_js)?);
        let field = parse_field_name(family, 1).map_err(err_js)?;
        if field.components != 1 {
            return Err(JsValue::from_str("the elliptic view draws scalar kernels"));
        }
        let identity = field.name == "identity";
        let space = DiscreteSpace::new(mesh, 1);
        let table = build_elliptic_neumann(&space, &field, &[pole, 0.0], eps, 1e-6).map_err(err_js)?;
        Ok(EllipticSim { table, identity, pole })
    }

    pub fn xs(&self) -> Vec<f64> {
        let mesh = &self.table.space.mesh;
        (0..mesh.n_nodes()).map(|p| mesh.node(p)[0]).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.table.columns[0].clone()
    }

    /// Closed form for the identity family; empty otherwise.
    pub fn reference(&self) -> Vec<f64> {
        if !self.identity {
            return Vec::new();
        }
        let mesh = &self.table.space.mesh;
        (0..mesh.n_nodes()).map(|p| interval_identity_green(mesh.node(p)[0], self.pole)).collect()
    }

    pub fn rho(&self) -> f64 {
        self.table.rho
    }

    pub fn t_max(&self) -> f64 {
        self.table.t_max
    }

    pub fn tail_estimate(&self) -> f64 {
        self.table.tail_estimate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_sim_runs_on_the_host() {
        let sim = KernelSim::new("checkerboard(0.5,1.0,4)", 0.4, 0.0625, 96, 0.2, 100).unwrap();
        assert_eq!(sim.xs().len(), 97);
        assert!(sim.conservation_defect() < 1e-9);
        let env = sim.envelope(50);
        let slice = sim.slice(50);
        // the envelope dominates away from its anchor up to interpolation slack
        let mut above = 0usize;
        for (e, v) in env.iter().zip(&slice) {
            if *e >= *v - 1e-9 {
                above += 1;
            }
        }
        assert!(above as f64 >= 0.9 * env.len() as f64);
    }

    #[test]
    fn elliptic_sim_matches_reference() {
        let sim = EllipticSim::new("identity", 0.3, 0.03125, 128).unwrap();
        let v = sim.values();
        let r = sim.reference();
        let worst = v.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        assert!(worst < 0.01, "worst deviation {worst}");
    }

    #[test]
    fn square_sim_produces_frames() {
        let sim = SquareSim::new("identity", 0.4, 0.5, 0.1, 0.12, 0.1, 40, 32).unwrap();
        let frame = sim.frame(20);
        assert_eq!(frame.len(), 32 * 32);
        assert!(frame.iter().all(|v| v.is_finite()));
    }
}
