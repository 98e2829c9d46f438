//! P1 Galerkin assembly: consistent mass, time-sliced stiffness from the
//! bilinear form, and the discrete coercivity probe.

use crate::coeffs::CoefficientField;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::Csr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Piecewise-linear conforming space with N components per node.
/// Dof layout is node-major: dof = node * components + component.
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    pub mesh: Arc<Mesh>,
    pub components: usize,
}

impl DiscreteSpace {
    pub fn new(mesh: Arc<Mesh>, components: usize) -> DiscreteSpace {
        assert!(components >= 1);
        DiscreteSpace { mesh, components }
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes() * self.components
    }

    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.components + component
    }

    /// Constant-one vector of a single component.
    pub fn component_indicator(&self, component: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_dofs()];
        for node in 0..self.mesh.n_nodes() {
            v[self.dof(node, component)] = 1.0;
        }
        v
    }
}

/// Exact consistent mass matrix of the P1 space, block diagonal over components.
pub fn assemble_mass(space: &DiscreteSpace) -> Csr {
    let mesh = &space.mesh;
    let nc = space.components;
    let nv = mesh.dim + 1;
    let mut triplets = Vec::with_capacity(mesh.n_elems() * nv * nv * nc);
    for e in 0..mesh.n_elems() {
        let verts = mesh.elem(e);
        let measure = mesh.elem_measure(e);
        // 1D: l/6 [[2,1],[1,2]]   2D: A/12 [[2,1,1],[1,2,1],[1,1,2]]
        let scale = if mesh.dim == 1 { measure / 6.0 } else { measure / 12.0 };
        for (lp, &p) in verts.iter().enumerate() {
            for (lq, &q) in verts.iter().enumerate() {
                let v = if lp == lq { 2.0 * scale } else { scale };
                for c in 0..nc {
                    triplets.push((space.dof(p, c), space.dof(q, c), v));
                }
            }
        }
    }
    Csr::from_triplets(space.n_dofs(), space.n_dofs(), &triplets)
}

/// Stiffness at one time slice: entries integrate the coefficient block at the
/// element barycenter against the constant P1 gradients. Constants are in the
/// kernel by construction, which is what makes the Neumann condition natural.
pub fn assemble_stiffness(space: &DiscreteSpace, field: &CoefficientField, t: f64) -> Csr {
    assert!(t.is_finite());
    assert_eq!(field.components, space.components);
    assert_eq!(field.dim, space.mesh.dim);
    let mesh = &space.mesh;
    let nc = space.components;
    let n = mesh.dim;
    let nv = n + 1;
    let mut block = vec![0.0; nc * nc];
    let mut triplets = Vec::with_capacity(mesh.n_elems() * nv * nv * nc * nc);
    for e in 0..mesh.n_elems() {
        let verts = mesh.elem(e);
        let measure = mesh.elem_measure(e);
        let bary = mesh.elem_barycenter(e);
        let grads = mesh.elem_grads(e);
        for alpha in 0..n {
            for beta in 0..n {
                field.block(&bary, t, alpha, beta, &mut block);
                for (lp, &p) in verts.iter().enumerate() {
                    for (lq, &q) in verts.iter().enumerate() {
                        let geom = grads[lq][beta] * grads[lp][alpha] * measure;
                        if geom == 0.0 {
                            continue;
                        }
                        for i in 0..nc {
                            for j in 0..nc {
                                let a = block[i * nc + j];
                                if a != 0.0 {
                                    triplets.push((space.dof(p, i), space.dof(q, j), a * geom));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Csr::from_triplets(space.n_dofs(), space.n_dofs(), &triplets)
}

/// Mass matrix plus the identity-coefficient stiffness used as the reference
/// quadratic form in coercivity checks and energy norms.
pub struct AssembledForms {
    pub space: DiscreteSpace,
    pub mass: Csr,
    pub lap: Csr,
    field: CoefficientField,
}

impl AssembledForms {
    pub fn new(space: DiscreteSpace, field: CoefficientField) -> AssembledForms {
        let mass = assemble_mass(&space);
        let lap = assemble_stiffness(&space, &CoefficientField::identity(space.mesh.dim, space.components), 0.0);
        AssembledForms { space, mass, lap, field }
    }

    pub fn stiffness(&self, t: f64) -> Csr {
        assemble_stiffness(&self.space, &self.field, t)
    }

    pub fn field(&self) -> &CoefficientField {
        &self.field
    }
}

/// Minimum of u'K(t)u / u'K_lap u over random mean-free vectors. Errors when the
/// ratio undercuts the declared ellipticity constant.
pub fn coercivity_check(space: &DiscreteSpace, field: &CoefficientField, t: f64, samples: usize) -> Result<f64> {
    let k = assemble_stiffness(space, field, t);
    let lap = assemble_stiffness(space, &CoefficientField::identity(space.mesh.dim, space.components), t);
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0e7c1);
    let n = space.n_dofs();
    let mut min_ratio = f64::INFINITY;
    let mut witness = Vec::new();
    let scale = lap.max_abs();
    let mut found = 0usize;
    while found < samples {
        let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let den = crate::sparse::dot(&u, &lap.matvec_alloc(&u));
        let unorm: f64 = u.iter().map(|x| x * x).sum();
        if den <= 1e-12 * scale * unorm {
            continue; // constant-like sample carries no gradient information
        }
        let num = crate::sparse::dot(&u, &k.matvec_alloc(&u));
        let ratio = num / den;
        if ratio < min_ratio {
            min_ratio = ratio;
            witness = u;
        }
        found += 1;
    }
    if min_ratio < field.lambda - 1e-10 {
        return Err(Error::CoercivityViolation { ratio: min_ratio, witness });
    }
    Ok(min_ratio)
}

/// Exact P1 integral of u^2 over one element given local nodal values.
pub fn elem_l2sq(mesh: &Mesh, e: usize, local: &[f64]) -> f64 {
    let measure = mesh.elem_measure(e);
    if mesh.dim == 1 {
        measure / 6.0 * (2.0 * (local[0] * local[0] + local[1] * local[1]) + 2.0 * local[0] * local[1])
    } else {
        let s2: f64 = local.iter().map(|v| v * v).sum();
        let cross = local[0] * local[1] + local[0] * local[2] + local[1] * local[2];
        measure / 12.0 * (2.0 * s2 + 2.0 * cross)
    }
}
