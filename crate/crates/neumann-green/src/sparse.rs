//! Compressed sparse row matrices and the iterative/direct solvers used by the
//! time steppers and eigenvalue routines.

use crate::error::{Error, Result};

/// CSR matrix with deterministic assembly (triplets are merged in sorted order).
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Csr {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // stable sort keeps duplicate accumulation order deterministic
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr { nrows, ncols, row_ptr, col_idx, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.vals[lo..hi])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// Exact structural transpose; values are copied bit-for-bit.
    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut cursor = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, v) = self.row(r);
            for (c, val) in cols.iter().zip(v) {
                let dst = cursor[*c];
                col_idx[dst] = r;
                vals[dst] = *val;
                cursor[*c] += 1;
            }
        }
        Csr { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, vals }
    }

    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if *c == r {
                    d[r] = *v;
                }
            }
        }
        d
    }

    /// self + scale * other, merging sparsity patterns.
    pub fn add_scaled(&self, other: &Csr, scale: f64) -> Csr {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((r, *c, *v));
            }
            let (cols, vals) = other.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((r, *c, scale * v));
            }
        }
        Csr::from_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Half bandwidth: max |row - col| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for r in 0..self.nrows {
            let (cols, _) = self.row(r);
            for &c in cols {
                bw = bw.max(r.abs_diff(c));
            }
        }
        bw
    }

    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut defect = 0.0f64;
        for r in 0..self.nrows {
            let (ca, va) = self.row(r);
            let (cb, vb) = t.row(r);
            let mut ia = 0;
            let mut ib = 0;
            while ia < ca.len() || ib < cb.len() {
                let a = ca.get(ia).copied().unwrap_or(usize::MAX);
                let b = cb.get(ib).copied().unwrap_or(usize::MAX);
                if a == b {
                    defect = defect.max((va[ia] - vb[ib]).abs());
                    ia += 1;
                    ib += 1;
                } else if a < b {
                    defect = defect.max(va[ia].abs());
                    ia += 1;
                } else {
                    defect = defect.max(vb[ib].abs());
                    ib += 1;
                }
            }
        }
        defect
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn jacobi_apply(diag: &[f64], r: &[f64], z: &mut [f64]) {
    for i in 0..r.len() {
        z[i] = r[i] / diag[i];
    }
}

/// Preconditioned conjugate gradient. `x` carries the initial guess in and the
/// solution out; returns the iteration count.
pub fn cg(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = b.len();
    let diag = guarded_diag(a);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    jacobi_apply(&diag, &r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if norm2(&r) <= tol * bnorm {
            return Ok(it);
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::LinearSolveFailure { residual: norm2(&r) / bnorm, iterations: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        jacobi_apply(&diag, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm2(&r) / bnorm;
    if res <= tol {
        Ok(max_iter)
    } else {
        Err(Error::LinearSolveFailure { residual: res, iterations: max_iter })
    }
}

/// BiCGStab with Jacobi preconditioning, for the non-symmetric stepping matrices.
pub fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = b.len();
    let diag = guarded_diag(a);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 0..max_iter {
        if norm2(&r) <= tol * bnorm {
            return Ok(it);
        }
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::LinearSolveFailure { residual: norm2(&r) / bnorm, iterations: it });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        jacobi_apply(&diag, &p, &mut phat);
        a.matvec(&phat, &mut v);
        alpha = rho / dot(&r0, &v);
        let mut s = r.clone();
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        if norm2(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(it + 1);
        }
        jacobi_apply(&diag, &s, &mut shat);
        a.matvec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::LinearSolveFailure { residual: norm2(&s) / bnorm, iterations: it });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega.abs() < 1e-300 {
            return Err(Error::LinearSolveFailure { residual: norm2(&r) / bnorm, iterations: it });
        }
    }
    let res = norm2(&r) / bnorm;
    if res <= tol {
        Ok(max_iter)
    } else {
        Err(Error::LinearSolveFailure { residual: res, iterations: max_iter })
    }
}

fn guarded_diag(a: &Csr) -> Vec<f64> {
    let mut d = a.diag();
    let scale = a.max_abs().max(1e-300);
    for v in &mut d {
        if v.abs() < 1e-14 * scale {
            *v = scale;
        }
    }
    d
}

/// Banded LU factorization without pivoting. Adequate for the stepping matrices,
/// whose symmetric part is positive definite; every solve is residual-checked by
/// the caller before being trusted.
pub struct BandLu {
    n: usize,
    bw: usize,
    // dense band storage, row-major: entry (i, j) at [i][bw + j - i]
    data: Vec<f64>,
}

impl BandLu {
    pub fn factor(a: &Csr) -> Option<BandLu> {
        let n = a.nrows;
        let bw = a.bandwidth();
        let width = 2 * bw + 1;
        if n.checked_mul(width)? > 80_000_000 {
            return None;
        }
        let mut data = vec![0.0; n * width];
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (c, v) in cols.iter().zip(vals) {
                data[r * width + (bw + c - r)] = *v;
            }
        }
        // in-place LU, L unit lower
        for k in 0..n {
            let pivot = data[k * width + bw];
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            let i_max = (k + bw).min(n - 1);
            for i in (k + 1)..=i_max {
                let lik = data[i * width + bw + k - i] / pivot;
                data[i * width + bw + k - i] = lik;
                if lik != 0.0 {
                    let j_max = (k + bw).min(n - 1);
                    for j in (k + 1)..=j_max {
                        let ukj = data[k * width + bw + j - k];
                        if ukj != 0.0 {
                            data[i * width + bw + j - i] -= lik * ukj;
                        }
                    }
                }
            }
        }
        Some(BandLu { n, bw, data })
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let width = 2 * self.bw + 1;
        x.copy_from_slice(b);
        for i in 0..self.n {
            let j_min = i.saturating_sub(self.bw);
            let mut acc = x[i];
            for j in j_min..i {
                acc -= self.data[i * width + self.bw + j - i] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..self.n).rev() {
            let j_max = (i + self.bw).min(self.n - 1);
            let mut acc = x[i];
            for j in (i + 1)..=j_max {
                acc -= self.data[i * width + self.bw + j - i] * x[j];
            }
            x[i] = acc / self.data[i * width + self.bw];
        }
    }
}

/// Solver for one stepping matrix, reused across all time steps that share it.
/// Policy per the discretization design: Jacobi-preconditioned CG/BiCGStab first,
/// banded direct factorization as fallback below the dof threshold. Narrow-band
/// matrices skip straight to the factorization since it is both exact and faster
/// for repeated solves.
pub struct StepSolver {
    pub a: Csr,
    symmetric: bool,
    tol: f64,
    max_iter: usize,
    direct_threshold: usize,
    band: Option<BandLu>,
}

pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;
pub const DEFAULT_DIRECT_THRESHOLD: usize = 50_000;

impl StepSolver {
    pub fn new(a: Csr, direct_threshold: usize) -> StepSolver {
        let symmetric = a.symmetry_defect() <= 1e-13 * a.max_abs().max(1e-300);
        let n = a.nrows;
        let bw = a.bandwidth();
        let band = if n <= direct_threshold && bw > 0 && bw <= 64 && n * (2 * bw + 1) <= 8_000_000 {
            BandLu::factor(&a)
        } else {
            None
        };
        StepSolver {
            a,
            symmetric,
            tol: DEFAULT_SOLVE_TOL,
            max_iter: 0, // derived from n at solve time
            direct_threshold,
            band,
        }
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let bnorm = norm2(b);
        if let Some(band) = &self.band {
            band.solve(b, x);
            if self.residual(b, x) <= self.tol.max(1e-11) * bnorm.max(1e-300) {
                return Ok(());
            }
            // fall through to iterative refinement via Krylov
        }
        let max_iter = if self.max_iter > 0 { self.max_iter } else { 400 + 20 * (b.len() as f64).sqrt() as usize };
        let it = if self.symmetric {
            cg(&self.a, b, x, self.tol, max_iter)
        } else {
            bicgstab(&self.a, b, x, self.tol, max_iter)
        };
        match it {
            Ok(_) => Ok(()),
            Err(e) => {
                if self.band.is_none() && self.a.nrows <= self.direct_threshold {
                    if let Some(band) = BandLu::factor(&self.a) {
                        band.solve(b, x);
                        if self.residual(b, x) <= 1e-10 * bnorm.max(1e-300) {
                            return Ok(());
                        }
                    }
                }
                Err(e)
            }
        }
    }

    fn residual(&self, b: &[f64], x: &[f64]) -> f64 {
        let mut r = self.a.matvec_alloc(x);
        for i in 0..r.len() {
            r[i] = b[i] - r[i];
        }
        norm2(&r)
    }
}

/// Smallest nonzero eigenvalue of the pencil (K, M) by inverse iteration with the
/// kernel vectors deflated in the M-inner product. Returns the eigenvalue and the
/// M-normalized eigenvector.
pub fn smallest_nonzero_eigenvalue(
    k: &Csr,
    m: &Csr,
    kernel: &[Vec<f64>],
    max_iter: usize,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = k.nrows;
    // shift keeps the singular pencil invertible; the kernel mode sits at the
    // shift itself and is projected away every sweep. The shift must stay far
    // below the first nonzero eigenvalue or the inverse iteration loses its
    // spectral separation, so it is tied to the entry-scale ratio only weakly
    let scale = k.max_abs() / m.max_abs().max(1e-300);
    let sigma = 1e-6 * scale;
    let shifted = k.add_scaled(m, sigma);
    let solver = StepSolver::new(shifted, DEFAULT_DIRECT_THRESHOLD);

    let m_kernel: Vec<Vec<f64>> = kernel.iter().map(|v| m.matvec_alloc(v)).collect();
    let kernel_norms: Vec<f64> = kernel.iter().zip(&m_kernel).map(|(v, mv)| dot(v, mv)).collect();
    let deflate = |v: &mut [f64]| {
        for (ker, (mker, nrm)) in kernel.iter().zip(m_kernel.iter().zip(&kernel_norms)) {
            let c = dot(v, mker) / nrm;
            for i in 0..v.len() {
                v[i] -= c * ker[i];
            }
        }
    };

    let mut v = vec![0.0; n];
    for (i, vi) in v.iter_mut().enumerate() {
        // fixed deterministic seed vector
        *vi = ((i as f64) * 0.7548776662466927).fract() - 0.5;
    }
    deflate(&mut v);
    let mut mu_prev = f64::INFINITY;
    let mut mv = vec![0.0; n];
    for _ in 0..max_iter {
        m.matvec(&v, &mut mv);
        let vmv = dot(&v, &mv).sqrt();
        for i in 0..n {
            mv[i] /= vmv;
        }
        let mut z = v.clone();
        solver.solve(&mv.clone(), &mut z)?;
        deflate(&mut z);
        let kz = k.matvec_alloc(&z);
        let mz = m.matvec_alloc(&z);
        let mu = dot(&z, &kz) / dot(&z, &mz);
        v = z;
        if (mu - mu_prev).abs() <= tol * mu.abs().max(1e-300) {
            let nrm = dot(&v, &m.matvec_alloc(&v)).sqrt();
            for vi in &mut v {
                *vi /= nrm;
            }
            return Ok((mu, v));
        }
        mu_prev = mu;
    }
    Err(Error::EigenFailure { iterations: max_iter, residual: mu_prev })
}
