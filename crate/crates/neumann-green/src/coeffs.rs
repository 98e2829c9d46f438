//! The coefficient tensor A^{ab}(x,t) of N x N blocks, bundled example families,
//! and the sampled ellipticity validator.

use crate::error::{EllipticityWitness, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VALIDATE_SEED: u64 = 0x6e65756d616e6e;

#[derive(Debug, Clone)]
enum FieldKind {
    Identity,
    Checkerboard { low: f64, high: f64, cells: usize },
    TimeOscillatory { base: Box<CoefficientField>, amplitude: f64, frequency: f64 },
    NonsymmetricSystem { skew: f64 },
    Adjoint { base: Box<CoefficientField> },
}

/// Tensor of bounded measurable coefficient blocks with a certified ellipticity
/// constant. Evaluation is pure, so fields are shared freely across workers.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub dim: usize,
    pub components: usize,
    /// certified constant: rayleigh quotients stay at or above it, bilinear
    /// ratios at or below its inverse
    pub lambda: f64,
    pub time_dependent: bool,
    pub symmetric: bool,
    pub name: String,
    kind: FieldKind,
}

impl CoefficientField {
    pub fn identity(dim: usize, components: usize) -> CoefficientField {
        CoefficientField {
            dim,
            components,
            lambda: 1.0,
            time_dependent: false,
            symmetric: true,
            name: "identity".to_string(),
            kind: FieldKind::Identity,
        }
    }

    /// Writes the N x N block a^{ab}_{ij}(x,t) into `out` (row-major in (i,j)).
    pub fn block(&self, x: &[f64; 2], t: f64, alpha: usize, beta: usize, out: &mut [f64]) {
        let nc = self.components;
        debug_assert_eq!(out.len(), nc * nc);
        match &self.kind {
            FieldKind::Identity => {
                for v in out.iter_mut() {
                    *v = 0.0;
                }
                if alpha == beta {
                    for i in 0..nc {
                        out[i * nc + i] = 1.0;
                    }
                }
            }
            FieldKind::Checkerboard { low, high, cells } => {
                for v in out.iter_mut() {
                    *v = 0.0;
                }
                if alpha == beta {
                    let mut parity = 0i64;
                    for k in 0..self.dim {
                        parity += (x[k] * (*cells as f64)).floor() as i64;
                    }
                    out[0] = if parity.rem_euclid(2) == 0 { *low } else { *high };
                }
            }
            FieldKind::TimeOscillatory { base, amplitude, frequency } => {
                base.block(x, t, alpha, beta, out);
                let factor = 1.0 + amplitude * (frequency * t).sin();
                for v in out.iter_mut() {
                    *v *= factor;
                }
            }
            FieldKind::NonsymmetricSystem { skew } => {
                for v in out.iter_mut() {
                    *v = 0.0;
                }
                if alpha == beta {
                    for i in 0..nc {
                        out[i * nc + i] = 1.0;
                        if i + 1 < nc {
                            out[i * nc + (i + 1)] += skew;
                        }
                    }
                }
            }
            FieldKind::Adjoint { base } => {
                let mut tmp = vec![0.0; nc * nc];
                base.block(x, t, beta, alpha, &mut tmp);
                for i in 0..nc {
                    for j in 0..nc {
                        out[i * nc + j] = tmp[j * nc + i];
                    }
                }
            }
        }
    }

    /// Coefficients of the adjoint operator: (A^{ab})* = (A^{ba})^T. They satisfy
    /// the same ellipticity and boundedness constants.
    pub fn adjoint(&self) -> CoefficientField {
        CoefficientField {
            dim: self.dim,
            components: self.components,
            lambda: self.lambda,
            time_dependent: self.time_dependent,
            symmetric: self.symmetric,
            name: format!("adjoint({})", self.name),
            kind: FieldKind::Adjoint { base: Box::new(self.clone()) },
        }
    }

    pub fn with_declared_lambda(mut self, lambda: f64) -> CoefficientField {
        self.lambda = lambda;
        self
    }

    /// Full (N n) x (N n) matrix with rows (alpha, i) and columns (beta, j).
    fn big_matrix(&self, x: &[f64; 2], t: f64, scratch: &mut [f64], out: &mut [f64]) {
        let nc = self.components;
        let n = self.dim;
        let dim = nc * n;
        for v in out.iter_mut() {
            *v = 0.0;
        }
        for alpha in 0..n {
            for beta in 0..n {
                self.block(x, t, alpha, beta, scratch);
                for i in 0..nc {
                    for j in 0..nc {
                        out[(alpha * nc + i) * dim + (beta * nc + j)] = scratch[i * nc + j];
                    }
                }
            }
        }
    }
}

/// Scalar field alternating `low`/`high` on axis-aligned cells of width
/// 1/cells_per_side. The pattern repeats over the whole space.
pub fn make_checkerboard(low: f64, high: f64, cells_per_side: usize, dim: usize) -> Result<CoefficientField> {
    if !(low > 0.0) {
        return Err(Error::InvalidInput(format!("checkerboard low value must be positive, got {low}")));
    }
    if low > high {
        return Err(Error::InvalidInput(format!("checkerboard needs low <= high, got {low} > {high}")));
    }
    if high > 1.0 / low + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "checkerboard high = {high} exceeds 1/low = {}; rescale the pair first",
            1.0 / low
        )));
    }
    if cells_per_side == 0 {
        return Err(Error::InvalidInput("cells_per_side must be at least 1".into()));
    }
    Ok(CoefficientField {
        dim,
        components: 1,
        lambda: low,
        time_dependent: false,
        symmetric: true,
        name: format!("checkerboard({low},{high},{cells_per_side})"),
        kind: FieldKind::Checkerboard { low, high, cells: cells_per_side },
    })
}

/// Multiplies a base field by 1 + amplitude sin(frequency t). The certified
/// constant shrinks by the worst-case factor 1 - amplitude.
pub fn make_time_oscillatory(base: CoefficientField, amplitude: f64, frequency: f64) -> Result<CoefficientField> {
    if amplitude < 0.0 {
        return Err(Error::InvalidInput("amplitude must be nonnegative".into()));
    }
    if amplitude >= base.lambda.min(1.0) {
        return Err(Error::InvalidInput(format!(
            "amplitude {amplitude} eats the whole ellipticity margin of lambda = {}",
            base.lambda
        )));
    }
    let lambda = base.lambda * (1.0 - amplitude);
    Ok(CoefficientField {
        dim: base.dim,
        components: base.components,
        lambda,
        time_dependent: true,
        symmetric: base.symmetric,
        name: format!("oscillatory({},{amplitude},{frequency})", base.name),
        kind: FieldKind::TimeOscillatory { base: Box::new(base), amplitude, frequency },
    })
}

/// N-component system 'identity plus skew times a fixed one-sided component
/// coupling'. The coupling is capped at 0.2 of the scalar part; the certified
/// constant is found numerically from the sampled forms at build time.
pub fn make_nonsymmetric_system(components: usize, skew: f64, dim: usize) -> Result<CoefficientField> {
    if components < 2 {
        return Err(Error::InvalidInput("system coupling needs N >= 2".into()));
    }
    let mut field = CoefficientField {
        dim,
        components,
        lambda: 1.0,
        time_dependent: false,
        symmetric: skew == 0.0,
        name: format!("nonsym({components},{skew})"),
        kind: FieldKind::NonsymmetricSystem { skew },
    };
    // numeric certification over sampled frames
    let (ray_min, bil_max) = sampled_extrema(&field, 200, 400);
    let candidate = ray_min.min(1.0 / bil_max) * (1.0 - 1e-9);
    if skew.abs() > 0.2 || candidate <= 0.0 {
        let witness = worst_witness(&field);
        return Err(Error::EllipticityViolation(Box::new(witness)));
    }
    field.lambda = candidate;
    Ok(field)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn unit_frame(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn matvec(big: &[f64], dim: usize, x: &[f64], transpose: bool) -> Vec<f64> {
    let mut y = vec![0.0; dim];
    for r in 0..dim {
        for c in 0..dim {
            let a = if transpose { big[c * dim + r] } else { big[r * dim + c] };
            y[r] += a * x[c];
        }
    }
    y
}

/// Deterministic sampled scan of both coefficient inequalities. For each frame
/// the bilinear side also tries the maximizing eta (proportional to A' xi), so
/// the reported maximum is the sampled operator norm rather than a random pairing.
fn scan_forms(
    field: &CoefficientField,
    space_time_samples: usize,
    frame_samples: usize,
) -> (f64, f64, EllipticityWitness) {
    let mut rng = ChaCha8Rng::seed_from_u64(VALIDATE_SEED);
    let dim = field.components * field.dim;
    let mut scratch = vec![0.0; field.components * field.components];
    let mut big = vec![0.0; dim * dim];
    let mut ray_min = f64::INFINITY;
    let mut bil_max: f64 = 0.0;
    let mut worst = EllipticityWitness {
        x: [0.0; 2],
        t: 0.0,
        xi: vec![0.0; dim],
        eta: vec![0.0; dim],
        rayleigh: f64::INFINITY,
        bilinear: 0.0,
    };
    for _ in 0..space_time_samples {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let t = 10.0 * rng.gen::<f64>();
        field.big_matrix(&x, t, &mut scratch, &mut big);
        for _ in 0..frame_samples {
            let xi = unit_frame(dim, &mut rng);
            let axi = matvec(&big, dim, &xi, false);
            let q: f64 = xi.iter().zip(&axi).map(|(a, b)| a * b).sum();
            let atxi = matvec(&big, dim, &xi, true);
            let opt: f64 = atxi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let eta_rand = unit_frame(dim, &mut rng);
            let aeta = matvec(&big, dim, &eta_rand, false);
            let b_rand: f64 = xi.iter().zip(&aeta).map(|(a, b)| a * b).sum::<f64>().abs();
            let b = opt.max(b_rand).max(q.abs());
            if q < ray_min {
                ray_min = q;
                worst.x = x;
                worst.t = t;
                worst.xi = xi.clone();
                worst.rayleigh = q;
            }
            if b > bil_max {
                bil_max = b;
                worst.bilinear = b;
                if opt >= b_rand {
                    let nrm = opt.max(1e-300);
                    worst.eta = atxi.iter().map(|v| v / nrm).collect();
                } else {
                    worst.eta = eta_rand;
                }
            }
        }
    }
    worst.rayleigh = ray_min;
    worst.bilinear = bil_max;
    (ray_min, bil_max, worst)
}

fn sampled_extrema(field: &CoefficientField, space_time_samples: usize, frame_samples: usize) -> (f64, f64) {
    let (lo, hi, _) = scan_forms(field, space_time_samples, frame_samples);
    (lo, hi)
}

fn worst_witness(field: &CoefficientField) -> EllipticityWitness {
    scan_forms(field, 200, 400).2
}

/// Parses the bundled family grammar used in config files and table headers:
/// `identity`, `checkerboard(low,high,cells)`, `oscillatory(base,amp,freq)`,
/// `nonsym(N,skew)`, `adjoint(base)`.
pub fn parse_field_name(name: &str, dim: usize) -> Result<CoefficientField> {
    let name = name.trim();
    if name == "identity" {
        return Ok(CoefficientField::identity(dim, 1));
    }
    if let Some(body) = name.strip_prefix("identity(").and_then(|s| s.strip_suffix(')')) {
        let nc: usize = body
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad component count in {name}")))?;
        return Ok(CoefficientField::identity(dim, nc));
    }
    if let Some(body) = name.strip_prefix("checkerboard(").and_then(|s| s.strip_suffix(')')) {
        let parts: Vec<&str> = body.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!("checkerboard takes (low,high,cells): {name}")));
        }
        let low: f64 = parse_num(parts[0], name)?;
        let high: f64 = parse_num(parts[1], name)?;
        let cells: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad cell count in {name}")))?;
        return make_checkerboard(low, high, cells, dim);
    }
    if let Some(body) = name.strip_prefix("oscillatory(").and_then(|s| s.strip_suffix(')')) {
        // base may itself contain parentheses; split on the last two commas
        let (base_str, amp, freq) = split_last_two(body, name)?;
        let base = parse_field_name(base_str, dim)?;
        return make_time_oscillatory(base, amp, freq);
    }
    if let Some(body) = name.strip_prefix("nonsym(").and_then(|s| s.strip_suffix(')')) {
        let parts: Vec<&str> = body.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::InvalidInput(format!("nonsym takes (N,skew): {name}")));
        }
        let nc: usize = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad component count in {name}")))?;
        let skew: f64 = parse_num(parts[1], name)?;
        return make_nonsymmetric_system(nc, skew, dim);
    }
    if let Some(body) = name.strip_prefix("adjoint(").and_then(|s| s.strip_suffix(')')) {
        return Ok(parse_field_name(body, dim)?.adjoint());
    }
    Err(Error::InvalidInput(format!("unknown coefficient family: {name}")))
}

fn parse_num(s: &str, ctx: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad number '{s}' in {ctx}")))
}

fn split_last_two<'a>(body: &'a str, ctx: &str) -> Result<(&'a str, f64, f64)> {
    let last = body
        .rfind(',')
        .ok_or_else(|| Error::InvalidInput(format!("oscillatory takes (base,amp,freq): {ctx}")))?;
    let freq = parse_num(&body[last + 1..], ctx)?;
    let rest = &body[..last];
    let second = rest
        .rfind(',')
        .ok_or_else(|| Error::InvalidInput(format!("oscillatory takes (base,amp,freq): {ctx}")))?;
    let amp = parse_num(&rest[second + 1..], ctx)?;
    Ok((&rest[..second], amp, freq))
}

/// Deterministic sampled check of the two coefficient inequalities. Returns the
/// minimal rayleigh quotient and maximal bilinear ratio over unit frames; errors
/// with a witness when either crosses the declared constant.
pub fn validate_ellipticity(
    field: &CoefficientField,
    space_time_samples: usize,
    frame_samples: usize,
) -> Result<(f64, f64)> {
    if space_time_samples == 0 || frame_samples == 0 {
        return Err(Error::InvalidInput("sample counts must be at least 1".into()));
    }
    let (ray_min, bil_max, worst) = scan_forms(field, space_time_samples, frame_samples);
    if ray_min < field.lambda - 1e-12 || bil_max > 1.0 / field.lambda + 1e-12 {
        return Err(Error::EllipticityViolation(Box::new(worst)));
    }
    Ok((ray_min, bil_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_field_is_exactly_unit() {
        let f = CoefficientField::identity(2, 1);
        let (lo, hi) = validate_ellipticity(&f, 50, 50).unwrap();
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_examples() {
        let f = make_checkerboard(1.0, 1.0, 3, 1).unwrap();
        let (lo, hi) = validate_ellipticity(&f, 100, 20).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

        let f = make_checkerboard(0.2, 1.0, 4, 2).unwrap();
        assert_eq!(f.lambda, 0.2);
        let (lo, _) = validate_ellipticity(&f, 500, 20).unwrap();
        assert!((lo - 0.2).abs() < 1e-12);

        assert!(make_checkerboard(0.2, 6.0, 4, 2).is_err());
        assert!(make_checkerboard(0.0, 1.0, 4, 1).is_err());
    }

    #[test]
    fn declared_lambda_above_true_minimum_is_caught() {
        let f = make_checkerboard(0.2, 1.0, 4, 2).unwrap().with_declared_lambda(0.5);
        match validate_ellipticity(&f, 500, 20) {
            Err(Error::EllipticityViolation(w)) => {
                // the witness sits in a low cell
                assert!(w.rayleigh < 0.20000001, "rayleigh witness {}", w.rayleigh);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn oscillatory_examples() {
        let base = CoefficientField::identity(1, 1);
        let f = make_time_oscillatory(base.clone(), 0.0, 3.0).unwrap();
        let mut b0 = [0.0];
        let mut b1 = [0.0];
        f.block(&[0.3, 0.0], 0.7, 0, 0, &mut b0);
        base.block(&[0.3, 0.0], 0.7, 0, 0, &mut b1);
        assert_eq!(b0[0], b1[0]);

        let f = make_time_oscillatory(CoefficientField::identity(1, 1), 0.3, 5.0).unwrap();
        assert!((f.lambda - 0.7).abs() < 1e-15);
        validate_ellipticity(&f, 300, 50).unwrap();

        let weak = CoefficientField::identity(1, 1).with_declared_lambda(0.5);
        assert!(make_time_oscillatory(weak, 1.0, 5.0).is_err());
    }

    #[test]
    fn nonsymmetric_system_examples() {
        let f = make_nonsymmetric_system(2, 0.0, 1).unwrap();
        assert!(f.symmetric);
        let (lo, hi) = validate_ellipticity(&f, 100, 100).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

        let f = make_nonsymmetric_system(2, 0.1, 1).unwrap();
        assert!(!f.symmetric);
        let (lo, _) = validate_ellipticity(&f, 200, 200).unwrap();
        assert!(lo >= 0.8, "rayleigh floor {lo}");

        match make_nonsymmetric_system(2, 2.0, 1) {
            Err(Error::EllipticityViolation(_)) => {}
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn generators_pass_validation_with_declared_lambda() {
        let fields = vec![
            CoefficientField::identity(1, 1),
            CoefficientField::identity(2, 2),
            make_checkerboard(0.2, 1.0, 4, 1).unwrap(),
            make_checkerboard(0.2, 1.0, 4, 2).unwrap(),
            make_time_oscillatory(make_checkerboard(0.5, 1.0, 4, 1).unwrap(), 0.3, 7.0).unwrap(),
            make_nonsymmetric_system(2, 0.1, 1).unwrap(),
            make_nonsymmetric_system(3, 0.15, 2).unwrap(),
        ];
        for f in fields {
            validate_ellipticity(&f, 1000, 200).unwrap_or_else(|e| panic!("{}: {e}", f.name));
            let adj = f.adjoint();
            assert_eq!(adj.lambda, f.lambda);
            validate_ellipticity(&adj, 1000, 200).unwrap_or_else(|e| panic!("{}: {e}", adj.name));
        }
    }

    #[test]
    fn adjoint_transposes_blocks() {
        let f = make_nonsymmetric_system(2, 0.1, 2).unwrap();
        let adj = f.adjoint();
        let mut a = [0.0; 4];
        let mut b = [0.0; 4];
        f.block(&[0.2, 0.4], 1.0, 0, 1, &mut a);
        adj.block(&[0.2, 0.4], 1.0, 1, 0, &mut b);
        // adj^{ba}_{ji} == a^{ab}_{ij}
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(a[i * 2 + j], b[j * 2 + i]);
            }
        }
    }
}
