//! Consistent test systems and file I/O.
//!
//! Random streams come from SplitMix64 so any implementation can reproduce
//! them from the seed: `uniform = (next >> 11) * 2^-53`, and normals use one
//! Box-Muller branch per pair of uniforms, `sqrt(-2 ln(1 - u1)) cos(2π u2)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, sym_eig, Matrix};

/// SplitMix64.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn normals(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Random,
    RankDeficient,
    Tomography,
    File,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<usize>,
}

/// Description of a test problem. `kind = file` only records the shape of
/// a system read from disk; it cannot be generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dims: Dims,
    pub seed: u64,
    #[serde(default)]
    pub noise: f64,
}

impl ProblemSpec {
    pub fn random(m: usize, n: usize, seed: u64) -> Self {
        Self {
            kind: ProblemKind::Random,
            dims: Dims { m: Some(m), n: Some(n), ..Dims::default() },
            seed,
            noise: 0.0,
        }
    }

    pub fn rank_deficient(m: usize, n: usize, rank: usize, seed: u64) -> Self {
        Self {
            kind: ProblemKind::RankDeficient,
            dims: Dims { m: Some(m), n: Some(n), rank: Some(rank), ..Dims::default() },
            seed,
            noise: 0.0,
        }
    }

    pub fn tomography(pixels: usize, angles: usize, rays: usize) -> Self {
        Self {
            kind: ProblemKind::Tomography,
            dims: Dims { pixels: Some(pixels), angles: Some(angles), rays: Some(rays), ..Dims::default() },
            seed: 0,
            noise: 0.0,
        }
    }

    pub fn file(m: usize, n: usize) -> Self {
        Self {
            kind: ProblemKind::File,
            dims: Dims { m: Some(m), n: Some(n), ..Dims::default() },
            seed: 0,
            noise: 0.0,
        }
    }

    /// Parses `random:MxN`, `rank-deficient:MxN:R` or `tomography:N[:ANGLES:RAYS]`.
    pub fn parse_shorthand(s: &str, seed: u64) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse problem '{s}'"));
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let shape = |t: &str| -> Result<(usize, usize)> {
            let (m, n) = t.split_once('x').ok_or_else(bad)?;
            Ok((num(m)?, num(n)?))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["random", mn] => {
                let (m, n) = shape(mn)?;
                Ok(Self::random(m, n, seed))
            }
            ["rank-deficient" | "rank_deficient", mn, r] => {
                let (m, n) = shape(mn)?;
                Ok(Self::rank_deficient(m, n, num(r)?, seed))
            }
            ["tomography", px] => {
                let px = num(px)?;
                let (a, r) = default_tomography_sampling(px);
                Ok(Self::tomography(px, a, r))
            }
            ["tomography", px, a, r] => Ok(Self::tomography(num(px)?, num(a)?, num(r)?)),
            _ => Err(bad()),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn label(&self) -> String {
        let d = &self.dims;
        let u = |v: Option<usize>| v.map_or("?".to_string(), |v| v.to_string());
        match self.kind {
            ProblemKind::Random => format!("random:{}x{}", u(d.m), u(d.n)),
            ProblemKind::RankDeficient => format!("rank-deficient:{}x{}:{}", u(d.m), u(d.n), u(d.rank)),
            ProblemKind::Tomography => format!("tomography:{}:{}:{}", u(d.pixels), u(d.angles), u(d.rays)),
            ProblemKind::File => format!("file:{}x{}", u(d.m), u(d.n)),
        }
    }

    pub fn generate(&self) -> Result<Problem> {
        if self.noise != 0.0 {
            return Err(Error::Config("noise must be zero: only consistent systems are supported".into()));
        }
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("{} problem needs dims.{name}", self.label())))
        };
        let d = &self.dims;
        match self.kind {
            ProblemKind::Random => gen_random(need(d.m, "m")?, need(d.n, "n")?, self.seed),
            ProblemKind::RankDeficient => {
                gen_rank_deficient(need(d.m, "m")?, need(d.n, "n")?, need(d.rank, "rank")?, self.seed)
            }
            ProblemKind::Tomography => {
                let px = need(d.pixels, "pixels")?;
                let (a, r) = default_tomography_sampling(px);
                gen_tomography(px, d.angles.unwrap_or(a), d.rays.unwrap_or(r), self.seed)
            }
            ProblemKind::File => Err(Error::Config("file problems are read with --matrix and --rhs".into())),
        }
    }
}

/// `(angles, rays)` giving roughly twice as many rays as pixels.
pub fn default_tomography_sampling(pixels: usize) -> (usize, usize) {
    let s = (3 * pixels / 2).max(1);
    (s, s)
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub a: Matrix,
    pub b: Vec<f64>,
    /// A solution of `Ax = b`. For rank-deficient systems this is the one
    /// in `R(Aᵀ)`, the limit of the iterations from `x_0 = 0`.
    pub x_star: Vec<f64>,
    pub spec: ProblemSpec,
}

impl Problem {
    /// `‖A x* - b‖`
    pub fn consistency_residual(&self) -> f64 {
        let ax = self.a.matvec(&self.x_star);
        ax.iter().zip(&self.b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    }
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::Config(format!("problem dimensions must be positive, got {m}x{n}")));
    }
    Ok(())
}

/// Gaussian `A` (row-major draw order) then Gaussian `x*`; `b = A x*`.
pub fn gen_random(m: usize, n: usize, seed: u64) -> Result<Problem> {
    check_dims(m, n)?;
    let mut rng = SplitMix64::new(seed);
    let a = Matrix::from_row_major(m, n, rng.normals(m * n))?;
    let x_star = rng.normals(n);
    let b = a.matvec(&x_star);
    Ok(Problem { a, b, x_star, spec: ProblemSpec::random(m, n, seed) })
}

/// `A = L R` with Gaussian `L` (m×r) and `R` (r×n). The returned `x*` is the
/// orthogonal projection of a Gaussian vector onto `R(Aᵀ)`.
pub fn gen_rank_deficient(m: usize, n: usize, rank: usize, seed: u64) -> Result<Problem> {
    check_dims(m, n)?;
    if rank == 0 || rank >= m.min(n) {
        return Err(Error::Contract(format!(
            "rank must satisfy 1 <= r < min(m, n) = {}, got {rank}",
            m.min(n)
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let l = Matrix::from_row_major(m, rank, rng.normals(m * rank))?;
    let r = Matrix::from_row_major(rank, n, rng.normals(rank * n))?;
    let x_true = rng.normals(n);
    let a = l.matmul(&r)?;
    // x* = Rᵀ (R Rᵀ)⁻¹ R x_true
    let coeffs = sym_eig(&r.gram_rows())?.pseudo_apply(&r.matvec(&x_true), 1e-12)?;
    let x_star = r.matvec_t(&coeffs);
    let b = a.matvec(&x_star);
    Ok(Problem { a, b, x_star, spec: ProblemSpec::rank_deficient(m, n, rank, seed) })
}

/// Chord lengths of the line `{offset·(-sin θ, cos θ) + t·(cos θ, sin θ)}`
/// through an `N×N` grid of unit pixels centred at the origin. Pixel
/// `(ix, iy)` (x to the right, y up) has column `iy·N + ix`.
pub fn ray_row(pixels: usize, theta: f64, offset: f64) -> Vec<(usize, f64)> {
    let half = pixels as f64 / 2.0;
    let (dx, dy) = (theta.cos(), theta.sin());
    let (px, py) = (-offset * dy, offset * dx);
    const EPS: f64 = 1e-12;

    // parameter interval inside the square
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for (p, d) in [(px, dx), (py, dy)] {
        if d.abs() < EPS {
            if p <= -half || p >= half {
                return Vec::new();
            }
        } else {
            let t1 = (-half - p) / d;
            let t2 = (half - p) / d;
            t_lo = t_lo.max(t1.min(t2));
            t_hi = t_hi.min(t1.max(t2));
        }
    }
    if t_hi - t_lo <= EPS {
        return Vec::new();
    }

    let mut ts = vec![t_lo, t_hi];
    for (p, d) in [(px, dx), (py, dy)] {
        if d.abs() < EPS {
            continue;
        }
        for i in 0..=pixels {
            let t = (i as f64 - half - p) / d;
            if t > t_lo && t < t_hi {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);

    let mut row: Vec<(usize, f64)> = Vec::new();
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= EPS {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let ix = ((px + tm * dx + half).floor() as isize).clamp(0, pixels as isize - 1) as usize;
        let iy = ((py + tm * dy + half).floor() as isize).clamp(0, pixels as isize - 1) as usize;
        let col = iy * pixels + ix;
        match row.iter_mut().find(|(c, _)| *c == col) {
            Some(entry) => entry.1 += len,
            None => row.push((col, len)),
        }
    }
    row.sort_by_key(|(c, _)| *c);
    row
}

/// Disk of intensity 1 and radius `0.3 N` at the centre, weighted by the
/// covered pixel area (8×8 supersampling).
pub fn disk_phantom(pixels: usize) -> Vec<f64> {
    const SUB: usize = 8;
    let half = pixels as f64 / 2.0;
    let radius = 0.3 * pixels as f64;
    let mut x = vec![0.0; pixels * pixels];
    for iy in 0..pixels {
        for ix in 0..pixels {
            let mut inside = 0;
            for sy in 0..SUB {
                for sx in 0..SUB {
                    let cx = ix as f64 + (sx as f64 + 0.5) / SUB as f64 - half;
                    let cy = iy as f64 + (sy as f64 + 0.5) / SUB as f64 - half;
                    if cx * cx + cy * cy <= radius * radius {
                        inside += 1;
                    }
                }
            }
            x[iy * pixels + ix] = inside as f64 / (SUB * SUB) as f64;
        }
    }
    x
}

/// Parallel-beam projections of the disk phantom. Angles are `iπ/angles`;
/// the `rays` parallel lines per angle are spread evenly over a detector of
/// width `N√2`. Rays missing the grid are dropped. The geometry is
/// deterministic, so `seed` only travels along in the spec.
pub fn gen_tomography(pixels: usize, angles: usize, rays: usize, seed: u64) -> Result<Problem> {
    if pixels < 4 {
        return Err(Error::Config(format!("tomography needs at least 4 pixels per side, got {pixels}")));
    }
    check_dims(angles, rays)?;
    let n = pixels * pixels;
    let span = pixels as f64 * std::f64::consts::SQRT_2;
    let mut data = Vec::new();
    let mut m = 0;
    for ia in 0..angles {
        let theta = ia as f64 * std::f64::consts::PI / angles as f64;
        for ir in 0..rays {
            let offset = (ir as f64 + 0.5 - rays as f64 / 2.0) * span / rays as f64;
            let entries = ray_row(pixels, theta, offset);
            if entries.is_empty() {
                continue;
            }
            let mut row = vec![0.0; n];
            for (c, v) in entries {
                row[c] = v;
            }
            data.extend_from_slice(&row);
            m += 1;
        }
    }
    let a = Matrix::from_row_major(m, n, data)?;
    let x_star = disk_phantom(pixels);
    let b = a.matvec(&x_star);
    let mut spec = ProblemSpec::tomography(pixels, angles, rays);
    spec.seed = seed;
    Ok(Problem { a, b, x_star, spec })
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Reads `coordinate` or `array` files with `real` or `integer` entries and
/// `general` or `symmetric` symmetry.
pub fn read_matrix_market(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(parse_err(hline, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let coordinate = match h[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(hline, format!("unsupported format '{other}'"))),
    };
    if h[3] != "real" && h[3] != "integer" && h[3] != "double" {
        return Err(parse_err(hline, format!("unsupported field '{}'", h[3])));
    }
    let symmetric = match h[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(hline, format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sline, size) = body.next().ok_or_else(|| parse_err(hline + 1, "missing size line"))?;
    let nums: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(sline, format!("bad size entry '{t}'"))))
        .collect::<Result<_>>()?;
    let expected = if coordinate { 3 } else { 2 };
    if nums.len() != expected {
        return Err(parse_err(sline, format!("size line needs {expected} integers")));
    }
    let (rows, cols) = (nums[0], nums[1]);
    if symmetric && rows != cols {
        return Err(parse_err(sline, "symmetric matrix must be square"));
    }
    let value = |line: usize, t: &str| -> Result<f64> {
        let v: f64 = t.parse().map_err(|_| parse_err(line, format!("bad value '{t}'")))?;
        if !v.is_finite() {
            return Err(parse_err(line, "non-finite value"));
        }
        Ok(v)
    };
    let mut a = Matrix::zeros(rows, cols);
    let mut last_line = sline;
    if coordinate {
        let nnz = nums[2];
        for _ in 0..nnz {
            let (ln, l) = body.next().ok_or_else(|| parse_err(last_line + 1, "fewer entries than declared"))?;
            last_line = ln;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(parse_err(ln, "coordinate entry needs 'row col value'"));
            }
            let idx = |s: &str, lim: usize| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(i) if i >= 1 && i <= lim => Ok(i - 1),
                    _ => Err(parse_err(ln, format!("index '{s}' out of range 1..={lim}"))),
                }
            };
            let (i, j, v) = (idx(t[0], rows)?, idx(t[1], cols)?, value(ln, t[2])?);
            a.set(i, j, a.get(i, j) + v);
            if symmetric && i != j {
                a.set(j, i, a.get(j, i) + v);
            }
        }
    } else {
        // column-major; symmetric stores the lower triangle
        for j in 0..cols {
            let start = if symmetric { j } else { 0 };
            for i in start..rows {
                let (ln, l) = body.next().ok_or_else(|| parse_err(last_line + 1, "fewer entries than declared"))?;
                last_line = ln;
                let v = value(ln, l.trim())?;
                a.set(i, j, v);
                if symmetric {
                    a.set(j, i, v);
                }
            }
        }
    }
    if let Some((ln, _)) = body.next() {
        return Err(parse_err(ln, "more entries than declared"));
    }
    Ok(a)
}

/// Coordinate format, general symmetry, nonzeros only, shortest round-trip
/// decimal values.
pub fn write_matrix_market(a: &Matrix) -> String {
    let nnz = a.data().iter().filter(|v| **v != 0.0).count();
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.rows(), a.cols(), nnz);
    for i in 0..a.rows() {
        for (j, v) in a.row(i).iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
    }
    s
}

pub fn load_matrix_market(path: &Path) -> Result<Matrix> {
    read_matrix_market(&fs::read_to_string(path)?)
}

pub fn save_matrix_market(path: &Path, a: &Matrix) -> Result<()> {
    fs::write(path, write_matrix_market(a))?;
    Ok(())
}

/// One value per line; blank lines and lines starting with `%` or `#` are skipped.
pub fn read_vector(text: &str) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let x: f64 = t.parse().map_err(|_| parse_err(i + 1, format!("bad value '{t}'")))?;
        if !x.is_finite() {
            return Err(parse_err(i + 1, "non-finite value"));
        }
        v.push(x);
    }
    Ok(v)
}

pub fn write_vector(v: &[f64]) -> String {
    let mut s = String::new();
    for x in v {
        let _ = writeln!(s, "{x:e}");
    }
    s
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    read_vector(&fs::read_to_string(path)?)
}

pub fn save_vector(path: &Path, v: &[f64]) -> Result<()> {
    fs::write(path, write_vector(v))?;
    Ok(())
}

/// Reads `A` and `b`, checking that their row counts agree.
pub fn load_system(matrix: &Path, rhs: &Path) -> Result<(Matrix, Vec<f64>)> {
    let a = load_matrix_market(matrix)?;
    let b = load_vector(rhs)?;
    if b.len() != a.rows() {
        return Err(Error::Config(format!(
            "right-hand side has {} entries but the matrix is {}x{}",
            b.len(),
            a.rows(),
            a.cols()
        )));
    }
    Ok((a, b))
}

/// `‖A x - b‖ / (1 + ‖b‖)`
pub fn relative_consistency(a: &Matrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: f64 = ax.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    r / (1.0 + dot(b, b).sqrt())
}
