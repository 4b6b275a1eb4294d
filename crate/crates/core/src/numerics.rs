//! Quadrature, cylindrical grids, Laguerre polynomials and complex 3-vectors.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;

/// A Gauss–Legendre rule mapped onto `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
}

impl Quadrature1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[a, b]`, nodes found by Newton iteration.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Quadrature1D> {
    if n == 0 {
        return Err(Error::invalid("quadrature order must be >= 1"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!("invalid interval [{a}, {b}]")));
    }
    let mut ref_nodes = vec![0.0; n];
    let mut ref_weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Tricomi initial guess for the i-th largest root.
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ref_nodes[i] = -x;
        ref_nodes[n - 1 - i] = x;
        ref_weights[i] = w;
        ref_weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        ref_nodes[n / 2] = 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(Quadrature1D {
        nodes: ref_nodes.iter().map(|&x| mid + half * x).collect(),
        weights: ref_weights.iter().map(|&w| half * w).collect(),
        interval: (a, b),
    })
}

/// Generalized Laguerre polynomial `L_p^alpha(x)` by the three-term recurrence.
pub fn laguerre_poly(p: u32, alpha: u32, x: f64) -> f64 {
    let a = alpha as f64;
    let mut l0 = 1.0;
    if p == 0 {
        return l0;
    }
    let mut l1 = 1.0 + a - x;
    for j in 1..p {
        let jf = j as f64;
        let l2 = ((2.0 * jf + 1.0 + a - x) * l1 - (jf + a) * l0) / (jf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// Uniform sampling of a closed interval, with trapezoid weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(start: f64, end: f64, n: usize) -> Result<Self> {
        if n < 2 || !(end > start) {
            return Err(Error::invalid(format!(
                "axis needs n >= 2 and end > start (got n={n}, [{start}, {end}])"
            )));
        }
        Ok(Axis { start, end, n })
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.n - 1) as f64
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + self.step() * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.at(i)).collect()
    }

    fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.step()
        } else {
            self.step()
        }
    }
}

/// Cylindrical sampling grid `(r_perp, phi, z)`.
///
/// Values laid out on the grid are indexed `(iz * n_r + ir) * n_phi + iphi`.
/// Without an azimuthal axis, `n_phi = 1` and the azimuth contributes `2*pi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylGrid {
    pub r: Axis,
    pub z: Axis,
    pub n_phi: Option<usize>,
}

impl CylGrid {
    pub fn new(r: Axis, z: Axis, n_phi: Option<usize>) -> Result<Self> {
        if r.start < 0.0 {
            return Err(Error::invalid("radial axis must start at r >= 0"));
        }
        if n_phi == Some(0) {
            return Err(Error::invalid("azimuthal sample count must be positive"));
        }
        Ok(CylGrid { r, z, n_phi })
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi.unwrap_or(1)
    }

    pub fn len(&self) -> usize {
        self.r.n * self.z.n * self.n_phi()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phi_at(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n_phi() as f64
    }

    fn phi_weight(&self) -> f64 {
        2.0 * PI / self.n_phi() as f64
    }

    pub fn index(&self, iz: usize, ir: usize, ip: usize) -> usize {
        (iz * self.r.n + ir) * self.n_phi() + ip
    }

    /// Integration weight `r * dr * dz * dphi` of one sample.
    ///
    /// On an axis starting at `r = 0` the radial rule carries the leading
    /// Euler–Maclaurin end terms, `+h^2/12` on the axis sample and `-h^2/12`
    /// on the outer one. The integrand `r g(r)` has slope `g(0)` at the axis,
    /// so plain trapezoid weights would leave an `O(h^2)` bias for fields
    /// concentrated near the axis; constants stay exact.
    pub fn cell_weight(&self, iz: usize, ir: usize) -> f64 {
        self.radial_weight(ir) * self.z.trapezoid_weight(iz) * self.phi_weight()
    }

    fn radial_weight(&self, ir: usize) -> f64 {
        let mut w = self.r.at(ir) * self.r.trapezoid_weight(ir);
        if self.r.start == 0.0 {
            let h = self.r.step();
            if ir == 0 {
                w += h * h / 12.0;
            } else if ir + 1 == self.r.n {
                w -= h * h / 12.0;
            }
        }
        w
    }

    /// Volume of the sampled cylinder (exact for the trapezoid weights).
    pub fn volume(&self) -> f64 {
        PI * (self.r.end * self.r.end - self.r.start * self.r.start) * (self.z.end - self.z.start)
    }

    /// Samples `f(r, phi, z)` on every grid point in layout order.
    pub fn sample<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send + Clone,
        F: Fn(f64, f64, f64) -> T + Sync + Send,
    {
        let np = self.n_phi();
        let rows = par::map_indexed(self.z.n, |iz| {
            let z = self.z.at(iz);
            let mut row = Vec::with_capacity(self.r.n * np);
            for ir in 0..self.r.n {
                let r = self.r.at(ir);
                for ip in 0..np {
                    row.push(f(r, self.phi_at(ip), z));
                }
            }
            row
        });
        rows.into_iter().flatten().collect()
    }

    /// Integrates `f(r, phi, z)` directly without materializing samples.
    pub fn integrate_fn<F>(&self, f: F) -> f64
    where
        F: Fn(f64, f64, f64) -> f64 + Sync + Send,
    {
        let np = self.n_phi();
        par::sum_indexed(self.z.n, |iz| {
            let z = self.z.at(iz);
            let mut acc = 0.0;
            for ir in 0..self.r.n {
                let r = self.r.at(ir);
                let w = self.cell_weight(iz, ir);
                if w == 0.0 {
                    continue;
                }
                let mut s = 0.0;
                for ip in 0..np {
                    s += f(r, self.phi_at(ip), z);
                }
                acc += w * s;
            }
            acc
        })
    }
}

/// Trapezoid-composite integral of grid samples with the cylindrical measure.
pub fn integrate_grid(grid: &CylGrid, values: &[f64]) -> Result<f64> {
    check_len(grid, values.len())?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("grid sample {i} is not finite")));
    }
    let np = grid.n_phi();
    Ok(par::sum_indexed(grid.z.n, |iz| {
        let mut acc = 0.0;
        for ir in 0..grid.r.n {
            let base = grid.index(iz, ir, 0);
            let s: f64 = values[base..base + np].iter().sum();
            acc += grid.cell_weight(iz, ir) * s;
        }
        acc
    }))
}

/// Vector-valued counterpart of [`integrate_grid`].
pub fn integrate_grid_vec(grid: &CylGrid, values: &[[f64; 3]]) -> Result<[f64; 3]> {
    check_len(grid, values.len())?;
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("vector grid sample is not finite".into()));
    }
    let np = grid.n_phi();
    let rows = par::map_indexed(grid.z.n, |iz| {
        let mut acc = [0.0; 3];
        for ir in 0..grid.r.n {
            let w = grid.cell_weight(iz, ir);
            let base = grid.index(iz, ir, 0);
            for v in &values[base..base + np] {
                for c in 0..3 {
                    acc[c] += w * v[c];
                }
            }
        }
        acc
    });
    Ok(rows
        .into_iter()
        .fold([0.0; 3], |a, r| [a[0] + r[0], a[1] + r[1], a[2] + r[2]]))
}

fn check_len(grid: &CylGrid, n: usize) -> Result<()> {
    if n != grid.len() {
        return Err(Error::invalid(format!(
            "grid has {} samples but {} values were given",
            grid.len(),
            n
        )));
    }
    Ok(())
}

/// Least-squares line `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("linear fit needs two or more (x, y) pairs"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate(
            "linear fit over a single abscissa".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Real 3-vector helpers.
pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Complex 3-vector (field value at a point or a spectral amplitude).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex3(pub [Complex64; 3]);

impl Complex3 {
    pub const ZERO: Complex3 = Complex3([Complex64::new(0.0, 0.0); 3]);

    pub fn new(x: Complex64, y: Complex64, z: Complex64) -> Self {
        Complex3([x, y, z])
    }

    pub fn from_real(v: Vec3) -> Self {
        Complex3(v.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn re(&self) -> Vec3 {
        self.0.map(|c| c.re)
    }

    pub fn im(&self) -> Vec3 {
        self.0.map(|c| c.im)
    }

    pub fn conj(&self) -> Self {
        Complex3(self.0.map(|c| c.conj()))
    }

    /// Bilinear product `a . b` (no conjugation).
    pub fn dot(&self, other: &Complex3) -> Complex64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    /// Hermitian product `conj(a) . b`.
    pub fn hdot(&self, other: &Complex3) -> Complex64 {
        self.conj().dot(other)
    }

    pub fn dot_real(&self, v: Vec3) -> Complex64 {
        self.0[0] * v[0] + self.0[1] * v[1] + self.0[2] * v[2]
    }

    pub fn cross(&self, o: &Complex3) -> Complex3 {
        let a = &self.0;
        let b = &o.0;
        Complex3([
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Complex3 {
        Complex3(self.0.map(|c| c * s))
    }

    pub fn scale_re(&self, s: f64) -> Complex3 {
        Complex3(self.0.map(|c| c * s))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `acc += s * self`, the inner operation of the field summation kernels.
    #[inline]
    pub fn mul_add_to(&self, s: Complex64, acc: &mut Complex3) {
        for c in 0..3 {
            acc.0[c] += self.0[c] * s;
        }
    }
}

impl Add for Complex3 {
    type Output = Complex3;
    fn add(self, o: Complex3) -> Complex3 {
        Complex3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Complex3 {
    fn add_assign(&mut self, o: Complex3) {
        for c in 0..3 {
            self.0[c] += o.0[c];
        }
    }
}

impl Sub for Complex3 {
    type Output = Complex3;
    fn sub(self, o: Complex3) -> Complex3 {
        Complex3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Complex3 {
    type Output = Complex3;
    fn neg(self) -> Complex3 {
        Complex3(self.0.map(|c| -c))
    }
}

impl Mul<Complex64> for Complex3 {
    type Output = Complex3;
    fn mul(self, s: Complex64) -> Complex3 {
        self.scale(s)
    }
}

impl Mul<f64> for Complex3 {
    type Output = Complex3;
    fn mul(self, s: f64) -> Complex3 {
        self.scale_re(s)
    }
}
