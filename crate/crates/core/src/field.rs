//! Periodic scalar and vector fields on the unit torus, stored as truncated
//! Fourier coefficients.
//!
//! Coefficients use the analysis convention
//! `f_hat(k) = (1/N^2) sum_j f(x_j) exp(-2 pi i <k, x_j>)` on the lattice
//! `x_j = j / N`, so the synthesis series is `f(x) = sum_k f_hat(k) exp(2 pi i <k, x>)`.
//! Coefficients are held in FFT order: index `i` along an axis carries the wave
//! number `i` for `i < N/2` and `i - N` for `i > N/2`. The Nyquist row and
//! column (`i = N/2`) are always zero.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Highest Sobolev order accepted by [`ScalarField::sobolev_norm`].
pub const MAX_SOBOLEV_ORDER: u32 = 4;

/// Oversampling factor used by the sup-norm evaluation lattice.
pub const SUP_OVERSAMPLING: usize = 4;

/// Largest grid size accepted anywhere (keeps decoders from allocating absurd buffers).
pub const MAX_GRID_SIZE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

pub fn check_grid_size(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::config(format!(
            "grid size must be even and at least 4, got {n}"
        )));
    }
    if n > MAX_GRID_SIZE {
        return Err(Error::config(format!(
            "grid size {n} exceeds the supported maximum {MAX_GRID_SIZE}"
        )));
    }
    Ok(())
}

/// Signed wave number carried by FFT index `i`, or `None` on the Nyquist index.
#[inline]
pub fn wavenumber(i: usize, n: usize) -> Option<i64> {
    let half = n / 2;
    if i < half {
        Some(i as i64)
    } else if i == half {
        None
    } else {
        Some(i as i64 - n as i64)
    }
}

/// FFT index of wave number `k`, if it is resolved (|k| < N/2).
#[inline]
pub fn mode_index(k: i64, n: usize) -> Option<usize> {
    let half = (n / 2) as i64;
    if k.abs() >= half {
        None
    } else if k >= 0 {
        Some(k as usize)
    } else {
        Some((k + n as i64) as usize)
    }
}

/// Real samples on the uniform `N x N` lattice, row-major with the first
/// coordinate as the row: `values[j1 * N + j2] = g(j1 / N, j2 / N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSignal {
    n: usize,
    values: Vec<f64>,
}

impl GridSignal {
    pub fn new(n: usize, values: Vec<f64>) -> Result<GridSignal> {
        if n == 0 || values.len() != n * n {
            return Err(Error::config(format!(
                "grid signal of size {n} needs {} samples, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(GridSignal { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> GridSignal {
        let h = 1.0 / n as f64;
        let mut values = Vec::with_capacity(n * n);
        for j1 in 0..n {
            for j2 in 0..n {
                values.push(f(j1 as f64 * h, j2 as f64 * h));
            }
        }
        GridSignal { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, j1: usize, j2: usize) -> f64 {
        self.values[j1 * self.n + j2]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lattice quadrature of `integral g^2`.
    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }
}

/// Real periodic scalar field held as Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    n: usize,
    modes: Vec<Complex64>,
    mean_zero: bool,
}

impl ScalarField {
    pub fn zeros(n: usize, mean_zero: bool) -> Result<ScalarField> {
        check_grid_size(n)?;
        Ok(ScalarField {
            n,
            modes: vec![ZERO; n * n],
            mean_zero,
        })
    }

    /// Validating constructor for coefficient arrays from outside the crate
    /// (decoders, hand-built fixtures).
    pub fn from_modes(n: usize, modes: Vec<Complex64>, mean_zero: bool) -> Result<ScalarField> {
        check_grid_size(n)?;
        if modes.len() != n * n {
            return Err(Error::domain(format!(
                "expected {} coefficients for N = {n}, got {}",
                n * n,
                modes.len()
            )));
        }
        if modes.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::domain("non-finite Fourier coefficient"));
        }
        let scale = modes.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let half = n / 2;
        for i1 in 0..n {
            for i2 in 0..n {
                let c = modes[i1 * n + i2];
                if (i1 == half || i2 == half) && c != ZERO {
                    return Err(Error::domain(format!(
                        "Nyquist coefficient at index ({i1}, {i2}) must be zero"
                    )));
                }
                let j1 = (n - i1) % n;
                let j2 = (n - i2) % n;
                if (c - modes[j1 * n + j2].conj()).norm() > tol {
                    return Err(Error::domain(format!(
                        "coefficients are not Hermitian-symmetric at index ({i1}, {i2})"
                    )));
                }
            }
        }
        if mean_zero && modes[0] != ZERO {
            return Err(Error::domain(
                "mean-zero field with nonzero k = 0 coefficient",
            ));
        }
        Ok(ScalarField {
            n,
            modes,
            mean_zero,
        })
    }

    /// Builds a field by sampling `f` on the lattice and transforming.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        check_grid_size(n)?;
        forward_transform(&GridSignal::from_fn(n, f))
    }

    /// Sum of modes `amp * trig(2 pi <k, x>)`; the cheap way to write fixtures.
    pub fn from_trig_terms(n: usize, terms: &[TrigTerm]) -> Result<ScalarField> {
        check_grid_size(n)?;
        let mut modes = vec![ZERO; n * n];
        for t in terms {
            let (k1, k2) = t.k;
            if k1 == 0 && k2 == 0 {
                return Err(Error::domain("trigonometric term with k = (0, 0)"));
            }
            let (Some(p1), Some(p2), Some(m1), Some(m2)) = (
                mode_index(k1, n),
                mode_index(k2, n),
                mode_index(-k1, n),
                mode_index(-k2, n),
            ) else {
                return Err(Error::domain(format!(
                    "mode ({k1}, {k2}) is not resolved on an N = {n} grid"
                )));
            };
            // cos = (e + e*)/2, sin = (e - e*)/(2i)
            let c = match t.kind {
                TrigKind::Cos => Complex64::new(0.5 * t.amplitude, 0.0),
                TrigKind::Sin => Complex64::new(0.0, -0.5 * t.amplitude),
            };
            modes[p1 * n + p2] += c;
            modes[m1 * n + m2] += c.conj();
        }
        Ok(ScalarField {
            n,
            modes,
            mean_zero: true,
        })
    }

    pub(crate) fn from_raw(n: usize, modes: Vec<Complex64>, mean_zero: bool) -> ScalarField {
        debug_assert_eq!(modes.len(), n * n);
        ScalarField {
            n,
            modes,
            mean_zero,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    pub fn mean(&self) -> f64 {
        self.modes[0].re
    }

    /// Coefficient of wave number `(k1, k2)`; zero when unresolved.
    pub fn mode(&self, k1: i64, k2: i64) -> Complex64 {
        match (mode_index(k1, self.n), mode_index(k2, self.n)) {
            (Some(i1), Some(i2)) => self.modes[i1 * self.n + i2],
            _ => ZERO,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|c| *c == ZERO)
    }

    /// Applies a Fourier multiplier `m(k1, k2)` to every resolved mode.
    pub fn map_modes(&self, m: impl Fn(i64, i64) -> Complex64) -> ScalarField {
        let n = self.n;
        let mut out = vec![ZERO; n * n];
        for i1 in 0..n {
            let Some(k1) = wavenumber(i1, n) else {
                continue;
            };
            for i2 in 0..n {
                let Some(k2) = wavenumber(i2, n) else {
                    continue;
                };
                let idx = i1 * n + i2;
                if self.modes[idx] != ZERO {
                    out[idx] = self.modes[idx] * m(k1, k2);
                }
            }
        }
        ScalarField::from_raw(n, out, self.mean_zero)
    }

    pub fn partial_derivative(&self, axis: Axis) -> ScalarField {
        self.map_modes(|k1, k2| {
            let k = match axis {
                Axis::X1 => k1,
                Axis::X2 => k2,
            };
            Complex64::new(0.0, 2.0 * PI * k as f64)
        })
    }

    pub fn gradient(&self) -> VectorField {
        VectorField {
            c1: self.partial_derivative(Axis::X1),
            c2: self.partial_derivative(Axis::X2),
        }
    }

    pub fn laplacian(&self) -> ScalarField {
        self.map_modes(|k1, k2| Complex64::new(-4.0 * PI * PI * (k1 * k1 + k2 * k2) as f64, 0.0))
    }

    /// `x -> f(x + a)`.
    pub fn translate(&self, a: [f64; 2]) -> ScalarField {
        let a1 = a[0].rem_euclid(1.0);
        let a2 = a[1].rem_euclid(1.0);
        let n = self.n;
        let e1 = phase_table(a1, n);
        let e2 = phase_table(a2, n);
        let mut out = vec![ZERO; n * n];
        for i1 in 0..n {
            if wavenumber(i1, n).is_none() {
                continue;
            }
            for i2 in 0..n {
                if wavenumber(i2, n).is_none() {
                    continue;
                }
                let idx = i1 * n + i2;
                out[idx] = self.modes[idx] * e1[i1] * e2[i2];
            }
        }
        ScalarField::from_raw(n, out, self.mean_zero)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        ScalarField::from_raw(
            self.n,
            self.modes.iter().map(|m| m * c).collect(),
            self.mean_zero,
        )
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> Result<ScalarField> {
        self.same_grid(other)?;
        let modes = self
            .modes
            .iter()
            .zip(&other.modes)
            .map(|(a, b)| a + b * c)
            .collect();
        Ok(ScalarField::from_raw(
            self.n,
            modes,
            self.mean_zero && other.mean_zero,
        ))
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.axpy(-1.0, other)
    }

    pub fn project_mean_zero(&self) -> ScalarField {
        let mut modes = self.modes.clone();
        modes[0] = ZERO;
        ScalarField::from_raw(self.n, modes, true)
    }

    fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.n != other.n {
            return Err(Error::config(format!(
                "grid size mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// `integral f g` over the torus (Parseval).
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .modes
            .iter()
            .zip(&other.modes)
            .map(|(a, b)| (a * b.conj()).re)
            .sum())
    }

    pub fn l2_norm(&self) -> f64 {
        self.modes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `(sum_{|alpha| <= order} ||d^alpha f||^2)^{1/2}`, computed mode-wise.
    pub fn sobolev_norm(&self, order: u32) -> Result<f64> {
        if order > MAX_SOBOLEV_ORDER {
            return Err(Error::config(format!(
                "Sobolev order {order} outside supported range 0..={MAX_SOBOLEV_ORDER}"
            )));
        }
        let n = self.n;
        let mut total = 0.0;
        for i1 in 0..n {
            let Some(k1) = wavenumber(i1, n) else {
                continue;
            };
            for i2 in 0..n {
                let Some(k2) = wavenumber(i2, n) else {
                    continue;
                };
                let c = self.modes[i1 * n + i2];
                if c != ZERO {
                    total += c.norm_sqr() * sobolev_weight(k1, k2, order);
                }
            }
        }
        Ok(total.sqrt())
    }

    /// Maximum of `|f|` over a lattice oversampled by [`SUP_OVERSAMPLING`];
    /// an approximation (from below) of the essential supremum.
    pub fn sup_norm(&self) -> f64 {
        self.sample(self.n * SUP_OVERSAMPLING)
            .expect("oversampled lattice is at least N")
            .max_abs()
    }

    /// Evaluation of the series at an arbitrary point.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let n = self.n;
        let e1 = phase_table(x[0].rem_euclid(1.0), n);
        let e2 = phase_table(x[1].rem_euclid(1.0), n);
        let mut acc = 0.0;
        for i1 in 0..n {
            for i2 in 0..n {
                let c = self.modes[i1 * n + i2];
                if c != ZERO {
                    acc += (c * e1[i1] * e2[i2]).re;
                }
            }
        }
        acc
    }

    /// Values on the `m x m` lattice (`m >= N`) by zero-padded synthesis.
    pub fn sample(&self, m: usize) -> Result<GridSignal> {
        let n = self.n;
        if m < n {
            return Err(Error::config(format!(
                "sampling lattice {m} is coarser than the field grid {n}"
            )));
        }
        let mut buf = vec![ZERO; m * m];
        self.scatter_padded(&mut buf, m);
        Fft2::new(m).inverse(&mut buf);
        let values = buf.iter().map(|c| c.re).collect();
        Ok(GridSignal { n: m, values })
    }

    pub(crate) fn scatter_padded(&self, buf: &mut [Complex64], m: usize) {
        let n = self.n;
        for i1 in 0..n {
            let Some(k1) = wavenumber(i1, n) else {
                continue;
            };
            let p1 = k1.rem_euclid(m as i64) as usize;
            for i2 in 0..n {
                let Some(k2) = wavenumber(i2, n) else {
                    continue;
                };
                let p2 = k2.rem_euclid(m as i64) as usize;
                buf[p1 * m + p2] = self.modes[i1 * n + i2];
            }
        }
    }
}

/// Sum over multi-indices `|alpha| <= order` of `prod (2 pi k_i)^{2 alpha_i}`.
pub fn sobolev_weight(k1: i64, k2: i64, order: u32) -> f64 {
    let a = (2.0 * PI * k1 as f64).powi(2);
    let b = (2.0 * PI * k2 as f64).powi(2);
    let mut w = 0.0;
    for i in 0..=order {
        for j in 0..=(order - i) {
            w += a.powi(i as i32) * b.powi(j as i32);
        }
    }
    w
}

/// `exp(2 pi i k a)` indexed by FFT position.
fn phase_table(a: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| match wavenumber(i, n) {
            Some(k) => Complex64::from_polar(1.0, 2.0 * PI * k as f64 * a),
            None => ZERO,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigKind {
    Sin,
    Cos,
}

/// One term `amplitude * sin|cos(2 pi <k, x>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub kind: TrigKind,
    pub k: (i64, i64),
}

impl TrigTerm {
    pub fn sin(amplitude: f64, k: (i64, i64)) -> TrigTerm {
        TrigTerm {
            amplitude,
            kind: TrigKind::Sin,
            k,
        }
    }

    pub fn cos(amplitude: f64, k: (i64, i64)) -> TrigTerm {
        TrigTerm {
            amplitude,
            kind: TrigKind::Cos,
            k,
        }
    }
}

/// Analysis transform of lattice samples. The Nyquist row and column are
/// dropped and the result is symmetrized to exact Hermitian form.
pub fn forward_transform(g: &GridSignal) -> Result<ScalarField> {
    let n = g.n;
    check_grid_size(n)?;
    truncate_from_lattice(g, n)
}

/// Transforms samples on an `m x m` lattice and keeps the modes resolved on an
/// `n x n` grid (`m >= n`). Used for dealiased products.
pub fn truncate_from_lattice(g: &GridSignal, n: usize) -> Result<ScalarField> {
    check_grid_size(n)?;
    let m = g.n;
    if m < n {
        return Err(Error::config(format!(
            "lattice {m} is coarser than target grid {n}"
        )));
    }
    let mut buf: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft2::new(m).forward(&mut buf);
    let norm = 1.0 / (m * m) as f64;
    let mut modes = vec![ZERO; n * n];
    for i1 in 0..n {
        let Some(k1) = wavenumber(i1, n) else {
            continue;
        };
        let p1 = k1.rem_euclid(m as i64) as usize;
        let q1 = (-k1).rem_euclid(m as i64) as usize;
        for i2 in 0..n {
            let Some(k2) = wavenumber(i2, n) else {
                continue;
            };
            let p2 = k2.rem_euclid(m as i64) as usize;
            let q2 = (-k2).rem_euclid(m as i64) as usize;
            let c = 0.5 * (buf[p1 * m + p2] + buf[q1 * m + q2].conj()) * norm;
            modes[i1 * n + i2] = c;
        }
    }
    Ok(ScalarField::from_raw(n, modes, false))
}

/// Synthesis on the field's own lattice.
pub fn inverse_transform(f: &ScalarField) -> GridSignal {
    let n = f.n;
    let mut buf = f.modes.clone();
    Fft2::new(n).inverse(&mut buf);
    debug_assert!(
        buf.iter().all(|c| c.im.abs() < 1e-10 * (1.0 + c.re.abs())),
        "imaginary residue after synthesis"
    );
    GridSignal {
        n,
        values: buf.iter().map(|c| c.re).collect(),
    }
}

/// Pair of scalar fields on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub c1: ScalarField,
    pub c2: ScalarField,
}

impl VectorField {
    pub fn new(c1: ScalarField, c2: ScalarField) -> Result<VectorField> {
        c1.same_grid(&c2)?;
        Ok(VectorField { c1, c2 })
    }

    pub fn n(&self) -> usize {
        self.c1.n
    }

    pub fn divergence(&self) -> ScalarField {
        self.c1
            .partial_derivative(Axis::X1)
            .add(&self.c2.partial_derivative(Axis::X2))
            .expect("components share a grid")
    }

    /// `d1 c2 - d2 c1`.
    pub fn curl(&self) -> ScalarField {
        self.c2
            .partial_derivative(Axis::X1)
            .sub(&self.c1.partial_derivative(Axis::X2))
            .expect("components share a grid")
    }

    pub fn translate(&self, a: [f64; 2]) -> VectorField {
        VectorField {
            c1: self.c1.translate(a),
            c2: self.c2.translate(a),
        }
    }

    pub fn scale(&self, c: f64) -> VectorField {
        VectorField {
            c1: self.c1.scale(c),
            c2: self.c2.scale(c),
        }
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        Ok(VectorField {
            c1: self.c1.sub(&other.c1)?,
            c2: self.c2.sub(&other.c2)?,
        })
    }

    pub fn l2_norm(&self) -> f64 {
        (self.c1.l2_norm().powi(2) + self.c2.l2_norm().powi(2)).sqrt()
    }

    /// Sup of the Euclidean magnitude over the oversampled lattice.
    pub fn sup_norm(&self) -> f64 {
        let m = self.n() * SUP_OVERSAMPLING;
        let a = self.c1.sample(m).expect("m >= N");
        let b = self.c2.sample(m).expect("m >= N");
        a.values
            .iter()
            .zip(&b.values)
            .fold(0.0, |acc, (x, y)| acc.max((x * x + y * y).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// O(N^4) evaluation of the analysis sum, independent of the FFT path.
    fn brute_force_coefficient(g: &GridSignal, k1: i64, k2: i64) -> Complex64 {
        let n = g.n();
        let mut acc = ZERO;
        for j1 in 0..n {
            for j2 in 0..n {
                let x1 = j1 as f64 / n as f64;
                let x2 = j2 as f64 / n as f64;
                let arg = -2.0 * PI * (k1 as f64 * x1 + k2 as f64 * x2);
                acc += Complex64::from_polar(g.get(j1, j2), arg);
            }
        }
        acc / (n * n) as f64
    }

    fn random_field(n: usize, seed: u64, kmax: i64) -> ScalarField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for k1 in -kmax..=kmax {
            for k2 in 0..=kmax {
                if k2 == 0 && k1 <= 0 {
                    continue;
                }
                terms.push(TrigTerm::cos(rng.gen_range(-1.0..1.0), (k1, k2)));
                terms.push(TrigTerm::sin(rng.gen_range(-1.0..1.0), (k1, k2)));
            }
        }
        ScalarField::from_trig_terms(n, &terms).unwrap()
    }

    #[test]
    fn zero_signal_gives_zero_modes() {
        let g = GridSignal::from_fn(8, |_, _| 0.0);
        let f = forward_transform(&g).unwrap();
        assert!(f.is_zero());
        assert!(inverse_transform(&f).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cosine_modes_match_brute_force() {
        let g = GridSignal::from_fn(8, |x1, _| (2.0 * PI * x1).cos());
        let f = forward_transform(&g).unwrap();
        for k1 in -3..=3 {
            for k2 in -3..=3 {
                let expected = brute_force_coefficient(&g, k1, k2);
                assert!(
                    (f.mode(k1, k2) - expected).norm() < 1e-14,
                    "k = ({k1},{k2})"
                );
            }
        }
        // brute-force oracle values: 1/2 at +-(1,0), zero elsewhere
        assert!((f.mode(1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((f.mode(-1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        let rest: f64 = f.modes().iter().map(|c| c.norm()).sum::<f64>() - 1.0;
        assert!(rest.abs() < 1e-13);
    }

    #[test]
    fn sine_modes_match_brute_force() {
        let g = GridSignal::from_fn(8, |_, x2| (2.0 * PI * x2).sin());
        let f = forward_transform(&g).unwrap();
        assert!((brute_force_coefficient(&g, 0, 1) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((f.mode(0, 1) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((f.mode(0, -1) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn odd_or_small_grids_are_rejected() {
        assert!(matches!(
            forward_transform(&GridSignal::from_fn(7, |_, _| 0.0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            forward_transform(&GridSignal::from_fn(2, |_, _| 0.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn synthesis_of_half_modes_gives_cosine() {
        let f = ScalarField::from_trig_terms(8, &[TrigTerm::cos(1.0, (1, 0))]).unwrap();
        let g = inverse_transform(&f);
        for j1 in 0..8 {
            for j2 in 0..8 {
                // brute-force series summation
                let x1 = j1 as f64 / 8.0;
                let expected = (0.5 * Complex64::from_polar(1.0, 2.0 * PI * x1)
                    + 0.5 * Complex64::from_polar(1.0, -2.0 * PI * x1))
                .re;
                assert!((g.get(j1, j2) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivative_examples() {
        let zero = ScalarField::zeros(8, true).unwrap();
        assert!(zero.partial_derivative(Axis::X1).is_zero());
        let s = ScalarField::from_trig_terms(16, &[TrigTerm::sin(1.0, (1, 0))]).unwrap();
        let d = inverse_transform(&s.partial_derivative(Axis::X1));
        let expected = GridSignal::from_fn(16, |x1, _| 2.0 * PI * (2.0 * PI * x1).cos());
        for (a, b) in d.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(s.partial_derivative(Axis::X2).l2_norm() < 1e-15);
    }

    #[test]
    fn translate_examples() {
        let s = ScalarField::from_trig_terms(16, &[TrigTerm::sin(1.0, (1, 0))]).unwrap();
        assert_eq!(s.translate([0.0, 0.0]), s);
        let shifted = inverse_transform(&s.translate([0.5, 0.0]));
        let expected = GridSignal::from_fn(16, |x1, _| -(2.0 * PI * x1).sin());
        for (a, b) in shifted.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let f = random_field(16, 3, 5);
        let back = f.translate([0.3, -1.7]).translate([-0.3, 1.7]);
        assert!(back.sub(&f).unwrap().l2_norm() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn sobolev_examples() {
        let zero = ScalarField::zeros(8, true).unwrap();
        for k in 0..=4 {
            assert_eq!(zero.sobolev_norm(k).unwrap(), 0.0);
        }
        let s = ScalarField::from_trig_terms(16, &[TrigTerm::sin(1.0, (1, 0))]).unwrap();
        // quadrature oracle: int sin^2 = 1/2 on a fine midpoint rule
        let m = 2000;
        let q0: f64 = (0..m)
            .map(|i| ((2.0 * PI * (i as f64 + 0.5) / m as f64).sin()).powi(2))
            .sum::<f64>()
            / m as f64;
        let q1: f64 = (0..m)
            .map(|i| (2.0 * PI * (2.0 * PI * (i as f64 + 0.5) / m as f64).cos()).powi(2))
            .sum::<f64>()
            / m as f64;
        assert!((s.sobolev_norm(0).unwrap() - q0.sqrt()).abs() < 1e-12);
        assert!((s.sobolev_norm(0).unwrap() - 0.5_f64.sqrt()).abs() < 1e-14);
        assert!((s.sobolev_norm(1).unwrap() - (q0 + q1).sqrt()).abs() < 1e-10);
        assert!(matches!(s.sobolev_norm(5), Err(Error::Config(_))));
    }

    #[test]
    fn sup_norm_examples() {
        let zero = ScalarField::zeros(8, true).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        let s = ScalarField::from_trig_terms(8, &[TrigTerm::sin(1.0, (1, 0))]).unwrap();
        assert!((s.sup_norm() - 1.0).abs() < 1e-14);
        let f = random_field(8, 11, 3);
        assert!((f.scale(-2.5).sup_norm() - 2.5 * f.sup_norm()).abs() < 1e-12 * f.sup_norm());
    }

    #[test]
    fn from_modes_rejects_broken_symmetry_and_nyquist() {
        let mut modes = vec![ZERO; 64];
        modes[1] = Complex64::new(1.0, 0.0);
        assert!(ScalarField::from_modes(8, modes.clone(), true).is_err());
        modes[7] = Complex64::new(1.0, 0.0);
        assert!(ScalarField::from_modes(8, modes.clone(), true).is_ok());
        modes[4] = Complex64::new(1.0, 0.0);
        assert!(ScalarField::from_modes(8, modes, true).is_err());
        let mut m0 = vec![ZERO; 64];
        m0[0] = Complex64::new(1.0, 0.0);
        assert!(ScalarField::from_modes(8, m0.clone(), true).is_err());
        assert!(ScalarField::from_modes(8, m0, false).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn parseval_and_round_trip(seed in any::<u64>(), kmax in 1i64..7) {
            let f = random_field(16, seed, kmax);
            let energy: f64 = f.modes().iter().map(|c| c.norm_sqr()).sum();
            let g = inverse_transform(&f);
            prop_assert!((f.sobolev_norm(0).unwrap().powi(2) - energy).abs() <= 1e-12 * energy);
            prop_assert!((g.mean_square() - energy).abs() <= 1e-12 * energy);
            let back = forward_transform(&g).unwrap();
            prop_assert!(back.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
            let g2 = inverse_transform(&back);
            for (a, b) in g.values().iter().zip(g2.values()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + g.max_abs()));
            }
        }

        #[test]
        fn translate_is_isometry_and_commutes_with_derivative(
            seed in any::<u64>(), a1 in -3.0f64..3.0, a2 in -3.0f64..3.0
        ) {
            let f = random_field(16, seed, 6);
            let t = f.translate([a1, a2]);
            for k in 0..=4 {
                let a = f.sobolev_norm(k).unwrap();
                prop_assert!((t.sobolev_norm(k).unwrap() - a).abs() <= 1e-12 * a);
            }
            for axis in [Axis::X1, Axis::X2] {
                let lhs = t.partial_derivative(axis);
                let rhs = f.partial_derivative(axis).translate([a1, a2]);
                prop_assert!(lhs.sub(&rhs).unwrap().l2_norm() <= 1e-12 * (1.0 + lhs.l2_norm()));
                prop_assert!(lhs.is_mean_zero());
            }
            prop_assert!(t.is_mean_zero());
            prop_assert_eq!(t.mean(), 0.0);
        }
    }
}
