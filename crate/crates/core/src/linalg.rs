//! Dense complex matrices, two-plane Jacobi rotations and a non-blind cyclic
//! Jacobi eigensolver.
//!
//! Indices are zero-based throughout. A rotation `R(l, m, θ, φ)` is the
//! identity except on the `(l, m)` plane:
//!
//! ```text
//! R[l][l] = R[m][m] = cos θ
//! R[l][m] =  e^{-iφ} sin θ
//! R[m][l] = -e^{ iφ} sin θ
//! ```
//!
//! Its `l`-th column is `cos θ·e_l − e^{iφ} sin θ·e_m`, which is the probe
//! direction used by the blind learner. [`rotate`] applies the congruence
//! `Rᴴ A R`, i.e. the change of basis induced by a precoder update `W ← W·R`,
//! so that `[rotate(A, p)]_{l,l} = r_lᴴ A r_l`.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// A complex scalar; entries of every matrix in this crate.
pub type ComplexScalar = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("index ({l}, {m}) invalid for dimension {dim}: need l < m < dim")]
    InvalidPivot { l: usize, m: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (residue {residue:e})")]
    NotHermitian { residue: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("cyclic Jacobi did not converge after {sweeps} sweeps (off-norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, LinalgError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: n_cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        let m = Self {
            rows: n_rows,
            cols: n_cols,
            data,
        };
        m.check_finite()?;
        Ok(m)
    }

    /// Real-valued convenience constructor.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self, LinalgError> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        for c in columns {
            if c.len() != rows {
                return Err(LinalgError::DimensionMismatch {
                    expected: rows,
                    got: c.len(),
                });
            }
        }
        Ok(Self::from_fn(rows, cols, |r, c| columns[c][r]))
    }

    /// Matrix with i.i.d. standard circularly-symmetric complex Gaussian
    /// entries (unit variance per entry).
    pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_fn(rows, cols, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * scale, im * scale)
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[Complex64]) {
        assert_eq!(values.len(), self.rows, "column length mismatch");
        for (r, v) in values.iter().enumerate() {
            self[(r, c)] = *v;
        }
    }

    /// New matrix made of the listed columns, in the listed order.
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        Self::from_fn(self.rows, indices.len(), |r, c| self[(r, indices[c])])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                got: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows * self.cols,
                got: rhs.rows * rhs.cols,
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation of `selfᴴ·self` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let gram = self.adjoint().matmul(self).expect("square by construction");
        let mut worst: f64 = 0.0;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        worst
    }

    fn check_finite(&self) -> Result<(), LinalgError> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                let z = self[(r, c)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(LinalgError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Square complex matrix with `A = Aᴴ` enforced at construction and after
/// every rotation (upper triangle is authoritative, lower is its mirror).
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
}

impl HermitianMatrix {
    /// Accepts `m` if it is Hermitian up to `1e-10·‖m‖_F`, then symmetrizes.
    pub fn new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        m.check_finite()?;
        let n = m.rows();
        let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
        let mut residue: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                residue = residue.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if residue > 1e-10 * scale {
            return Err(LinalgError::NotHermitian { residue });
        }
        let mut h = Self { inner: m };
        h.mirror_upper();
        Ok(h)
    }

    /// `Hᴴ H`, the Gram matrix of a channel.
    pub fn gram(h: &ComplexMatrix) -> Self {
        let mut g = Self {
            inner: h.adjoint().matmul(h).expect("adjoint product is conformable"),
        };
        g.mirror_upper();
        g
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            inner: ComplexMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    Complex64::new(values[r], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    /// `V diag(λ) Vᴴ`.
    pub fn from_spectrum(vectors: &ComplexMatrix, values: &[f64]) -> Result<Self, LinalgError> {
        if vectors.cols() != values.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: vectors.cols(),
                got: values.len(),
            });
        }
        let scaled = ComplexMatrix::from_fn(vectors.rows(), vectors.cols(), |r, c| {
            vectors[(r, c)] * values[c]
        });
        let mut g = Self {
            inner: scaled.matmul(&vectors.adjoint())?,
        };
        g.mirror_upper();
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.inner[(r, c)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.inner[(i, i)].re).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: self.inner.scale(s),
        }
    }

    /// `Wᴴ A W` for a square or tall `W` (the compression of `A` onto the
    /// column span of `W`).
    pub fn congruence(&self, w: &ComplexMatrix) -> Result<Self, LinalgError> {
        let aw = self.inner.matmul(w)?;
        let mut out = Self {
            inner: w.adjoint().matmul(&aw)?,
        };
        out.mirror_upper();
        Ok(out)
    }

    fn mirror_upper(&mut self) {
        let n = self.dim();
        for i in 0..n {
            let d = self.inner[(i, i)].re;
            self.inner[(i, i)] = Complex64::new(d, 0.0);
            for j in (i + 1)..n {
                self.inner[(j, i)] = self.inner[(i, j)].conj();
            }
        }
    }
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{:?}", self.inner)
    }
}

/// Parameters of one two-plane rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationParams {
    pub l: usize,
    pub m: usize,
    pub theta: f64,
    pub phi: f64,
}

impl RotationParams {
    pub fn new(l: usize, m: usize, theta: f64, phi: f64) -> Self {
        Self { l, m, theta, phi }
    }

    pub fn identity(l: usize, m: usize) -> Self {
        Self::new(l, m, 0.0, 0.0)
    }

    pub fn validate(&self, dim: usize) -> Result<(), LinalgError> {
        if self.l >= self.m || self.m >= dim {
            return Err(LinalgError::InvalidPivot {
                l: self.l,
                m: self.m,
                dim,
            });
        }
        Ok(())
    }

    /// The two non-trivial off-diagonal entries `(R[l][m], R[m][l])`.
    fn off_entries(&self) -> (Complex64, Complex64) {
        let s = self.theta.sin();
        let e = Complex64::from_polar(1.0, self.phi);
        (e.conj() * s, -e * s)
    }

    /// The `l`-th column of the rotation scattered into a length-`dim` vector.
    pub fn lead_column(&self, dim: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[self.l] = Complex64::new(self.theta.cos(), 0.0);
        v[self.m] = self.off_entries().1;
        v
    }
}

/// The full `n × n` rotation matrix.
pub fn build_rotation(p: &RotationParams, n: usize) -> Result<ComplexMatrix, LinalgError> {
    p.validate(n)?;
    let mut r = ComplexMatrix::identity(n);
    let c = Complex64::new(p.theta.cos(), 0.0);
    let (lm, ml) = p.off_entries();
    r[(p.l, p.l)] = c;
    r[(p.m, p.m)] = c;
    r[(p.l, p.m)] = lm;
    r[(p.m, p.l)] = ml;
    Ok(r)
}

/// Right-multiplies `w` in place by the rotation (touches columns `l`, `m`).
pub fn apply_rotation_right(w: &mut ComplexMatrix, p: &RotationParams) -> Result<(), LinalgError> {
    p.validate(w.cols())?;
    let c = p.theta.cos();
    let (lm, ml) = p.off_entries();
    for r in 0..w.rows() {
        let a = w[(r, p.l)];
        let b = w[(r, p.m)];
        w[(r, p.l)] = a * c + b * ml;
        w[(r, p.m)] = a * lm + b * c;
    }
    Ok(())
}

/// `Rᴴ A R` computed on the two affected rows and columns, then mirrored.
pub fn rotate(a: &HermitianMatrix, p: &RotationParams) -> Result<HermitianMatrix, LinalgError> {
    p.validate(a.dim())?;
    let n = a.dim();
    let mut b = a.inner.clone();
    apply_rotation_right(&mut b, p)?;
    let c = p.theta.cos();
    let (lm, ml) = p.off_entries();
    // rows of Rᴴ B: (Rᴴ B)[l,:] = c B[l,:] + conj(R[m][l]) B[m,:]
    for j in 0..n {
        let bl = b[(p.l, j)];
        let bm = b[(p.m, j)];
        b[(p.l, j)] = bl * c + bm * ml.conj();
        b[(p.m, j)] = bl * lm.conj() + bm * c;
    }
    let mut out = HermitianMatrix { inner: b };
    out.mirror_upper();
    Ok(out)
}

/// `xᴴ A x` for a matrix that should be Hermitian. An imaginary residue above
/// `1e-12·‖A‖_F·‖x‖²` is reported as [`LinalgError::NotHermitian`].
pub fn quadratic_form(a: &ComplexMatrix, x: &[Complex64]) -> Result<f64, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let ax = a.mul_vec(x)?;
    let value: Complex64 = x.iter().zip(&ax).map(|(xi, yi)| xi.conj() * yi).sum();
    let x_sq: f64 = x.iter().map(Complex64::norm_sqr).sum();
    let allowance = 1e-12 * a.frobenius_norm() * x_sq;
    if value.im.abs() > allowance.max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotHermitian {
            residue: value.im.abs(),
        });
    }
    Ok(value.re)
}

/// `xᴴ A x` exploiting the stored symmetry; never fails on dimension-matched
/// input.
pub fn hermitian_form(a: &HermitianMatrix, x: &[Complex64]) -> Result<f64, LinalgError> {
    let n = a.dim();
    if x.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += a.inner[(i, i)].re * x[i].norm_sqr();
        let mut cross = Complex64::new(0.0, 0.0);
        for j in (i + 1)..n {
            cross += a.inner[(i, j)] * x[j];
        }
        acc += 2.0 * (x[i].conj() * cross).re;
    }
    Ok(acc)
}

/// Parameters `(θ, φ)` annihilating `[rotate(A, p)]_{l,m}` with θ in
/// `(-π/4, π/4]`.
pub fn closed_form_rotation(
    a: &HermitianMatrix,
    l: usize,
    m: usize,
) -> Result<RotationParams, LinalgError> {
    let probe = RotationParams::identity(l, m);
    probe.validate(a.dim())?;
    let alm = a.get(l, m);
    let mag = alm.norm();
    if mag == 0.0 {
        return Ok(probe);
    }
    let phi = -alm.arg();
    let diff = a.get(l, l).re - a.get(m, m).re;
    // atan2 lands in [-π/2, 0]; fold into the half-open window (-π/4, π/4]
    let mut theta = 0.5 * (-2.0 * mag).atan2(diff);
    if theta <= -FRAC_PI_4 {
        theta += std::f64::consts::FRAC_PI_2;
    }
    Ok(RotationParams::new(l, m, theta, phi))
}

/// `sqrt(Σ_{l<m} |a_{l,m}|²)`.
pub fn off_diagonal_norm(a: &HermitianMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += a.inner[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Row-cyclic pivot order: `(0,1), (0,2), …, (0,n-1), (1,2), …`.
pub fn cyclic_pivots(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for l in 0..n {
        for m in (l + 1)..n {
            out.push((l, m));
        }
    }
    out
}

/// Pivot selection for the reference eigensolver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    #[default]
    Cyclic,
    /// Largest off-diagonal magnitude first.
    Classic,
}

#[derive(Debug, Clone)]
pub struct JacobiOptions {
    /// Stop once the off-diagonal norm falls below `tol·‖G‖_F`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub pivot_rule: PivotRule,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_sweeps: 30,
            pivot_rule: PivotRule::Cyclic,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues in the order of the columns of `vectors` (unsorted).
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
    /// Off-diagonal norm before the first sweep and after every sweep.
    pub off_norm_trace: Vec<f64>,
    pub sweeps: usize,
}

impl EigenDecomposition {
    /// Eigenvalues sorted ascending.
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `‖V Λ Vᴴ − G‖_F`.
    pub fn reconstruction_error(&self, g: &HermitianMatrix) -> f64 {
        let rebuilt = HermitianMatrix::from_spectrum(&self.vectors, &self.values)
            .expect("shapes agree by construction");
        rebuilt
            .as_matrix()
            .sub(g.as_matrix())
            .expect("same dimension")
            .frobenius_norm()
    }
}

/// Non-blind cyclic Jacobi eigensolver with closed-form rotation angles;
/// returns `V` with `G = V Λ Vᴴ`.
pub fn reference_cyclic_jacobi(
    g: &HermitianMatrix,
    opts: &JacobiOptions,
) -> Result<EigenDecomposition, LinalgError> {
    let n = g.dim();
    let threshold = opts.tol * g.frobenius_norm();
    let mut a = g.clone();
    let mut v = ComplexMatrix::identity(n);
    let pivots = cyclic_pivots(n);
    let mut trace = vec![off_diagonal_norm(&a)];
    let mut sweeps = 0;
    while *trace.last().expect("non-empty") > threshold {
        if sweeps == opts.max_sweeps {
            return Err(LinalgError::NoConvergence {
                sweeps,
                off_norm: *trace.last().expect("non-empty"),
            });
        }
        for step in 0..pivots.len() {
            let (l, m) = match opts.pivot_rule {
                PivotRule::Cyclic => pivots[step],
                PivotRule::Classic => largest_off_diagonal(&a),
            };
            let p = closed_form_rotation(&a, l, m)?;
            a = rotate(&a, &p)?;
            apply_rotation_right(&mut v, &p)?;
        }
        sweeps += 1;
        trace.push(off_diagonal_norm(&a));
    }
    Ok(EigenDecomposition {
        values: a.diagonal(),
        vectors: v,
        off_norm_trace: trace,
        sweeps,
    })
}

fn largest_off_diagonal(a: &HermitianMatrix) -> (usize, usize) {
    let n = a.dim();
    let mut best = (0, 1);
    let mut best_mag = -1.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mag = a.get(i, j).norm_sqr();
            if mag > best_mag {
                best_mag = mag;
                best = (i, j);
            }
        }
    }
    best
}

/// Haar-distributed unitary from Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    loop {
        let z = ComplexMatrix::random_gaussian(n, n, rng);
        if let Some(q) = orthonormalize_columns(&z) {
            return q;
        }
    }
}

/// Modified Gram-Schmidt; `None` if the columns are numerically dependent.
pub fn orthonormalize_columns(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    let mut cols: Vec<Vec<Complex64>> = (0..m.cols()).map(|c| m.column(c)).collect();
    for j in 0..cols.len() {
        for i in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let qi = &done[i];
            let proj: Complex64 = qi.iter().zip(&rest[0]).map(|(a, b)| a.conj() * b).sum();
            for (x, q) in rest[0].iter_mut().zip(qi) {
                *x -= proj * q;
            }
        }
        let norm = cols[j].iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return None;
        }
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
    }
    ComplexMatrix::from_columns(&cols).ok()
}

/// One third of the smallest gap between distinct eigenvalues; gaps below
/// `1e-9·max|λ|` count as repeated eigenvalues. `None` when all coincide.
pub fn eigen_gap_delta(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let scale = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(f64::MIN_POSITIVE);
    v.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|gap| *gap > 1e-9 * scale)
        .fold(None, |acc: Option<f64>, gap| Some(acc.map_or(gap, |a| a.min(gap))))
        .map(|gap| gap / 3.0)
}

pub fn vector_norm(x: &[Complex64]) -> f64 {
    x.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_8, PI};

    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn herm(rows: &[Vec<Complex64>]) -> HermitianMatrix {
        HermitianMatrix::new(ComplexMatrix::from_rows(rows).unwrap()).unwrap()
    }

    fn real_herm(rows: &[Vec<f64>]) -> HermitianMatrix {
        HermitianMatrix::new(ComplexMatrix::from_real_rows(rows).unwrap()).unwrap()
    }

    fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        let h = ComplexMatrix::random_gaussian(n, n, rng);
        HermitianMatrix::gram(&h)
    }

    #[test]
    fn rotation_with_zero_angle_is_identity() {
        let r = build_rotation(&RotationParams::new(0, 1, 0.0, 1.234), 2).unwrap();
        assert_eq!(r, ComplexMatrix::identity(2));
    }

    #[test]
    fn quarter_turn_rotation_entries() {
        let r = build_rotation(&RotationParams::new(0, 1, FRAC_PI_2, 0.0), 2).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(r.sub(&expected).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn three_dim_rotation_entries() {
        let r = build_rotation(&RotationParams::new(0, 2, FRAC_PI_4, FRAC_PI_2), 3).unwrap();
        let s = FRAC_1_SQRT_2;
        assert!((r[(0, 2)] - Complex64::from_polar(s, -FRAC_PI_2)).norm() < 1e-15);
        assert!((r[(2, 0)] + Complex64::from_polar(s, FRAC_PI_2)).norm() < 1e-15);
        assert_eq!(r[(1, 1)], c(1.0, 0.0));
        assert_eq!(r[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn invalid_pivots_are_rejected() {
        assert!(matches!(
            build_rotation(&RotationParams::new(1, 1, 0.1, 0.0), 3),
            Err(LinalgError::InvalidPivot { .. })
        ));
        assert!(matches!(
            build_rotation(&RotationParams::new(0, 3, 0.1, 0.0), 3),
            Err(LinalgError::InvalidPivot { .. })
        ));
        let g = HermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert!(closed_form_rotation(&g, 1, 0).is_err());
    }

    #[test]
    fn rotate_matches_explicit_congruence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_psd(4, &mut rng);
        let p = RotationParams::new(1, 3, 0.3, -1.1);
        let r = build_rotation(&p, 4).unwrap();
        let explicit = g.congruence(&r).unwrap();
        let fast = rotate(&g, &p).unwrap();
        let err = explicit.as_matrix().sub(fast.as_matrix()).unwrap().frobenius_norm();
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn rotate_scaled_identity_block_stays_diagonal() {
        let g = HermitianMatrix::from_real_diagonal(&[2.5, 2.5, 1.0]);
        let out = rotate(&g, &RotationParams::new(0, 1, 0.7, 0.4)).unwrap();
        assert!((out.get(0, 0).re - 2.5).abs() < 1e-14);
        assert!((out.get(1, 1).re - 2.5).abs() < 1e-14);
        assert!(out.get(0, 1).norm() < 1e-14);
    }

    #[test]
    fn rotate_two_by_two_to_diagonal() {
        let g = real_herm(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let out = rotate(&g, &RotationParams::new(0, 1, FRAC_PI_4, 0.0)).unwrap();
        assert!((out.get(0, 0).re - 1.0).abs() < 1e-14);
        assert!((out.get(1, 1).re - 3.0).abs() < 1e-14);
        assert!(out.get(0, 1).norm() < 1e-14);
        assert!((out.frobenius_norm() - g.frobenius_norm()).abs() < 1e-14);
    }

    #[test]
    fn rotate_dimension_mismatch() {
        let g = HermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert!(rotate(&g, &RotationParams::new(0, 2, 0.1, 0.0)).is_err());
    }

    #[test]
    fn quadratic_form_examples() {
        let s = FRAC_1_SQRT_2;
        let id = ComplexMatrix::identity(2);
        let v = quadratic_form(&id, &[c(s, 0.0), c(0.0, s)]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);

        let g = ComplexMatrix::from_real_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let v = quadratic_form(&g, &[c(s, 0.0), c(s, 0.0)]).unwrap();
        assert!((v - 3.0).abs() < 1e-14);

        let d = ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(quadratic_form(&d, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_form_flags_non_hermitian_input() {
        let skew = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let x = [c(1.0, 0.0), c(0.0, 1.0)];
        assert!(matches!(
            quadratic_form(&skew, &x),
            Err(LinalgError::NotHermitian { .. })
        ));
        assert!(quadratic_form(&skew, &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn hermitian_constructor_rejects_asymmetric() {
        let m = ComplexMatrix::from_real_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(HermitianMatrix::new(m).is_err());
        let nan = ComplexMatrix::from_real_rows(&[vec![f64::NAN]]);
        assert!(matches!(nan, Err(LinalgError::NonFinite { .. })));
    }

    #[test]
    fn closed_form_examples() {
        let g = real_herm(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let p = closed_form_rotation(&g, 0, 1).unwrap();
        assert!((p.theta - FRAC_PI_4).abs() < 1e-15 && p.phi.abs() < 1e-15);

        let d = HermitianMatrix::from_real_diagonal(&[3.0, 1.0]);
        assert_eq!(closed_form_rotation(&d, 0, 1).unwrap(), RotationParams::identity(0, 1));

        let g = real_herm(&[vec![3.0, 1.0], vec![1.0, 1.0]]);
        let p = closed_form_rotation(&g, 0, 1).unwrap();
        assert!((p.theta + FRAC_PI_8).abs() < 1e-15);
        assert_eq!(p.phi, 0.0);
        assert!(rotate(&g, &p).unwrap().get(0, 1).norm() < 1e-12);
    }

    #[test]
    fn closed_form_handles_complex_entry_and_negative_gap() {
        let g = herm(&[vec![c(1.0, 0.0), c(0.3, -0.4)], vec![c(0.3, 0.4), c(2.0, 0.0)]]);
        let p = closed_form_rotation(&g, 0, 1).unwrap();
        assert!(p.theta > 0.0 && p.theta <= FRAC_PI_4);
        assert!((p.phi - 0.4_f64.atan2(0.3)).abs() < 1e-15);
        assert!(rotate(&g, &p).unwrap().get(0, 1).norm() < 1e-14);
    }

    #[test]
    fn off_diagonal_norm_examples() {
        assert_eq!(off_diagonal_norm(&real_herm(&[vec![2.0, 1.0], vec![1.0, 2.0]])), 1.0);
        assert_eq!(off_diagonal_norm(&HermitianMatrix::from_real_diagonal(&[1.0, 5.0])), 0.0);
        let g = herm(&[vec![c(1.0, 0.0), c(0.0, 2.0)], vec![c(0.0, -2.0), c(1.0, 0.0)]]);
        assert_eq!(off_diagonal_norm(&g), 2.0);
    }

    #[test]
    fn cyclic_pivot_order() {
        assert_eq!(cyclic_pivots(3), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(cyclic_pivots(4).len(), 6);
        assert!(cyclic_pivots(1).is_empty());
    }

    #[test]
    fn jacobi_on_diagonal_input() {
        let g = HermitianMatrix::from_real_diagonal(&[3.0, 1.0]);
        let eig = reference_cyclic_jacobi(&g, &JacobiOptions::default()).unwrap();
        assert_eq!(eig.values, vec![3.0, 1.0]);
        assert_eq!(eig.vectors, ComplexMatrix::identity(2));
        assert_eq!(eig.sweeps, 0);
    }

    #[test]
    fn jacobi_on_two_by_two() {
        let g = real_herm(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let eig = reference_cyclic_jacobi(&g, &JacobiOptions::default()).unwrap();
        let vals = eig.sorted_values();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let low = eig.values.iter().position(|v| (v - 1.0).abs() < 1e-9).unwrap();
        let v = eig.vectors.column(low);
        // [1, -1]/√2 up to a unit phase
        let overlap = (v[0] * FRAC_1_SQRT_2 - v[1] * FRAC_1_SQRT_2).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_psd(5, &mut rng);
        let eig = reference_cyclic_jacobi(&g, &JacobiOptions::default()).unwrap();
        assert!(eig.reconstruction_error(&g) < 1e-10);
        assert!(eig.vectors.unitarity_error() < 1e-12);
    }

    #[test]
    fn classic_pivot_rule_also_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = random_psd(6, &mut rng);
        let opts = JacobiOptions {
            pivot_rule: PivotRule::Classic,
            ..JacobiOptions::default()
        };
        let eig = reference_cyclic_jacobi(&g, &opts).unwrap();
        assert!(eig.reconstruction_error(&g) < 1e-10);
    }

    #[test]
    fn jacobi_reports_exhausted_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = random_psd(5, &mut rng);
        let opts = JacobiOptions {
            max_sweeps: 1,
            ..JacobiOptions::default()
        };
        assert!(matches!(
            reference_cyclic_jacobi(&g, &opts),
            Err(LinalgError::NoConvergence { sweeps: 1, .. })
        ));
    }

    #[test]
    fn gap_delta_ignores_repeated_values() {
        let d = eigen_gap_delta(&[0.0, 0.0, 0.6, 1.5]).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        assert_eq!(eigen_gap_delta(&[1.0, 1.0]), None);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(random_unitary(7, &mut rng).unitarity_error() < 1e-13);
    }

    // Closed-form eigenvalues of 2x2 and 3x3 Hermitian matrices from the
    // characteristic polynomial, independent of any rotation code.
    fn char_poly_eigenvalues(g: &HermitianMatrix) -> Vec<f64> {
        let a = |i: usize, j: usize| g.get(i, j);
        let mut v = match g.dim() {
            2 => {
                let (p, q) = (a(0, 0).re, a(1, 1).re);
                let disc = ((p - q) * (p - q) / 4.0 + a(0, 1).norm_sqr()).sqrt();
                vec![(p + q) / 2.0 - disc, (p + q) / 2.0 + disc]
            }
            3 => {
                // λ³ − c2 λ² + c1 λ − c0 = 0, trigonometric solution
                let c2 = a(0, 0).re + a(1, 1).re + a(2, 2).re;
                let c1 = a(0, 0).re * a(1, 1).re + a(0, 0).re * a(2, 2).re + a(1, 1).re * a(2, 2).re
                    - a(0, 1).norm_sqr()
                    - a(0, 2).norm_sqr()
                    - a(1, 2).norm_sqr();
                let c0 = (a(0, 0) * a(1, 1) * a(2, 2)
                    + a(0, 1) * a(1, 2) * a(2, 0)
                    + a(0, 2) * a(1, 0) * a(2, 1)
                    - a(0, 0) * a(1, 2) * a(2, 1)
                    - a(1, 1) * a(0, 2) * a(2, 0)
                    - a(2, 2) * a(0, 1) * a(1, 0))
                    .re;
                let shift = c2 / 3.0;
                let p = c1 - c2 * c2 / 3.0;
                let q = -2.0 * c2.powi(3) / 27.0 + c2 * c1 / 3.0 - c0;
                if p.abs() < 1e-300 {
                    vec![shift; 3]
                } else {
                    let r = (-p / 3.0).sqrt();
                    let arg = ((3.0 * q) / (2.0 * p * r)).clamp(-1.0, 1.0);
                    let t = arg.acos() / 3.0;
                    (0..3)
                        .map(|k| 2.0 * r * (t - 2.0 * PI * k as f64 / 3.0).cos() + shift)
                        .collect()
                }
            }
            _ => unreachable!(),
        };
        v.sort_by(f64::total_cmp);
        v
    }

    fn arb_complex() -> impl Strategy<Value = Complex64> {
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| c(re, im))
    }

    fn arb_hermitian(n: usize) -> impl Strategy<Value = HermitianMatrix> {
        proptest::collection::vec(arb_complex(), n * n).prop_map(move |entries| {
            let m = ComplexMatrix::from_fn(n, n, |r, col| entries[r * n + col]);
            let sym = ComplexMatrix::from_fn(n, n, |r, col| (m[(r, col)] + m[(col, r)].conj()) * 0.5);
            HermitianMatrix::new(sym).unwrap()
        })
    }

    fn arb_pivot(n: usize) -> impl Strategy<Value = (usize, usize)> {
        (0..n - 1).prop_flat_map(move |l| (Just(l), (l + 1)..n))
    }

    proptest! {
        #[test]
        fn rotations_are_unitary(theta in -PI..PI, phi in -PI..PI, (l, m) in arb_pivot(6)) {
            let r = build_rotation(&RotationParams::new(l, m, theta, phi), 6).unwrap();
            prop_assert!(r.unitarity_error() < 1e-12);
        }

        #[test]
        fn closed_form_annihilates_and_reduces_off_norm(a in arb_hermitian(5), (l, m) in arb_pivot(5)) {
            let p = closed_form_rotation(&a, l, m).unwrap();
            prop_assert!(p.theta > -FRAC_PI_4 && p.theta <= FRAC_PI_4);
            let out = rotate(&a, &p).unwrap();
            let scale = a.frobenius_norm();
            prop_assert!(out.get(l, m).norm() <= 1e-10 * scale);
            let before = off_diagonal_norm(&a).powi(2);
            let after = off_diagonal_norm(&out).powi(2);
            let expected = before - a.get(l, m).norm_sqr();
            prop_assert!((after - expected).abs() <= 1e-10 * scale * scale);
            prop_assert!((out.frobenius_norm() - scale).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn jacobi_matches_characteristic_polynomial_2x2(a in arb_hermitian(2)) {
            let eig = reference_cyclic_jacobi(&a, &JacobiOptions::default()).unwrap();
            for (x, y) in eig.sorted_values().iter().zip(char_poly_eigenvalues(&a)) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }

        #[test]
        fn jacobi_matches_characteristic_polynomial_3x3(a in arb_hermitian(3)) {
            let eig = reference_cyclic_jacobi(&a, &JacobiOptions::default()).unwrap();
            for (x, y) in eig.sorted_values().iter().zip(char_poly_eigenvalues(&a)) {
                prop_assert!((x - y).abs() < 1e-8, "{:?} vs {:?}", eig.sorted_values(), char_poly_eigenvalues(&a));
            }
        }

        #[test]
        fn gram_quadratic_form_is_nonnegative(seed in any::<u64>(), x in proptest::collection::vec(arb_complex(), 4)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = ComplexMatrix::random_gaussian(2, 4, &mut rng);
            let g = HermitianMatrix::gram(&h);
            let v = quadratic_form(g.as_matrix(), &x).unwrap();
            let fast = hermitian_form(&g, &x).unwrap();
            prop_assert!(v >= -1e-12 * g.frobenius_norm() * vector_norm(&x).powi(2));
            prop_assert!((v - fast).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }
}
