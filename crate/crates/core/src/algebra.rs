//! Exact square-matrix arithmetic over arbitrary-precision rationals.
//!
//! Entries are integer-valued on every path except inversion. The integer
//! case is detected per operation and runs on the numerators directly, so
//! the common path never pays for rational normalization.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{usage, Error, Result};

/// Seed type for every deterministic sampler in the crate.
pub type Seed = u64;

/// Attempts made by [`sample_invertible_matrix`] before giving up.
pub const MAX_INVERTIBLE_ATTEMPTS: usize = 1000;

/// Builds the crate-wide deterministic generator for `seed`.
pub fn rng_from_seed(seed: Seed) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An exact rational number kept in lowest terms with a positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar(BigRational);

impl Scalar {
    pub fn zero() -> Self {
        Scalar(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar(BigRational::one())
    }

    pub fn from_integer(value: BigInt) -> Self {
        Scalar(BigRational::from_integer(value))
    }

    pub fn from_ratio(numer: BigInt, denom: BigInt) -> Result<Self> {
        if denom.is_zero() {
            return Err(Error::Format("zero denominator".into()));
        }
        Ok(Scalar(BigRational::new(numer, denom)))
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::from_integer(BigInt::from(v))
    }
}

impl From<BigInt> for Scalar {
    fn from(v: BigInt) -> Self {
        Scalar::from_integer(v)
    }
}

impl From<BigRational> for Scalar {
    fn from(v: BigRational) -> Self {
        Scalar(v)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Scalar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("not a decimal number: {s:?}"));
        match s.split_once('/') {
            None => BigInt::from_str(s).map(Scalar::from_integer).map_err(|_| bad()),
            Some((n, d)) => {
                let n = BigInt::from_str(n).map_err(|_| bad())?;
                let d = BigInt::from_str(d).map_err(|_| bad())?;
                Scalar::from_ratio(n, d)
            }
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Square `dim × dim` matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Matrix {
    dim: usize,
    entries: Vec<Scalar>,
}

impl Matrix {
    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { Scalar::one() } else { Scalar::zero() })
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| Scalar::zero())
    }

    /// Builds a matrix from a generator. Panics if `dim == 0`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Scalar) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Matrix { dim, entries }
    }

    pub fn from_rows<T: Into<Scalar>>(rows: Vec<Vec<T>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(usage("matrix must have at least one row"));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend(row.into_iter().map(Into::into));
        }
        Ok(Matrix { dim, entries })
    }

    /// Convenience constructor for small literal matrices. Panics on ragged input.
    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.to_vec()).collect()).expect("square literal")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Scalar) {
        self.entries[i * self.dim + j] = value;
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Scalar]> {
        self.entries.chunks(self.dim)
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.entries
    }

    /// True when every entry has denominator 1.
    pub fn is_integer(&self) -> bool {
        self.entries.iter().all(Scalar::is_integer)
    }

    pub fn is_identity(&self) -> bool {
        *self == Matrix::identity(self.dim)
    }

    fn check_same_dim(&self, other: usize) -> Result<()> {
        if self.dim != other {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other,
            });
        }
        Ok(())
    }

    /// Entries as `BigInt`s; `None` if any entry is fractional.
    fn integer_rows(&self) -> Option<Vec<Vec<BigInt>>> {
        if !self.is_integer() {
            return None;
        }
        Some(
            self.rows()
                .map(|r| r.iter().map(|s| s.numer().clone()).collect())
                .collect(),
        )
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[Scalar]> = self.rows().collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<Scalar>>::deserialize(deserializer)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Column vector of exact scalars.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector {
    entries: Vec<Scalar>,
}

impl Vector {
    pub fn new(entries: Vec<Scalar>) -> Self {
        Vector { entries }
    }

    pub fn from_i64(values: &[i64]) -> Self {
        Vector::new(values.iter().map(|&v| Scalar::from(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.entries
    }

    pub fn is_integer(&self) -> bool {
        self.entries.iter().all(Scalar::is_integer)
    }
}

/// Column vector over {0, 1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryVector {
    bits: Vec<bool>,
}

impl BinaryVector {
    pub fn new(bits: Vec<bool>) -> Self {
        BinaryVector { bits }
    }

    /// Parses a string such as `"0110"`. Panics on other characters.
    pub fn from_bit_str(s: &str) -> Self {
        BinaryVector::new(
            s.chars()
                .map(|c| match c {
                    '0' => false,
                    '1' => true,
                    other => panic!("not a bit: {other:?}"),
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_vector(&self) -> Vector {
        Vector::new(
            self.bits
                .iter()
                .map(|&b| if b { Scalar::one() } else { Scalar::zero() })
                .collect(),
        )
    }
}

impl Serialize for BinaryVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let bits: Vec<u8> = self.bits.iter().map(|&b| b as u8).collect();
        bits.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BinaryVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<u8>::deserialize(deserializer)?;
        raw.into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(serde::de::Error::custom(format!("bit out of range: {other}"))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(BinaryVector::new)
    }
}

/// Exact product `a · b` (classical cubic algorithm).
pub fn mat_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.check_same_dim(b.dim)?;
    let r = a.dim;
    if a.is_integer() && b.is_integer() {
        return Ok(Matrix::from_fn(r, |i, j| {
            let mut acc = BigInt::zero();
            for l in 0..r {
                acc += a.get(i, l).numer() * b.get(l, j).numer();
            }
            Scalar::from_integer(acc)
        }));
    }
    Ok(Matrix::from_fn(r, |i, j| {
        let mut acc = BigRational::zero();
        for l in 0..r {
            acc += a.get(i, l).as_rational() * b.get(l, j).as_rational();
        }
        Scalar(acc)
    }))
}

/// Left-to-right product of a non-empty slice of matrices: `ms[0] · ms[1] · …`.
pub fn mat_product<'a>(ms: impl IntoIterator<Item = &'a Matrix>) -> Result<Matrix> {
    let mut iter = ms.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| usage("product of an empty sequence"))?;
    iter.try_fold(first.clone(), |acc, m| mat_mul(&acc, m))
}

/// Exact product `a · v` with `v` a column vector.
pub fn mat_vec_mul(a: &Matrix, v: &Vector) -> Result<Vector> {
    a.check_same_dim(v.dim())?;
    let all_int = a.is_integer() && v.is_integer();
    let out = a
        .rows()
        .map(|row| {
            if all_int {
                let mut acc = BigInt::zero();
                for (x, y) in row.iter().zip(v.entries()) {
                    acc += x.numer() * y.numer();
                }
                Scalar::from_integer(acc)
            } else {
                let mut acc = BigRational::zero();
                for (x, y) in row.iter().zip(v.entries()) {
                    acc += x.as_rational() * y.as_rational();
                }
                Scalar(acc)
            }
        })
        .collect();
    Ok(Vector::new(out))
}

/// `a · u` for a binary `u`: the sum of the columns of `a` selected by `u`.
pub fn mat_bin_vec_mul(a: &Matrix, u: &BinaryVector) -> Result<Vector> {
    a.check_same_dim(u.dim())?;
    let out = a
        .rows()
        .map(|row| {
            let mut acc = BigRational::zero();
            for (x, &bit) in row.iter().zip(u.bits()) {
                if bit {
                    acc += x.as_rational();
                }
            }
            Scalar(acc)
        })
        .collect();
    Ok(Vector::new(out))
}

/// Scales each row by the lcm of its denominators, returning the integer
/// matrix and the per-row scale factors.
fn clear_row_denominators(a: &Matrix) -> (Vec<Vec<BigInt>>, Vec<BigInt>) {
    if let Some(rows) = a.integer_rows() {
        return (rows, vec![BigInt::one(); a.dim]);
    }
    let mut out = Vec::with_capacity(a.dim);
    let mut scales = Vec::with_capacity(a.dim);
    for row in a.rows() {
        let l = row
            .iter()
            .fold(BigInt::one(), |acc, s| acc.lcm(s.denom()));
        out.push(
            row.iter()
                .map(|s| s.numer() * (&l / s.denom()))
                .collect::<Vec<_>>(),
        );
        scales.push(l);
    }
    (out, scales)
}

/// Bareiss fraction-free determinant of an integer square matrix.
fn bareiss_determinant(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    let mut prev = BigInt::one();
    let mut negate = false;
    for k in 0..n {
        let Some(p) = (k..n).find(|&p| !m[p][k].is_zero()) else {
            return BigInt::zero();
        };
        if p != k {
            m.swap(p, k);
            negate = !negate;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = &m[k][k] * &m[i][j] - &m[i][k] * &m[k][j];
                m[i][j] = t / &prev;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if negate {
        -det
    } else {
        det
    }
}

/// Exact determinant.
pub fn determinant(a: &Matrix) -> Scalar {
    let (rows, scales) = clear_row_denominators(a);
    let det = bareiss_determinant(rows);
    let scale: BigInt = scales.iter().product();
    Scalar(BigRational::new(det, scale))
}

/// True iff the determinant is non-zero.
pub fn is_invertible(a: &Matrix) -> bool {
    let (rows, _) = clear_row_denominators(a);
    !bareiss_determinant(rows).is_zero()
}

/// Exact rational inverse, computed by fraction-free Gauss–Jordan
/// elimination on `[A | I]` after clearing row denominators.
pub fn mat_inverse(a: &Matrix) -> Result<Matrix> {
    let (numer, d) = mat_inverse_scaled(a)?;
    Ok(Matrix::from_fn(a.dim, |i, j| {
        Scalar(BigRational::new(numer.get(i, j).numer().clone(), d.clone()))
    }))
}

/// `(N, d)` with `A⁻¹ = N / d`, `N` integral and `d > 0`. Products against
/// `N` stay on the integer fast path of [`mat_mul`].
pub fn mat_inverse_scaled(a: &Matrix) -> Result<(Matrix, BigInt)> {
    let n = a.dim;
    let (rows, scales) = clear_row_denominators(a);
    let width = 2 * n;
    let mut m: Vec<Vec<BigInt>> = rows
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row.extend((0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
            row
        })
        .collect();

    let mut prev = BigInt::one();
    for k in 0..n {
        let p = (k..n)
            .find(|&p| !m[p][k].is_zero())
            .ok_or(Error::SingularMatrix)?;
        m.swap(p, k);
        let (before, rest) = m.split_at_mut(k);
        let (pivot_row, after) = rest.split_first_mut().expect("row k exists");
        for row in before.iter_mut().chain(after.iter_mut()) {
            let factor = row[k].clone();
            for j in 0..width {
                let t = &pivot_row[k] * &row[j] - &factor * &pivot_row[j];
                let (q, rem) = t.div_rem(&prev);
                debug_assert!(rem.is_zero(), "fraction-free step must divide exactly");
                row[j] = q;
            }
        }
        prev = pivot_row[k].clone();
    }

    // Row i of the right half now holds m[i][i] · A'^{-1}, and the row
    // scaling is undone by A^{-1} = A'^{-1} · diag(scales).
    let d = m
        .iter()
        .enumerate()
        .fold(BigInt::one(), |acc, (i, row)| acc.lcm(&row[i]));
    let numer = Matrix::from_fn(n, |i, j| {
        let q = &d / &m[i][i];
        Scalar::from_integer(&m[i][n + j] * &scales[j] * q)
    });
    Ok((numer, d))
}

/// Rank of a rectangular integer matrix, by elimination with row content
/// normalization to keep entries small.
pub fn integer_rank(rows: &[Vec<BigInt>]) -> usize {
    let mut m: Vec<Vec<BigInt>> = rows.to_vec();
    let height = m.len();
    let width = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..width {
        if rank == height {
            break;
        }
        let Some(p) = (rank..height).find(|&p| !m[p][col].is_zero()) else {
            continue;
        };
        m.swap(p, rank);
        let (top, bottom) = m.split_at_mut(rank + 1);
        let pivot_row = &top[rank];
        for row in bottom.iter_mut() {
            if row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for j in col..width {
                row[j] = &pivot_row[col] * &row[j] - &factor * &pivot_row[j];
            }
            let content = row.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
            if !content.is_zero() && !content.is_one() {
                for x in row.iter_mut() {
                    *x = &*x / &content;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Probabilistic check of `a · b == c` with `t` independent uniform binary
/// test vectors. Never rejects a true product; accepts a false one with
/// probability at most `2^-t`. Costs `O(t · r²)` scalar operations.
pub fn freivalds_verify(a: &Matrix, b: &Matrix, c: &Matrix, t: u32, seed: Seed) -> Result<bool> {
    a.check_same_dim(b.dim)?;
    a.check_same_dim(c.dim)?;
    if t == 0 {
        return Err(usage("freivalds iteration count must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..t {
        let x = BinaryVector::new((0..a.dim).map(|_| rng.gen::<bool>()).collect());
        let bx = mat_bin_vec_mul(b, &x)?;
        let abx = mat_vec_mul(a, &bx)?;
        let cx = mat_bin_vec_mul(c, &x)?;
        if abx != cx {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Matrix with entries independently uniform over `{0, …, entry_bound − 1}`.
pub fn sample_matrix<R: Rng + ?Sized>(r: usize, entry_bound: u64, rng: &mut R) -> Result<Matrix> {
    if r < 1 {
        return Err(usage("matrix dimension must be at least 1"));
    }
    if entry_bound < 2 {
        return Err(usage("entry bound must be at least 2"));
    }
    Ok(Matrix::from_fn(r, |_, _| {
        Scalar::from_integer(BigInt::from(rng.gen_range(0..entry_bound)))
    }))
}

/// Rejection-samples an invertible matrix, also reporting how many singular
/// draws were discarded.
pub fn sample_invertible_matrix_counted<R: Rng + ?Sized>(
    r: usize,
    entry_bound: u64,
    rng: &mut R,
) -> Result<(Matrix, usize)> {
    for rejected in 0..MAX_INVERTIBLE_ATTEMPTS {
        let m = sample_matrix(r, entry_bound, rng)?;
        if is_invertible(&m) {
            return Ok((m, rejected));
        }
    }
    Err(Error::GenerationFailure(format!(
        "no invertible {r}x{r} matrix with entries below {entry_bound} after \
         {MAX_INVERTIBLE_ATTEMPTS} attempts"
    )))
}

pub fn sample_invertible_matrix<R: Rng + ?Sized>(
    r: usize,
    entry_bound: u64,
    rng: &mut R,
) -> Result<Matrix> {
    sample_invertible_matrix_counted(r, entry_bound, rng).map(|(m, _)| m)
}

/// Uniform binary vector of dimension `r` with Hamming weight at least 2.
///
/// Weight-1 vectors are excluded because `A · e_j` is a column of `A`.
pub fn sample_check_vector<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Result<BinaryVector> {
    if r < 2 {
        return Err(usage("check vectors need dimension at least 2"));
    }
    loop {
        let v = BinaryVector::new((0..r).map(|_| rng.gen::<bool>()).collect());
        if v.weight() >= 2 {
            return Ok(v);
        }
    }
}

/// Number of binary vectors of dimension `r` with weight at least 2.
pub fn check_vector_space_size(r: u32) -> num_bigint::BigUint {
    use num_bigint::BigUint;
    let total = BigUint::one() << r;
    total - BigUint::from(r) - BigUint::one()
}
