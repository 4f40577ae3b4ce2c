//! Small dense linear algebra: row-major matrices, LU solves, Perron eigendata
//! of nonnegative matrices and strongly connected components.
//!
//! Everything here is sized for transition matrices of a few dozen states, so
//! nothing is blocked or vectorised.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.iter().flatten().copied().collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scale(-1.0))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `M x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `x M` (row vector times matrix).
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len());
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += xi * m;
            }
        }
        out
    }

    /// Extracts the submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Induced 1-norm (max column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Induced infinity norm (max row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= 0.0)
    }

    /// Support pattern as adjacency lists (`j` in `adj[i]` iff entry `(i,j) > 0`).
    pub fn support(&self) -> Vec<Vec<usize>> {
        (0..self.rows)
            .map(|i| (0..self.cols).filter(|&j| self[(i, j)] > 0.0).collect())
            .collect()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// LU factorisation with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::Numeric("LU of a non-square matrix".into()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| lu[(x, k)].abs().total_cmp(&lu[(y, k)].abs()))
                .unwrap();
            if lu[(p, k)].abs() <= scale * 1e-300 {
                return Err(Error::Numeric(format!("singular matrix at pivot {k}")));
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col: Vec<f64> = (0..b.rows()).map(|i| b[(i, j)]).collect();
            for (i, v) in self.solve(&col).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        self.solve_matrix(&Matrix::identity(self.dim()))
    }
}

/// 1-norm condition number `‖A‖₁‖A⁻¹‖₁`.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    if a.rows() == 0 {
        return Ok(1.0);
    }
    let lu = Lu::new(a)?;
    Ok(a.norm1() * lu.inverse().norm1())
}

/// Perron–Frobenius data of an irreducible nonnegative matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PerronData {
    pub rho: f64,
    /// Right eigenvector, scaled so its largest entry is 1.
    pub right_vec: Vec<f64>,
    /// Left eigenvector, scaled so `left_vec · right_vec = 1`.
    pub left_vec: Vec<f64>,
    pub iterations: usize,
}

impl PerronData {
    /// Largest relative residual of the two eigen-equations.
    pub fn residual(&self, m: &Matrix) -> f64 {
        let mv = m.mul_vec(&self.right_vec);
        let um = m.vec_mul(&self.left_vec);
        let scale = self.rho.max(f64::MIN_POSITIVE);
        let rmax = self.right_vec.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let lmax = self.left_vec.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let r = mv.iter().zip(&self.right_vec).map(|(a, b)| (a - self.rho * b).abs()).fold(0.0, f64::max);
        let l = um.iter().zip(&self.left_vec).map(|(a, b)| (a - self.rho * b).abs()).fold(0.0, f64::max);
        (r / (scale * rmax)).max(l / (scale * lmax))
    }
}

pub const NODA_MAX_ITER: usize = 500;
const NODA_TOL: f64 = 1e-14;
/// Accepted Collatz–Wielandt gap once the iteration stagnates.
const NODA_STALL_TOL: f64 = 1e-10;

/// Collatz–Wielandt bounds `(min, max)` of `(Mx)_i / x_i` for positive `x`.
fn cw_bounds(m: &Matrix, x: &[f64]) -> (f64, f64) {
    m.mul_vec(x).iter().zip(x).fold((f64::INFINITY, 0.0_f64), |(lo, hi), (y, xi)| (lo.min(y / xi), hi.max(y / xi)))
}

/// Perron vector of a nonnegative irreducible matrix by Noda iteration: inverse
/// iteration shifted by the Collatz–Wielandt upper bound, which stays above `ρ` and
/// decreases to it. Returns the vector (unit 1-norm), the upper bound and the step count.
fn noda(m: &Matrix) -> Result<(Vec<f64>, f64, usize)> {
    let n = m.rows();
    let mut x = vec![1.0 / n as f64; n];
    let (mut lo, mut hi) = cw_bounds(m, &x);
    for it in 1..=NODA_MAX_ITER {
        if !(hi.is_finite() && hi > 0.0) {
            return Err(Error::Numeric(format!("Noda iteration produced bound {hi} at step {it}")));
        }
        if hi - lo <= NODA_TOL * hi {
            return Ok((x, hi, it));
        }
        // (hi I - D⁻¹MD) z = 1 with D = diag(x), then y = Dz.
        let a = Matrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) * hi - m[(i, j)] * (x[j] / x[i]));
        let y: Vec<f64> = match Lu::new(&a) {
            Ok(lu) => lu.solve(&vec![1.0; n]).iter().zip(&x).map(|(z, xi)| z * xi).collect(),
            Err(_) => vec![f64::NAN; n],
        };
        let s: f64 = y.iter().sum();
        let next: Vec<f64> = y.iter().map(|t| t / s).collect();
        let (lo2, hi2) = if s.is_finite() && next.iter().all(|t| *t > 0.0) {
            cw_bounds(m, &next)
        } else {
            (0.0, f64::INFINITY)
        };
        if !(hi2 < hi || hi2 - lo2 < hi - lo) {
            if hi - lo <= NODA_STALL_TOL * hi {
                return Ok((x, hi, it));
            }
            if let Some((x, steps)) = settle(m, &x, hi) {
                return Ok((x, hi, it + steps));
            }
            return Err(Error::Numeric(format!(
                "Noda iteration stalled at step {it} with Collatz-Wielandt bounds [{lo:e}, {hi:e}]"
            )));
        }
        (x, lo, hi) = (next, lo2, hi2);
    }
    Err(Error::Numeric(format!(
        "Noda iteration did not converge in {NODA_MAX_ITER} steps; bounds [{lo:e}, {hi:e}]"
    )))
}

const SETTLE_MAX_ITER: usize = 20_000;

/// Power iteration on `(M + ρI)/(2ρ)` from a subinvariant `x` once `ρ` is known.
fn settle(m: &Matrix, x: &[f64], rho: f64) -> Option<(Vec<f64>, usize)> {
    let mut x = x.to_vec();
    for it in 1..=SETTLE_MAX_ITER {
        let mx = m.mul_vec(&x);
        let mut s = 0.0;
        for (xi, y) in x.iter_mut().zip(&mx) {
            *xi = 0.5 * (*xi + y / rho);
            s += *xi;
        }
        x.iter_mut().for_each(|t| *t /= s);
        if it % 16 == 0 {
            let (lo, hi) = cw_bounds(m, &x);
            if hi - lo <= NODA_STALL_TOL * hi {
                return Some((x, it));
            }
        }
    }
    None
}

/// Left Perron vector from a right one: the stationary law of the stochastic matrix
/// `D⁻¹MD/ρ` with `D = diag(v)`, by GTH elimination, divided by `v`.
/// Subtraction-free; only off-diagonal entries are read.
fn gth_left(m: &Matrix, v: &[f64], rho: f64) -> Result<Vec<f64>> {
    let n = m.rows();
    let mut a = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { m[(i, j)] / rho * (v[j] / v[i]) });
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Numeric(format!("GTH elimination found no exit from state {k} (matrix not irreducible?)")));
        }
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik != 0.0 {
                for j in 0..k {
                    a[(i, j)] += aik * a[(k, j)];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for j in 1..n {
        pi[j] = (0..j).map(|i| pi[i] * a[(i, j)]).sum();
    }
    Ok(pi.iter().zip(v).map(|(p, vi)| p / vi).collect())
}

/// Perron root and positive eigenvectors of an irreducible nonnegative square matrix.
///
/// One side comes from Noda iteration (right first, left if that stalls), the other
/// from [`gth_left`].
pub fn perron(m: &Matrix) -> Result<PerronData> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::Numeric("Perron data of an empty or non-square matrix".into()));
    }
    if !m.is_nonnegative() {
        return Err(Error::Numeric("Perron data requested for a matrix with negative entries".into()));
    }
    let n = m.rows();
    if n == 1 {
        return Ok(PerronData { rho: m[(0, 0)], right_vec: vec![1.0], left_vec: vec![1.0], iterations: 0 });
    }
    let (mut v, mut u, iterations) = match noda(m) {
        Ok((v, rho, it)) => {
            let u = gth_left(m, &v, rho)?;
            (v, u, it)
        }
        Err(right) => {
            let mt = m.transpose();
            let (u, rho, it) = noda(&mt).map_err(|left| Error::Numeric(format!("{right}; transposed: {left}")))?;
            let v = gth_left(&mt, &u, rho)?;
            (v, u, it)
        }
    };

    let vmax = v.iter().fold(0.0_f64, |a, &b| a.max(b));
    v.iter_mut().for_each(|x| *x /= vmax);
    let uv = dot(&u, &v);
    u.iter_mut().for_each(|x| *x /= uv);
    // Two-sided Rayleigh quotient with u·v = 1.
    let rho = dot(&u, &m.mul_vec(&v));

    if v.iter().chain(&u).any(|x| !(*x > 0.0)) {
        return Err(Error::Numeric("Perron vector has non-positive entries (matrix not irreducible?)".into()));
    }
    let data = PerronData { rho, right_vec: v, left_vec: u, iterations };
    let res = data.residual(m);
    if !(res <= 1e-9) {
        return Err(Error::Numeric(format!("Perron residual {res:e} after {} iterations", data.iterations)));
    }
    Ok(data)
}

/// Strongly connected components of a directed graph (Tarjan, iterative).
///
/// Components are returned in reverse topological order, each sorted ascending.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// A strongly connected component and its spectral radius.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentRadius {
    pub states: Vec<usize>,
    pub rho: f64,
}

/// Spectral radius of a (possibly reducible) nonnegative matrix as the maximum over
/// its strongly connected components. Acyclic singletons have radius 0.
pub fn reducible_spectral_radius(m: &Matrix) -> Result<(f64, Vec<ComponentRadius>)> {
    let comps = strongly_connected_components(&m.support());
    let mut out = Vec::with_capacity(comps.len());
    let mut best = 0.0_f64;
    for states in comps {
        let rho = if states.len() == 1 {
            m[(states[0], states[0])]
        } else {
            perron(&m.select(&states, &states))?.rho
        };
        best = best.max(rho);
        out.push(ComponentRadius { states, rho });
    }
    Ok((best, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let x = vec![1.0, -2.0, 0.5];
        let b = a.mul_vec(&x);
        let got = Lu::new(&a).unwrap().solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(Lu::new(&a).is_err());
    }

    #[test]
    fn perron_golden_mean() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]);
        let p = perron(&m).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.rho - phi).abs() < 1e-14);
        assert!((p.right_vec[1] - 1.0 / phi).abs() < 1e-14);
        assert!((dot(&p.left_vec, &p.right_vec) - 1.0).abs() < 1e-14);
        assert!(p.residual(&m) < 1e-12);
    }

    #[test]
    fn perron_periodic_matrix_converges() {
        let m = Matrix::from_rows(&[vec![0.0, 2.0], vec![0.5, 0.0]]);
        let p = perron(&m).unwrap();
        assert!((p.rho - 1.0).abs() < 1e-14);
        assert!(p.residual(&m) < 1e-12);
    }

    #[test]
    fn perron_nearly_reducible_matrix_componentwise() {
        let e = (-60.0f64).exp();
        let m = Matrix::from_rows(&[vec![0.0, 2.0 * e, 0.0], vec![e * e, e, e * e * e], vec![e, 0.0, 1.5 * e]]);
        let p = perron(&m).unwrap();
        assert!((p.rho / (1.5 * e) - 1.0).abs() < 1e-12);
        let mv = m.mul_vec(&p.right_vec);
        let um = m.vec_mul(&p.left_vec);
        for i in 0..3 {
            assert!((mv[i] / (p.rho * p.right_vec[i]) - 1.0).abs() < 1e-12, "right {i}");
            assert!((um[i] / (p.rho * p.left_vec[i]) - 1.0).abs() < 1e-12, "left {i}");
        }
    }

    #[test]
    fn scc_and_reducible_radius() {
        // {0,1} cycle, 2 isolated with self-loop weight 3, 3 acyclic.
        let m = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 3.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ]);
        let comps = strongly_connected_components(&m.support());
        assert_eq!(comps.len(), 3);
        let (rho, parts) = reducible_spectral_radius(&m).unwrap();
        assert_eq!(rho, 3.0);
        assert!(parts.iter().any(|c| c.states == vec![0, 1] && (c.rho - 1.0).abs() < 1e-14));
        assert!(parts.iter().any(|c| c.states == vec![3] && c.rho == 0.0));
    }

    #[test]
    fn condition_of_identity_is_one() {
        assert_eq!(condition_number(&Matrix::identity(4)).unwrap(), 1.0);
    }
}
