//! Dense kernels shared by the estimators: symmetric eigendecomposition,
//! thin QR and the largest principal angle between two subspaces.
//!
//! All routines are deterministic. Eigenvectors are normalised so that the
//! entry of largest magnitude is positive, and QR factors carry a
//! nonnegative diagonal in `R`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric square matrix. Symmetry is enforced on construction by
/// averaging the matrix with its transpose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    a: Array2<f64>,
}

impl SymMatrix {
    pub fn new(mut a: Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::invalid(format!("matrix is {r}x{c}, expected square")));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let avg = 0.5 * (a[[i, j]] + a[[j, i]]);
                a[[i, j]] = avg;
                a[[j, i]] = avg;
            }
        }
        Ok(SymMatrix { a })
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix {
            a: Array2::eye(dim),
        }
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        SymMatrix::new(Array2::from_diag(&Array1::from(diag.to_vec())))
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.a
    }

    /// Row `i`; equal to column `i` by symmetry.
    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.a.row(i)
    }

    pub fn diag(&self) -> Vec<f64> {
        self.a.diag().to_vec()
    }

    /// Principal submatrix on the given (sorted or unsorted) index set.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        let a = Array2::from_shape_fn((k, k), |(i, j)| self.a[[idx[i], idx[j]]]);
        SymMatrix { a }
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(self.a.view())
    }
}

/// A `p x m` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthoBasis {
    q: Array2<f64>,
}

/// Tolerance on `max |QᵀQ − I|` accepted by [`OrthoBasis::new`].
pub const ORTHO_TOL: f64 = 1e-10;

impl OrthoBasis {
    /// Wraps `q` after checking that its columns are orthonormal.
    pub fn new(q: Array2<f64>) -> Result<Self> {
        if q.ncols() > q.nrows() {
            return Err(Error::invalid(format!(
                "basis has {} columns but only {} rows",
                q.ncols(),
                q.nrows()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("basis has non-finite entries"));
        }
        let dev = orthonormality_defect(q.view());
        if dev > ORTHO_TOL {
            return Err(Error::invalid(format!(
                "columns are not orthonormal (max |QᵀQ − I| = {dev:.3e})"
            )));
        }
        Ok(OrthoBasis { q })
    }

    pub(crate) fn from_unchecked(q: Array2<f64>) -> Self {
        OrthoBasis { q }
    }

    /// Orthonormalises the columns of `t` (thin QR, sign-normalised).
    pub fn orthonormalize(t: ArrayView2<'_, f64>) -> Result<Self> {
        thin_qr(t).map(|(q, _)| q)
    }

    /// Columns `e_i` for each `i` in `idx`.
    pub fn coordinate(p: usize, idx: &[usize]) -> Result<Self> {
        let mut q = Array2::zeros((p, idx.len()));
        for (j, &i) in idx.iter().enumerate() {
            if i >= p {
                return Err(Error::invalid(format!("coordinate {i} out of range for p = {p}")));
            }
            q[[i, j]] = 1.0;
        }
        OrthoBasis::new(q)
    }

    pub fn nrows(&self) -> usize {
        self.q.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.q.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.q.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.q.column(j)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.q
    }

    /// The first `m` columns.
    pub fn leading(&self, m: usize) -> Result<OrthoBasis> {
        if m > self.ncols() {
            return Err(Error::InsufficientInit {
                available: self.ncols(),
                m,
            });
        }
        Ok(OrthoBasis {
            q: self.q.slice(s![.., ..m]).to_owned(),
        })
    }

    /// Sorted indices of rows that are not identically zero.
    pub fn support(&self) -> Vec<usize> {
        nonzero_rows(self.q.view())
    }

    /// `max |QᵀQ − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(self.q.view())
    }
}

pub(crate) fn nonzero_rows(a: ArrayView2<'_, f64>) -> Vec<usize> {
    a.axis_iter(Axis(0))
        .enumerate()
        .filter(|(_, row)| row.iter().any(|&v| v != 0.0))
        .map(|(i, _)| i)
        .collect()
}

pub fn orthonormality_defect(q: ArrayView2<'_, f64>) -> f64 {
    let g = q.t().dot(&q);
    let mut dev: f64 = 0.0;
    for ((i, j), v) in g.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        dev = dev.max((v - target).abs());
    }
    dev
}

pub(crate) fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come back in descending order with matching eigenvector
/// columns. Householder tridiagonalisation followed by implicit QL.
pub fn sym_eigen(a: &SymMatrix) -> Result<(Vec<f64>, OrthoBasis)> {
    let n = a.dim();
    if n == 0 {
        return Ok((Vec::new(), OrthoBasis::from_unchecked(Array2::zeros((0, 0)))));
    }
    let mut v: Vec<f64> = a.a.iter().copied().collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vecs = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vecs[[row, col]] = v[row * n + src];
        }
    }
    for mut col in vecs.axis_iter_mut(Axis(1)) {
        fix_sign(col.view_mut());
    }
    Ok((values, OrthoBasis::from_unchecked(vecs)))
}

/// Flips `v` so that its entry of largest magnitude (first one on ties) is positive.
fn fix_sign(mut v: ndarray::ArrayViewMut1<'_, f64>) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

// Householder reduction to tridiagonal form (EISPACK tred2), row-major `v`.
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal form (EISPACK tql2).
fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 100 {
                    return Err(Error::invalid("symmetric eigensolver failed to converge"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Relative tolerance for the rank test in [`thin_qr`].
pub const QR_RANK_TOL: f64 = 1e-10;

/// Thin QR factorisation `t = q r` with `q` orthonormal (`p x m`) and `r`
/// upper triangular with nonnegative diagonal.
///
/// Rows of `t` that are identically zero stay exactly zero in `q`; the
/// Householder sweep only runs over the nonzero rows.
pub fn thin_qr(t: ArrayView2<'_, f64>) -> Result<(OrthoBasis, Array2<f64>)> {
    let (p, m) = t.dim();
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let rows = nonzero_rows(t);
    let tol = QR_RANK_TOL * frobenius(t);
    if rows.len() < m {
        let rank = rows.len().min(m);
        return Err(Error::RankDeficient {
            rank,
            cols: m,
            iteration: None,
        });
    }
    let k = rows.len();
    let mut a = Array2::zeros((k, m));
    for (r, &i) in rows.iter().enumerate() {
        a.row_mut(r).assign(&t.row(i));
    }

    let mut reflectors: Vec<Array1<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        let x = a.slice(s![j.., j]);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = x.to_owned();
        if norm > 0.0 {
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vnorm2 = v.iter().map(|z| z * z).sum::<f64>();
            if vnorm2 > 0.0 {
                let mut block = a.slice_mut(s![j.., j..]);
                for mut col in block.axis_iter_mut(Axis(1)) {
                    let dot = v.dot(&col);
                    let coef = 2.0 * dot / vnorm2;
                    col.scaled_add(-coef, &v);
                }
            } else {
                v.fill(0.0);
            }
        } else {
            v.fill(0.0);
        }
        reflectors.push(v);
    }

    let mut r = Array2::zeros((m, m));
    for i in 0..m {
        for j in i..m {
            r[[i, j]] = a[[i, j]];
        }
    }
    let rank = (0..m).filter(|&i| r[[i, i]].abs() > tol).count();
    if rank < m {
        return Err(Error::RankDeficient {
            rank,
            cols: m,
            iteration: None,
        });
    }

    let mut qk = Array2::zeros((k, m));
    for i in 0..m {
        qk[[i, i]] = 1.0;
    }
    for (j, v) in reflectors.iter().enumerate().rev() {
        let vnorm2 = v.iter().map(|z| z * z).sum::<f64>();
        if vnorm2 == 0.0 {
            continue;
        }
        let mut block = qk.slice_mut(s![j.., ..]);
        for mut col in block.axis_iter_mut(Axis(1)) {
            let dot = v.dot(&col);
            col.scaled_add(-2.0 * dot / vnorm2, v);
        }
    }
    for i in 0..m {
        if r[[i, i]] < 0.0 {
            r.row_mut(i).mapv_inplace(|x| -x);
            qk.column_mut(i).mapv_inplace(|x| -x);
        }
    }

    let mut q = Array2::zeros((p, m));
    for (r_idx, &i) in rows.iter().enumerate() {
        q.row_mut(i).assign(&qk.row(r_idx));
    }
    Ok((OrthoBasis::from_unchecked(q), r))
}

/// Squared sine of the largest principal angle between `ran(q1)` and
/// `ran(q2)`, equal to `‖q1 q1ᵀ − q2 q2ᵀ‖₂²`. Returns 1 when the subspaces
/// have different dimensions.
///
/// Computed as the top eigenvalue of `WᵀW` with `W = q2 − q1 (q1ᵀ q2)`,
/// which keeps full relative accuracy for nearly coincident subspaces.
pub fn largest_principal_angle_sin2(q1: &OrthoBasis, q2: &OrthoBasis) -> Result<f64> {
    if q1.nrows() != q2.nrows() {
        return Err(Error::invalid(format!(
            "bases have {} and {} rows",
            q1.nrows(),
            q2.nrows()
        )));
    }
    if q1.ncols() != q2.ncols() {
        return Ok(1.0);
    }
    if q1.ncols() == 0 {
        return Ok(0.0);
    }
    let cross = q1.q.t().dot(&q2.q);
    let resid = &q2.q - &q1.q.dot(&cross);
    let gram = resid.t().dot(&resid);
    let top = if gram.nrows() == 1 {
        gram[[0, 0]]
    } else {
        let (vals, _) = sym_eigen(&SymMatrix::new(gram)?)?;
        vals[0]
    };
    Ok(top.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn eigen_identity() {
        let (vals, _) = sym_eigen(&SymMatrix::identity(3)).unwrap();
        for v in vals {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eigen_diagonal_is_signed_permutation() {
        let a = SymMatrix::from_diag(&[1.0, 5.0, 2.0]).unwrap();
        let (vals, vecs) = sym_eigen(&a).unwrap();
        assert_eq!(vals, vec![5.0, 2.0, 1.0]);
        let expect = array![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert_abs_diff_eq!(vecs.into_inner(), expect, epsilon = 1e-14);
    }

    #[test]
    fn eigen_two_by_two() {
        let a = SymMatrix::new(array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let (vals, vecs) = sym_eigen(&a).unwrap();
        assert_abs_diff_eq!(vals[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
        let h = 0.5f64.sqrt();
        assert_abs_diff_eq!(vecs.column(0)[0], h, epsilon = 1e-14);
        assert_abs_diff_eq!(vecs.column(0)[1], h, epsilon = 1e-14);
    }

    #[test]
    fn eigen_rejects_non_finite() {
        assert!(SymMatrix::new(array![[1.0, f64::NAN], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn eigen_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 17, 40] {
            let b = random_matrix(&mut rng, n, n);
            let a = SymMatrix::new(&b + &b.t()).unwrap();
            let (vals, vecs) = sym_eigen(&a).unwrap();
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
            let v = vecs.view();
            let recon = v.dot(&Array2::from_diag(&Array1::from(vals.clone()))).dot(&v.t());
            let err = max_abs(&(&recon - &a.view()));
            assert!(err <= 1e-8 * a.frobenius_norm(), "n = {n}, err = {err}");
            assert!(vecs.orthonormality_defect() < 1e-12);
        }
    }

    #[test]
    fn qr_of_orthonormal_is_identity() {
        let h = 0.5f64.sqrt();
        let t = array![[h, 0.0], [h, 0.0], [0.0, 1.0]];
        let (q, r) = thin_qr(t.view()).unwrap();
        assert_abs_diff_eq!(q.into_inner(), t, epsilon = 1e-14);
        assert_abs_diff_eq!(r, Array2::eye(2), epsilon = 1e-14);
    }

    #[test]
    fn qr_scaled_columns() {
        let t = array![[2.0, 0.0], [0.0, 0.0], [0.0, 3.0]];
        let (q, r) = thin_qr(t.view()).unwrap();
        assert_eq!(q.view(), array![[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]);
        assert_eq!(r, array![[2.0, 0.0], [0.0, 3.0]]);
    }

    #[test]
    fn qr_random_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_matrix(&mut rng, 6, 2);
        let (q, r) = thin_qr(t.view()).unwrap();
        assert!(q.orthonormality_defect() <= 1e-10);
        let err = frobenius((&q.view().dot(&r) - &t).view());
        assert!(err <= 1e-10 * frobenius(t.view()));
        assert!(r[[0, 0]] >= 0.0 && r[[1, 1]] >= 0.0);
        assert_eq!(r[[1, 0]], 0.0);
    }

    #[test]
    fn qr_detects_rank_deficiency() {
        let t = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        match thin_qr(t.view()) {
            Err(Error::RankDeficient { rank, cols, .. }) => {
                assert_eq!(rank, 1);
                assert_eq!(cols, 2);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        let zero_col = array![[1.0, 0.0], [1.0, 0.0]];
        assert!(matches!(
            thin_qr(zero_col.view()),
            Err(Error::RankDeficient { rank: 1, .. })
        ));
    }

    #[test]
    fn qr_keeps_zero_rows_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = random_matrix(&mut rng, 10, 3);
        for i in [0, 4, 9] {
            t.row_mut(i).fill(0.0);
        }
        let (q, _) = thin_qr(t.view()).unwrap();
        assert_eq!(q.support(), vec![1, 2, 3, 5, 6, 7, 8]);
    }

    #[test]
    fn angle_examples() {
        let e1 = OrthoBasis::coordinate(2, &[0]).unwrap();
        let e2 = OrthoBasis::coordinate(2, &[1]).unwrap();
        let h = 0.5f64.sqrt();
        let diag = OrthoBasis::new(array![[h], [h]]).unwrap();
        assert_eq!(largest_principal_angle_sin2(&e1, &e1).unwrap(), 0.0);
        assert_abs_diff_eq!(largest_principal_angle_sin2(&e1, &e2).unwrap(), 1.0);
        assert_abs_diff_eq!(
            largest_principal_angle_sin2(&e1, &diag).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn angle_dimension_mismatch() {
        let a = OrthoBasis::coordinate(3, &[0]).unwrap();
        let b = OrthoBasis::coordinate(3, &[0, 1]).unwrap();
        assert_eq!(largest_principal_angle_sin2(&a, &b).unwrap(), 1.0);
        let c = OrthoBasis::coordinate(4, &[0]).unwrap();
        assert!(largest_principal_angle_sin2(&a, &c).is_err());
    }

    #[test]
    fn ortho_basis_validates() {
        assert!(OrthoBasis::new(array![[1.0, 1.0], [0.0, 1.0]]).is_err());
        assert!(OrthoBasis::new(array![[1.0, 0.0]]).is_err());
    }
}
