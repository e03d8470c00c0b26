//! Sample-level discrepancy estimators and their gradients.
//!
//! Three measures are provided, all evaluated on bounded samples `X` (n x N)
//! and `Y` (m x N):
//!
//! * `CMD_K`, the central moment discrepancy truncated after `K` orders.
//!   Term 1 is the range-normalized Euclidean distance between the means,
//!   term `k >= 2` the distance between coordinate-wise order-`k` central
//!   moments divided by `|b - a|^k`. Linear in `n + m`.
//! * Squared MMD with the Gaussian kernel `exp(-beta ||x - y||^2)`, as the
//!   biased V-statistic over full kernel matrices. Quadratic in `n + m`.
//! * MKL, a symmetrized KL divergence between the mean activation vectors.
//!
//! Gradients are taken with respect to the entries of `X` with `Y` held
//! fixed. Every measure is symmetric, so the gradient with respect to `Y`
//! is the same function with arguments swapped (see
//! [`DiscrepancyKind::grad_pair`]).

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samples::Sample;

/// Lower clamp applied to mean activations inside [`mkl`].
pub const MKL_EPS: f64 = 1e-8;

/// Which discrepancy plays the role of the domain regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "lowercase")]
pub enum DiscrepancyKind {
    Cmd { k: usize },
    Mmd { beta: f64 },
    Mkl,
}

impl DiscrepancyKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiscrepancyKind::Cmd { k } if k < 1 => {
                Err(Error::InvalidArgument(format!("CMD order K must be >= 1, got {k}")))
            }
            DiscrepancyKind::Mmd { beta } if !(beta > 0.0 && beta.is_finite()) => {
                Err(Error::InvalidArgument(format!("MMD beta must be > 0, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DiscrepancyKind::Cmd { .. } => "cmd",
            DiscrepancyKind::Mmd { .. } => "mmd",
            DiscrepancyKind::Mkl => "mkl",
        }
    }

    pub fn value(&self, x: &Sample, y: &Sample) -> Result<DiscrepancyValue> {
        match *self {
            DiscrepancyKind::Cmd { k } => cmd_k(x, y, k),
            DiscrepancyKind::Mmd { beta } => mmd2(x, y, beta).map(DiscrepancyValue::scalar),
            DiscrepancyKind::Mkl => mkl(x, y).map(DiscrepancyValue::scalar),
        }
    }

    /// Gradient with respect to the entries of `x`.
    pub fn grad(&self, x: &Sample, y: &Sample) -> Result<Array2<f64>> {
        match *self {
            DiscrepancyKind::Cmd { k } => cmd_k_grad(x, y, k),
            DiscrepancyKind::Mmd { beta } => mmd2_grad(x, y, beta),
            DiscrepancyKind::Mkl => mkl_grad(x, y),
        }
    }

    /// Gradients with respect to both arguments.
    pub fn grad_pair(&self, x: &Sample, y: &Sample) -> Result<(Array2<f64>, Array2<f64>)> {
        Ok((self.grad(x, y)?, self.grad(y, x)?))
    }
}

/// A discrepancy together with its weight `lambda` in the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySpec {
    pub kind: DiscrepancyKind,
    pub lambda: f64,
}

impl DiscrepancySpec {
    pub fn new(kind: DiscrepancyKind, lambda: f64) -> Result<Self> {
        let spec = Self { kind, lambda };
        spec.validate()?;
        Ok(spec)
    }

    pub fn cmd(k: usize, lambda: f64) -> Result<Self> {
        Self::new(DiscrepancyKind::Cmd { k }, lambda)
    }

    pub fn mmd(beta: f64, lambda: f64) -> Result<Self> {
        Self::new(DiscrepancyKind::Mmd { beta }, lambda)
    }

    pub fn mkl(lambda: f64) -> Result<Self> {
        Self::new(DiscrepancyKind::Mkl, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// A discrepancy value, with the per-order breakdown for CMD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyValue {
    pub value: f64,
    /// `per_term[0]` is the mean term, `per_term[k - 1]` the order-`k` term.
    pub per_term: Option<Vec<f64>>,
}

impl DiscrepancyValue {
    fn scalar(value: f64) -> Self {
        Self { value, per_term: None }
    }
}

fn check_compatible(x: &Sample, y: &Sample) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} and {} coordinates",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

fn check_same_bounds(x: &Sample, y: &Sample) -> Result<()> {
    check_compatible(x, y)?;
    let (a, b) = (x.bounds(), y.bounds());
    if a != b {
        return Err(Error::BoundsMismatch(a.lo(), a.hi(), b.lo(), b.hi()));
    }
    Ok(())
}

fn check_order(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("moment order must be >= 1".into()));
    }
    Ok(())
}

/// Coordinate-wise central moments of orders `1..=max_order` (divide by `n`).
/// Row `k - 1` holds order `k`; row 0 is identically zero.
fn central_moment_table(data: ArrayView2<'_, f64>, mean: ArrayView1<'_, f64>, max_order: usize) -> Array2<f64> {
    let (n, dim) = data.dim();
    let mut table = Array2::zeros((max_order, dim));
    for row in data.outer_iter() {
        for j in 0..dim {
            let d = row[j] - mean[j];
            let mut p = d;
            for k in 2..=max_order {
                p *= d;
                table[[k - 1, j]] += p;
            }
        }
    }
    table /= n as f64;
    table.row_mut(0).fill(0.0);
    table
}

/// Order-`k` sample central moments of each coordinate of `x`.
pub fn central_moments(x: &Sample, k: usize) -> Result<Array1<f64>> {
    check_order(k)?;
    let mean = x.mean();
    Ok(central_moment_table(x.data(), mean.view(), k).row(k - 1).to_owned())
}

fn distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// `CMD_K(X, Y)` with its per-order terms. Never forms a pairwise matrix.
pub fn cmd_k(x: &Sample, y: &Sample, k: usize) -> Result<DiscrepancyValue> {
    check_same_bounds(x, y)?;
    check_order(k)?;
    let width = x.bounds().width();
    let (mx, my) = (x.mean(), y.mean());
    let cx = central_moment_table(x.data(), mx.view(), k);
    let cy = central_moment_table(y.data(), my.view(), k);

    let mut per_term = Vec::with_capacity(k);
    per_term.push(distance(mx.view(), my.view()) / width);
    let mut scale = width;
    for order in 2..=k {
        scale *= width;
        per_term.push(distance(cx.row(order - 1), cy.row(order - 1)) / scale);
    }
    Ok(DiscrepancyValue {
        value: per_term.iter().sum(),
        per_term: Some(per_term),
    })
}

/// Gradient of [`cmd_k`] with respect to the entries of `x`.
///
/// A term whose moment difference is exactly zero contributes nothing.
pub fn cmd_k_grad(x: &Sample, y: &Sample, k: usize) -> Result<Array2<f64>> {
    check_same_bounds(x, y)?;
    check_order(k)?;
    let (n, dim) = (x.len(), x.dim());
    let width = x.bounds().width();
    let (mx, my) = (x.mean(), y.mean());
    let cx = central_moment_table(x.data(), mx.view(), k);
    let cy = central_moment_table(y.data(), my.view(), k);
    let inv_n = 1.0 / n as f64;

    // coef[k-1][j]: d term_k / d C_k(X)_j (for k = 1, with respect to the mean)
    let mut coef = Array2::<f64>::zeros((k, dim));
    let mean_diff = &mx - &my;
    let norm = distance(mx.view(), my.view());
    if norm > 0.0 {
        coef.row_mut(0).assign(&(&mean_diff / (width * norm)));
    }
    let mut scale = width;
    for order in 2..=k {
        scale *= width;
        let diff = &cx.row(order - 1) - &cy.row(order - 1);
        let norm = distance(cx.row(order - 1), cy.row(order - 1));
        if norm > 0.0 {
            coef.row_mut(order - 1).assign(&(&diff / (scale * norm)));
        }
    }

    // d C_k(X)_j / d x_ij = (k / n) ((x_ij - mu_j)^(k-1) - C_{k-1}(X)_j);
    // the C_{k-1} correction is the dependence of the centering on x_ij.
    let mut grad = Array2::zeros((n, dim));
    for (i, row) in x.data().outer_iter().enumerate() {
        for j in 0..dim {
            let d = row[j] - mx[j];
            let mut g = coef[[0, j]];
            let mut p = 1.0; // d^(order-1)
            for order in 2..=k {
                p *= d;
                let c = coef[[order - 1, j]];
                if c != 0.0 {
                    g += c * order as f64 * (p - cx[[order - 2, j]]);
                }
            }
            grad[[i, j]] = g * inv_n;
        }
    }
    Ok(grad)
}

/// Closed-form upper bound on the order-`k` CMD term for samples in `N` dimensions:
/// `2 sqrt(N) (1/(k+1) (k/(k+1))^k + 2^-(1+k))`.
pub fn cmd_term_bound(k: usize, dim: usize) -> Result<f64> {
    if k < 1 || dim < 1 {
        return Err(Error::InvalidArgument(format!(
            "bound needs k >= 1 and N >= 1, got k = {k}, N = {dim}"
        )));
    }
    let kf = k as f64;
    let body = (kf / (kf + 1.0)).powi(k as i32) / (kf + 1.0) + 0.5f64.powi(k as i32 + 1);
    Ok(2.0 * (dim as f64).sqrt() * body)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Sum of `exp(-beta ||a_i - b_j||^2)` over all pairs, accumulated row by row.
fn kernel_sum(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, beta: f64) -> f64 {
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let dim = a.ncols();
    let a_rows: Vec<&[f64]> = a.as_slice().unwrap().chunks_exact(dim).collect();
    let b_flat = b.as_slice().unwrap();
    let row_sum = |ai: &&[f64]| -> f64 { b_flat.chunks_exact(dim).map(|bj| (-beta * sq_dist(ai, bj)).exp()).sum() };
    crate::par::map(&a_rows, row_sum).into_iter().sum()
}

/// Total order on samples used to make MMD bit-exactly symmetric.
fn sample_order(x: &Sample, y: &Sample) -> Ordering {
    x.len().cmp(&y.len()).then_with(|| {
        x.data()
            .iter()
            .zip(y.data().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Squared MMD with a Gaussian kernel, biased V-statistic (self-pairs included).
/// The raw value is returned; round-off can make it slightly negative.
pub fn mmd2(x: &Sample, y: &Sample, beta: f64) -> Result<f64> {
    check_compatible(x, y)?;
    DiscrepancyKind::Mmd { beta }.validate()?;
    let (a, b) = match sample_order(x, y) {
        Ordering::Greater => (y, x),
        _ => (x, y),
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let kaa = kernel_sum(a.data(), a.data(), beta) / (na * na);
    let kab = kernel_sum(a.data(), b.data(), beta) / (na * nb);
    let kbb = kernel_sum(b.data(), b.data(), beta) / (nb * nb);
    Ok(kaa - 2.0 * kab + kbb)
}

/// Gradient of [`mmd2`] with respect to the entries of `x`.
pub fn mmd2_grad(x: &Sample, y: &Sample, beta: f64) -> Result<Array2<f64>> {
    check_compatible(x, y)?;
    DiscrepancyKind::Mmd { beta }.validate()?;
    let (n, m, dim) = (x.len(), y.len(), x.dim());
    let xs = x.data().as_standard_layout().into_owned();
    let ys = y.data().as_standard_layout().into_owned();
    let xf = xs.as_slice().unwrap();
    let yf = ys.as_slice().unwrap();
    // d/dx_i: (2/n^2) sum_j dk(x_i,x_j) - (2/(n m)) sum_l dk(x_i,y_l),
    // with dk(u,v)/du = -2 beta (u - v) k(u,v).
    let self_w = -4.0 * beta / (n * n) as f64;
    let cross_w = 4.0 * beta / (n * m) as f64;
    let mut grad = Array2::zeros((n, dim));
    let mut acc = vec![0.0; dim];
    for (i, xi) in xf.chunks_exact(dim).enumerate() {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for xj in xf.chunks_exact(dim) {
            let w = self_w * (-beta * sq_dist(xi, xj)).exp();
            for d in 0..dim {
                acc[d] += w * (xi[d] - xj[d]);
            }
        }
        for yl in yf.chunks_exact(dim) {
            let w = cross_w * (-beta * sq_dist(xi, yl)).exp();
            for d in 0..dim {
                acc[d] += w * (xi[d] - yl[d]);
            }
        }
        grad.row_mut(i).assign(&ArrayView1::from(&acc[..]));
    }
    Ok(grad)
}

fn clamped_mean(x: &Sample) -> Array1<f64> {
    x.mean().mapv(|v| v.max(MKL_EPS))
}

/// Symmetrized KL between mean activations:
/// `sum_i E(X)_i ln(E(X)_i / E(Y)_i) + E(Y)_i ln(E(Y)_i / E(X)_i)`.
pub fn mkl(x: &Sample, y: &Sample) -> Result<f64> {
    check_compatible(x, y)?;
    let (p, q) = (clamped_mean(x), clamped_mean(y));
    Ok(p.iter()
        .zip(q.iter())
        .map(|(&p, &q)| p * (p / q).ln() + q * (q / p).ln())
        .sum())
}

/// Gradient of [`mkl`] with respect to the entries of `x`. Coordinates whose
/// mean sits below the clamp get zero gradient.
pub fn mkl_grad(x: &Sample, y: &Sample) -> Result<Array2<f64>> {
    check_compatible(x, y)?;
    let raw = x.mean();
    let q = clamped_mean(y);
    let inv_n = 1.0 / x.len() as f64;
    let dmean = ndarray::Zip::from(&raw).and(&q).map_collect(|&p, &q| {
        if p < MKL_EPS {
            0.0
        } else {
            ((p / q).ln() + 1.0 - q / p) * inv_n
        }
    });
    Ok(dmean
        .insert_axis(Axis(0))
        .broadcast((x.len(), x.dim()))
        .unwrap()
        .to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::Bounds;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn unit(data: Array2<f64>) -> Sample {
        Sample::new(data, Bounds::unit()).unwrap()
    }

    #[test]
    fn central_moment_examples() {
        let x = unit(array![[0.0], [1.0]]);
        assert_eq!(central_moments(&x, 2).unwrap().to_vec(), vec![0.25]);
        assert_eq!(central_moments(&x, 4).unwrap().to_vec(), vec![0.0625]);
        assert_eq!(central_moments(&x, 1).unwrap().to_vec(), vec![0.0]);
        let y = unit(array![[0.1, 0.7], [0.3, 0.2], [0.9, 0.4]]);
        assert_eq!(central_moments(&y, 1).unwrap().to_vec(), vec![0.0, 0.0]);
        assert!(central_moments(&y, 0).is_err());
    }

    #[test]
    fn cmd_fixtures() {
        let x = unit(array![[0.2], [0.4]]);
        let y = unit(array![[0.6], [0.8]]);
        let v = cmd_k(&x, &y, 5).unwrap();
        assert_abs_diff_eq!(v.value, 0.4, epsilon = 1e-12);
        let terms = v.per_term.unwrap();
        assert_abs_diff_eq!(terms[0], 0.4, epsilon = 1e-12);
        for t in &terms[1..] {
            assert_abs_diff_eq!(*t, 0.0, epsilon = 1e-12);
        }

        let x = unit(array![[0.0], [1.0]]);
        let y = unit(array![[0.5], [0.5]]);
        let v = cmd_k(&x, &y, 5).unwrap();
        assert_abs_diff_eq!(v.value, 0.3125, epsilon = 1e-12);
        let expected = [0.0, 0.25, 0.0, 0.0625, 0.0];
        for (t, e) in v.per_term.unwrap().iter().zip(expected) {
            assert_abs_diff_eq!(*t, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn cmd_normalizes_by_range() {
        // same configuration scaled onto [0, 2]: term k picks up 2^k / 2^k
        let b = Bounds::new(0.0, 2.0).unwrap();
        let x = Sample::new(array![[0.0], [2.0]], b).unwrap();
        let y = Sample::new(array![[1.0], [1.0]], b).unwrap();
        assert_abs_diff_eq!(cmd_k(&x, &y, 5).unwrap().value, 0.3125, epsilon = 1e-12);
    }

    #[test]
    fn cmd_identity_and_errors() {
        let x = unit(array![[0.1, 0.5], [0.3, 0.9], [0.7, 0.2]]);
        let v = cmd_k(&x, &x, 6).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(v.per_term.unwrap().iter().all(|&t| t == 0.0));

        let y = unit(array![[0.1], [0.3]]);
        assert!(matches!(cmd_k(&x, &y, 5), Err(Error::DimensionMismatch(_))));
        let z = Sample::new(array![[0.1, 0.5]], Bounds::new(-1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(cmd_k(&x, &z, 5), Err(Error::BoundsMismatch(..))));
        assert!(cmd_k(&x, &x, 0).is_err());
    }

    #[test]
    fn cmd_grad_is_zero_at_identity() {
        let x = unit(array![[0.1, 0.5], [0.3, 0.9], [0.7, 0.2]]);
        let g = cmd_k_grad(&x, &x, 5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cmd_grad_mean_term_only() {
        // identical shapes, shifted: only the mean term is nonzero
        // dyadic values keep the centered samples bit-identical
        let x = unit(array![[0.5, 0.625], [0.75, 0.875], [0.625, 0.75]]);
        let y = x.data().mapv(|v| v - 0.25);
        let y = unit(y);
        let g = cmd_k_grad(&x, &y, 5).unwrap();
        let diff = &x.mean() - &y.mean();
        let norm = diff.dot(&diff).sqrt();
        for row in g.outer_iter() {
            for j in 0..2 {
                let want = diff[j] / (3.0 * norm);
                assert_abs_diff_eq!(row[j], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn mmd_fixtures() {
        let x = unit(array![[0.0]]);
        let y = unit(array![[1.0]]);
        assert_abs_diff_eq!(mmd2(&x, &y, 1.0).unwrap(), 2.0 - 2.0 * (-1.0f64).exp(), epsilon = 1e-12);

        let x = unit(array![[0.0], [1.0]]);
        let y = unit(array![[0.0]]);
        assert_abs_diff_eq!(
            mmd2(&x, &y, 1.0).unwrap(),
            1.0 - (1.0 + (-1.0f64).exp()) / 2.0,
            epsilon = 1e-12
        );
        assert_eq!(mmd2(&x, &x, 0.7).unwrap(), 0.0);
        assert!(mmd2(&x, &y, 0.0).is_err());
    }

    #[test]
    fn mmd_is_exactly_symmetric() {
        let x = unit(array![[0.1, 0.2], [0.3, 0.9], [0.5, 0.5]]);
        let y = unit(array![[0.8, 0.1], [0.2, 0.4]]);
        assert_eq!(mmd2(&x, &y, 1.3).unwrap(), mmd2(&y, &x, 1.3).unwrap());
    }

    #[test]
    fn mmd_grad_single_points() {
        let x = unit(array![[0.2, 0.9]]);
        let y = unit(array![[0.7, 0.4]]);
        let beta = 1.5;
        let g = mmd2_grad(&x, &y, beta).unwrap();
        let d2 = 0.5f64 * 0.5 + 0.5 * 0.5;
        let k = (-beta * d2).exp();
        assert_abs_diff_eq!(g[[0, 0]], 4.0 * beta * k * (0.2 - 0.7), epsilon = 1e-14);
        assert_abs_diff_eq!(g[[0, 1]], 4.0 * beta * k * (0.9 - 0.4), epsilon = 1e-14);
    }

    #[test]
    fn mmd_grad_zero_at_identity() {
        let x = unit(array![[0.1, 0.2], [0.3, 0.9], [0.5, 0.5]]);
        let g = mmd2_grad(&x, &x, 2.0).unwrap();
        for v in g.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn mkl_fixtures() {
        let x = unit(array![[0.5]]);
        let y = unit(array![[0.25]]);
        let want = 0.25 * 2f64.ln();
        assert_abs_diff_eq!(mkl(&x, &y).unwrap(), want, epsilon = 1e-12);
        let x2 = unit(array![[0.5, 0.5]]);
        let y2 = unit(array![[0.25, 0.25]]);
        assert_abs_diff_eq!(mkl(&x2, &y2).unwrap(), 2.0 * want, epsilon = 1e-12);
        let a = unit(array![[0.2], [0.6]]);
        let b = unit(array![[0.4], [0.4]]);
        assert_eq!(mkl(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn mkl_survives_zero_means() {
        let x = unit(array![[0.0]]);
        let y = unit(array![[0.5]]);
        let v = mkl(&x, &y).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(mkl_grad(&x, &y).unwrap().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn mkl_grad_closed_form() {
        let x = unit(array![[0.4], [0.6], [0.5]]);
        let y = unit(array![[0.2], [0.3]]);
        let (p, q) = (0.5f64, 0.25f64);
        let want = ((p / q).ln() + 1.0 - q / p) / 3.0;
        for g in mkl_grad(&x, &y).unwrap().iter() {
            assert_abs_diff_eq!(*g, want, epsilon = 1e-14);
        }
        let g = mkl_grad(&y, &y).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bound_examples() {
        assert_abs_diff_eq!(cmd_term_bound(1, 1).unwrap(), 1.0, epsilon = 1e-15);
        let b2 = 8.0 / 27.0 + 0.25;
        assert_abs_diff_eq!(cmd_term_bound(2, 1).unwrap(), b2, epsilon = 1e-15);
        assert_abs_diff_eq!(cmd_term_bound(2, 4).unwrap(), 2.0 * b2, epsilon = 1e-15);
        assert!(cmd_term_bound(0, 1).is_err());
        assert!(cmd_term_bound(1, 0).is_err());
    }

    #[test]
    fn bound_decreases_to_zero() {
        for dim in [1, 3, 10] {
            for k in 1..60 {
                assert!(cmd_term_bound(k + 1, dim).unwrap() < cmd_term_bound(k, dim).unwrap());
            }
            let s = 2.0 * (dim as f64).sqrt();
            assert!(cmd_term_bound(50, dim).unwrap() < s * 0.5f64.powi(50) + s / 51.0);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(DiscrepancySpec::cmd(0, 1.0).is_err());
        assert!(DiscrepancySpec::mmd(-1.0, 1.0).is_err());
        assert!(DiscrepancySpec::mkl(-0.1).is_err());
        assert!(DiscrepancySpec::cmd(5, 0.0).is_ok());
    }

    #[test]
    fn spec_json_shape() {
        let s = DiscrepancySpec::cmd(5, 1.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":{"measure":"cmd","k":5},"lambda":1.0}"#);
        let back: DiscrepancySpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
