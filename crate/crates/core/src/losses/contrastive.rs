//! Batched contrastive losses over a matrix of unit-norm embeddings.
//!
//! Row layout: agent views first (siblings at 2i and 2i+1), then expert
//! views. Every anchor contrasts against all other rows of the matrix it
//! is given, so the unsupervised loss receives only the agent rows.

use crate::error::{Error, Result};
use crate::nn::Scalar;

/// A loss value and its gradient with respect to the embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub value: T,
    pub grad: Vec<T>,
}

/// Both endpoint terms of the calibrated loss and their mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated<T> {
    pub mixed: LossGrad<T>,
    /// Mean supervised term over agent anchors (the value at alpha = 1).
    pub supervised: T,
    /// Mean sibling-InfoNCE term over agent anchors (the value at alpha = 0).
    pub paired: T,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature must be positive, got {tau}")))
    }
}

/// `S = Z Zᵀ / τ` for `rows` embeddings of width `dim`.
fn similarities<T: Scalar>(z: &[T], rows: usize, dim: usize, tau: f64) -> Vec<T> {
    assert_eq!(z.len(), rows * dim, "embedding matrix size");
    let mut s = vec![T::zero(); rows * rows];
    T::gemm(false, true, rows, rows, dim, T::from_f64(1.0 / tau), z, z, T::zero(), &mut s);
    s
}

/// Mean over `anchors` of `LSE_{j≠a} S[a,j] − mean_{p∈P(a)} S[a,p]`, and
/// its gradient with respect to `S`.
fn anchor_mean<T: Scalar>(
    s: &[T],
    rows: usize,
    anchors: &[usize],
    positives: impl Fn(usize) -> Vec<usize>,
) -> (T, Vec<T>) {
    let mut ds = vec![T::zero(); rows * rows];
    let mut total = T::zero();
    let scale = T::one() / T::from_f64(anchors.len() as f64);
    for &a in anchors {
        let row = &s[a * rows..(a + 1) * rows];
        let max = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != a)
            .map(|(_, &v)| v)
            .fold(T::from_f64(f64::NEG_INFINITY), T::max);
        let mut denom = T::zero();
        for (j, &v) in row.iter().enumerate() {
            if j != a {
                denom += (v - max).exp();
            }
        }
        let lse = max + denom.ln();
        let pos = positives(a);
        let inv_p = T::one() / T::from_f64(pos.len() as f64);
        let pos_mean = pos.iter().map(|&p| row[p]).sum::<T>() * inv_p;
        // Grouped so equal similarities cancel before the log term is added.
        total += (max - pos_mean) + denom.ln();
        let drow = &mut ds[a * rows..(a + 1) * rows];
        for (j, &v) in row.iter().enumerate() {
            if j != a {
                drow[j] += scale * (v - lse).exp();
            }
        }
        for &p in &pos {
            drow[p] -= scale * inv_p;
        }
    }
    (total * scale, ds)
}

/// `dZ = (dS + dSᵀ) Z / τ`
fn embedding_grad<T: Scalar>(ds: &[T], z: &[T], rows: usize, dim: usize, tau: f64) -> Vec<T> {
    let mut sym = ds.to_vec();
    for i in 0..rows {
        for j in 0..rows {
            sym[i * rows + j] += ds[j * rows + i];
        }
    }
    let mut dz = vec![T::zero(); rows * dim];
    T::gemm(false, false, rows, dim, rows, T::from_f64(1.0 / tau), &sym, z, T::zero(), &mut dz);
    dz
}

/// Unsupervised loss over `2n` agent embeddings: each view's positive is
/// its sibling and its contrast set is every other agent view.
pub fn unsup_con_loss<T: Scalar>(z_agent: &[T], n: usize, dim: usize, tau: f64) -> Result<LossGrad<T>> {
    check_tau(tau)?;
    if n < 1 {
        return Err(Error::BatchTooSmall("need at least one agent source".into()));
    }
    let rows = 2 * n;
    let s = similarities(z_agent, rows, dim, tau);
    let anchors: Vec<usize> = (0..rows).collect();
    let (value, ds) = anchor_mean(&s, rows, &anchors, |a| vec![a ^ 1]);
    Ok(LossGrad {
        value,
        grad: embedding_grad(&ds, z_agent, rows, dim, tau),
    })
}

/// Supervised loss with expert anchors: positives are the other expert
/// views, the contrast set is all `3n − 1` other views.
pub fn sup_con_loss<T: Scalar>(z_all: &[T], n: usize, dim: usize, tau: f64) -> Result<LossGrad<T>> {
    check_tau(tau)?;
    if n < 2 {
        return Err(Error::BatchTooSmall(format!(
            "supervised contrast needs at least 2 expert views, got {n}"
        )));
    }
    let rows = 3 * n;
    let s = similarities(z_all, rows, dim, tau);
    let anchors: Vec<usize> = (2 * n..rows).collect();
    let (value, ds) = anchor_mean(&s, rows, &anchors, |a| {
        (2 * n..rows).filter(|&e| e != a).collect()
    });
    Ok(LossGrad {
        value,
        grad: embedding_grad(&ds, z_all, rows, dim, tau),
    })
}

/// Calibrated loss with agent anchors:
/// `alpha·[positives = experts ∪ {sibling}] + (1 − alpha)·[positive = sibling]`,
/// both contrasting against all other views.
pub fn c_sup_con_loss<T: Scalar>(z_all: &[T], n: usize, dim: usize, alpha: f64, tau: f64) -> Result<Calibrated<T>> {
    check_tau(tau)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if n < 1 {
        return Err(Error::BatchTooSmall("need at least one agent source".into()));
    }
    let rows = 3 * n;
    let s = similarities(z_all, rows, dim, tau);
    let anchors: Vec<usize> = (0..2 * n).collect();
    let (supervised, ds_sup) = anchor_mean(&s, rows, &anchors, |a| {
        let mut p: Vec<usize> = (2 * n..rows).collect();
        p.push(a ^ 1);
        p
    });
    let (paired, ds_pair) = anchor_mean(&s, rows, &anchors, |a| vec![a ^ 1]);
    let (wa, wb) = (T::from_f64(alpha), T::from_f64(1.0 - alpha));
    let ds: Vec<T> = ds_sup.iter().zip(&ds_pair).map(|(&x, &y)| wa * x + wb * y).collect();
    Ok(Calibrated {
        mixed: LossGrad {
            value: wa * supervised + wb * paired,
            grad: embedding_grad(&ds, z_all, rows, dim, tau),
        },
        supervised,
        paired,
    })
}
