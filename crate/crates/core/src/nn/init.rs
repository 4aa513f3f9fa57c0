use rand::Rng;
use rand_distr::StandardNormal;

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gain {
    Linear,
    Relu,
}

impl Gain {
    pub fn value(self) -> f64 {
        match self {
            Gain::Linear => 1.0,
            Gain::Relu => std::f64::consts::SQRT_2,
        }
    }
}

/// A `rows × cols` matrix with orthonormal rows (or columns, whichever are
/// fewer), scaled by `gain`. Gaussian draws are orthonormalized with
/// modified Gram-Schmidt.
pub fn orthogonal<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, gain: Gain, rng: &mut R) -> Vec<T> {
    let (count, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for i in 0..count {
        let (done, rest) = vecs.split_at_mut(i);
        let v = &mut rest[0];
        for u in done.iter() {
            let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    let g = gain.value();
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let x = if rows <= cols { vecs[r][c] } else { vecs[c][r] };
            out[r * cols + c] = T::from_f64(g * x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn gram(m: &[f64], rows: usize, cols: usize, by_rows: bool) -> Vec<f64> {
        let n = if by_rows { rows } else { cols };
        let at = |i: usize, j: usize| if by_rows { m[i * cols + j] } else { m[j * cols + i] };
        let len = if by_rows { cols } else { rows };
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                g[a * n + b] = (0..len).map(|k| at(a, k) * at(b, k)).sum();
            }
        }
        g
    }

    #[test]
    fn orthonormal_in_both_orientations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for (rows, cols) in [(3, 7), (7, 3), (5, 5)] {
            let m: Vec<f64> = orthogonal(rows, cols, Gain::Linear, &mut rng);
            let g = gram(&m, rows, cols, rows <= cols);
            let n = rows.min(cols);
            for a in 0..n {
                for b in 0..n {
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((g[a * n + b] - want).abs() < 1e-10);
                }
            }
        }
    }
}
