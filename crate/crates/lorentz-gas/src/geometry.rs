//! Small d-dimensional vector helpers used across the crate.
//!
//! Dimensions are runtime values (`d >= 2`), so vectors are plain `Vec<f64>`
//! slices rather than fixed-size arrays.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// Returns `a + s * b`.
pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Unit vector along `a`. Returns `None` for the zero vector.
pub fn unit(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n == 0.0 {
        return None;
    }
    Some(a.iter().map(|x| x / n).collect())
}

/// Uniform point in the closed ball of the given radius in `dim` dimensions.
///
/// Gaussian direction plus a `u^(1/dim)` radius, so it stays exact in any
/// dimension (no rejection loop).
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    assert!(dim >= 1);
    let mut g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let mut n = norm(&g);
    while n == 0.0 {
        g = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        n = norm(&g);
    }
    let u: f64 = rng.random::<f64>();
    let r = radius * u.powf(1.0 / dim as f64);
    g.iter_mut().for_each(|x| *x *= r / n);
    g
}

/// Embeds `(d-1)`-dimensional coordinates into the hyperplane orthogonal to
/// the unit vector `dir` in d dimensions.
///
/// Uses the Householder reflection mapping `sign * e_1` to `dir`; its columns
/// 2..d form an orthonormal basis of the orthogonal complement, so the result
/// satisfies `result . dir == 0` to rounding and preserves the Euclidean norm.
pub fn embed_orthogonal(dir: &[f64], coords: &[f64]) -> Vec<f64> {
    let d = dir.len();
    assert_eq!(coords.len(), d - 1, "need d-1 in-plane coordinates");
    // Householder vector u = dir - sign*e1 with sign chosen away from dir[0]
    // so that u never degenerates.
    let sign = if dir[0] >= 0.0 { -1.0 } else { 1.0 };
    let mut u = dir.to_vec();
    u[0] -= sign;
    let uu = norm_sq(&u);
    // c . u over the embedded slots (columns j = 2..d).
    let cu: f64 = (1..d).map(|j| u[j] * coords[j - 1]).sum();
    let f = 2.0 * cu / uu;
    let mut out = vec![0.0; d];
    for (i, o) in out.iter_mut().enumerate() {
        let base = if i >= 1 { coords[i - 1] } else { 0.0 };
        *o = base - f * u[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn embed_is_orthogonal_and_isometric() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for d in 2..=5 {
            for _ in 0..50 {
                let dir = unit(&sample_ball(&mut rng, d, 1.0)).unwrap();
                let coords = sample_ball(&mut rng, d - 1, 0.5);
                let v = embed_orthogonal(&dir, &coords);
                assert!(dot(&v, &dir).abs() < 1e-14);
                assert!((norm(&v) - norm(&coords)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ball_samples_inside() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let v = sample_ball(&mut rng, 3, 0.5);
            assert!(norm(&v) <= 0.5 + 1e-15);
        }
    }
}
