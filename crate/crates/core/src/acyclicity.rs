//! Log-determinant acyclicity surrogate on an M-matrix transformation,
//! h(W) = -log det(sI - W∘W) + d log s, with its gradient and the coupled
//! elementwise-l2 pooling variant.

use crate::error::{Error, Result};
use crate::linalg::{lu_positive_pivots, LuFactors};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcyclicityMode {
    Separate,
    Coupled,
}

impl AcyclicityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AcyclicityMode::Separate => "separate",
            AcyclicityMode::Coupled => "coupled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "separate" => Ok(AcyclicityMode::Separate),
            "coupled" => Ok(AcyclicityMode::Coupled),
            other => Err(Error::param(format!(
                "unknown acyclicity mode `{other}` (expected separate|coupled)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AcyclicityConfig {
    pub s: f64,
    pub mode: AcyclicityMode,
    pub epsilon: f64,
}

impl Default for AcyclicityConfig {
    fn default() -> Self {
        AcyclicityConfig {
            s: 1.0,
            mode: AcyclicityMode::Separate,
            epsilon: 1e-8,
        }
    }
}

fn m_matrix(w: &Array2<f64>, s: f64) -> Result<Array2<f64>> {
    if s <= 0.0 {
        return Err(Error::param(format!("log-det parameter s must be > 0, got {s}")));
    }
    let d = w.nrows();
    if w.ncols() != d {
        return Err(Error::param(format!(
            "weight matrix must be square, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    let mut a = w.mapv(|v| -v * v);
    for k in 0..d {
        a[(k, k)] += s;
    }
    Ok(a)
}

fn factor(w: &Array2<f64>, s: f64) -> Result<LuFactors> {
    lu_positive_pivots(&m_matrix(w, s)?)
}

/// h(W) = -log det(sI - W∘W) + d log s. Zero exactly when the support of W
/// is acyclic; positive otherwise inside the M-matrix domain.
pub fn h_ldet(w: &Array2<f64>, s: f64) -> Result<f64> {
    let f = factor(w, s)?;
    Ok(-f.log_det() + w.nrows() as f64 * s.ln())
}

/// Gradient of [`h_ldet`]: 2 ((sI - W∘W)^{-1})^T ∘ W, diagonal forced to zero.
pub fn h_ldet_grad(w: &Array2<f64>, s: f64) -> Result<Array2<f64>> {
    Ok(h_ldet_with_grad(w, s)?.1)
}

/// Value and gradient from a single factorization.
pub fn h_ldet_with_grad(w: &Array2<f64>, s: f64) -> Result<(f64, Array2<f64>)> {
    let f = factor(w, s)?;
    let d = w.nrows();
    let h = -f.log_det() + d as f64 * s.ln();
    let inv = f.inverse();
    let mut grad = Array2::zeros((d, d));
    for k in 0..d {
        for j in 0..d {
            if k != j {
                grad[(k, j)] = 2.0 * inv[(j, k)] * w[(k, j)];
            }
        }
    }
    Ok((h, grad))
}

/// True iff sI - W∘W passes the positive-pivot domain check.
pub fn in_domain(w: &Array2<f64>, s: f64) -> bool {
    factor(w, s).is_ok()
}

/// Elementwise l2 pooling: sqrt(w0^2 + w1^2 + epsilon).
pub fn pool_coupled(w0: &Array2<f64>, w1: &Array2<f64>, epsilon: f64) -> Result<Array2<f64>> {
    if w0.dim() != w1.dim() {
        return Err(Error::param(format!(
            "pooled matrices must share a shape, got {:?} vs {:?}",
            w0.dim(),
            w1.dim()
        )));
    }
    if epsilon < 0.0 {
        return Err(Error::param(format!("pooling epsilon must be >= 0, got {epsilon}")));
    }
    let mut out = Array2::zeros(w0.raw_dim());
    for ((idx, &a), &b) in w0.indexed_iter().zip(w1.iter()) {
        out[idx] = (a * a + b * b + epsilon).sqrt();
    }
    Ok(out)
}

/// Coupled-mode h on the pooled matrix, with gradients w.r.t. both inputs.
///
/// Since only squares of the pooled entries enter sI - W~∘W~, the chain rule
/// collapses to 2 (inv)^T ∘ W_k for each input matrix.
pub fn coupled_h_and_grads(
    w0: &Array2<f64>,
    w1: &Array2<f64>,
    s: f64,
    epsilon: f64,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let pooled = pool_coupled(w0, w1, epsilon)?;
    let f = factor(&pooled, s)?;
    let d = w0.nrows();
    let h = -f.log_det() + d as f64 * s.ln();
    let inv = f.inverse();
    let mut g0 = Array2::zeros((d, d));
    let mut g1 = Array2::zeros((d, d));
    for k in 0..d {
        for j in 0..d {
            if k != j {
                g0[(k, j)] = 2.0 * inv[(j, k)] * w0[(k, j)];
                g1[(k, j)] = 2.0 * inv[(j, k)] * w1[(k, j)];
            }
        }
    }
    Ok((h, g0, g1))
}

/// Domain check for the coupled mode.
pub fn coupled_in_domain(w0: &Array2<f64>, w1: &Array2<f64>, s: f64, epsilon: f64) -> bool {
    pool_coupled(w0, w1, epsilon)
        .and_then(|pooled| factor(&pooled, s))
        .is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_er;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_grad(w: &Array2<f64>, s: f64, step: f64) -> Array2<f64> {
        let d = w.nrows();
        let mut g = Array2::zeros((d, d));
        for k in 0..d {
            for j in 0..d {
                if k == j {
                    continue;
                }
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[(k, j)] += step;
                wm[(k, j)] -= step;
                g[(k, j)] = (h_ldet(&wp, s).unwrap() - h_ldet(&wm, s).unwrap()) / (2.0 * step);
            }
        }
        g
    }

    #[test]
    fn zero_matrix_has_zero_h_any_s() {
        for &(d, s) in &[(2usize, 1.0), (5, 1.0), (5, 2.5), (10, 0.7)] {
            let w = Array2::<f64>::zeros((d, d));
            assert_relative_eq!(h_ldet(&w, s).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_edge_is_exactly_acyclic() {
        let w = array![[0.0, 3.0], [0.0, 0.0]];
        assert_relative_eq!(h_ldet(&w, 1.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_cycle_half_weights_hand_value() {
        let w = array![[0.0, 0.5], [0.5, 0.0]];
        // -ln(1 - 0.5^4) = -ln(0.9375)
        assert_relative_eq!(
            h_ldet(&w, 1.0).unwrap(),
            0.06453852113757117,
            epsilon = 1e-12
        );
    }

    #[test]
    fn dag_supported_weights_give_zero_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..20 {
            let d = 3 + (seed as usize % 13);
            let g = generate_er(d, 0.4, seed).unwrap();
            let mut w = Array2::zeros((d, d));
            for &(k, j) in g.edges() {
                w[(k, j)] = rng.random_range(-10.0..10.0);
            }
            let h = h_ldet(&w, 1.0).unwrap();
            assert!(h.abs() < 1e-9, "h = {h} on a DAG support");
        }
    }

    #[test]
    fn cycles_give_positive_h_and_sign_invariance() {
        let w = array![[0.0, 0.6], [0.4, 0.0]];
        let h = h_ldet(&w, 1.0).unwrap();
        assert!(h > 0.0);
        let neg = w.mapv(|v| -v);
        assert_relative_eq!(h_ldet(&neg, 1.0).unwrap(), h, epsilon = 1e-14);
    }

    #[test]
    fn out_of_domain_is_domain_error() {
        let w = array![[0.0, 1.5], [1.5, 0.0]];
        assert!(matches!(h_ldet(&w, 1.0), Err(Error::Domain(_))));
        assert!(matches!(h_ldet_grad(&w, 1.0), Err(Error::Domain(_))));
        assert!(!in_domain(&w, 1.0));
    }

    #[test]
    fn grad_zero_matrix_and_fd_agreement() {
        let w = Array2::<f64>::zeros((3, 3));
        assert!(h_ldet_grad(&w, 1.0).unwrap().iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let d = 4;
            let mut w = Array2::zeros((d, d));
            for k in 0..d {
                for j in 0..d {
                    if k != j {
                        w[(k, j)] = rng.random_range(-0.35..0.35);
                    }
                }
            }
            if !in_domain(&w, 1.0) {
                continue;
            }
            let g = h_ldet_grad(&w, 1.0).unwrap();
            let fd = fd_grad(&w, 1.0, 1e-6);
            for k in 0..d {
                for j in 0..d {
                    let denom = fd[(k, j)].abs().max(1e-6);
                    assert!(
                        (g[(k, j)] - fd[(k, j)]).abs() / denom < 1e-4,
                        "grad mismatch at ({k},{j}): {} vs {}",
                        g[(k, j)],
                        fd[(k, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn dag_gradient_matches_neumann_series_inverse() {
        // for nilpotent W∘W the inverse of (sI - W∘W) is the finite Neumann sum
        let s = 1.3;
        let g = generate_er(6, 0.4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = g.d();
        let mut w = Array2::zeros((d, d));
        for &(k, j) in g.edges() {
            w[(k, j)] = rng.random_range(-1.5..1.5);
        }
        let b = w.mapv(|v| v * v / s);
        let mut series = Array2::<f64>::eye(d);
        let mut power = Array2::<f64>::eye(d);
        for _ in 0..d {
            power = power.dot(&b);
            series = series + &power;
        }
        let inv = series / s;
        let grad = h_ldet_grad(&w, s).unwrap();
        for k in 0..d {
            for j in 0..d {
                let want = if k == j { 0.0 } else { 2.0 * inv[(j, k)] * w[(k, j)] };
                assert_relative_eq!(grad[(k, j)], want, epsilon = 1e-10, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn pooling_values() {
        let z = Array2::<f64>::zeros((2, 2));
        let pooled = pool_coupled(&z, &z, 1e-8).unwrap();
        assert!(pooled.iter().all(|&v| (v - 1e-4).abs() < 1e-18));

        let a = array![[0.0, 3.0], [0.0, 0.0]];
        let b = array![[0.0, 4.0], [0.0, 0.0]];
        let p = pool_coupled(&a, &b, 0.0).unwrap();
        assert_relative_eq!(p[(0, 1)], 5.0, epsilon = 1e-12);

        assert!(pool_coupled(&a, &Array2::zeros((3, 3)), 0.0).is_err());
        assert!(pool_coupled(&a, &b, -1.0).is_err());
    }

    #[test]
    fn coupled_grads_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (d, s, eps) = (4usize, 1.0, 1e-8);
        for _ in 0..10 {
            let mut w0 = Array2::zeros((d, d));
            let mut w1 = Array2::zeros((d, d));
            for k in 0..d {
                for j in 0..d {
                    if k != j {
                        w0[(k, j)] = rng.random_range(-0.25..0.25);
                        w1[(k, j)] = rng.random_range(-0.25..0.25);
                    }
                }
            }
            if !coupled_in_domain(&w0, &w1, s, eps) {
                continue;
            }
            let (_, g0, g1) = coupled_h_and_grads(&w0, &w1, s, eps).unwrap();
            let step = 1e-6;
            let h_of = |a: &Array2<f64>, b: &Array2<f64>| {
                let pooled = pool_coupled(a, b, eps).unwrap();
                h_ldet(&pooled, s).unwrap()
            };
            for k in 0..d {
                for j in 0..d {
                    if k == j {
                        continue;
                    }
                    let mut wp = w0.clone();
                    let mut wm = w0.clone();
                    wp[(k, j)] += step;
                    wm[(k, j)] -= step;
                    let fd = (h_of(&wp, &w1) - h_of(&wm, &w1)) / (2.0 * step);
                    let denom = fd.abs().max(1e-6);
                    assert!(
                        (g0[(k, j)] - fd).abs() / denom < 1e-4,
                        "w0 grad mismatch at ({k},{j})"
                    );

                    let mut vp = w1.clone();
                    let mut vm = w1.clone();
                    vp[(k, j)] += step;
                    vm[(k, j)] -= step;
                    let fd1 = (h_of(&w0, &vp) - h_of(&w0, &vm)) / (2.0 * step);
                    let denom1 = fd1.abs().max(1e-6);
                    assert!(
                        (g1[(k, j)] - fd1).abs() / denom1 < 1e-4,
                        "w1 grad mismatch at ({k},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn grad_succeeds_whenever_h_does() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..200 {
            let d = 3;
            let mut w = Array2::zeros((d, d));
            for k in 0..d {
                for j in 0..d {
                    if k != j {
                        w[(k, j)] = rng.random_range(-1.0..1.0);
                    }
                }
            }
            if h_ldet(&w, 1.0).is_ok() {
                assert!(h_ldet_grad(&w, 1.0).is_ok());
            }
        }
    }
}
