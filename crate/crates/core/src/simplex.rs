//! Euclidean projection onto the probability simplex and the fixed-point
//! tests built on it.
//!
//! The projection is `Π(v) = [v − λ1]⁺` with `λ` chosen so the result sums to
//! one. Sorting `v` in decreasing order finds `λ` in `O(K log K)`.

use crate::error::{Error, Result};

/// Sum tolerance accepted when validating caller-supplied points.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const RENORMALIZE_TOL: f64 = 1e-12;
const CLAMP_TOL: f64 = 1e-15;

/// A non-negative vector summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_feasible(&entries)
            .map_err(|reason| Error::InvalidDistribution { agent: 0, reason })?;
        Ok(Self(entries))
    }

    /// The vertex `e_index` of the `k`-simplex.
    pub fn vertex(k: usize, index: usize) -> Self {
        let mut v = vec![0.0; k];
        v[index] = 1.0;
        Self(v)
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for SimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Returns a description of the first feasibility failure, if any.
pub fn check_feasible(entries: &[f64]) -> std::result::Result<(), String> {
    if entries.is_empty() {
        return Err("empty distribution".into());
    }
    for (i, &x) in entries.iter().enumerate() {
        if !x.is_finite() || !(0.0..=1.0 + FEASIBILITY_TOL).contains(&x) {
            return Err(format!("entry {i} = {x} outside [0, 1]"));
        }
    }
    let sum: f64 = entries.iter().sum();
    if (sum - 1.0).abs() > FEASIBILITY_TOL {
        return Err(format!("entries sum to {sum}"));
    }
    Ok(())
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project(v: &[f64]) -> Result<SimplexPoint> {
    if v.is_empty() {
        return Err(Error::InvalidConfig(
            "cannot project an empty vector".into(),
        ));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let lambda = threshold(v);
    let mut out: Vec<f64> = v.iter().map(|&x| (x - lambda).max(0.0)).collect();
    tidy(&mut out);
    Ok(SimplexPoint(out))
}

/// The `λ` solving `1ᵀ[v − λ1]⁺ = 1`.
pub fn threshold(v: &[f64]) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut lambda = sorted[0] - 1.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            lambda = t;
        } else {
            break;
        }
    }
    lambda
}

fn tidy(out: &mut [f64]) {
    for x in out.iter_mut() {
        if *x < 0.0 && *x >= -CLAMP_TOL {
            *x = 0.0;
        }
    }
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_TOL {
        out.iter_mut().for_each(|x| *x /= sum);
    }
}

/// `Π(p + γg)`, evaluated as `Π(p + γ(g − max g))`.
///
/// Shifting by a constant leaves the projection unchanged. With the shift a
/// vertex whose own entry of `g` is maximal maps back onto itself exactly,
/// ties included.
pub fn projected_step(p: &[f64], g: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if p.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: g.len(),
        });
    }
    let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = p
        .iter()
        .zip(g)
        .map(|(&x, &gi)| x + gamma * (gi - top))
        .collect();
    Ok(project(&shifted)?.into_inner())
}

/// Index of the unit entry when `p` is a vertex up to `tol`.
/// Ties resolve to the lowest index.
pub fn is_vertex(p: &[f64], tol: f64) -> Option<usize> {
    let (idx, &max) = p
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &f64)>, (i, x)| match best {
            Some((_, b)) if b >= x => best,
            _ => Some((i, x)),
        })?;
    (max >= 1.0 - tol).then_some(idx)
}

/// Gradient mapping `G_γ(g, p) = (p − Π(p + γg)) / γ`.
pub fn gradient_mapping(g: &[f64], p: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidStepSize(gamma));
    }
    let next = projected_step(p, g, gamma)?;
    Ok(p.iter().zip(&next).map(|(a, b)| (a - b) / gamma).collect())
}

/// Decides `p = Π(p + delta)` from the structure of `delta` alone.
///
/// At a vertex `e_n` the condition is that `delta[n]` is a maximal entry.
/// Otherwise `delta` must be constant on the support of `p` and no larger
/// off it.
pub fn vertex_fixed_point_check(p: &[f64], delta: &[f64]) -> bool {
    assert_eq!(p.len(), delta.len(), "dimension mismatch");
    let scale = delta.iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let tol = 1e-12 * scale;
    let support: Vec<usize> = (0..p.len()).filter(|&k| p[k] > 0.0).collect();
    match support.as_slice() {
        [] => false,
        [n] => delta.iter().all(|&d| delta[*n] >= d - tol),
        [first, rest @ ..] => {
            let level = delta[*first];
            rest.iter().all(|&k| (delta[k] - level).abs() <= tol)
                && (0..p.len()).all(|k| p[k] > 0.0 || delta[k] <= level + tol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn projection_examples() {
        let p = project(&[0.2, 0.3, 0.5]).unwrap();
        assert!(close(p.as_slice(), &[0.2, 0.3, 0.5], 1e-15));
        assert_eq!(project(&[2.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert!(close(
            project(&[0.4, 0.4]).unwrap().as_slice(),
            &[0.5, 0.5],
            1e-15
        ));
        assert!((threshold(&[0.4, 0.4]) + 0.1).abs() < 1e-15);
        assert_eq!(threshold(&[2.0, 0.0]), 1.0);
    }

    #[test]
    fn entries_at_threshold_project_to_zero() {
        // λ = 1 and the second entry sits exactly on it.
        let p = project(&[2.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_rejects_non_finite() {
        assert!(matches!(
            project(&[0.1, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(matches!(
            project(&[f64::INFINITY]),
            Err(Error::NonFinite(0))
        ));
    }

    #[test]
    fn vertex_examples() {
        assert_eq!(is_vertex(&[1.0, 0.0, 0.0], 1e-9), Some(0));
        assert_eq!(is_vertex(&[0.5, 0.5], 1e-9), None);
        assert_eq!(is_vertex(&[1.0 - 1e-10, 1e-10], 1e-9), Some(0));
    }

    #[test]
    fn gradient_mapping_examples() {
        let g = gradient_mapping(&[0.0, 5.0, 1.0], &[0.0, 1.0, 0.0], 0.3).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
        let g = gradient_mapping(&[0.0, 0.0], &[0.3, 0.7], 0.5).unwrap();
        assert!(g.iter().all(|&x| x.abs() < 1e-15));
        // p + γg = [0.6, 0.5] projects to [0.55, 0.45].
        let g = gradient_mapping(&[1.0, 0.0], &[0.5, 0.5], 0.1).unwrap();
        assert!(close(&g, &[-0.5, 0.5], 1e-12));
        assert!(matches!(
            gradient_mapping(&[1.0], &[1.0], 0.0),
            Err(Error::InvalidStepSize(_))
        ));
        assert!(matches!(
            gradient_mapping(&[1.0], &[1.0], -1.0),
            Err(Error::InvalidStepSize(_))
        ));
    }

    #[test]
    fn fixed_point_examples() {
        assert!(vertex_fixed_point_check(&[1.0, 0.0, 0.0], &[3.0, 1.0, 2.0]));
        assert!(!vertex_fixed_point_check(
            &[1.0, 0.0, 0.0],
            &[1.0, 3.0, 2.0]
        ));
        assert!(vertex_fixed_point_check(&[0.5, 0.5, 0.0], &[2.0, 2.0, 1.0]));
        let projected = project(&[2.5, 2.5, 1.0]).unwrap();
        assert!(close(projected.as_slice(), &[0.5, 0.5, 0.0], 1e-15));
        assert!(!vertex_fixed_point_check(
            &[0.5, 0.5, 0.0],
            &[2.0, 2.0, 3.0]
        ));
    }

    #[test]
    fn vertex_with_tied_gradient_stays_put() {
        let g = [7.0, 7.0, 3.0];
        let gamma = 0.0005;
        assert_eq!(
            projected_step(&[1.0, 0.0, 0.0], &g, gamma).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert_eq!(
            projected_step(&[0.0, 1.0, 0.0], &g, gamma).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1]).is_err());
        assert_eq!(SimplexPoint::vertex(3, 2).as_slice(), &[0.0, 0.0, 1.0]);
    }
}
