use alloc::vec::Vec;

/// Central-difference gradient estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub estimate: Vec<f64>,
    /// Coordinates where a perturbed evaluation was NaN or infinite.
    pub non_finite: Vec<usize>,
}

impl GradCheck {
    pub fn is_ok(&self) -> bool {
        self.non_finite.is_empty()
    }
}

/// `(f(p + h e_i) - f(p - h e_i)) / 2h` for every coordinate `i`.
///
/// Evaluations that are not finite are recorded in [`GradCheck::non_finite`]
/// and their estimate is set to NaN.
pub fn finite_diff_grad<F>(mut f: F, point: &[f64], h: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite difference step must be positive");
    let mut p = point.to_vec();
    let mut estimate = Vec::with_capacity(p.len());
    let mut non_finite = Vec::new();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let plus = f(&p);
        p[i] = orig - h;
        let minus = f(&p);
        p[i] = orig;
        if plus.is_finite() && minus.is_finite() {
            estimate.push((plus - minus) / (2.0 * h));
        } else {
            non_finite.push(i);
            estimate.push(f64::NAN);
        }
    }
    GradCheck {
        estimate,
        non_finite,
    }
}

/// Norm-wise relative error `|a - b| / max(|a|, |b|)`; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient length mismatch");
    let norm = |v: &mut dyn Iterator<Item = f64>| libm::sqrt(v.map(|x| x * x).sum::<f64>());
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / scale
    }
}

/// Largest element-wise `|a_i - b_i| / max(|a_i|, |b_i|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient length mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
