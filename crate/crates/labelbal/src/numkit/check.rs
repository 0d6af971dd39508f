//! Central-difference gradient checker used to validate every hand-derived
//! backward pass in the crate.

use crate::error::{Error, Result};

/// Compares `analytic_grad` against central differences of `f` at `p`.
///
/// Returns `max_i |cd_i - analytic_i| / (|analytic_i| + 1e-12)`. The parameter
/// vector is perturbed in place and restored before returning.
pub fn finite_diff_check<F>(mut f: F, p: &mut [f64], analytic_grad: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(1e-8..=1e-3).contains(&eps) {
        return Err(Error::InvalidInput(format!(
            "eps {eps} outside [1e-8, 1e-3]"
        )));
    }
    if p.len() != analytic_grad.len() {
        return Err(Error::Dim(format!(
            "parameter length {} vs gradient length {}",
            p.len(),
            analytic_grad.len()
        )));
    }
    let mut max_rel = 0.0f64;
    for i in 0..p.len() {
        let saved = p[i];
        p[i] = saved + eps;
        let plus = f(p)?;
        p[i] = saved - eps;
        let minus = f(p)?;
        p[i] = saved;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite function value near parameter {i}"
            )));
        }
        let cd = (plus - minus) / (2.0 * eps);
        let rel = (cd - analytic_grad[i]).abs() / (analytic_grad[i].abs() + 1e-12);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::affine::affine_forward_backward;
    use crate::numkit::loss::{bce_with_logits, bce_with_logits_grad};
    use crate::numkit::matrix::{dot, Matrix};
    use crate::numkit::rng::{RngStream, StreamId};

    #[test]
    fn quadratic_is_exact_up_to_roundoff() {
        let mut p = vec![1.0, -2.0];
        let analytic = vec![2.0, -4.0];
        let err = finite_diff_check(|p| Ok(dot(p, p)), &mut p, &analytic, 1e-5).unwrap();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn bce_composed_with_affine() {
        // f(p) = bce(w . x + b, 1) as a function of p = (w, b), random seed 3.
        let mut rng = RngStream::new(3, StreamId::Init);
        let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let mut p: Vec<f64> = (0..5).map(|_| rng.normal()).collect();

        let xf = x.clone();
        let f = |p: &[f64]| {
            let logit = dot(&p[..4], &xf) + p[4];
            bce_with_logits(logit, true)
        };
        let logit = dot(&p[..4], &x) + p[4];
        let (_, dlogit) = bce_with_logits_grad(logit, true).unwrap();
        let mut analytic: Vec<f64> = x.iter().map(|xi| dlogit * xi).collect();
        analytic.push(dlogit);

        let err = finite_diff_check(f, &mut p, &analytic, 1e-5).unwrap();
        assert!(err < 1e-4, "err {err}");
    }

    #[test]
    fn negated_gradient_reads_as_two() {
        let mut p = vec![1.0, -2.0];
        let negated = vec![-2.0, 4.0];
        let err = finite_diff_check(|p| Ok(dot(p, p)), &mut p, &negated, 1e-5).unwrap();
        assert!((err - 2.0).abs() < 1e-6, "err {err}");
    }

    #[test]
    fn eps_out_of_range_is_invalid() {
        let mut p = vec![1.0];
        assert!(finite_diff_check(|p| Ok(p[0]), &mut p, &[1.0], 1e-2).is_err());
        assert!(finite_diff_check(|p| Ok(p[0]), &mut p, &[1.0], 1e-9).is_err());
    }

    #[test]
    fn non_finite_evaluation_is_a_numeric_error() {
        // ln is NaN at the p - eps evaluation point.
        let mut p = vec![0.0];
        let res = finite_diff_check(|p| Ok(p[0].ln()), &mut p, &[0.0], 1e-5);
        assert!(matches!(res, Err(crate::error::Error::Numeric(_))));
    }

    #[test]
    fn affine_random_seed7_grads_within_tolerance() {
        let mut rng = RngStream::new(7, StreamId::Init);
        let w = Matrix::from_fn(3, 2, |_, _| rng.normal());
        let b: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let x: Vec<f64> = (0..2).map(|_| rng.normal()).collect();
        let upstream: Vec<f64> = (0..3).map(|_| rng.normal()).collect();

        let (_, gw, _, _) = affine_forward_backward(&w, &b, &x, &upstream).unwrap();

        let (bf, xf, uf) = (b.clone(), x.clone(), upstream.clone());
        let mut p = w.data().to_vec();
        let f = move |p: &[f64]| {
            let w = Matrix::from_vec(3, 2, p.to_vec()).unwrap();
            let (out, _, _, _) = affine_forward_backward(&w, &bf, &xf, &uf)?;
            Ok(dot(&out, &uf))
        };
        let err = finite_diff_check(f, &mut p, gw.data(), 1e-5).unwrap();
        assert!(err < 1e-6, "err {err}");
    }
}
