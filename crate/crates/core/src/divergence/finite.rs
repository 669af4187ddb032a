use super::{Diagnostics, DivergenceEstimate, Method};
use crate::datasets::UnlabeledView;
use crate::error::{Error, Result};
use crate::models::{FiniteClass, Hypothesis};

fn check_views(sx: &UnlabeledView, tx: &UnlabeledView) -> Result<()> {
    if sx.dim() != tx.dim() {
        return Err(Error::DimensionMismatch {
            expected: sx.dim(),
            found: tx.dim(),
        });
    }
    Ok(())
}

/// Pairwise disagreement matrix `d[a][b] = Σ_i w_i 1[p_a(i) ≠ p_b(i)]`.
fn disagreements(preds: &[Vec<usize>], weights: &[f64]) -> Vec<Vec<f64>> {
    let k = preds.len();
    let mut d = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in (a + 1)..k {
            let v: f64 = preds[a]
                .iter()
                .zip(&preds[b])
                .zip(weights)
                .filter(|((x, y), _)| x != y)
                .map(|(_, w)| w)
                .fold(0.0, |a, b| a + b);
            d[a][b] = v;
            d[b][a] = v;
        }
    }
    d
}

fn pair_gaps(
    class: &FiniteClass,
    sx: &UnlabeledView,
    tx: &UnlabeledView,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    check_views(sx, tx)?;
    let ds = disagreements(&class.predictions(sx)?, sx.weights());
    let dt = disagreements(&class.predictions(tx)?, tx.weights());
    Ok((ds, dt))
}

/// Exact `sup_{h,h'} ε_T(h,h') − ε_S(h,h')` over ordered pairs of a finite class.
///
/// Not symmetric in `(sx, tx)`. The diagonal pair attains 0, so the value is
/// nonnegative. Ties keep the first pair in row-major order.
pub fn hdh_divergence_exact(
    class: &FiniteClass,
    sx: &UnlabeledView,
    tx: &UnlabeledView,
) -> Result<DivergenceEstimate> {
    let (ds, dt) = pair_gaps(class, sx, tx)?;
    let k = class.len();
    let mut best = (0.0, 0, 0);
    for a in 0..k {
        for b in 0..k {
            let gap = dt[a][b] - ds[a][b];
            if gap > best.0 {
                best = (gap, a, b);
            }
        }
    }
    Ok(DivergenceEstimate::exact(
        best.0,
        Method::ExactEnum,
        Diagnostics {
            iterations: k * k,
            final_objective: best.0,
            converged: true,
            witness: Some(vec![best.1, best.2]),
            ..Diagnostics::default()
        },
    ))
}

/// Exact `sup_{h'} ε_T(h,h') − ε_S(h,h')` with `h` held fixed.
pub fn single_hyp_discrepancy_exact(
    h: &Hypothesis,
    class: &FiniteClass,
    sx: &UnlabeledView,
    tx: &UnlabeledView,
) -> Result<DivergenceEstimate> {
    check_views(sx, tx)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, other) in class.members().iter().enumerate() {
        let gap =
            crate::models::disagreement(h, other, tx)? - crate::models::disagreement(h, other, sx)?;
        if gap > best.0 {
            best = (gap, i);
        }
    }
    // h' = h is always admissible when h belongs to the class.
    let value = if class.members().contains(h) {
        best.0.max(0.0)
    } else {
        best.0
    };
    Ok(DivergenceEstimate::exact(
        value,
        Method::ExactEnum,
        Diagnostics {
            iterations: class.len(),
            final_objective: value,
            converged: true,
            witness: Some(vec![best.1]),
            ..Diagnostics::default()
        },
    ))
}

/// Exact `sup_{h,h'} |ε_S(h,h') − ε_T(h,h')|`; symmetric in `(sx, tx)`.
pub fn mansour_discrepancy(
    class: &FiniteClass,
    sx: &UnlabeledView,
    tx: &UnlabeledView,
) -> Result<DivergenceEstimate> {
    let (ds, dt) = pair_gaps(class, sx, tx)?;
    let k = class.len();
    let mut best = (0.0, 0, 0);
    for a in 0..k {
        for b in (a + 1)..k {
            let gap = (ds[a][b] - dt[a][b]).abs();
            if gap > best.0 {
                best = (gap, a, b);
            }
        }
    }
    Ok(DivergenceEstimate::exact(
        best.0,
        Method::ExactEnum,
        Diagnostics {
            iterations: k * (k.saturating_sub(1)) / 2,
            final_objective: best.0,
            converged: true,
            witness: Some(vec![best.1, best.2]),
            ..Diagnostics::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(x: f64) -> UnlabeledView {
        UnlabeledView::uniform(vec![vec![x]]).unwrap()
    }

    fn thresholds() -> FiniteClass {
        FiniteClass::new(
            "thresholds",
            vec![
                Hypothesis::threshold(-2.0),
                Hypothesis::threshold(0.0),
                Hypothesis::threshold(2.0),
            ],
        )
        .unwrap()
    }

    fn boolean() -> FiniteClass {
        FiniteClass::all_labelings("bool", &[vec![0.0], vec![1.0]], 2).unwrap()
    }

    #[test]
    fn identical_marginals_give_zero() {
        let v = UnlabeledView::uniform(vec![vec![-1.0], vec![3.0]]).unwrap();
        assert_eq!(
            hdh_divergence_exact(&thresholds(), &v, &v).unwrap().value,
            0.0
        );
        assert_eq!(
            mansour_discrepancy(&thresholds(), &v, &v).unwrap().value,
            0.0
        );
        let h = Hypothesis::threshold(0.0);
        assert_eq!(
            single_hyp_discrepancy_exact(&h, &thresholds(), &v, &v)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn two_point_boolean_domain() {
        let est = hdh_divergence_exact(&boolean(), &delta(0.0), &delta(1.0)).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(
            mansour_discrepancy(&boolean(), &delta(0.0), &delta(1.0))
                .unwrap()
                .value,
            1.0
        );
    }

    #[test]
    fn threshold_example() {
        let s = UnlabeledView::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        let t = delta(1.0);
        assert_eq!(
            hdh_divergence_exact(&thresholds(), &s, &t).unwrap().value,
            0.5
        );
        let h = Hypothesis::threshold(0.0);
        let est = single_hyp_discrepancy_exact(&h, &thresholds(), &s, &t).unwrap();
        assert_eq!(est.value, 0.5);
        assert_eq!(est.diagnostics.witness, Some(vec![2]));
    }

    #[test]
    fn mansour_is_symmetric_hdh_is_not() {
        let s = UnlabeledView::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        let t = delta(1.0);
        let c = thresholds();
        assert_eq!(
            mansour_discrepancy(&c, &s, &t).unwrap().value,
            mansour_discrepancy(&c, &t, &s).unwrap().value
        );
        let pair = FiniteClass::new(
            "pair",
            vec![Hypothesis::threshold(0.0), Hypothesis::threshold(-2.0)],
        )
        .unwrap();
        assert_eq!(
            hdh_divergence_exact(&pair, &delta(-1.0), &delta(1.0))
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            hdh_divergence_exact(&pair, &delta(1.0), &delta(-1.0))
                .unwrap()
                .value,
            1.0
        );
    }

    #[test]
    fn dimension_mismatch() {
        let a = delta(0.0);
        let b = UnlabeledView::uniform(vec![vec![0.0, 1.0]]).unwrap();
        assert!(hdh_divergence_exact(&thresholds(), &a, &b).is_err());
    }
}
