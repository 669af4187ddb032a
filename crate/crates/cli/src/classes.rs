//! Finite hypothesis classes built from the pooled support of an instance.

use dabound::models::{FiniteClass, Hypothesis};
use dabound::Result;

/// Distinct coordinate values of `feature`, sorted.
fn cut_points(points: &[&[f64]], feature: usize) -> Vec<f64> {
    let mut v: Vec<f64> = points.iter().map(|p| p[feature]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Every distinct labeling a `x[f] >= t` stump can induce on the support:
/// cuts at each support value and one past the largest.
fn stump_family(points: &[&[f64]], features: &[usize], flip: bool) -> Vec<Hypothesis> {
    let mut out = Vec::new();
    for &f in features {
        let cuts = cut_points(points, f);
        let past = cuts.last().map_or(1.0, |m| m + 1.0);
        for t in cuts.iter().copied().chain(std::iter::once(past)) {
            out.push(Hypothesis::Stump {
                feature: f,
                threshold: t,
                below: 0,
                above: 1,
            });
            if flip {
                out.push(Hypothesis::Stump {
                    feature: f,
                    threshold: t,
                    below: 1,
                    above: 0,
                });
            }
        }
    }
    out
}

/// `name` is one of `thresholds` (first feature, one orientation), `stumps`
/// (every feature, both orientations) or `all_labelings`.
pub fn build(name: &str, points: &[&[f64]], num_classes: usize) -> Result<FiniteClass> {
    let dim = points.first().map_or(0, |p| p.len());
    match name {
        "thresholds" => FiniteClass::new(name, stump_family(points, &[0], false)),
        "stumps" => FiniteClass::new(
            name,
            stump_family(points, &(0..dim).collect::<Vec<_>>(), true),
        ),
        "all_labelings" => {
            let mut domain: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
            domain.sort_by(|a, b| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            domain.dedup();
            FiniteClass::all_labelings(name, &domain, num_classes)
        }
        other => Err(dabound::Error::InvalidArgument {
            field: "class".into(),
            message: format!(
                "unknown class `{other}`; expected thresholds, stumps or all_labelings"
            ),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        assert_eq!(build("thresholds", &refs, 2).unwrap().len(), 4);
        // feature 0: 3 cuts + 1, feature 1: 2 cuts + 1, two orientations.
        assert_eq!(build("stumps", &refs, 2).unwrap().len(), 2 * (4 + 3));
        assert_eq!(build("all_labelings", &refs, 2).unwrap().len(), 8);
        assert!(build("circles", &refs, 2).is_err());
    }

    #[test]
    fn thresholds_realize_every_cut() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![2.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let class = build("thresholds", &refs, 2).unwrap();
        let mut ones: Vec<usize> = class
            .members()
            .iter()
            .map(|h| refs.iter().filter(|x| h.predict(x) == 1).count())
            .collect();
        ones.sort_unstable();
        assert_eq!(ones, vec![0, 1, 2, 3]);
    }
}
