mod common;

use common::{fixture, rational};
use num_rational::BigRational;
use proptest::prelude::*;
use umbra::infer::{infer, load_observations, prior_mean, InferError, InferenceSpec};
use umbra::num;

fn rationals(v: &[i64]) -> Vec<BigRational> {
    v.iter().map(|&x| num::integer(x)).collect()
}

#[test]
fn mean_rate_of_the_pick_durations_is_exact() {
    let spec = InferenceSpec::MeanRate { observations: rationals(&[47, 92, 61]) };
    assert_eq!(infer(&spec).unwrap(), rational(3, 200));
    assert_eq!(num::to_f64(&infer(&spec).unwrap()), 0.015);
    let from_csv = load_observations(&fixture("rad/pick-durations.csv")).unwrap();
    assert_eq!(from_csv, rationals(&[47, 92, 61]));
}

#[test]
fn conjugate_posterior_mean() {
    let spec = InferenceSpec::Bayes { prior: rationals(&[1, 1]), counts: vec![3, 1], target: 0 };
    assert_eq!(infer(&spec).unwrap(), rational(4, 6));
    let fixed = InferenceSpec::Fixed { value: rational(5, 100) };
    assert_eq!(infer(&fixed).unwrap(), rational(1, 20));
    let mean = InferenceSpec::Mean { observations: rationals(&[1, 2, 6]) };
    assert_eq!(infer(&mean).unwrap(), num::integer(3));
}

#[test]
fn invalid_observations_are_rejected() {
    assert!(infer(&InferenceSpec::Mean { observations: vec![] }).is_err());
    assert!(infer(&InferenceSpec::MeanRate { observations: vec![] }).is_err());
    let zero = InferenceSpec::MeanRate { observations: rationals(&[4, 0]) };
    assert!(matches!(infer(&zero), Err(InferError::NonPositiveDuration(_))));
    let bad_prior = InferenceSpec::Bayes { prior: rationals(&[0, 1]), counts: vec![1, 1], target: 0 };
    assert!(infer(&bad_prior).is_err());
    let bad_target = InferenceSpec::Bayes { prior: rationals(&[1, 1]), counts: vec![1, 1], target: 2 };
    assert!(infer(&bad_target).is_err());
}

proptest! {
    #[test]
    fn posterior_lies_between_prior_and_data(
        prior in proptest::collection::vec(1i64..20, 2..5),
        counts in proptest::collection::vec(0u64..50, 2..5),
        target in 0usize..2,
    ) {
        let k = prior.len().min(counts.len());
        let prior = rationals(&prior[..k]);
        let counts = counts[..k].to_vec();
        let post = infer(&InferenceSpec::Bayes { prior: prior.clone(), counts: counts.clone(), target }).unwrap();
        let pm = prior_mean(&prior, target);
        let total: u64 = counts.iter().sum();
        if total == 0 {
            prop_assert_eq!(post, pm);
        } else {
            let freq = BigRational::new((counts[target] as i64).into(), (total as i64).into());
            let (lo, hi) = if pm < freq { (&pm, &freq) } else { (&freq, &pm) };
            if pm == freq {
                prop_assert_eq!(&post, &pm);
            } else {
                prop_assert!(&post > lo && &post < hi);
            }
        }
    }

    #[test]
    fn zero_observations_give_the_prior_mean(prior in proptest::collection::vec(1i64..20, 2..5)) {
        let prior = rationals(&prior);
        let post = infer(&InferenceSpec::Bayes { prior: prior.clone(), counts: vec![0; prior.len()], target: 1 }).unwrap();
        prop_assert_eq!(post, prior_mean(&prior, 1));
    }

    #[test]
    fn mean_rate_scales_inversely(obs in proptest::collection::vec(1i64..1000, 1..10), c in 1i64..50, d in 1i64..50) {
        let scale = rational(c, d);
        let base = infer(&InferenceSpec::MeanRate { observations: rationals(&obs) }).unwrap();
        let scaled: Vec<BigRational> = rationals(&obs).into_iter().map(|o| o * &scale).collect();
        let r = infer(&InferenceSpec::MeanRate { observations: scaled }).unwrap();
        prop_assert_eq!(r, base / scale);
    }
}
