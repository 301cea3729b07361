/// Generalized advantage estimates for one episode. `values` holds
/// `V(s_0..s_T)`; the last entry is the bootstrap (0 for a terminal end).
pub fn compute_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(values.len(), rewards.len() + 1, "values must include the bootstrap");
    let mut adv = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let (a, r) = compute_gae(&[1.0, 1.0], &[0.0, 0.0, 0.0], 0.5, 0.5);
        assert_eq!(a, vec![1.25, 1.0]);
        assert_eq!(r, a);
    }

    #[test]
    fn zero_everything_gives_zero() {
        let (a, _) = compute_gae(&[0.0; 5], &[0.0; 6], 0.96, 0.95);
        assert!(a.iter().all(|&x| x == 0.0));
    }

    proptest! {
        #[test]
        fn lambda_zero_is_td_error(r in prop::collection::vec(-5.0..5.0f64, 1..20), seed in 0.0..1.0f64) {
            let v: Vec<f64> = (0..=r.len()).map(|i| (i as f64 * 0.7 + seed).sin()).collect();
            let (a, _) = compute_gae(&r, &v, 0.9, 0.0);
            for t in 0..r.len() {
                prop_assert_eq!(a[t], r[t] + 0.9 * v[t + 1] - v[t]);
            }
        }
    }
}
