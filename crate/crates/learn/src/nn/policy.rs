use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Mlp, NnError};

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

/// `Σ_d −(u_d−μ_d)²/(2σ_d²) − log σ_d − ½ log 2π`.
pub fn log_prob(mean: &[f64], log_std: &[f64], u: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(u)
        .map(|((m, ls), x)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LOG_2PI
        })
        .sum()
}

/// Diagonal Gaussian over normalized actions `u = a / bound`, with mean
/// `tanh(net(s))` and a state-independent log-std. Executed actions are
/// `bound · clip(u, −1, 1)`; densities are always taken before the clip.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
    pub bound: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    /// Normalized, unclipped.
    pub u: Vec<f64>,
    /// Executable action in physical units.
    pub action: Vec<f64>,
    pub log_prob: f64,
}

/// Per-parameter gradients of a policy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrads {
    pub net: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub const INITIAL_LOG_STD: f64 = -0.5;

    pub fn new<R: Rng + ?Sized>(widths: &[usize], bound: Vec<f64>, rng: &mut R) -> Self {
        assert_eq!(*widths.last().unwrap(), bound.len());
        Self {
            net: Mlp::orthogonal(widths, 0.01, rng),
            log_std: vec![Self::INITIAL_LOG_STD; bound.len()],
            bound,
        }
    }

    pub fn act_dim(&self) -> usize {
        self.bound.len()
    }

    pub fn mean_batch(&self, obs: ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        Ok(self.net.predict(obs)?.mapv(f64::tanh))
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Array1<f64>, NnError> {
        Ok(self.net.predict_one(obs)?.mapv(f64::tanh))
    }

    pub fn to_action(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.bound).map(|(x, b)| b * x.clamp(-1.0, 1.0)).collect()
    }

    pub fn to_normalized(&self, action: &[f64]) -> Vec<f64> {
        action.iter().zip(&self.bound).map(|(a, b)| a / b).collect()
    }

    pub fn log_prob(&self, obs: &[f64], u: &[f64]) -> Result<f64, NnError> {
        let m = self.mean(obs)?;
        Ok(log_prob(m.as_slice().unwrap(), &self.log_std, u))
    }

    /// Samples, or returns the mean when `deterministic`.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], deterministic: bool, rng: &mut R) -> Result<PolicySample, NnError> {
        let m = self.mean(obs)?;
        let u: Vec<f64> = if deterministic {
            m.to_vec()
        } else {
            m.iter()
                .zip(&self.log_std)
                .map(|(mu, ls)| mu + ls.exp() * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        Ok(PolicySample {
            action: self.to_action(&u),
            log_prob: log_prob(m.as_slice().unwrap(), &self.log_std, &u),
            u,
        })
    }

    /// Log-densities for a batch together with everything needed to push
    /// `∂L/∂logπ` back to the parameters.
    pub fn log_prob_batch(&self, obs: ArrayView2<'_, f64>, u: ArrayView2<'_, f64>) -> Result<LogProbTape, NnError> {
        let (raw, tape) = self.net.forward(obs)?;
        let mean = raw.mapv(f64::tanh);
        let inv_var: Vec<f64> = self.log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
        let mut logp = Array1::zeros(mean.nrows());
        for (i, (mrow, urow)) in mean.rows().into_iter().zip(u.rows()).enumerate() {
            logp[i] = log_prob(mrow.as_slice().unwrap(), &self.log_std, urow.as_slice().unwrap());
        }
        Ok(LogProbTape {
            logp,
            mean,
            u: u.to_owned(),
            inv_var,
            tape,
        })
    }

    /// Gradients of `Σ_i w_i · logπ(u_i|s_i) + entropy_weight · H` where `w` is
    /// `∂L/∂logπ` per sample.
    pub fn backward(&self, t: &LogProbTape, dlogp: &[f64], entropy_weight: f64) -> PolicyGrads {
        let n = t.mean.nrows();
        let d = self.act_dim();
        let mut g_raw = Array2::zeros((n, d));
        let mut g_ls = vec![entropy_weight; d];
        for i in 0..n {
            for k in 0..d {
                let m = t.mean[[i, k]];
                let diff = t.u[[i, k]] - m;
                let dmean = diff * t.inv_var[k];
                g_raw[[i, k]] = dlogp[i] * dmean * (1.0 - m * m);
                g_ls[k] += dlogp[i] * (diff * diff * t.inv_var[k] - 1.0);
            }
        }
        PolicyGrads {
            net: self.net.backward(&t.tape, g_raw.view()),
            log_std: g_ls,
        }
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 + HALF_LOG_2PI).sum()
    }
}

pub struct LogProbTape {
    pub logp: Array1<f64>,
    mean: Array2<f64>,
    u: Array2<f64>,
    inv_var: Vec<f64>,
    tape: super::mlp::Tape,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use spacearm_core::rng::SimRng;

    #[test]
    fn standard_normal_at_mean() {
        assert!((log_prob(&[0.3], &[0.0], &[0.3]) + 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn doubling_sigma_costs_log2_per_dim() {
        let m = [0.1, -0.4, 0.0];
        let a = log_prob(&m, &[0.0; 3], &m);
        let b = log_prob(&m, &[2f64.ln(); 3], &m);
        assert!((a - b - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_mean() {
        let mut rng = SimRng::seed_from_u64(0);
        let p = GaussianPolicy::new(&[4, 8, 2], vec![2.0, 0.1], &mut rng);
        let obs = Array2::from_shape_fn((1, 4), |(_, j)| j as f64 * 0.1);
        let mean = p.mean_batch(obs.view()).unwrap();
        let t = p.log_prob_batch(obs.view(), mean.view()).unwrap();
        let g = p.backward(&t, &[1.0], 0.0);
        assert!(g.net.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn actions_are_clipped_and_scaled() {
        let mut rng = SimRng::seed_from_u64(1);
        let mut p = GaussianPolicy::new(&[3, 4, 2], vec![2.0, 0.1], &mut rng);
        p.log_std = vec![2.0; 2];
        for _ in 0..200 {
            let s = p.sample(&[0.1, 0.2, 0.3], false, &mut rng).unwrap();
            assert!(s.action[0].abs() <= 2.0 && s.action[1].abs() <= 0.1);
            let lp = p.log_prob(&[0.1, 0.2, 0.3], &s.u).unwrap();
            assert_eq!(lp, s.log_prob);
        }
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let mut rng = SimRng::seed_from_u64(2);
        let mut p = GaussianPolicy::new(&[3, 6, 2], vec![1.0, 1.0], &mut rng);
        for v in p.net.params.iter_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
        p.log_std = vec![-0.3, 0.2];
        let obs = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        let u = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0));
        let w = [0.3, -1.0, 0.5, 2.0, -0.7];
        let objective = |q: &GaussianPolicy| -> f64 {
            let t = q.log_prob_batch(obs.view(), u.view()).unwrap();
            t.logp.iter().zip(&w).map(|(l, w)| l * w).sum::<f64>() + 0.1 * q.entropy()
        };
        let t = p.log_prob_batch(obs.view(), u.view()).unwrap();
        let g = p.backward(&t, &w, 0.1);
        let h = 1e-5;
        for i in 0..p.net.params.len() {
            let mut q = p.clone();
            q.net.params[i] += h;
            let up = objective(&q);
            q.net.params[i] -= 2.0 * h;
            let fd = (up - objective(&q)) / (2.0 * h);
            assert!((fd - g.net[i]).abs() <= 1e-6 * fd.abs().max(1e-3), "{i}");
        }
        for k in 0..2 {
            let mut q = p.clone();
            q.log_std[k] += h;
            let up = objective(&q);
            q.log_std[k] -= 2.0 * h;
            let fd = (up - objective(&q)) / (2.0 * h);
            assert!((fd - g.log_std[k]).abs() < 1e-7);
        }
    }
}
