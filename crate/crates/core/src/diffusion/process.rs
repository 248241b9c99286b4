//! Forward corruption, posterior quantities, the noise-prediction mean and
//! the variational-bound terms. Inputs are flat coordinate slices; every
//! operation is elementwise.

use crate::diffusion::schedule::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::point::Point3;
use crate::scalar::Real;

fn same_len<T>(a: &[T], b: &[T], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{what}: lengths {} and {}", a.len(), b.len())));
    }
    Ok(())
}

/// One forward step: `sqrt(alpha_t) x_{t-1} + sqrt(beta_t) noise`.
pub fn forward_step<T: Real>(s: &DiffusionSchedule<T>, x_prev: &[T], t: usize, noise: &[T]) -> Result<Vec<T>> {
    s.check_step(t)?;
    same_len(x_prev, noise, "forward_step")?;
    let a = s.alpha(t).sqrt();
    let b = s.beta(t).sqrt();
    Ok(x_prev.iter().zip(noise).map(|(&x, &e)| a * x + b * e).collect())
}

/// Closed-form marginal: `sqrt(abar_t) x_0 + sqrt(1 - abar_t) noise`.
pub fn forward_closed<T: Real>(s: &DiffusionSchedule<T>, x0: &[T], t: usize, noise: &[T]) -> Result<Vec<T>> {
    s.check_step(t)?;
    same_len(x0, noise, "forward_closed")?;
    let ab = s.alpha_bar(t);
    let a = ab.sqrt();
    let b = (T::one() - ab).sqrt();
    Ok(x0.iter().zip(noise).map(|(&x, &e)| a * x + b * e).collect())
}

/// Coefficients `(c_0, c_t)` of the posterior mean `c_0 x_0 + c_t x_t`.
pub fn posterior_mean_coefs<T: Real>(s: &DiffusionSchedule<T>, t: usize) -> Result<(T, T)> {
    s.check_step(t)?;
    let ab = s.alpha_bar(t);
    let ab_prev = s.alpha_bar(t - 1);
    let denom = T::one() - ab;
    Ok((
        ab_prev.sqrt() * s.beta(t) / denom,
        s.alpha(t).sqrt() * (T::one() - ab_prev) / denom,
    ))
}

/// Mean of `q(x_{t-1} | x_t, x_0)`.
pub fn posterior_mean<T: Real>(s: &DiffusionSchedule<T>, x_t: &[T], x0: &[T], t: usize) -> Result<Vec<T>> {
    same_len(x_t, x0, "posterior_mean")?;
    let (c0, ct) = posterior_mean_coefs(s, t)?;
    Ok(x_t.iter().zip(x0).map(|(&xt, &x)| c0 * x + ct * xt).collect())
}

/// Reverse-step mean from a noise prediction:
/// `(x_t - beta_t / sqrt(1 - abar_t) eps) / sqrt(alpha_t)`.
pub fn mu_theta<T: Real>(s: &DiffusionSchedule<T>, x_t: &[T], eps: &[T], t: usize) -> Result<Vec<T>> {
    s.check_step(t)?;
    same_len(x_t, eps, "mu_theta")?;
    let k = s.beta(t) / (T::one() - s.alpha_bar(t)).sqrt();
    let inv = T::one() / s.alpha(t).sqrt();
    Ok(x_t.iter().zip(eps).map(|(&x, &e)| inv * (x - k * e)).collect())
}

/// The noise that maps `x_0` to `x_t` in closed form.
pub fn eps_from_x0<T: Real>(s: &DiffusionSchedule<T>, x_t: &[T], x0: &[T], t: usize) -> Result<Vec<T>> {
    s.check_step(t)?;
    same_len(x_t, x0, "eps_from_x0")?;
    let ab = s.alpha_bar(t);
    let a = ab.sqrt();
    let b = (T::one() - ab).sqrt();
    Ok(x_t.iter().zip(x0).map(|(&xt, &x)| (xt - a * x) / b).collect())
}

/// Masked noise-prediction loss: mean over selected points of the squared
/// Euclidean error.
pub fn simple_loss<T: Real>(eps_true: &[Point3<T>], eps_pred: &[Point3<T>], mask: &[bool]) -> Result<T> {
    same_len(eps_true, eps_pred, "simple_loss")?;
    if mask.len() != eps_true.len() {
        return Err(Error::Shape(format!(
            "simple_loss: mask has {} entries for {} points",
            mask.len(),
            eps_true.len()
        )));
    }
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(Error::Empty("simple_loss mask"));
    }
    let mut acc = T::zero();
    for ((e, p), &m) in eps_true.iter().zip(eps_pred).zip(mask) {
        if m {
            for k in 0..3 {
                let d = p[k] - e[k];
                acc = acc + d * d;
            }
        }
    }
    Ok(acc / T::from_usize_lossy(n))
}

/// Gradient of [`simple_loss`] with respect to `eps_pred`.
pub fn simple_loss_grad<T: Real>(eps_true: &[Point3<T>], eps_pred: &[Point3<T>], mask: &[bool]) -> Result<Vec<Point3<T>>> {
    simple_loss(eps_true, eps_pred, mask)?;
    let n = T::from_usize_lossy(mask.iter().filter(|&&m| m).count());
    let two = T::lit(2.0);
    Ok(eps_true
        .iter()
        .zip(eps_pred)
        .zip(mask)
        .map(|((e, p), &m)| {
            if m {
                [0, 1, 2].map(|k| two * (p[k] - e[k]) / n)
            } else {
                [T::zero(); 3]
            }
        })
        .collect())
}

/// KL divergence between diagonal Gaussians `N(mean1, var1) || N(mean2, var2)`,
/// summed over dimensions.
pub fn gaussian_kl<T: Real>(mean1: &[T], var1: &[T], mean2: &[T], var2: &[T]) -> Result<T> {
    same_len(mean1, mean2, "gaussian_kl means")?;
    same_len(mean1, var1, "gaussian_kl var1")?;
    same_len(mean1, var2, "gaussian_kl var2")?;
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for i in 0..mean1.len() {
        let (v1, v2) = (var1[i], var2[i]);
        if !(v1 > T::zero()) || !(v2 > T::zero()) {
            return Err(Error::InvalidInput(format!("non-positive variance at {i}")));
        }
        let d = mean1[i] - mean2[i];
        acc = acc + half * ((v2 / v1).ln() + (v1 + d * d) / v2 - T::one());
    }
    Ok(acc)
}

/// Weight `w_t` with `L_{t-1} = w_t |eps - eps_theta|^2` when the reverse
/// variance is the posterior variance.
pub fn vlb_weight<T: Real>(s: &DiffusionSchedule<T>, t: usize) -> Result<T> {
    s.check_step(t)?;
    if t < 2 {
        return Err(Error::InvalidInput("vlb weight is defined for t >= 2".into()));
    }
    let b = s.beta(t);
    Ok(b * b / (T::lit(2.0) * s.posterior_variance(t) * s.alpha(t) * (T::one() - s.alpha_bar(t))))
}

/// `L_{t-1}` term: KL between the forward posterior and the reverse step
/// whose mean comes from `eps_pred`, both with the posterior variance.
pub fn vlb_term<T: Real>(s: &DiffusionSchedule<T>, x0: &[T], x_t: &[T], eps_pred: &[T], t: usize) -> Result<T> {
    s.check_step(t)?;
    if t < 2 {
        return Err(Error::InvalidInput("vlb term is defined for t >= 2".into()));
    }
    let q_mean = posterior_mean(s, x_t, x0, t)?;
    let p_mean = mu_theta(s, x_t, eps_pred, t)?;
    let var = vec![s.posterior_variance(t); x0.len()];
    gaussian_kl(&q_mean, &var, &p_mean, &var)
}

/// `L_T`: KL between `q(x_T | x_0)` and the standard normal prior.
pub fn prior_kl<T: Real>(s: &DiffusionSchedule<T>, x0: &[T]) -> Result<T> {
    let t = s.steps();
    let ab = s.alpha_bar(t);
    let mean: Vec<T> = x0.iter().map(|&x| ab.sqrt() * x).collect();
    let var = vec![T::one() - ab; x0.len()];
    gaussian_kl(&mean, &var, &vec![T::zero(); x0.len()], &vec![T::one(); x0.len()])
}
