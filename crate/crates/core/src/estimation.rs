//! Channel-estimation statistics.
//!
//! The base station correlates its received pilot block with the pilot of the
//! user of interest, `y = Y psi`, and scales the result: `h_hat = coef * y`.
//! All three channel models share this form; they differ in the scaling and
//! in the resulting per-antenna estimate variance `gamma`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::GainTensor;
use crate::numeric::CompensatedSum;
use crate::pilots::{pilot_inner, PilotAllocation, PilotAssignment, UserId};

/// Per-antenna statistics of the estimate of a user's channel at its own
/// base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationStats {
    /// Multiplier applied to the despread pilot signal.
    pub coef: f64,
    /// Variance of each estimate entry.
    pub gamma: f64,
    /// Variance of each estimation-error entry.
    pub err_var: f64,
}

impl EstimationStats {
    /// Convention for users without pilot energy: the estimate is zero.
    pub fn degenerate(beta_home: f64) -> Self {
        Self {
            coef: 0.0,
            gamma: 0.0,
            err_var: beta_home,
        }
    }
}

/// Transceiver hardware quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    /// Impairment level: the fraction `epsilon^2` of the transmit power turns
    /// into distortion.
    pub epsilon: f64,
}

impl HardwareConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Domain(format!(
                "impairment level {epsilon} outside [0, 1]"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn ideal() -> Self {
        Self { epsilon: 0.0 }
    }
}

/// Estimation statistics plus the effective pilot overlaps `kappa` of every
/// user with the user of interest (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareEstimation {
    pub stats: EstimationStats,
    pub kappa: Vec<f64>,
}

fn check_energy(alloc: &PilotAllocation, u: UserId) -> Result<f64> {
    let s = alloc.energy(u);
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::DegeneratePilot(u))
    }
}

fn check_shapes(beta: &GainTensor, alloc: &PilotAllocation) -> Result<()> {
    if beta.num_cells() != alloc.num_cells() || beta.users_per_cell() != alloc.users_per_cell() {
        return Err(Error::InvalidArgument(format!(
            "gain tensor is {}x{}, allocation is {}x{}",
            beta.num_cells(),
            beta.users_per_cell(),
            alloc.num_cells(),
            alloc.users_per_cell()
        )));
    }
    Ok(())
}

/// Despread-pilot variance per antenna:
/// `sum_(i,t) beta_(i,t) c_(i,t)^2 + sigma^2 S`.
pub(crate) fn pilot_denominator(
    beta: &GainTensor,
    alloc: &PilotAllocation,
    noise: f64,
    u: UserId,
) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in alloc.users() {
        let c = pilot_inner(alloc, v, u);
        if c != 0.0 {
            acc.add(beta.get(u.cell, v) * (c * c));
        }
    }
    acc.add(noise * alloc.energy(u));
    acc.value()
}

/// MMSE estimation statistics under uncorrelated Rayleigh fading.
pub fn mmse_stats(
    beta: &GainTensor,
    alloc: &PilotAllocation,
    noise: f64,
    u: UserId,
) -> Result<EstimationStats> {
    check_shapes(beta, alloc)?;
    let s = check_energy(alloc, u)?;
    let b = beta.home(u);
    let d = pilot_denominator(beta, alloc, noise, u);
    let gamma = b * b * s * s / d;
    Ok(EstimationStats {
        coef: b * s / d,
        gamma,
        err_var: b - gamma,
    })
}

/// Like [`mmse_stats`] but returns the zero-estimate convention instead of
/// an error for users without pilot energy.
pub fn mmse_stats_or_degenerate(
    beta: &GainTensor,
    alloc: &PilotAllocation,
    noise: f64,
    u: UserId,
) -> Result<EstimationStats> {
    match mmse_stats(beta, alloc, noise, u) {
        Err(Error::DegeneratePilot(_)) => Ok(EstimationStats::degenerate(beta.home(u))),
        other => other,
    }
}

/// MMSE statistics for the assignment structure, using the reuse set only.
pub fn mmse_stats_assignment(
    beta: &GainTensor,
    a: &PilotAssignment,
    noise: f64,
    u: UserId,
) -> Result<EstimationStats> {
    a.validate()?;
    let p = a.power(u);
    if !(p > 0.0) {
        return Err(Error::DegeneratePilot(u));
    }
    let b = beta.home(u);
    let mut acc = CompensatedSum::new();
    for v in a.reuse_set(u) {
        acc.add(beta.get(u.cell, v) * a.power(v));
    }
    acc.add(noise);
    let d = acc.value();
    let gamma = b * b * p / d;
    Ok(EstimationStats {
        coef: b / d,
        gamma,
        err_var: b - gamma,
    })
}

/// Effective pilot overlap of user `v` with user `u` under impairments.
#[inline]
pub fn kappa(alloc: &PilotAllocation, eps: f64, v: UserId, u: UserId) -> f64 {
    let c = pilot_inner(alloc, v, u);
    let e2 = eps * eps;
    if e2 == 0.0 {
        return c * c;
    }
    let cross: f64 = alloc
        .user(v)
        .iter()
        .zip(alloc.user(u))
        .map(|(x, y)| x * y)
        .sum();
    (1.0 - e2) * c * c + e2 * cross
}

/// LMMSE estimation statistics under transceiver hardware impairments.
///
/// The estimate and the error are uncorrelated but not independent. The
/// error variance is `beta - gamma` by orthogonality of the linear estimator.
pub fn lmmse_stats_hw(
    beta: &GainTensor,
    alloc: &PilotAllocation,
    noise: f64,
    hw: HardwareConfig,
    u: UserId,
) -> Result<HardwareEstimation> {
    check_shapes(beta, alloc)?;
    HardwareConfig::new(hw.epsilon)?;
    let s = check_energy(alloc, u)?;
    let e2 = hw.epsilon * hw.epsilon;
    let kappa: Vec<f64> = alloc
        .users()
        .map(|v| kappa(alloc, hw.epsilon, v, u))
        .collect();
    let mut acc = CompensatedSum::new();
    for (v, k) in alloc.users().zip(&kappa) {
        if *k != 0.0 {
            acc.add(beta.get(u.cell, v) * k);
        }
    }
    acc.add(noise * s);
    let d = acc.value();
    let b = beta.home(u);
    let gamma = (1.0 - e2) * b * b * s * s / d;
    Ok(HardwareEstimation {
        stats: EstimationStats {
            coef: (1.0 - e2).sqrt() * b * s / d,
            gamma,
            err_var: b - gamma,
        },
        kappa,
    })
}

/// Element-wise MMSE scaling for spatially correlated fading.
///
/// Only the diagonal of each covariance matrix enters, so `beta` holds the
/// common diagonal entries.
pub fn elementwise_mmse_coef_corr(
    beta: &GainTensor,
    alloc: &PilotAllocation,
    noise: f64,
    u: UserId,
) -> Result<f64> {
    mmse_stats(beta, alloc, noise, u).map(|s| s.coef)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pilots::from_assignment;

    const U0: UserId = UserId::new(0, 0);

    fn single(beta: f64, p: f64) -> (GainTensor, PilotAllocation) {
        (
            GainTensor::uniform(1, 1, beta),
            PilotAllocation::from_fn(1, 1, 1, |_, _| p),
        )
    }

    #[test]
    fn single_user_hand_value() {
        let (b, a) = single(1.0, 1.0);
        let s = mmse_stats(&b, &a, 1.0, U0).unwrap();
        assert_eq!(s.gamma, 0.5);
        assert_eq!(s.err_var, 0.5);
        assert_eq!(s.coef, 0.5);
    }

    #[test]
    fn noiseless_limit_is_perfect() {
        let (b, a) = single(3.0, 2.0);
        let s = mmse_stats(&b, &a, 1e-300, U0).unwrap();
        assert!((s.gamma - 3.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_users_decouple() {
        let b1 = GainTensor::uniform(1, 1, 0.7);
        let a1 = PilotAllocation::from_fn(1, 1, 2, |_, b| if b == 0 { 2.0 } else { 0.0 });
        let alone = mmse_stats(&b1, &a1, 0.3, U0).unwrap();
        let b2 = GainTensor::from_fn(1, 2, |_, u| if u.user == 0 { 0.7 } else { 5.0 });
        let a2 = PilotAllocation::from_nested(vec![vec![vec![2.0, 0.0], vec![0.0, 9.0]]]).unwrap();
        let both = mmse_stats(&b2, &a2, 0.3, U0).unwrap();
        assert_eq!(alone, both);
    }

    #[test]
    fn zero_pilot_is_degenerate() {
        let (b, a) = single(1.0, 0.0);
        assert_eq!(mmse_stats(&b, &a, 1.0, U0), Err(Error::DegeneratePilot(U0)));
        assert_eq!(
            mmse_stats_or_degenerate(&b, &a, 1.0, U0).unwrap(),
            EstimationStats::degenerate(1.0)
        );
    }

    #[test]
    fn assignment_matches_general_structure() {
        let beta = GainTensor::from_fn(2, 2, |bs, u| {
            1e-9 * (1.0 + bs as f64 + 2.0 * u.cell as f64 + 0.5 * u.user as f64)
        });
        let a = PilotAssignment::new(vec![vec![0, 1], vec![1, 0]], vec![100.0, 250.0, 30.0, 400.0])
            .unwrap();
        let alloc = from_assignment(&a, 2).unwrap();
        for u in a.users() {
            let x = mmse_stats_assignment(&beta, &a, 2.5e-10, u).unwrap();
            let y = mmse_stats(&beta, &alloc, 2.5e-10, u).unwrap();
            assert!((x.gamma - y.gamma).abs() <= 1e-12 * y.gamma);
        }
    }

    #[test]
    fn hardware_reductions() {
        let beta = GainTensor::from_fn(2, 2, |bs, u| 0.1 + bs as f64 + u.index(2) as f64);
        let alloc = PilotAllocation::from_fn(2, 2, 2, |u, b| 1.0 + (u.index(2) * 3 + b) as f64);
        for u in alloc.users() {
            let ideal = mmse_stats(&beta, &alloc, 0.5, u).unwrap();
            let hw = lmmse_stats_hw(&beta, &alloc, 0.5, HardwareConfig::ideal(), u).unwrap();
            assert_eq!(ideal, hw.stats);
            let one = lmmse_stats_hw(&beta, &alloc, 0.5, HardwareConfig::new(1.0).unwrap(), u)
                .unwrap();
            assert_eq!(one.stats.gamma, 0.0);
            assert_eq!(one.stats.err_var, beta.home(u));
        }
    }

    #[test]
    fn kappa_single_basis() {
        let a = PilotAllocation::from_fn(2, 1, 1, |_, _| 3.0);
        for eps in [0.0, 0.3, 1.0] {
            let k = kappa(&a, eps, UserId::new(1, 0), U0);
            assert!((k - 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn elementwise_coef_hand_value() {
        let (b, a) = single(1.0, 1.0);
        assert_eq!(elementwise_mmse_coef_corr(&b, &a, 1.0, U0).unwrap(), 0.5);
    }

    #[test]
    fn elementwise_coef_homogeneity() {
        let beta = GainTensor::from_fn(2, 1, |bs, u| 1.0 + bs as f64 + 3.0 * u.cell as f64);
        let alloc = PilotAllocation::from_fn(2, 1, 2, |u, b| 2.0 + (u.cell + b) as f64);
        for c in [1e-3, 7.0] {
            let base = elementwise_mmse_coef_corr(&beta, &alloc, 0.4, U0).unwrap();
            let scaled = elementwise_mmse_coef_corr(&beta, &alloc.scaled(c), 0.4 * c, U0).unwrap();
            let s = alloc.energy(U0);
            let lhs = base * s * beta.home(U0);
            let rhs = scaled * s * c * beta.home(U0);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs);
        }
    }
}
