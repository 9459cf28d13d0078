//! Closed-form effective SINR and spectral efficiency with MR detection.
//!
//! Every function returns the use-and-then-forget SINR of one user at its own
//! base station. Powers are linear mW, gains are linear, and `data_p` holds
//! one data power per user in row-major order.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{kappa, pilot_denominator, HardwareConfig};
use crate::network::{GainTensor, NetworkRealization};
use crate::numeric::CompensatedSum;
use crate::pilots::{from_assignment, pilot_inner, PilotAllocation, PilotAssignment, UserId};

/// Relative tolerance on the weight simplex of [`sinr_approx`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Channel model selector shared by the optimizers, the simulator and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChannelModel {
    /// Uncorrelated Rayleigh fading, ideal hardware.
    #[default]
    Ideal,
    /// Uncorrelated Rayleigh fading with transceiver impairments.
    Hardware { epsilon: f64 },
    /// Exponentially correlated Rayleigh fading with magnitude `rho`.
    Correlated { rho: f64 },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelModel::Ideal => Ok(()),
            ChannelModel::Hardware { epsilon } => HardwareConfig::new(epsilon).map(|_| ()),
            ChannelModel::Correlated { rho } => {
                if (0.0..=1.0).contains(&rho) {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("correlation magnitude {rho} outside [0, 1]")))
                }
            }
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            ChannelModel::Ideal => Variant::Proposed,
            ChannelModel::Hardware { .. } => Variant::Hardware,
            ChannelModel::Correlated { .. } => Variant::Correlated,
        }
    }
}

/// Which closed form produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Proposed,
    Assignment,
    Approx,
    Hardware,
    Correlated,
    Asymptotic,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Proposed => "proposed",
            Variant::Assignment => "assignment",
            Variant::Approx => "approx",
            Variant::Hardware => "hardware",
            Variant::Correlated => "correlated",
            Variant::Asymptotic => "asymptotic",
        };
        f.write_str(s)
    }
}

/// A SINR that may be unbounded (the large-antenna limit without pilot
/// contamination).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SinrValue {
    Finite(f64),
    Infinite,
}

impl SinrValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, SinrValue::Infinite)
    }

    /// The value as a float, mapping the unbounded case to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            SinrValue::Finite(x) => x,
            SinrValue::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            SinrValue::Finite(x) => Some(x),
            SinrValue::Infinite => None,
        }
    }

    fn map(self, f: impl FnOnce(f64) -> f64) -> Self {
        match self {
            SinrValue::Finite(x) => SinrValue::Finite(f(x)),
            SinrValue::Infinite => SinrValue::Infinite,
        }
    }
}

impl PartialOrd for SinrValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for SinrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SinrValue::Finite(x) => write!(f, "{x:.16e}"),
            SinrValue::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SinrRepr {
    Num(f64),
    Tag(String),
}

impl Serialize for SinrValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            SinrValue::Finite(x) => SinrRepr::Num(x),
            SinrValue::Infinite => SinrRepr::Tag("inf".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SinrValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match SinrRepr::deserialize(d)? {
            SinrRepr::Num(x) => Ok(SinrValue::Finite(x)),
            SinrRepr::Tag(t) if t == "inf" => Ok(SinrValue::Infinite),
            SinrRepr::Tag(t) => Err(serde::de::Error::custom(format!("bad SINR value {t:?}"))),
        }
    }
}

/// `(1 - tau_p / tau_c) log2(1 + sinr)` in bit/s/Hz.
pub fn se_from_sinr(sinr: f64, pilot_len: usize, coherence_len: usize) -> f64 {
    (1.0 - pilot_len as f64 / coherence_len as f64) * sinr.ln_1p() / std::f64::consts::LN_2
}

fn check_data(alloc: &PilotAllocation, data_p: &[f64]) -> Result<()> {
    let n = alloc.num_cells() * alloc.users_per_cell();
    if data_p.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} data powers, got {}",
            data_p.len()
        )));
    }
    Ok(())
}

/// `sum_(i,t) p_(i,t) beta_(i,t) + sigma^2` at base station `bs`.
fn received_power(beta: &GainTensor, data_p: &[f64], noise: f64, bs: usize) -> f64 {
    let k = beta.users_per_cell();
    let mut acc = CompensatedSum::new();
    for (i, p) in data_p.iter().enumerate() {
        acc.add(p * beta.get(bs, UserId::from_index(i, k)));
    }
    acc.add(noise);
    acc.value()
}

/// `sum_(i,t) != u p beta^2 c^2`: coherent interference before the factor `M`.
fn coherent_sum(beta: &GainTensor, alloc: &PilotAllocation, data_p: &[f64], u: UserId) -> f64 {
    let k = beta.users_per_cell();
    let mut acc = CompensatedSum::new();
    for v in alloc.users() {
        if v == u {
            continue;
        }
        let c = pilot_inner(alloc, v, u);
        if c != 0.0 {
            let b = beta.get(u.cell, v);
            acc.add(data_p[v.index(k)] * b * b * c * c);
        }
    }
    acc.value()
}

/// Exact SINR for the general pilot structure.
pub fn sinr_proposed(
    beta: &GainTensor,
    alloc: &PilotAllocation,
    data_p: &[f64],
    noise: f64,
    antennas: usize,
    u: UserId,
) -> Result<f64> {
    check_data(alloc, data_p)?;
    let s = alloc.energy(u);
    let p = data_p[u.index(alloc.users_per_cell())];
    if s == 0.0 || p == 0.0 {
        return Ok(0.0);
    }
    let m = antennas as f64;
    let b = beta.home(u);
    let d = pilot_denominator(beta, alloc, noise, u);
    let den = d * received_power(beta, data_p, noise, u.cell)
        + m * coherent_sum(beta, alloc, data_p, u);
    Ok(m * b * b * p * s * s / den)
}

/// Exact SINR for the assignment structure, using reuse sets only.
pub fn sinr_assignment(
    beta: &GainTensor,
    a: &PilotAssignment,
    data_p: &[f64],
    noise: f64,
    antennas: usize,
    u: UserId,
) -> Result<f64> {
    a.validate()?;
    let k = a.users_per_cell();
    if data_p.len() != a.num_cells() * k {
        return Err(Error::InvalidArgument("data power length mismatch".into()));
    }
    let pt = a.power(u);
    let p = data_p[u.index(k)];
    if pt == 0.0 || p == 0.0 {
        return Ok(0.0);
    }
    let m = antennas as f64;
    let b = beta.home(u);
    let mut est = CompensatedSum::new();
    let mut coh = CompensatedSum::new();
    for v in a.reuse_set(u) {
        let bv = beta.get(u.cell, v);
        est.add(bv * a.power(v));
        if v != u {
            coh.add(data_p[v.index(k)] * bv * bv * a.power(v));
        }
    }
    est.add(noise);
    let den = est.value() * received_power(beta, data_p, noise, u.cell) + m * coh.value();
    Ok(m * b * b * p * pt / den)
}

/// Weights that make the monomial bound of `sum_b p_hat^b` tight at the
/// current allocation: `alpha_b = p_hat^b / sum p_hat`.
pub fn tight_weights(alloc: &PilotAllocation, u: UserId) -> Vec<f64> {
    let s = alloc.energy(u);
    alloc.user(u).iter().map(|p| p / s).collect()
}

/// `prod_b (p_hat^b / alpha_b)^alpha_b`, the monomial lower bound of the
/// pilot energy. Bases with zero weight contribute a factor one.
pub fn energy_monomial(powers: &[f64], weights: &[f64]) -> f64 {
    powers
        .iter()
        .zip(weights)
        .filter(|(_, &a)| a > 0.0)
        .map(|(&p, &a)| (a * (p / a).ln()).exp())
        .product()
}

/// SINR with the own pilot energy in the numerator replaced by its monomial
/// lower bound for the given weights. Never exceeds [`sinr_proposed`].
#[allow(clippy::too_many_arguments)]
pub fn sinr_approx(
    beta: &GainTensor,
    alloc: &PilotAllocation,
    data_p: &[f64],
    noise: f64,
    antennas: usize,
    weights: &[f64],
    u: UserId,
) -> Result<f64> {
    check_data(alloc, data_p)?;
    if weights.len() != alloc.pilot_len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} weights, got {}",
            alloc.pilot_len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidArgument(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    let s = alloc.energy(u);
    let p = data_p[u.index(alloc.users_per_cell())];
    if s == 0.0 || p == 0.0 {
        return Ok(0.0);
    }
    let g = energy_monomial(alloc.user(u), weights);
    let m = antennas as f64;
    let b = beta.home(u);
    let d = pilot_denominator(beta, alloc, noise, u);
    let den = d * received_power(beta, data_p, noise, u.cell)
        + m * coherent_sum(beta, alloc, data_p, u);
    Ok(m * b * b * p * g * g / den)
}

/// Exact SINR under transceiver hardware impairments of level `epsilon`.
pub fn sinr_hw(
    beta: &GainTensor,
    alloc: &PilotAllocation,
    data_p: &[f64],
    noise: f64,
    antennas: usize,
    epsilon: f64,
    u: UserId,
) -> Result<f64> {
    check_data(alloc, data_p)?;
    HardwareConfig::new(epsilon)?;
    let k = alloc.users_per_cell();
    let s = alloc.energy(u);
    let p = data_p[u.index(k)];
    if s == 0.0 || p == 0.0 {
        return Ok(0.0);
    }
    let e2 = epsilon * epsilon;
    let m = antennas as f64;
    let b = beta.home(u);

    let mut d = CompensatedSum::new();
    let mut eta = CompensatedSum::new();
    for v in alloc.users() {
        let kv = kappa(alloc, epsilon, v, u);
        if kv == 0.0 {
            continue;
        }
        let bv = beta.get(u.cell, v);
        d.add(bv * kv);
        if v != u {
            eta.add(m * kv * data_p[v.index(k)] * bv * bv);
        }
    }
    d.add(noise * s);
    let sq: f64 = alloc.user(u).iter().map(|x| x * x).sum();
    eta.add(m * e2 * p * b * b * sq);
    eta.add(m * e2 * (1.0 - e2) * s * s * p * b * b);

    let num = m * (1.0 - e2) * (1.0 - e2) * p * b * b * s * s;
    if num == 0.0 {
        return Ok(0.0);
    }
    let den = d.value() * received_power(beta, data_p, noise, u.cell) + eta.value();
    Ok(num / den)
}

/// Complex correlation coefficients `r = rho e^{j theta}` of the exponential
/// model, one per (base station, user) pair, laid out like [`GainTensor`].
///
/// The covariance of the channel from user `u` to base station `bs` has
/// entries `beta r^(i-j)` below the diagonal and `beta conj(r)^(j-i)` above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    num_cells: usize,
    users_per_cell: usize,
    r: Vec<Complex64>,
}

impl CorrelationModel {
    pub fn from_fn<F: FnMut(usize, UserId) -> Complex64>(
        num_cells: usize,
        users_per_cell: usize,
        mut f: F,
    ) -> Result<Self> {
        let mut r = Vec::with_capacity(num_cells * num_cells * users_per_cell);
        for bs in 0..num_cells {
            for u in UserId::all(num_cells, users_per_cell) {
                let x = f(bs, u);
                if !(x.norm() <= 1.0 + 1e-12) {
                    return Err(Error::NotPsd(format!(
                        "|r| = {} for user {u} at base station {bs}",
                        x.norm()
                    )));
                }
                r.push(x);
            }
        }
        Ok(Self {
            num_cells,
            users_per_cell,
            r,
        })
    }

    /// Same magnitude everywhere, phase from the direction of each user as
    /// seen from each base station.
    pub fn from_realization(net: &NetworkRealization, rho: f64) -> Result<Self> {
        ChannelModel::Correlated { rho }.validate()?;
        Self::from_fn(net.num_cells(), net.users_per_cell(), |bs, u| {
            Complex64::from_polar(rho, net.angle(bs, u))
        })
    }

    /// No correlation: every covariance is a scaled identity.
    pub fn uncorrelated(num_cells: usize, users_per_cell: usize) -> Self {
        Self {
            num_cells,
            users_per_cell,
            r: vec![Complex64::new(0.0, 0.0); num_cells * num_cells * users_per_cell],
        }
    }

    #[inline]
    pub fn r(&self, bs: usize, u: UserId) -> Complex64 {
        self.r[(bs * self.num_cells + u.cell) * self.users_per_cell + u.user]
    }

    /// Dense `M x M` covariance of the channel from `u` to `bs`.
    pub fn covariance(&self, beta: f64, bs: usize, u: UserId, antennas: usize) -> DMatrix<Complex64> {
        exponential_covariance(beta, self.r(bs, u), antennas)
    }
}

/// Dense exponential-correlation covariance with unit-modulus-bounded `r`.
pub fn exponential_covariance(beta: f64, r: Complex64, antennas: usize) -> DMatrix<Complex64> {
    let mut pow = vec![Complex64::new(1.0, 0.0); antennas.max(1)];
    for d in 1..antennas {
        pow[d] = pow[d - 1] * r;
    }
    DMatrix::from_fn(antennas, antennas, |i, j| {
        if i >= j {
            pow[i - j] * beta
        } else {
            pow[j - i].conj() * beta
        }
    })
}

/// `tr(R_a R_b)` for two exponential-correlation covariances, in `O(M)`.
pub fn trace_product_exponential(
    beta_a: f64,
    r_a: Complex64,
    beta_b: f64,
    r_b: Complex64,
    antennas: usize,
) -> f64 {
    let m = antennas as f64;
    let q = r_a * r_b.conj();
    let mut acc = CompensatedSum::new();
    acc.add(m);
    let mut qd = Complex64::new(1.0, 0.0);
    for d in 1..antennas {
        qd *= q;
        if qd.norm_sqr() == 0.0 {
            break;
        }
        acc.add(2.0 * (m - d as f64) * qd.re);
    }
    beta_a * beta_b * acc.value()
}

/// `tr(A B)` for dense matrices, real part.
pub fn trace_product_dense(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        for j in 0..n {
            acc.add((a[(i, j)] * b[(j, i)]).re);
        }
    }
    acc.value()
}

/// Exact SINR under exponentially correlated fading with element-wise MMSE
/// estimation. Only the non-coherent interference differs from the
/// uncorrelated case.
#[allow(clippy::too_many_arguments)]
pub fn sinr_corr(
    beta: &GainTensor,
    corr: &CorrelationModel,
    alloc: &PilotAllocation,
    data_p: &[f64],
    noise: f64,
    antennas: usize,
    u: UserId,
) -> Result<f64> {
    check_data(alloc, data_p)?;
    if corr.num_cells != alloc.num_cells() || corr.users_per_cell != alloc.users_per_cell() {
        return Err(Error::InvalidArgument("correlation model shape mismatch".into()));
    }
    let k = alloc.users_per_cell();
    let s = alloc.energy(u);
    let p = data_p[u.index(k)];
    if s == 0.0 || p == 0.0 {
        return Ok(0.0);
    }
    let m = antennas as f64;
    let bs = u.cell;
    let b = beta.home(u);

    let contaminators: Vec<(UserId, f64)> = alloc
        .users()
        .filter_map(|v| {
            let c = pilot_inner(alloc, v, u);
            (c != 0.0).then_some((v, c * c))
        })
        .collect();

    let mut non = CompensatedSum::new();
    for v in alloc.users() {
        let pv = data_p[v.index(k)];
        if pv == 0.0 {
            continue;
        }
        let (bv, rv) = (beta.get(bs, v), corr.r(bs, v));
        let mut inner = CompensatedSum::new();
        for &(w, c2) in &contaminators {
            inner.add(trace_product_exponential(bv, rv, beta.get(bs, w), corr.r(bs, w), antennas) * c2);
        }
        non.add(pv / m * inner.value());
    }
    let d = pilot_denominator(beta, alloc, noise, u);
    non.add(noise * s * (received_power(beta, data_p, noise, bs) - noise));
    // the estimator term beta sigma^2 S / varrho equals sigma^2 times the
    // despread-pilot variance
    non.add(noise * d);

    let den = non.value() + m * coherent_sum(beta, alloc, data_p, u);
    Ok(m * b * b * p * s * s / den)
}

/// Large-antenna limit of [`sinr_proposed`]; unbounded when no other user
/// shares pilot energy with `u`.
pub fn sinr_asymptotic(
    beta: &GainTensor,
    alloc: &PilotAllocation,
    data_p: &[f64],
    u: UserId,
) -> Result<SinrValue> {
    check_data(alloc, data_p)?;
    let s = alloc.energy(u);
    let p = data_p[u.index(alloc.users_per_cell())];
    let b = beta.home(u);
    let num = b * b * p * s * s;
    let den = coherent_sum(beta, alloc, data_p, u);
    if num == 0.0 {
        Ok(SinrValue::Finite(0.0))
    } else if den == 0.0 {
        Ok(SinrValue::Infinite)
    } else {
        Ok(SinrValue::Finite(num / den))
    }
}

/// Per-user SINR and SE of one closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub variant: Variant,
    pub num_cells: usize,
    pub users_per_cell: usize,
    /// Row-major.
    pub sinr: Vec<SinrValue>,
    /// Row-major, bit/s/Hz.
    pub se: Vec<SinrValue>,
    /// User attaining the smallest SINR (first one on ties).
    pub min_user: UserId,
}

impl SinrReport {
    pub fn new(
        variant: Variant,
        num_cells: usize,
        users_per_cell: usize,
        sinr: Vec<SinrValue>,
        pilot_len: usize,
        coherence_len: usize,
    ) -> Self {
        let se = sinr
            .iter()
            .map(|s| s.map(|x| se_from_sinr(x, pilot_len, coherence_len)))
            .collect();
        let mut min_i = 0;
        for (i, s) in sinr.iter().enumerate() {
            if s < &sinr[min_i] {
                min_i = i;
            }
        }
        Self {
            variant,
            num_cells,
            users_per_cell,
            sinr,
            se,
            min_user: UserId::from_index(min_i, users_per_cell),
        }
    }

    pub fn min_sinr(&self) -> f64 {
        self.sinr[self.min_user.index(self.users_per_cell)].to_f64()
    }

    pub fn min_se(&self) -> f64 {
        self.se[self.min_user.index(self.users_per_cell)].to_f64()
    }

    pub fn sinr_of(&self, u: UserId) -> SinrValue {
        self.sinr[u.index(self.users_per_cell)]
    }

    pub const CSV_HEADER: &'static str = "l,k,variant,sinr,se";

    /// Rows `l,k,variant,sinr,se` without the header.
    pub fn csv_rows(&self) -> Vec<String> {
        UserId::all(self.num_cells, self.users_per_cell)
            .zip(self.sinr.iter().zip(&self.se))
            .map(|(u, (s, e))| format!("{},{},{},{},{}", u.cell, u.user, self.variant, s, e))
            .collect()
    }
}

/// Evaluates the exact SINR of the selected channel model for every user.
pub fn evaluate(
    net: &NetworkRealization,
    alloc: &PilotAllocation,
    data_p: &[f64],
    model: ChannelModel,
) -> Result<SinrReport> {
    model.validate()?;
    let cfg = &net.config;
    let (beta, noise, m) = (&net.beta, cfg.noise_power_mw, cfg.bs_antennas);
    let corr = match model {
        ChannelModel::Correlated { rho } => Some(CorrelationModel::from_realization(net, rho)?),
        _ => None,
    };
    let sinr = net
        .users()
        .map(|u| {
            match model {
                ChannelModel::Ideal => sinr_proposed(beta, alloc, data_p, noise, m, u),
                ChannelModel::Hardware { epsilon } => {
                    sinr_hw(beta, alloc, data_p, noise, m, epsilon, u)
                }
                ChannelModel::Correlated { .. } => {
                    sinr_corr(beta, corr.as_ref().unwrap(), alloc, data_p, noise, m, u)
                }
            }
            .map(SinrValue::Finite)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SinrReport::new(
        model.variant(),
        net.num_cells(),
        net.users_per_cell(),
        sinr,
        alloc.pilot_len(),
        cfg.coherence_len,
    ))
}

/// Evaluates an assignment under the selected channel model. The ideal model
/// uses the reuse-set form directly; the others go through the general
/// structure.
pub fn evaluate_assignment(
    net: &NetworkRealization,
    a: &PilotAssignment,
    data_p: &[f64],
    model: ChannelModel,
) -> Result<SinrReport> {
    let cfg = &net.config;
    if model != ChannelModel::Ideal {
        return evaluate(net, &from_assignment(a, cfg.pilot_len)?, data_p, model);
    }
    let sinr = net
        .users()
        .map(|u| {
            sinr_assignment(&net.beta, a, data_p, cfg.noise_power_mw, cfg.bs_antennas, u)
                .map(SinrValue::Finite)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SinrReport::new(
        Variant::Assignment,
        net.num_cells(),
        net.users_per_cell(),
        sinr,
        cfg.pilot_len,
        cfg.coherence_len,
    ))
}

/// Large-antenna limits for every user.
pub fn evaluate_asymptotic(
    net: &NetworkRealization,
    alloc: &PilotAllocation,
    data_p: &[f64],
) -> Result<SinrReport> {
    let sinr = net
        .users()
        .map(|u| sinr_asymptotic(&net.beta, alloc, data_p, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(SinrReport::new(
        Variant::Asymptotic,
        net.num_cells(),
        net.users_per_cell(),
        sinr,
        alloc.pilot_len(),
        net.config.coherence_len,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const U0: UserId = UserId::new(0, 0);

    fn single() -> (GainTensor, PilotAllocation) {
        (
            GainTensor::uniform(1, 1, 1.0),
            PilotAllocation::from_fn(1, 1, 1, |_, _| 1.0),
        )
    }

    #[test]
    fn single_user_hand_value() {
        let (b, a) = single();
        assert_eq!(sinr_proposed(&b, &a, &[1.0], 1.0, 2, U0).unwrap(), 0.5);
        assert_eq!(sinr_proposed(&b, &a, &[0.0], 1.0, 2, U0).unwrap(), 0.0);
    }

    #[test]
    fn se_values() {
        assert_eq!(se_from_sinr(0.0, 1, 200), 0.0);
        assert_eq!(se_from_sinr(1.0, 100, 200), 0.5);
        assert!((se_from_sinr(0.5, 1, 200) - 0.995 * 1.5f64.log2()).abs() < 1e-15);
        assert!((se_from_sinr(0.5, 1, 200) - 0.5821).abs() < 1e-4);
    }

    #[test]
    fn orthogonal_pilots_have_no_coherent_term() {
        let beta = GainTensor::uniform(1, 2, 1.0);
        let a = PilotAllocation::from_nested(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]).unwrap();
        let p = [1.0, 1.0];
        let lo = sinr_proposed(&beta, &a, &p, 1.0, 10, U0).unwrap();
        let hi = sinr_proposed(&beta, &a, &p, 1.0, 1000, U0).unwrap();
        // non-coherent only: SINR = M * 1 / ((1+1)(2+1))
        assert!((lo - 10.0 / 6.0).abs() < 1e-12);
        assert!((hi / lo - 100.0).abs() < 1e-9);
        assert!(sinr_asymptotic(&beta, &a, &p, U0).unwrap().is_infinite());
    }

    #[test]
    fn shared_pilot_symmetric_limit_is_one() {
        let beta = GainTensor::uniform(2, 1, 1.0);
        let a = PilotAllocation::from_fn(2, 1, 1, |_, _| 1.0);
        let v = sinr_asymptotic(&beta, &a, &[1.0, 1.0], U0).unwrap();
        assert_eq!(v, SinrValue::Finite(1.0));
        let s0 = sinr_proposed(&beta, &a, &[1.0, 1.0], 0.1, 50, U0).unwrap();
        let s1 = sinr_proposed(&beta, &a, &[1.0, 1.0], 0.1, 50, UserId::new(1, 0)).unwrap();
        assert_eq!(s0, s1);
    }

    #[test]
    fn hardware_hand_values() {
        let (b, a) = single();
        let ideal = sinr_proposed(&b, &a, &[1.0], 1.0, 2, U0).unwrap();
        assert!((sinr_hw(&b, &a, &[1.0], 1.0, 2, 0.0, U0).unwrap() - ideal).abs() < 1e-15);
        assert_eq!(sinr_hw(&b, &a, &[1.0], 1.0, 2, 1.0, U0).unwrap(), 0.0);
        // eps^2 = 0.25, one user: kappa = p_hat^2, D = 2, received = 2,
        // eta = M e2 (1 + (1 - e2)) = 2 * 0.25 * 1.75
        let e2 = 0.25;
        let expect = 2.0 * (1.0 - e2) * (1.0 - e2) / (4.0 + 2.0 * e2 * (2.0 - e2));
        assert!((sinr_hw(&b, &a, &[1.0], 1.0, 2, 0.5, U0).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn correlated_two_by_two_trace() {
        let r = Complex64::from_polar(0.5, 0.7);
        let dense = exponential_covariance(2.0, r, 2);
        let t = trace_product_dense(&dense, &dense);
        assert!((t - 4.0 * (2.0 + 2.0 * 0.25)).abs() < 1e-12);
        let closed = trace_product_exponential(2.0, r, 2.0, r, 2);
        assert!((closed - t).abs() < 1e-12);
    }

    #[test]
    fn correlated_trace_paths_agree() {
        for m in [1usize, 2, 7, 64] {
            let ra = Complex64::from_polar(0.9, 1.3);
            let rb = Complex64::from_polar(0.5, -2.1);
            let a = exponential_covariance(1.5, ra, m);
            let b = exponential_covariance(0.25, rb, m);
            let dense = trace_product_dense(&a, &b);
            let closed = trace_product_exponential(1.5, ra, 0.25, rb, m);
            assert!((dense - closed).abs() <= 1e-10 * dense.abs());
        }
    }

    #[test]
    fn correlated_single_user_hand_value() {
        // M = 2, rho = 0.5: tr(R^2) = beta^2 (2 + 2 rho^2) = 2.5
        let (b, a) = single();
        let corr = CorrelationModel::from_fn(1, 1, |_, _| Complex64::from_polar(0.5, 0.3)).unwrap();
        let non = 1.0 / 2.0 * 2.5 + 1.0 * 1.0 * 1.0 + 1.0 * 2.0;
        let v = sinr_corr(&b, &corr, &a, &[1.0], 1.0, 2, U0).unwrap();
        assert!((v - 2.0 / non).abs() < 1e-15);
    }

    #[test]
    fn invalid_correlation_rejected() {
        assert!(matches!(
            CorrelationModel::from_fn(1, 1, |_, _| Complex64::new(1.1, 0.0)),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn approx_single_basis_is_exact() {
        let (b, a) = single();
        let exact = sinr_proposed(&b, &a, &[1.0], 1.0, 2, U0).unwrap();
        assert_eq!(sinr_approx(&b, &a, &[1.0], 1.0, 2, &[1.0], U0).unwrap(), exact);
        assert!(sinr_approx(&b, &a, &[1.0], 1.0, 2, &[0.9], U0).is_err());
    }

    #[test]
    fn sinr_value_json() {
        let v = vec![SinrValue::Finite(0.5), SinrValue::Infinite];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[0.5,"inf"]"#);
        assert_eq!(serde_json::from_str::<Vec<SinrValue>>(&s).unwrap(), v);
    }

    #[test]
    fn report_tracks_minimum() {
        let r = SinrReport::new(
            Variant::Proposed,
            1,
            3,
            vec![SinrValue::Finite(2.0), SinrValue::Finite(1.0), SinrValue::Finite(1.0)],
            1,
            200,
        );
        assert_eq!(r.min_user, UserId::new(0, 1));
        assert_eq!(r.min_sinr(), 1.0);
        assert_eq!(r.csv_rows().len(), 3);
        assert!(r.csv_rows()[0].starts_with("0,0,proposed,2.0000000000000000e0,"));
    }
}
