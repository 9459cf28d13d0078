//! Monte Carlo oracle.
//!
//! Draws Rayleigh channels, receiver noise and transmitter distortion, forms
//! the channel estimates from the received pilot signal, combines with the
//! estimate (MR) and estimates every expectation of the use-and-then-forget
//! SINR bound by its sample mean. The SINR is the ratio of the estimated
//! means; its standard error comes from the delta method.
//!
//! Realization `r` takes its channels and noise from ChaCha stream `2r` and
//! its distortion from stream `2r + 1` of the configured seed. Realizations
//! are grouped in fixed chunks whose sums are merged in index order, so the
//! estimates do not depend on the thread count.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{lmmse_stats_hw, mmse_stats, HardwareConfig};
use crate::network::NetworkRealization;
use crate::numeric::CompensatedSum;
use crate::par;
use crate::pilots::{PilotAllocation, UserId};
use crate::se::{self, ChannelModel, CorrelationModel, SinrReport};

/// Realizations per reduction chunk.
const CHUNK: usize = 256;

/// Relative eigenvalue level below which a covariance square root clips to zero.
const EIG_CLIP: f64 = 1e-12;

/// Largest allowed `|z|` for a passing comparison.
pub const Z_PASS: f64 = 3.0;

/// Smallest fraction of passing comparisons for a passing report.
pub const PASS_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    /// Standard errors are only meaningful from about a thousand draws on.
    pub n_realizations: usize,
    pub seed: u64,
    pub mode: ChannelModel,
    pub antennas: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_realizations: 100_000,
            seed: 0,
            mode: ChannelModel::Ideal,
            antennas: 20,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        self.mode.validate()?;
        if self.n_realizations < 2 {
            return Err(Error::InvalidConfig("n_realizations must be at least 2".into()));
        }
        if self.antennas == 0 {
            return Err(Error::InvalidConfig("antennas must be positive".into()));
        }
        Ok(())
    }
}

/// Simulated statistics of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEstimate {
    pub user: UserId,
    pub sinr: f64,
    pub standard_error: f64,
    /// `|E{v^H h_u}|^2` with the combiner `v` of this user.
    pub signal: f64,
    /// `E{|v^H h_w|^2}` for every user `w`, row-major.
    pub interference: Vec<f64>,
    /// `E{||v||^2}`.
    pub noise: f64,
    /// Per-antenna sample variance of the channel estimate.
    pub estimate_var: f64,
    pub estimate_var_se: f64,
    /// Per-antenna sample mean of `Re(estimate^H error)`.
    pub orthogonality: f64,
    pub orthogonality_se: f64,
    /// The user has no pilot energy; its estimate and SINR are zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mode: ChannelModel,
    pub n_realizations: usize,
    pub antennas: usize,
    /// Row-major.
    pub users: Vec<UserEstimate>,
}

impl McEstimate {
    pub fn user(&self, u: UserId) -> &UserEstimate {
        self.users.iter().find(|e| e.user == u).expect("user out of range")
    }
}

/// Per-user sums of one chunk of realizations.
#[derive(Debug, Clone)]
struct Sums {
    // per user: [re a, im a, t, re a^2, t^2, re a * t, ||v||^2, est, est^2, orth, orth^2]
    scalars: Vec<[f64; 11]>,
    // per user, per w: |v^H h_w|^2
    cross: Vec<Vec<f64>>,
}

impl Sums {
    fn zeros(n_users: usize) -> Self {
        Self {
            scalars: vec![[0.0; 11]; n_users],
            cross: vec![vec![0.0; n_users]; n_users],
        }
    }
}

fn complex_normal(rng: &mut ChaCha8Rng, std: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (std * FRAC_1_SQRT_2)
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

/// Hermitian square root with eigenvalues below `1e-12 * max` clipped to zero.
pub fn hermitian_sqrt(r: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = r.nrows();
    if n != r.ncols() {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    let eig = SymmetricEigen::new(r.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut d = DMatrix::<Complex64>::zeros(n, n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < -EIG_CLIP * max - f64::MIN_POSITIVE {
            return Err(Error::NotPsd(format!("eigenvalue {l:e}, largest {max:e}")));
        }
        let l = if l < EIG_CLIP * max { 0.0 } else { l };
        d[(i, i)] = Complex64::new(l.sqrt(), 0.0);
    }
    let q = &eig.eigenvectors;
    Ok(q * d * q.adjoint())
}

/// How channels are drawn from white vectors.
enum Shaping {
    /// `h = sqrt(beta) w`, indexed `[bs][user]`.
    Scalar(Vec<Vec<f64>>),
    /// `h = R^(1/2) w`, column-major, indexed `[bs][user]`.
    Matrix(Vec<Vec<DMatrix<Complex64>>>),
}

struct Setup<'a> {
    data_p: &'a [f64],
    noise: f64,
    m: usize,
    k: usize,
    n_users: usize,
    tau: usize,
    eps: f64,
    shaping: Shaping,
    /// Estimator coefficient per user, `None` without pilot energy.
    coef: Vec<Option<f64>>,
    /// Pilot amplitudes `sqrt(p_hat)` per user and basis vector.
    amp: Vec<Vec<f64>>,
}

impl<'a> Setup<'a> {
    fn new(
        net: &NetworkRealization,
        alloc: &'a PilotAllocation,
        data_p: &'a [f64],
        mc: &McConfig,
    ) -> Result<Self> {
        mc.validate()?;
        let l = net.num_cells();
        let k = net.users_per_cell();
        if alloc.num_cells() != l || alloc.users_per_cell() != k {
            return Err(Error::InvalidArgument("allocation shape does not match network".into()));
        }
        if data_p.len() != l * k {
            return Err(Error::InvalidArgument(format!(
                "expected {} data powers, got {}",
                l * k,
                data_p.len()
            )));
        }
        if data_p.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("data powers must be finite and nonnegative".into()));
        }
        let m = mc.antennas;
        let noise = net.config.noise_power_mw;
        let users: Vec<UserId> = net.users().collect();
        let eps = match mc.mode {
            ChannelModel::Hardware { epsilon } => epsilon,
            _ => 0.0,
        };
        let shaping = match mc.mode {
            ChannelModel::Correlated { rho } => {
                let corr = CorrelationModel::from_realization(net, rho)?;
                let mut out = Vec::with_capacity(l);
                for bs in 0..l {
                    let row = users
                        .iter()
                        .map(|&u| hermitian_sqrt(&corr.covariance(net.beta.get(bs, u), bs, u, m)))
                        .collect::<Result<Vec<_>>>()?;
                    out.push(row);
                }
                Shaping::Matrix(out)
            }
            _ => Shaping::Scalar(
                (0..l)
                    .map(|bs| users.iter().map(|&u| net.beta.get(bs, u).sqrt()).collect())
                    .collect(),
            ),
        };
        let coef = users
            .iter()
            .map(|&u| {
                if alloc.energy(u) == 0.0 {
                    return Ok(None);
                }
                let c = match mc.mode {
                    ChannelModel::Hardware { epsilon } => {
                        lmmse_stats_hw(&net.beta, alloc, noise, HardwareConfig::new(epsilon)?, u)?
                            .stats
                            .coef
                    }
                    _ => mmse_stats(&net.beta, alloc, noise, u)?.coef,
                };
                Ok(Some(c))
            })
            .collect::<Result<Vec<_>>>()?;
        let amp = users
            .iter()
            .map(|&u| alloc.user(u).iter().map(|p| p.sqrt()).collect())
            .collect();
        Ok(Self {
            data_p,
            noise,
            m,
            k,
            n_users: l * k,
            tau: alloc.pilot_len(),
            eps,
            shaping,
            coef,
            amp,
        })
    }

    fn realization(&self, seed: u64, r: usize, sums: &mut Sums, scratch: &mut Scratch) {
        let (m, tau, nu) = (self.m, self.tau, self.n_users);
        let mut main = stream(seed, 2 * r as u64);
        let mut dist = stream(seed, 2 * r as u64 + 1);

        // effective pilot amplitude of each user on each basis vector, shared
        // by every base station
        let shrink = (1.0 - self.eps * self.eps).sqrt();
        for v in 0..nu {
            for b in 0..tau {
                let std = self.eps * self.amp[v][b];
                let e = complex_normal(&mut dist, 1.0) * std;
                scratch.pilot_amp[v * tau + b] = Complex64::new(shrink * self.amp[v][b], 0.0) + e.conj();
            }
        }

        let cells = nu / self.k;
        for bs in 0..cells {
            for v in 0..nu {
                let h = &mut scratch.h[v * m..(v + 1) * m];
                match &self.shaping {
                    Shaping::Scalar(s) => {
                        let g = s[bs][v];
                        for x in h.iter_mut() {
                            *x = complex_normal(&mut main, 1.0) * g;
                        }
                    }
                    Shaping::Matrix(mats) => {
                        for x in scratch.w.iter_mut() {
                            *x = complex_normal(&mut main, 1.0);
                        }
                        let sq = &mats[bs][v];
                        h.fill(Complex64::new(0.0, 0.0));
                        for j in 0..m {
                            let wj = scratch.w[j];
                            for (x, c) in h.iter_mut().zip(sq.column(j).iter()) {
                                *x += c * wj;
                            }
                        }
                    }
                }
            }
            let nstd = self.noise.sqrt();
            for b in 0..tau {
                let y = &mut scratch.y[b * m..(b + 1) * m];
                for x in y.iter_mut() {
                    *x = complex_normal(&mut main, nstd);
                }
                for v in 0..nu {
                    let a = scratch.pilot_amp[v * tau + b];
                    if a == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for (x, hv) in y.iter_mut().zip(&scratch.h[v * m..(v + 1) * m]) {
                        *x += hv * a;
                    }
                }
            }

            for t in 0..self.k {
                let u = bs * self.k + t;
                let Some(coef) = self.coef[u] else {
                    continue;
                };
                let est = &mut scratch.est;
                est.fill(Complex64::new(0.0, 0.0));
                for b in 0..tau {
                    let a = self.amp[u][b] * coef;
                    if a == 0.0 {
                        continue;
                    }
                    for (x, y) in est.iter_mut().zip(&scratch.y[b * m..(b + 1) * m]) {
                        *x += y * a;
                    }
                }
                let hu = &scratch.h[u * m..(u + 1) * m];
                let mut a = Complex64::new(0.0, 0.0);
                let mut orth = 0.0;
                let mut nrm = 0.0;
                for (e, h) in est.iter().zip(hu) {
                    a += e.conj() * h;
                    orth += (e.conj() * (h - e)).re;
                    nrm += e.norm_sqr();
                }
                let mut total = self.noise * nrm;
                let row = &mut sums.cross[u];
                for w in 0..nu {
                    let hw = &scratch.h[w * m..(w + 1) * m];
                    let mut z = Complex64::new(0.0, 0.0);
                    for (e, h) in est.iter().zip(hw) {
                        z += e.conj() * h;
                    }
                    let q = z.norm_sqr();
                    row[w] += q;
                    total += self.data_p[w] * q;
                }
                let mf = m as f64;
                let (ev, ov) = (nrm / mf, orth / mf);
                let s = &mut sums.scalars[u];
                s[0] += a.re;
                s[1] += a.im;
                s[2] += total;
                s[3] += a.re * a.re;
                s[4] += total * total;
                s[5] += a.re * total;
                s[6] += nrm;
                s[7] += ev;
                s[8] += ev * ev;
                s[9] += ov;
                s[10] += ov * ov;
            }
        }
    }
}

struct Scratch {
    h: Vec<Complex64>,
    w: Vec<Complex64>,
    y: Vec<Complex64>,
    est: Vec<Complex64>,
    pilot_amp: Vec<Complex64>,
}

impl Scratch {
    fn new(nu: usize, m: usize, tau: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            h: vec![z; nu * m],
            w: vec![z; m],
            y: vec![z; tau * m],
            est: vec![z; m],
            pilot_amp: vec![z; nu * tau],
        }
    }
}

/// Sample mean and standard error of the mean from a sum and a sum of squares.
fn mean_se(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Runs `n` realizations in fixed chunks and merges chunk sums in order.
fn reduce_chunks<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>) -> Vec<f64> + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let parts = par::map_indexed(chunks, |c| f(c * CHUNK..((c + 1) * CHUNK).min(n)));
    let mut acc = vec![CompensatedSum::new(); width];
    for part in parts {
        for (a, x) in acc.iter_mut().zip(part) {
            a.add(x);
        }
    }
    acc.iter().map(|a| a.value()).collect()
}

/// Simulates the SINR bound of every user with MR combining on the channel
/// estimate. The antenna count of `mc` replaces the network's.
pub fn simulate_sinr(
    net: &NetworkRealization,
    alloc: &PilotAllocation,
    data_p: &[f64],
    mc: &McConfig,
) -> Result<McEstimate> {
    let setup = Setup::new(net, alloc, data_p, mc)?;
    let nu = setup.n_users;
    let width = nu * (11 + nu);
    let flat = reduce_chunks(mc.n_realizations, width, |range| {
        let mut sums = Sums::zeros(nu);
        let mut scratch = Scratch::new(nu, setup.m, setup.tau);
        for r in range {
            setup.realization(mc.seed, r, &mut sums, &mut scratch);
        }
        let mut out = Vec::with_capacity(width);
        for u in 0..nu {
            out.extend_from_slice(&sums.scalars[u]);
            out.extend_from_slice(&sums.cross[u]);
        }
        out
    });

    let n = mc.n_realizations as f64;
    let g_shrink = 1.0 - setup.eps * setup.eps;
    let users = (0..nu)
        .map(|i| {
            let user = UserId::from_index(i, setup.k);
            let s = &flat[i * (11 + nu)..i * (11 + nu) + 11];
            let cross: Vec<f64> = flat[i * (11 + nu) + 11..(i + 1) * (11 + nu)]
                .iter()
                .map(|x| x / n)
                .collect();
            let degenerate = setup.coef[i].is_none();
            let a_mean = s[0] / n;
            let t_mean = s[2] / n;
            let var_a = ((s[3] - n * a_mean * a_mean) / (n - 1.0)).max(0.0);
            let var_t = ((s[4] - n * t_mean * t_mean) / (n - 1.0)).max(0.0);
            let cov = (s[5] - n * a_mean * t_mean) / (n - 1.0);
            let g = g_shrink * setup.data_p[i];
            let sig = g * a_mean * a_mean;
            let den = t_mean - sig;
            let (sinr, se) = if degenerate || sig == 0.0 {
                (0.0, 0.0)
            } else {
                let da = 2.0 * g * a_mean * t_mean / (den * den);
                let dt = -sig / (den * den);
                let var = (da * da * var_a + 2.0 * da * dt * cov + dt * dt * var_t) / n;
                (sig / den, var.max(0.0).sqrt())
            };
            let (estimate_var, estimate_var_se) = mean_se(s[7], s[8], n);
            let (orthogonality, orthogonality_se) = mean_se(s[9], s[10], n);
            let im = s[1] / n;
            UserEstimate {
                user,
                sinr,
                standard_error: se,
                signal: a_mean * a_mean + im * im,
                interference: cross,
                noise: s[6] / n,
                estimate_var,
                estimate_var_se,
                orthogonality,
                orthogonality_se,
                degenerate,
            }
        })
        .collect();
    Ok(McEstimate {
        mode: mc.mode,
        n_realizations: mc.n_realizations,
        antennas: mc.antennas,
        users,
    })
}

/// A random feasible operating point for oracle checks: pilot powers as in
/// [`crate::optimize::initial_allocation`] and data powers uniform on
/// `[0.1 P_max, P_max]`.
pub fn random_operating_point(net: &NetworkRealization, seed: u64) -> (PilotAllocation, Vec<f64>) {
    let alloc = crate::optimize::initial_allocation(net, seed);
    let mut rng = stream(seed, 1);
    let p = net.config.max_data_power_mw;
    let data = (0..net.config.num_users())
        .map(|_| rng.random_range(0.1 * p..=p))
        .collect();
    (alloc, data)
}

/// One closed-form versus simulation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub user: UserId,
    /// Which quantity was compared.
    pub variant: String,
    pub closed_form: f64,
    pub empirical: f64,
    pub std_err: f64,
    pub z: f64,
}

impl ComparisonRow {
    pub fn new(user: UserId, variant: impl Into<String>, closed_form: f64, empirical: f64, std_err: f64) -> Self {
        let diff = empirical - closed_form;
        let z = if std_err > 0.0 {
            diff / std_err
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        Self {
            user,
            variant: variant.into(),
            closed_form,
            empirical,
            std_err,
            z,
        }
    }

    pub fn passes(&self) -> bool {
        self.z.abs() <= Z_PASS
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub const CSV_HEADER: &'static str = "l,k,variant,closed_form,empirical,std_err,z";

    pub fn extend(&mut self, other: ComparisonReport) {
        self.rows.extend(other.rows);
    }

    pub fn pass_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.rows.iter().filter(|r| r.passes()).count() as f64 / self.rows.len() as f64
    }

    /// At least 95% of the rows have `|z| <= 3`.
    pub fn passed(&self) -> bool {
        self.pass_fraction() >= PASS_FRACTION
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.user.cell, r.user.user, r.variant, r.closed_form, r.empirical, r.std_err, r.z
                )
            })
            .collect()
    }
}

/// Compares a closed-form report with a simulation, user by user.
pub fn compare(closed: &SinrReport, est: &McEstimate) -> Result<ComparisonReport> {
    if closed.sinr.len() != est.users.len() {
        return Err(Error::InvalidArgument("report sizes differ".into()));
    }
    let rows = est
        .users
        .iter()
        .zip(&closed.sinr)
        .map(|(e, c)| ComparisonRow::new(e.user, closed.variant.to_string(), c.to_f64(), e.sinr, e.standard_error))
        .collect();
    Ok(ComparisonReport { rows })
}

/// Closed-form SINR of the configured model against its simulation.
pub fn verify_closed_form(
    net: &NetworkRealization,
    alloc: &PilotAllocation,
    data_p: &[f64],
    mc: &McConfig,
) -> Result<ComparisonReport> {
    let net = net.with_antennas(mc.antennas);
    let closed = se::evaluate(&net, alloc, data_p, mc.mode)?;
    let est = simulate_sinr(&net, alloc, data_p, mc)?;
    compare(&closed, &est)
}

/// Per-antenna estimate variance against its closed form, and the
/// estimate/error correlation against zero. Only uncorrelated fading has a
/// scalar estimate variance, so correlated mode yields the orthogonality rows
/// alone.
pub fn estimator_checks(
    net: &NetworkRealization,
    alloc: &PilotAllocation,
    est: &McEstimate,
) -> Result<ComparisonReport> {
    let noise = net.config.noise_power_mw;
    let mut rows = Vec::new();
    for e in est.users.iter().filter(|e| !e.degenerate) {
        let gamma = match est.mode {
            ChannelModel::Ideal => Some(mmse_stats(&net.beta, alloc, noise, e.user)?.gamma),
            ChannelModel::Hardware { epsilon } => Some(
                lmmse_stats_hw(&net.beta, alloc, noise, HardwareConfig::new(epsilon)?, e.user)?
                    .stats
                    .gamma,
            ),
            ChannelModel::Correlated { .. } => None,
        };
        if let Some(g) = gamma {
            rows.push(ComparisonRow::new(e.user, "estimate_var", g, e.estimate_var, e.estimate_var_se));
        }
        rows.push(ComparisonRow::new(e.user, "orthogonality", 0.0, e.orthogonality, e.orthogonality_se));
    }
    Ok(ComparisonReport { rows })
}

/// Empirical second and fourth moments of `||h||` for `h ~ CN(0, beta I_M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub antennas: usize,
    pub beta: f64,
    pub n: usize,
    pub second: f64,
    pub second_se: f64,
    pub fourth: f64,
    pub fourth_se: f64,
}

impl MomentReport {
    pub fn expected_second(&self) -> f64 {
        self.antennas as f64 * self.beta
    }

    pub fn expected_fourth(&self) -> f64 {
        let m = self.antennas as f64;
        m * (m + 1.0) * self.beta * self.beta
    }

    pub fn z_second(&self) -> f64 {
        (self.second - self.expected_second()) / self.second_se
    }

    pub fn z_fourth(&self) -> f64 {
        (self.fourth - self.expected_fourth()) / self.fourth_se
    }
}

/// Draws `n` channels and reports the sample moments of their squared norm.
pub fn estimate_channel_moments(antennas: usize, beta: f64, n: usize, seed: u64) -> Result<MomentReport> {
    if antennas == 0 || n < 2 {
        return Err(Error::InvalidArgument("need at least one antenna and two draws".into()));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("gain {beta} must be positive")));
    }
    let g = beta.sqrt();
    let sums = reduce_chunks(n, 4, |range| {
        let mut s = [0.0; 4];
        for r in range {
            let mut rng = stream(seed, 2 * r as u64);
            let mut q = 0.0;
            for _ in 0..antennas {
                q += (complex_normal(&mut rng, 1.0) * g).norm_sqr();
            }
            let q2 = q * q;
            s[0] += q;
            s[1] += q2;
            s[2] += q2;
            s[3] += q2 * q2;
        }
        s.to_vec()
    });
    let nf = n as f64;
    let (second, second_se) = mean_se(sums[0], sums[1], nf);
    let (fourth, fourth_se) = mean_se(sums[2], sums[3], nf);
    Ok(MomentReport {
        antennas,
        beta,
        n,
        second,
        second_se,
        fourth,
        fourth_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_layout, GainTensor, NetworkConfig};

    fn unit_net() -> NetworkRealization {
        let cfg = NetworkConfig {
            num_cells: 1,
            users_per_cell: 1,
            pilot_len: 1,
            bs_antennas: 2,
            noise_power_mw: 1.0,
            ..Default::default()
        };
        let mut net = generate_layout(&cfg, 0).unwrap();
        net.beta = GainTensor::uniform(1, 1, 1.0);
        net
    }

    fn small(seed: u64) -> NetworkRealization {
        let cfg = NetworkConfig {
            num_cells: 2,
            users_per_cell: 2,
            pilot_len: 2,
            bs_antennas: 20,
            ..Default::default()
        };
        generate_layout(&cfg, seed).unwrap()
    }

    #[test]
    fn unit_instance_matches_hand_value() {
        let net = unit_net();
        let alloc = PilotAllocation::from_fn(1, 1, 1, |_, _| 1.0);
        let mc = McConfig {
            n_realizations: 100_000,
            seed: 3,
            mode: ChannelModel::Ideal,
            antennas: 2,
        };
        let est = simulate_sinr(&net, &alloc, &[1.0], &mc).unwrap();
        let e = &est.users[0];
        assert!(e.standard_error > 0.0);
        assert!(((e.sinr - 0.5) / e.standard_error).abs() <= 3.0, "{e:?}");
        // estimate variance is gamma = 0.5
        assert!(((e.estimate_var - 0.5) / e.estimate_var_se).abs() <= 3.0);
    }

    #[test]
    fn zero_epsilon_reproduces_ideal_draws() {
        let net = small(1);
        let alloc = PilotAllocation::from_fn(2, 2, 2, |u, b| if u.user == b { 150.0 } else { 20.0 });
        let data = vec![100.0; 4];
        let mc = McConfig {
            n_realizations: 2_000,
            seed: 9,
            mode: ChannelModel::Ideal,
            antennas: 8,
        };
        let a = simulate_sinr(&net, &alloc, &data, &mc).unwrap();
        let hw = McConfig {
            mode: ChannelModel::Hardware { epsilon: 0.0 },
            ..mc
        };
        let b = simulate_sinr(&net, &alloc, &data, &hw).unwrap();
        assert_eq!(a.users, b.users);
    }

    #[test]
    fn independent_of_thread_count() {
        let net = small(2);
        let alloc = PilotAllocation::from_fn(2, 2, 2, |u, b| if u.user == b { 150.0 } else { 5.0 });
        let data = vec![200.0; 4];
        let mc = McConfig {
            n_realizations: 3_000,
            seed: 4,
            mode: ChannelModel::Correlated { rho: 0.5 },
            antennas: 6,
        };
        let a = par::with_threads(1, || simulate_sinr(&net, &alloc, &data, &mc).unwrap());
        let b = par::with_threads(4, || simulate_sinr(&net, &alloc, &data, &mc).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn closed_forms_agree_on_a_small_instance() {
        let net = small(5);
        let alloc = PilotAllocation::from_fn(2, 2, 2, |u, b| if u.user == b { 300.0 } else { 40.0 });
        let data = vec![150.0; 4];
        for mode in [
            ChannelModel::Ideal,
            ChannelModel::Hardware { epsilon: 0.1 },
            ChannelModel::Correlated { rho: 0.5 },
        ] {
            let mc = McConfig {
                n_realizations: 20_000,
                seed: 11,
                mode,
                antennas: 10,
            };
            let rep = verify_closed_form(&net, &alloc, &data, &mc).unwrap();
            assert_eq!(rep.rows.len(), 4);
            assert!(rep.rows.iter().all(|r| r.z.abs() <= 4.5), "{mode:?} {rep:?}");
        }
    }

    #[test]
    fn corrupted_closed_form_fails() {
        let net = small(5);
        let alloc = PilotAllocation::from_fn(2, 2, 2, |u, b| if u.user == b { 300.0 } else { 40.0 });
        let data = vec![150.0; 4];
        let mc = McConfig {
            n_realizations: 20_000,
            seed: 11,
            mode: ChannelModel::Ideal,
            antennas: 10,
        };
        let n = net.with_antennas(10);
        let mut closed = se::evaluate(&n, &alloc, &data, mc.mode).unwrap();
        for s in &mut closed.sinr {
            *s = se::SinrValue::Finite(s.to_f64() * 1.1);
        }
        let est = simulate_sinr(&n, &alloc, &data, &mc).unwrap();
        assert!(!compare(&closed, &est).unwrap().passed());
    }

    #[test]
    fn zero_pilot_user_is_flagged() {
        let net = small(6);
        let alloc = PilotAllocation::from_fn(2, 2, 2, |u, b| {
            if u == UserId::new(1, 1) { 0.0 } else if u.user == b { 100.0 } else { 0.0 }
        });
        let mc = McConfig {
            n_realizations: 500,
            ..Default::default()
        };
        let est = simulate_sinr(&net, &alloc, &[100.0; 4], &mc).unwrap();
        let e = est.user(UserId::new(1, 1));
        assert!(e.degenerate);
        assert_eq!(e.sinr, 0.0);
        assert!(!est.user(UserId::new(0, 0)).degenerate);
    }

    #[test]
    fn sqrt_of_exponential_covariance() {
        let r = se::exponential_covariance(2.0, Complex64::from_polar(0.7, 0.4), 5);
        let s = hermitian_sqrt(&r).unwrap();
        let back = &s * &s;
        assert!((back - &r).norm() <= 1e-12 * r.norm());
        let rank_one = se::exponential_covariance(1.0, Complex64::from_polar(1.0, 0.3), 4);
        let s = hermitian_sqrt(&rank_one).unwrap();
        assert!((&s * &s - &rank_one).norm() <= 1e-6);
    }

    #[test]
    fn channel_moments() {
        for (m, expected) in [(1usize, 2.0), (4, 20.0)] {
            let rep = estimate_channel_moments(m, 1.0, 50_000, 1).unwrap();
            assert_eq!(rep.expected_fourth(), expected);
            assert!(rep.z_fourth().abs() <= 4.0, "{rep:?}");
            assert!(rep.z_second().abs() <= 4.0, "{rep:?}");
        }
        let a = estimate_channel_moments(4, 1.0, 1_000, 2).unwrap();
        let b = estimate_channel_moments(4, 2.0, 1_000, 2).unwrap();
        assert!((b.fourth - 4.0 * a.fourth).abs() <= 1e-12 * b.fourth);
    }
}
