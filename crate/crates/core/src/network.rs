//! Multi-cell layouts with wrap-around, pathloss and shadow fading.
//!
//! Cells are squares on a regular grid. The whole grid is treated as a torus
//! so every base station sees the same interference geometry. Large-scale
//! fading follows the LTE urban macro model
//! `beta[dB] = -148.1 - 37.6 log10(d[km]) + z` with log-normal shadowing `z`.
//!
//! All powers are carried in linear mW and all gains are linear; dB and dBm
//! only appear in [`NetworkConfig`] helpers at the boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pilots::UserId;

/// Default pathloss at 1 km, in dB.
pub const PATHLOSS_INTERCEPT_DB: f64 = -148.1;
/// Default pathloss slope, in dB per decade of distance.
pub const PATHLOSS_SLOPE_DB: f64 = 37.6;

const SHADOW_ATTEMPTS: usize = 1000;
const PLACEMENT_ATTEMPTS: usize = 1_000_000;

/// Converts dBm to linear mW.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Converts a linear gain or power ratio to dB.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Pathloss in dB at `distance` km using the default LTE constants.
pub fn pathloss_db(distance: f64) -> Result<f64> {
    pathloss_db_with(distance, PATHLOSS_INTERCEPT_DB, PATHLOSS_SLOPE_DB)
}

/// Pathloss in dB: `intercept - slope * log10(distance)`.
pub fn pathloss_db_with(distance: f64, intercept: f64, slope: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::Domain(format!(
            "pathloss needs a positive distance, got {distance}"
        )));
    }
    Ok(intercept - slope * distance.log10())
}

/// Shortest displacement from `a` to any toroidal image of `b` on a
/// `width x height` torus.
pub fn wraparound_vector(a: [f64; 2], b: [f64; 2], width: f64, height: f64) -> [f64; 2] {
    let mut best = [b[0] - a[0], b[1] - a[1]];
    let mut best_d2 = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = b[0] + sx * width - a[0];
            let dy = b[1] + sy * height - a[1];
            let d2 = dx * dx + dy * dy;
            if d2 < best_d2 {
                best_d2 = d2;
                best = [dx, dy];
            }
        }
    }
    best
}

/// Minimum distance over the nine toroidal images of `b` on a rectangle.
pub fn wraparound_distance_rect(a: [f64; 2], b: [f64; 2], width: f64, height: f64) -> f64 {
    let v = wraparound_vector(a, b, width, height);
    v[0].hypot(v[1])
}

/// Minimum distance over the nine toroidal images of `b` on a square of side
/// `area_side`.
pub fn wraparound_distance(a: [f64; 2], b: [f64; 2], area_side: f64) -> f64 {
    wraparound_distance_rect(a, b, area_side, area_side)
}

/// System and propagation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Number of cells `L`.
    pub num_cells: usize,
    /// Users per cell `K`.
    pub users_per_cell: usize,
    /// Antennas per base station `M`.
    pub bs_antennas: usize,
    /// Pilot length `tau_p` in symbols.
    pub pilot_len: usize,
    /// Coherence interval `tau_c` in symbols.
    pub coherence_len: usize,
    /// Noise variance in mW.
    pub noise_power_mw: f64,
    /// Per-symbol pilot power budget in mW.
    pub max_pilot_power_mw: f64,
    /// Per-symbol data power budget in mW.
    pub max_data_power_mw: f64,
    /// Side of the square covering the grid width, in km.
    pub area_side_km: f64,
    /// Users are never placed closer than this to their base station, in km.
    pub min_bs_distance_km: f64,
    /// Shadow-fading standard deviation in dB.
    pub shadow_std_db: f64,
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_cells: 4,
            users_per_cell: 2,
            bs_antennas: 300,
            pilot_len: 2,
            coherence_len: 200,
            noise_power_mw: dbm_to_mw(-96.0),
            max_pilot_power_mw: 200.0,
            max_data_power_mw: 200.0,
            area_side_km: 1.0,
            min_bs_distance_km: 0.035,
            shadow_std_db: 7.0,
            pathloss_intercept_db: PATHLOSS_INTERCEPT_DB,
            pathloss_slope_db: PATHLOSS_SLOPE_DB,
        }
    }
}

/// Grid geometry derived from a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub cols: usize,
    pub rows: usize,
    pub cell_side: f64,
    pub width: f64,
    pub height: f64,
}

impl Grid {
    /// Center of cell `l`; cells are numbered row-major from the origin.
    pub fn cell_center(&self, l: usize) -> [f64; 2] {
        let col = (l % self.cols) as f64;
        let row = (l / self.cols) as f64;
        [
            (col + 0.5) * self.cell_side,
            (row + 0.5) * self.cell_side,
        ]
    }
}

impl NetworkConfig {
    pub fn num_users(&self) -> usize {
        self.num_cells * self.users_per_cell
    }

    /// `ceil(sqrt(L))` columns of square cells, as many rows as needed.
    pub fn grid(&self) -> Grid {
        let cols = (self.num_cells as f64).sqrt().ceil().max(1.0) as usize;
        let rows = self.num_cells.div_ceil(cols).max(1);
        let cell_side = self.area_side_km / cols as f64;
        Grid {
            cols,
            rows,
            cell_side,
            width: cols as f64 * cell_side,
            height: rows as f64 * cell_side,
        }
    }

    /// Fraction of the coherence interval left for data.
    pub fn prelog(&self) -> f64 {
        1.0 - self.pilot_len as f64 / self.coherence_len as f64
    }

    pub fn pathloss_db(&self, distance: f64) -> Result<f64> {
        pathloss_db_with(distance, self.pathloss_intercept_db, self.pathloss_slope_db)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_cells == 0 || self.users_per_cell == 0 || self.bs_antennas == 0 {
            return bad("L, K and M must be at least 1".into());
        }
        if self.pilot_len == 0 || self.pilot_len >= self.coherence_len {
            return bad(format!(
                "need 1 <= tau_p < tau_c, got tau_p = {}, tau_c = {}",
                self.pilot_len, self.coherence_len
            ));
        }
        for (name, v) in [
            ("noise_power_mw", self.noise_power_mw),
            ("max_pilot_power_mw", self.max_pilot_power_mw),
            ("max_data_power_mw", self.max_data_power_mw),
            ("area_side_km", self.area_side_km),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.min_bs_distance_km >= 0.0) || !(self.shadow_std_db >= 0.0) {
            return bad("exclusion distance and shadow deviation must be nonnegative".into());
        }
        let grid = self.grid();
        if self.min_bs_distance_km >= self.area_side_km / 2.0
            || self.min_bs_distance_km >= grid.cell_side / 2.0
        {
            return bad(format!(
                "min_bs_distance_km = {} leaves no room inside a {} km cell",
                self.min_bs_distance_km, grid.cell_side
            ));
        }
        Ok(())
    }
}

/// Large-scale fading coefficients `beta[bs][cell][user]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTensor {
    num_cells: usize,
    users_per_cell: usize,
    data: Vec<f64>,
}

impl GainTensor {
    /// Builds the tensor from `f(bs, user)`.
    pub fn from_fn<F: FnMut(usize, UserId) -> f64>(
        num_cells: usize,
        users_per_cell: usize,
        mut f: F,
    ) -> Self {
        let mut data = Vec::with_capacity(num_cells * num_cells * users_per_cell);
        for bs in 0..num_cells {
            for cell in 0..num_cells {
                for user in 0..users_per_cell {
                    data.push(f(bs, UserId::new(cell, user)));
                }
            }
        }
        Self {
            num_cells,
            users_per_cell,
            data,
        }
    }

    /// Same gain from every user to every base station.
    pub fn uniform(num_cells: usize, users_per_cell: usize, value: f64) -> Self {
        Self::from_fn(num_cells, users_per_cell, |_, _| value)
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    /// Gain from user `u` to base station `bs`.
    #[inline]
    pub fn get(&self, bs: usize, u: UserId) -> f64 {
        self.data[(bs * self.num_cells + u.cell) * self.users_per_cell + u.user]
    }

    #[inline]
    pub fn set(&mut self, bs: usize, u: UserId, value: f64) {
        self.data[(bs * self.num_cells + u.cell) * self.users_per_cell + u.user] = value;
    }

    /// Gain of `u` towards its own base station.
    #[inline]
    pub fn home(&self, u: UserId) -> f64 {
        self.get(u.cell, u)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            num_cells: self.num_cells,
            users_per_cell: self.users_per_cell,
            data: self.data.iter().map(|b| b * c).collect(),
        }
    }
}

/// One drop of users with its large-scale fading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub config: NetworkConfig,
    pub seed: u64,
    pub bs_positions: Vec<[f64; 2]>,
    /// Row-major by `(cell, user)`.
    pub user_positions: Vec<[f64; 2]>,
    pub beta: GainTensor,
    /// Wrapped distances in km, same layout as `beta`.
    pub distances_km: GainTensor,
    /// Shadow fading in dB, same layout as `beta`.
    pub shadow_db: GainTensor,
}

impl NetworkRealization {
    pub fn num_cells(&self) -> usize {
        self.config.num_cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.config.users_per_cell
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        UserId::all(self.config.num_cells, self.config.users_per_cell)
    }

    pub fn user_position(&self, u: UserId) -> [f64; 2] {
        self.user_positions[u.index(self.config.users_per_cell)]
    }

    /// Angle of the shortest (wrapped) vector from base station `bs` to user
    /// `u`, measured from the horizontal axis.
    pub fn angle(&self, bs: usize, u: UserId) -> f64 {
        let grid = self.config.grid();
        let v = wraparound_vector(
            self.bs_positions[bs],
            self.user_position(u),
            grid.width,
            grid.height,
        );
        v[1].atan2(v[0])
    }

    /// Checks that every user's home base station has the strongest gain.
    pub fn home_dominates(&self) -> bool {
        self.users().all(|u| {
            let home = self.beta.home(u);
            (0..self.num_cells()).all(|bs| self.beta.get(bs, u) <= home)
        })
    }

    /// Replaces the antenna count, keeping the drop.
    pub fn with_antennas(&self, m: usize) -> Self {
        let mut out = self.clone();
        out.config.bs_antennas = m;
        out
    }
}

fn user_rng(seed: u64, index: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * index as u64 + purpose);
    rng
}

/// Draws a reproducible realization.
///
/// Each user owns two ChaCha streams derived from `(seed, l, k)`: one for its
/// position and one for its shadow fading, so the result does not depend on
/// generation order. Shadowing for a user is redrawn (all `L` values at once)
/// until its home base station has the largest gain.
pub fn generate_layout(config: &NetworkConfig, seed: u64) -> Result<NetworkRealization> {
    config.validate()?;
    let grid = config.grid();
    let l_count = config.num_cells;
    let k_count = config.users_per_cell;
    let bs_positions: Vec<[f64; 2]> = (0..l_count).map(|l| grid.cell_center(l)).collect();

    let mut user_positions = Vec::with_capacity(config.num_users());
    let mut beta = GainTensor::uniform(l_count, k_count, 0.0);
    let mut distances = beta.clone();
    let mut shadow = beta.clone();

    for u in UserId::all(l_count, k_count) {
        let idx = u.index(k_count);
        let home = bs_positions[u.cell];
        let corner = [home[0] - grid.cell_side / 2.0, home[1] - grid.cell_side / 2.0];

        let mut rng = user_rng(seed, idx, 0);
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let p = [
                corner[0] + grid.cell_side * rng.random::<f64>(),
                corner[1] + grid.cell_side * rng.random::<f64>(),
            ];
            if wraparound_distance_rect(home, p, grid.width, grid.height)
                >= config.min_bs_distance_km
            {
                placed = Some(p);
                break;
            }
        }
        let pos = placed.ok_or(Error::Generation {
            user: u,
            attempts: PLACEMENT_ATTEMPTS,
            reason: "no position outside the exclusion radius",
        })?;
        user_positions.push(pos);

        let d: Vec<f64> = bs_positions
            .iter()
            .map(|&b| wraparound_distance_rect(b, pos, grid.width, grid.height))
            .collect();
        let pl: Vec<f64> = d
            .iter()
            .map(|&di| config.pathloss_db(di))
            .collect::<Result<_>>()?;

        let mut rng = user_rng(seed, idx, 1);
        let mut accepted = None;
        for _ in 0..SHADOW_ATTEMPTS {
            let z: Vec<f64> = (0..l_count)
                .map(|_| config.shadow_std_db * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let g: Vec<f64> = (0..l_count)
                .map(|bs| 10f64.powf((pl[bs] + z[bs]) / 10.0))
                .collect();
            if g.iter().all(|&gi| gi <= g[u.cell]) {
                accepted = Some((z, g));
                break;
            }
        }
        let (z, g) = accepted.ok_or(Error::Generation {
            user: u,
            attempts: SHADOW_ATTEMPTS,
            reason: "home base station never had the largest gain",
        })?;
        for bs in 0..l_count {
            beta.set(bs, u, g[bs]);
            distances.set(bs, u, d[bs]);
            shadow.set(bs, u, z[bs]);
        }
    }

    Ok(NetworkRealization {
        config: config.clone(),
        seed,
        bs_positions,
        user_positions,
        beta,
        distances_km: distances,
        shadow_db: shadow,
    })
}
