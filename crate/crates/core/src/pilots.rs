//! Pilot structures.
//!
//! Every pilot is a nonnegative combination of the `tau_p` canonical basis
//! vectors: user `u` puts power `p_hat[u][b]` on basis `b`, so its pilot is
//! `psi_u = sum_b sqrt(p_hat[u][b]) e_b`. The combinatorial structure used by
//! pilot-assignment schemes (one basis per user, a permutation per cell, one
//! scalar power per user) is the special case produced by [`from_assignment`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkConfig;

/// Relative slack allowed when checking the per-user pilot budget.
pub const POWER_CHECK_TOL: f64 = 1e-9;

/// Entries below `SUPPORT_FLOOR * P_max` count as zero when reporting pilot
/// support and orthogonality.
pub const SUPPORT_FLOOR: f64 = 1e-12;

/// A user, addressed by cell and by index within the cell (both 0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId {
    pub cell: usize,
    pub user: usize,
}

impl UserId {
    pub const fn new(cell: usize, user: usize) -> Self {
        Self { cell, user }
    }

    /// Row-major flat index.
    #[inline]
    pub fn index(self, users_per_cell: usize) -> usize {
        self.cell * users_per_cell + self.user
    }

    pub fn from_index(index: usize, users_per_cell: usize) -> Self {
        Self::new(index / users_per_cell, index % users_per_cell)
    }

    /// All users of an `L x K` network in row-major order.
    pub fn all(num_cells: usize, users_per_cell: usize) -> impl Iterator<Item = UserId> {
        (0..num_cells * users_per_cell).map(move |i| UserId::from_index(i, users_per_cell))
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.cell, self.user)
    }
}

/// Per-user, per-basis pilot powers in mW, stored `[cell][user][basis]`.
///
/// Powers are stored rather than amplitudes; square roots are taken on
/// demand. Serialized as nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Vec<f64>>>", into = "Vec<Vec<Vec<f64>>>")]
pub struct PilotAllocation {
    num_cells: usize,
    users_per_cell: usize,
    pilot_len: usize,
    powers: Vec<f64>,
}

impl PilotAllocation {
    pub fn zeros(num_cells: usize, users_per_cell: usize, pilot_len: usize) -> Self {
        Self {
            num_cells,
            users_per_cell,
            pilot_len,
            powers: vec![0.0; num_cells * users_per_cell * pilot_len],
        }
    }

    pub fn from_fn<F: FnMut(UserId, usize) -> f64>(
        num_cells: usize,
        users_per_cell: usize,
        pilot_len: usize,
        mut f: F,
    ) -> Self {
        let mut a = Self::zeros(num_cells, users_per_cell, pilot_len);
        for u in UserId::all(num_cells, users_per_cell) {
            for b in 0..pilot_len {
                a.set(u, b, f(u, b));
            }
        }
        a
    }

    /// Builds an allocation from `[cell][user][basis]` nested vectors.
    pub fn from_nested(nested: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let num_cells = nested.len();
        let users_per_cell = nested.first().map_or(0, Vec::len);
        let pilot_len = nested
            .first()
            .and_then(|c| c.first())
            .map_or(0, Vec::len);
        if num_cells == 0 || users_per_cell == 0 || pilot_len == 0 {
            return Err(Error::InvalidArgument("empty pilot allocation".into()));
        }
        let mut powers = Vec::with_capacity(num_cells * users_per_cell * pilot_len);
        for cell in &nested {
            if cell.len() != users_per_cell {
                return Err(Error::InvalidArgument("ragged pilot allocation".into()));
            }
            for user in cell {
                if user.len() != pilot_len {
                    return Err(Error::InvalidArgument("ragged pilot allocation".into()));
                }
                if user.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "pilot powers must be finite and nonnegative".into(),
                    ));
                }
                powers.extend_from_slice(user);
            }
        }
        Ok(Self {
            num_cells,
            users_per_cell,
            pilot_len,
            powers,
        })
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_cells)
            .map(|l| {
                (0..self.users_per_cell)
                    .map(|k| self.user(UserId::new(l, k)).to_vec())
                    .collect()
            })
            .collect()
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn pilot_len(&self) -> usize {
        self.pilot_len
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> {
        UserId::all(self.num_cells, self.users_per_cell)
    }

    #[inline]
    pub fn get(&self, u: UserId, b: usize) -> f64 {
        self.powers[u.index(self.users_per_cell) * self.pilot_len + b]
    }

    #[inline]
    pub fn set(&mut self, u: UserId, b: usize, p: f64) {
        let i = u.index(self.users_per_cell) * self.pilot_len + b;
        self.powers[i] = p;
    }

    /// Powers of one user over the basis.
    #[inline]
    pub fn user(&self, u: UserId) -> &[f64] {
        let start = u.index(self.users_per_cell) * self.pilot_len;
        &self.powers[start..start + self.pilot_len]
    }

    /// Total pilot energy `||psi_u||^2 = sum_b p_hat[u][b]`.
    pub fn energy(&self, u: UserId) -> f64 {
        self.user(u).iter().sum()
    }

    /// Pilot amplitudes `sqrt(p_hat[u][b])`.
    pub fn pilot_vector(&self, u: UserId) -> Vec<f64> {
        self.user(u).iter().map(|p| p.sqrt()).collect()
    }

    /// Basis indices carrying more than `threshold` mW.
    pub fn support(&self, u: UserId, threshold: f64) -> Vec<usize> {
        (0..self.pilot_len)
            .filter(|&b| self.get(u, b) > threshold)
            .collect()
    }

    /// Copy with entries at or below `threshold` set to exactly zero.
    pub fn cleaned(&self, threshold: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.powers {
            if *p <= threshold {
                *p = 0.0;
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.powers {
            *p *= c;
        }
        out
    }
}

impl TryFrom<Vec<Vec<Vec<f64>>>> for PilotAllocation {
    type Error = Error;

    fn try_from(v: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::from_nested(v)
    }
}

impl From<PilotAllocation> for Vec<Vec<Vec<f64>>> {
    fn from(a: PilotAllocation) -> Self {
        a.to_nested()
    }
}

/// Inner product of two pilots, `psi_a^H psi_b = sum_b sqrt(p_a^b p_b^b)`.
#[inline]
pub fn pilot_inner(alloc: &PilotAllocation, a: UserId, b: UserId) -> f64 {
    alloc
        .user(a)
        .iter()
        .zip(alloc.user(b))
        .map(|(x, y)| (x * y).sqrt())
        .sum()
}

/// `true` for every user whose mean per-symbol pilot power respects the
/// budget (with [`POWER_CHECK_TOL`] relative slack), in row-major order.
pub fn check_power_constraint(alloc: &PilotAllocation, config: &NetworkConfig) -> Vec<bool> {
    let limit = config.max_pilot_power_mw * (1.0 + POWER_CHECK_TOL);
    alloc
        .users()
        .map(|u| alloc.energy(u) / alloc.pilot_len() as f64 <= limit)
        .collect()
}

/// Combinatorial pilot structure: one basis index per user, a permutation of
/// `0..K` in every cell, and one scalar pilot power per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotAssignment {
    /// `indices[l][k]` is the basis used by user `k` in cell `l` (0-based).
    pub indices: Vec<Vec<usize>>,
    /// Scalar pilot energies in mW, row-major.
    pub scalar_powers: Vec<f64>,
}

impl PilotAssignment {
    pub fn new(indices: Vec<Vec<usize>>, scalar_powers: Vec<f64>) -> Result<Self> {
        let a = Self {
            indices,
            scalar_powers,
        };
        a.validate()?;
        Ok(a)
    }

    /// Every user transmits the same pilot energy.
    pub fn with_equal_power(indices: Vec<Vec<usize>>, power: f64) -> Result<Self> {
        let n: usize = indices.iter().map(Vec::len).sum();
        Self::new(indices, vec![power; n])
    }

    pub fn num_cells(&self) -> usize {
        self.indices.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.indices.first().map_or(0, Vec::len)
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> {
        UserId::all(self.num_cells(), self.users_per_cell())
    }

    /// Checks the within-cell permutation property and power signs.
    pub fn validate(&self) -> Result<()> {
        let k = self.users_per_cell();
        if self.indices.is_empty() || k == 0 {
            return Err(Error::InvalidArgument("empty assignment".into()));
        }
        for (l, row) in self.indices.iter().enumerate() {
            if !is_permutation(row, k) {
                return Err(Error::InvalidArgument(format!(
                    "cell {l} pilot indices {row:?} are not a permutation of 0..{k}"
                )));
            }
        }
        if self.scalar_powers.len() != self.num_cells() * k {
            return Err(Error::InvalidArgument(format!(
                "expected {} scalar powers, got {}",
                self.num_cells() * k,
                self.scalar_powers.len()
            )));
        }
        if self
            .scalar_powers
            .iter()
            .any(|&p| !(p >= 0.0) || !p.is_finite())
        {
            return Err(Error::InvalidArgument(
                "scalar pilot powers must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Checks `0 <= p_tilde <= tau_p * P_max` for every user.
    pub fn check_power(&self, config: &NetworkConfig) -> bool {
        let cap = config.pilot_len as f64 * config.max_pilot_power_mw * (1.0 + POWER_CHECK_TOL);
        self.scalar_powers.iter().all(|&p| (0.0..=cap).contains(&p))
    }

    #[inline]
    pub fn index(&self, u: UserId) -> usize {
        self.indices[u.cell][u.user]
    }

    #[inline]
    pub fn power(&self, u: UserId) -> f64 {
        self.scalar_powers[u.index(self.users_per_cell())]
    }

    /// Users sharing the pilot of `u`, including `u`, in row-major order.
    pub fn reuse_set(&self, u: UserId) -> Vec<UserId> {
        let target = self.index(u);
        self.users().filter(|&v| self.index(v) == target).collect()
    }
}

fn is_permutation(row: &[usize], k: usize) -> bool {
    if row.len() != k {
        return false;
    }
    let mut seen = vec![false; k];
    for &x in row {
        if x >= k || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

/// Expands an assignment into the general structure: user `u` puts
/// `p_tilde[u]` on basis `indices[u]` and nothing elsewhere.
pub fn from_assignment(a: &PilotAssignment, pilot_len: usize) -> Result<PilotAllocation> {
    a.validate()?;
    let k = a.users_per_cell();
    if pilot_len != k {
        return Err(Error::UnsupportedStructure {
            pilot_len,
            users_per_cell: k,
        });
    }
    Ok(PilotAllocation::from_fn(a.num_cells(), k, pilot_len, |u, b| {
        if a.index(u) == b {
            a.power(u)
        } else {
            0.0
        }
    }))
}

/// Free function form of [`PilotAssignment::reuse_set`].
pub fn reuse_set(a: &PilotAssignment, u: UserId) -> Vec<UserId> {
    a.reuse_set(u)
}

/// The `rank`-th permutation of `0..k` in lexicographic order.
pub fn permutation_from_rank(mut rank: u128, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..k).collect();
    let mut fact: Vec<u128> = vec![1; k + 1];
    for i in 1..=k {
        fact[i] = fact[i - 1] * i as u128;
    }
    let mut out = Vec::with_capacity(k);
    for i in (0..k).rev() {
        let d = (rank / fact[i]) as usize;
        rank %= fact[i];
        out.push(pool.remove(d));
    }
    out
}

fn factorial(k: usize) -> Option<u128> {
    (1..=k as u128).try_fold(1u128, |acc, x| acc.checked_mul(x))
}

/// Number of distinct reuse-set collections, `(K!)^(L-1)`, or `None` on
/// overflow.
pub fn dictionary_size(num_cells: usize, users_per_cell: usize) -> Option<u128> {
    let f = factorial(users_per_cell)?;
    (1..num_cells).try_fold(1u128, |acc, _| acc.checked_mul(f))
}

/// The deduplicated assignment dictionary.
///
/// Cell 0 always uses the identity permutation; cells `1..L` range over all
/// `K!` permutations. Entry `i` is decoded in mixed radix with cell 1 as the
/// most significant digit, so iteration order is lexicographic in the rows.
/// Entries are addressable by index, which makes the dictionary trivially
/// splittable across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignmentDictionary {
    num_cells: usize,
    users_per_cell: usize,
    len: u128,
    perms_per_cell: u128,
}

impl AssignmentDictionary {
    pub fn len(&self) -> u128 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Index matrix of entry `i`.
    pub fn get(&self, i: u128) -> Vec<Vec<usize>> {
        assert!(i < self.len, "assignment index {i} out of range");
        let mut digits = vec![0u128; self.num_cells];
        let mut rest = i;
        for l in (1..self.num_cells).rev() {
            digits[l] = rest % self.perms_per_cell;
            rest /= self.perms_per_cell;
        }
        digits
            .iter()
            .map(|&d| permutation_from_rank(d, self.users_per_cell))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<Vec<usize>>> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

/// Enumerates the assignment dictionary, refusing when it has more than
/// `cap` entries.
pub fn enumerate_assignments(
    num_cells: usize,
    users_per_cell: usize,
    cap: u128,
) -> Result<AssignmentDictionary> {
    if num_cells == 0 || users_per_cell == 0 {
        return Err(Error::InvalidArgument("L and K must be positive".into()));
    }
    let len = dictionary_size(num_cells, users_per_cell).unwrap_or(u128::MAX);
    if len > cap {
        return Err(Error::EnumerationCap { required: len, cap });
    }
    Ok(AssignmentDictionary {
        num_cells,
        users_per_cell,
        len,
        perms_per_cell: factorial(users_per_cell).unwrap_or(u128::MAX),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeSet, HashSet};

    use super::*;

    fn alloc_1x2(a: [f64; 2], b: [f64; 2]) -> PilotAllocation {
        PilotAllocation::from_nested(vec![vec![a.to_vec(), b.to_vec()]]).unwrap()
    }

    const U0: UserId = UserId::new(0, 0);
    const U1: UserId = UserId::new(0, 1);

    #[test]
    fn inner_product_examples() {
        assert_eq!(pilot_inner(&alloc_1x2([4.0, 0.0], [1.0, 1.0]), U0, U1), 2.0);
        assert_eq!(pilot_inner(&alloc_1x2([4.0, 0.0], [0.0, 9.0]), U0, U1), 0.0);
        let a = alloc_1x2([1.0, 1.0], [1.0, 1.0]);
        assert_eq!(pilot_inner(&a, U0, U1), 2.0);
        assert_eq!(pilot_inner(&a, U0, U0), a.energy(U0));
    }

    #[test]
    fn power_constraint_examples() {
        let cfg = NetworkConfig {
            num_cells: 1,
            users_per_cell: 2,
            pilot_len: 2,
            ..Default::default()
        };
        assert_eq!(
            check_power_constraint(&alloc_1x2([200.0, 200.0], [400.0, 100.0]), &cfg),
            vec![true, false]
        );
        let zeros = PilotAllocation::zeros(1, 2, 2);
        assert_eq!(check_power_constraint(&zeros, &cfg), vec![true, true]);
    }

    #[test]
    fn from_assignment_identity() {
        let a = PilotAssignment::new(vec![vec![0, 1]], vec![3.0, 5.0]).unwrap();
        let alloc = from_assignment(&a, 2).unwrap();
        assert_eq!(alloc.user(U0), &[3.0, 0.0]);
        assert_eq!(alloc.user(U1), &[0.0, 5.0]);
        assert!(matches!(
            from_assignment(&a, 3),
            Err(Error::UnsupportedStructure { .. })
        ));
    }

    #[test]
    fn equal_power_assignment_gives_scaled_permutation() {
        let cfg = NetworkConfig::default();
        let p = cfg.pilot_len as f64 * cfg.max_pilot_power_mw;
        let a = PilotAssignment::with_equal_power(vec![vec![1, 0]; 4], p).unwrap();
        assert!(a.check_power(&cfg));
        let alloc = from_assignment(&a, 2).unwrap();
        // every column of the per-cell amplitude matrix is sqrt(p) times a unit vector
        for u in alloc.users() {
            let v = alloc.pilot_vector(u);
            assert_eq!(v.iter().filter(|&&x| x > 0.0).count(), 1);
            assert!((v[a.index(u)] - p.sqrt()).abs() < 1e-12);
        }
        assert!(check_power_constraint(&alloc, &cfg).iter().all(|&ok| ok));
    }

    #[test]
    fn reuse_set_examples() {
        let a = PilotAssignment::with_equal_power(vec![vec![0, 1], vec![0, 1]], 1.0).unwrap();
        assert_eq!(a.reuse_set(U0), vec![U0, UserId::new(1, 0)]);
        let a = PilotAssignment::with_equal_power(vec![vec![0, 1], vec![1, 0]], 1.0).unwrap();
        assert_eq!(a.reuse_set(U0), vec![U0, UserId::new(1, 1)]);
        let a = PilotAssignment::with_equal_power(vec![vec![2, 0, 1]], 1.0).unwrap();
        for u in a.users() {
            assert_eq!(a.reuse_set(u), vec![u]);
        }
    }

    #[test]
    fn inner_product_nonzero_iff_same_reuse_set() {
        let a = PilotAssignment::new(
            vec![vec![0, 1, 2], vec![2, 0, 1], vec![1, 2, 0]],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        )
        .unwrap();
        let alloc = from_assignment(&a, 3).unwrap();
        for u in a.users() {
            let set = a.reuse_set(u);
            for v in a.users() {
                assert_eq!(pilot_inner(&alloc, u, v) != 0.0, set.contains(&v));
            }
        }
    }

    #[test]
    fn invalid_assignment_rejected() {
        assert!(PilotAssignment::with_equal_power(vec![vec![0, 0]], 1.0).is_err());
        assert!(PilotAssignment::with_equal_power(vec![vec![0, 2]], 1.0).is_err());
        assert!(PilotAssignment::new(vec![vec![0, 1]], vec![1.0]).is_err());
        assert!(PilotAssignment::new(vec![vec![0, 1]], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn permutations_in_lex_order() {
        let perms: Vec<_> = (0..6).map(|r| permutation_from_rank(r, 3)).collect();
        assert_eq!(
            perms,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
    }

    #[test]
    fn dictionary_sizes() {
        assert_eq!(enumerate_assignments(2, 2, 1000).unwrap().len(), 2);
        assert_eq!(enumerate_assignments(4, 2, 1000).unwrap().len(), 8);
        assert_eq!(enumerate_assignments(1, 5, 1000).unwrap().len(), 1);
        assert_eq!(enumerate_assignments(3, 3, 1000).unwrap().len(), 36);
        assert_eq!(
            enumerate_assignments(4, 4, 1000),
            Err(Error::EnumerationCap {
                required: 13824,
                cap: 1000
            })
        );
    }

    #[test]
    fn dictionary_first_cell_is_identity_and_order_is_lexicographic() {
        let dict = enumerate_assignments(3, 2, 100).unwrap();
        let all: Vec<_> = dict.iter().collect();
        assert_eq!(
            all,
            vec![
                vec![vec![0, 1], vec![0, 1], vec![0, 1]],
                vec![vec![0, 1], vec![0, 1], vec![1, 0]],
                vec![vec![0, 1], vec![1, 0], vec![0, 1]],
                vec![vec![0, 1], vec![1, 0], vec![1, 0]],
            ]
        );
    }

    #[test]
    fn dictionary_reuse_collections_are_distinct_and_complete() {
        // brute force over (K!)^L matrices: every reuse-set collection shows
        // up in the deduplicated dictionary exactly once
        let (l_count, k) = (3, 3);
        let canon = |m: &Vec<Vec<usize>>| -> BTreeSet<BTreeSet<UserId>> {
            let a = PilotAssignment::with_equal_power(m.clone(), 1.0).unwrap();
            a.users().map(|u| a.reuse_set(u).into_iter().collect()).collect()
        };
        let dict = enumerate_assignments(l_count, k, 10_000).unwrap();
        let seen: Vec<_> = dict.iter().map(|m| canon(&m)).collect();
        let unique: HashSet<_> = seen.iter().cloned().collect();
        assert_eq!(unique.len(), seen.len());

        let mut full = HashSet::new();
        for r0 in 0..6 {
            for r1 in 0..6 {
                for r2 in 0..6 {
                    let m = vec![
                        permutation_from_rank(r0, k),
                        permutation_from_rank(r1, k),
                        permutation_from_rank(r2, k),
                    ];
                    full.insert(canon(&m));
                }
            }
        }
        assert_eq!(full, unique);
    }

    #[test]
    fn allocation_json_is_nested_arrays() {
        let a = alloc_1x2([1.0, 0.0], [0.5, 2.0]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[[1.0,0.0],[0.5,2.0]]]");
        let back: PilotAllocation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<PilotAllocation>("[[[1.0],[0.5,2.0]]]").is_err());
        assert!(serde_json::from_str::<PilotAllocation>("[[[-1.0]]]").is_err());
    }

    #[test]
    fn support_uses_floor() {
        let a = alloc_1x2([1e-20, 3.0], [2.0, 0.0]);
        assert_eq!(a.support(U0, 1e-12 * 200.0), vec![1]);
        let c = a.cleaned(1e-12 * 200.0);
        assert_eq!(pilot_inner(&c, U0, U1), 0.0);
        assert!(pilot_inner(&a, U0, U1) > 0.0);
    }
}
