//! Finite-time shock identities: the law of a second-class particle between
//! density blocks (and of a second/third-class pair) written exactly in
//! terms of counting functions of the plain step process.
//!
//! The left-hand sides evolve colored block configurations; the right-hand
//! sides are functionals of independent step runs. Both sides are sampled
//! here, and micro systems get exact laws via the oracle.

use crate::kinetics::{evolve_one, EvolveOpts, KineticsError, PoissonField, SimState};
use crate::lattice::{make_initial, InitialKind, LatticeError, Site};
use crate::oracle;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum IdentityError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
    #[error("{0} of {1} runs touched the window edge; enlarge the window")]
    WindowTouched(u64, u64),
    #[error("indicator grids are limited to 64 points, got {0}")]
    GridTooWide(usize),
}

/// Which shock geometry an identity describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShockKind {
    /// Single second-class particle between blocks of sizes (m_plus, m_minus).
    One { m_plus: u32, m_minus: u32 },
    /// Second-class particle of the two-shock geometry with block sizes (m, n).
    Two { m: u32, n: u32 },
}

impl ShockKind {
    /// Colored initial condition whose second-class particle is tracked.
    pub fn lhs_initial(&self) -> InitialKind {
        match *self {
            ShockKind::One { m_plus, m_minus } => InitialKind::OneShock { m_plus, m_minus },
            ShockKind::Two { m, n } => InitialKind::TwoShock { m, n },
        }
    }

    /// Block-sorted variant evolved for the joint counting laws.
    pub fn sorted_initial(&self) -> InitialKind {
        match *self {
            ShockKind::One { m_plus, m_minus } => InitialKind::OneShockSorted { m_plus, m_minus },
            ShockKind::Two { m, n } => InitialKind::TwoShockSorted { m, n },
        }
    }

    /// Extent of the initial colored data, for window sizing.
    pub fn support(&self) -> (Site, Site) {
        match *self {
            ShockKind::One { m_plus, m_minus } => (-(m_minus as Site) - 1, m_plus as Site + 1),
            ShockKind::Two { m, n } => (-((m + n) as Site) - 1, (m + n) as Site + 1),
        }
    }

    /// The step-functional event equivalent to {second-class position >= x},
    /// evaluated on a counting function N of one step run.
    pub fn rhs_event<F: Fn(Site) -> i64>(&self, n: &F, x: Site) -> bool {
        match *self {
            ShockKind::One { m_plus, m_minus } => {
                let (mp, mm) = (m_plus as Site, m_minus as Site);
                n(x - mp) - n(x + mm + 1) >= m_plus as i64 + 1
            }
            ShockKind::Two { m, n: nn } => {
                let (ms, ns) = (m as Site, nn as Site);
                let surplus = (n(x + 1) - n(x + ms + ns + 1) - m as i64).max(0);
                n(x - ms - ns) - n(x + 1) + surplus >= nn as i64 + 1
            }
        }
    }

    /// The step-functional joint vector matching the colored counting
    /// vector at x.
    pub fn rhs_joint<F: Fn(Site) -> i64>(&self, n: &F, x: Site) -> Vec<i64> {
        match *self {
            ShockKind::One { m_plus, m_minus } => {
                let (mp, mm) = (m_plus as Site, m_minus as Site);
                let n1 = n(x + mm + 1);
                let n2 = (n(x - mp) - n1).min(m_plus as i64 + 1);
                vec![n1, n2]
            }
            ShockKind::Two { m, n: nn } => {
                let (ms, ns) = (m as Site, nn as Site);
                let n1 = n(x + ms + ns + 1);
                let n2 = (n(x + 1) - n1).min(m as i64);
                let surplus = (n(x + 1) - n1 - m as i64).max(0);
                let n3 = (n(x - ms - ns) - n(x + 1) + surplus).min(nn as i64 + 1);
                vec![n1, n2, n3]
            }
        }
    }

    /// The colored counting vector of an evolved block-sorted state at x.
    pub fn lhs_joint(&self, st: &SimState, x: Site) -> Vec<i64> {
        match *self {
            ShockKind::One { .. } => {
                vec![st.count_colored_right(1, x), st.count_colored_right(2, x)]
            }
            ShockKind::Two { .. } => vec![
                st.count_colored_right(1, x),
                st.count_colored_right(2, x),
                st.count_colored_right(3, x),
            ],
        }
    }

    /// How far left/right of x the step functional reaches.
    pub fn reach(&self) -> Site {
        match *self {
            ShockKind::One { m_plus, m_minus } => (m_plus.max(m_minus) + 1) as Site,
            ShockKind::Two { m, n } => (m + n + 1) as Site,
        }
    }

    /// Default evaluation grid around the initial shock location: wide
    /// enough that the event is deterministic outside it.
    pub fn default_grid(&self, t: f64) -> Vec<Site> {
        let (slo, shi) = self.support();
        let w = (10.0 * t.cbrt()).ceil() as Site + 8;
        (((slo - w).min(-(t.ceil() as Site) - 4))..=((shi + w).max(t.ceil() as Site + 4)))
            .collect()
    }
}

/// Counting function N(x) of one evolved state, tabulated for O(1) lookups.
pub struct CountTable {
    lo: Site,
    suffix: Vec<i64>,
}

impl CountTable {
    pub fn from_state(st: &SimState) -> CountTable {
        let lo = st.config.window_lo;
        let m = st.config.colors.len();
        let mut suffix = vec![0i64; m + 1];
        suffix[m] = st.exited_total as i64;
        for i in (0..m).rev() {
            suffix[i] = suffix[i + 1] + (st.config.colors[i] != crate::lattice::INF) as i64;
        }
        CountTable { lo, suffix }
    }

    /// Particles at sites >= x (including exits). Panics if x is left of the
    /// window, where the count would be ill-defined for packed boundaries.
    pub fn n(&self, x: Site) -> i64 {
        let off = x as i64 - self.lo as i64;
        assert!(off >= 0, "count queried left of the window");
        let idx = (off as usize).min(self.suffix.len() - 1);
        self.suffix[idx]
    }
}

/// Samples of the colored (left-hand) side: second-class particle positions.
pub struct LhsPositions {
    pub positions: Vec<Site>,
    pub touched: u64,
}

/// Evolve the colored initial condition `replicas` times and record the
/// second-class particle position at time t.
pub fn sample_lhs_positions(
    kind: ShockKind,
    t: f64,
    seed: u64,
    replicas: std::ops::Range<u64>,
    window_factor: f64,
) -> Result<LhsPositions, IdentityError> {
    let (slo, shi) = kind.support();
    let (wlo, whi) = crate::kinetics::margin_window(slo, shi, t, window_factor);
    let init = make_initial(kind.lhs_initial(), wlo, whi, None)?;
    let total = replicas.end - replicas.start;
    let mut positions = Vec::with_capacity(total as usize);
    let mut touched = 0u64;
    for r in replicas {
        let f = PoissonField::generate(seed, r, wlo - 1, whi, t)?;
        let mut st = SimState::new(init.clone());
        evolve_one(&mut st, &f, t, &EvolveOpts::default())?;
        if st.window_touched {
            touched += 1;
            continue;
        }
        positions.push(st.config.second_class_position()?);
    }
    if touched > 0 {
        return Err(IdentityError::WindowTouched(touched, total));
    }
    Ok(LhsPositions { positions, touched })
}

/// Joint colored counting samples from the block-sorted initial condition.
pub fn sample_lhs_joint(
    kind: ShockKind,
    t: f64,
    xs: &[Site],
    seed: u64,
    replicas: std::ops::Range<u64>,
    window_factor: f64,
) -> Result<Vec<Vec<Vec<i64>>>, IdentityError> {
    let (slo, shi) = kind.support();
    let lo_need = slo.min(xs.iter().copied().min().unwrap_or(0));
    let hi_need = shi.max(xs.iter().copied().max().unwrap_or(0));
    let (wlo, whi) = crate::kinetics::margin_window(lo_need, hi_need, t, window_factor);
    let init = make_initial(kind.sorted_initial(), wlo, whi, None)?;
    let total = replicas.end - replicas.start;
    let mut out: Vec<Vec<Vec<i64>>> = xs.iter().map(|_| Vec::with_capacity(total as usize)).collect();
    let mut touched = 0u64;
    for r in replicas {
        let f = PoissonField::generate(seed, r, wlo - 1, whi, t)?;
        let mut st = SimState::new(init.clone());
        evolve_one(&mut st, &f, t, &EvolveOpts::default())?;
        if st.window_touched {
            touched += 1;
            continue;
        }
        for (xi, &x) in xs.iter().enumerate() {
            out[xi].push(kind.lhs_joint(&st, x));
        }
    }
    if touched > 0 {
        return Err(IdentityError::WindowTouched(touched, total));
    }
    Ok(out)
}

/// One identity's step-side request: indicator table over a grid plus joint
/// vectors at chosen points.
pub struct RhsRequest {
    pub kind: ShockKind,
    pub grid: Vec<Site>,
    pub joint_xs: Vec<Site>,
}

/// Step-side results for one request.
pub struct RhsResult {
    pub grid: Vec<Site>,
    /// How many replicas had the event at each grid point.
    pub event_counts: Vec<u64>,
    /// Largest grid x with the event, per replica (the position-like sample).
    pub pseudo_positions: Vec<Site>,
    /// Per-replica event indicator over the grid, bit i = grid[i].
    pub indicator_bits: Vec<u64>,
    /// Replicas whose indicator was not a decreasing staircase over the grid.
    pub monotonicity_violations: u64,
    /// Joint vectors per requested x, per replica.
    pub joints: Vec<Vec<Vec<i64>>>,
    pub n: u64,
}

/// Evolve independent step runs once and evaluate every requested identity
/// functional on each run.
pub fn sample_rhs_step(
    requests: &[RhsRequest],
    t: f64,
    seed: u64,
    replicas: std::ops::Range<u64>,
    window_factor: f64,
) -> Result<Vec<RhsResult>, IdentityError> {
    let mut lo_need = -1;
    let mut hi_need = 1;
    for req in requests {
        let reach = req.kind.reach();
        for &x in req.grid.iter().chain(req.joint_xs.iter()) {
            lo_need = lo_need.min(x - reach);
            hi_need = hi_need.max(x + reach);
        }
    }
    let (wlo, whi) = crate::kinetics::margin_window(lo_need, hi_need, t, window_factor);
    let init = make_initial(InitialKind::Step, wlo, whi, None)?;
    let total = replicas.end - replicas.start;
    if let Some(req) = requests.iter().find(|r| r.grid.len() > 64) {
        return Err(IdentityError::GridTooWide(req.grid.len()));
    }
    let mut results: Vec<RhsResult> = requests
        .iter()
        .map(|req| RhsResult {
            grid: req.grid.clone(),
            event_counts: vec![0; req.grid.len()],
            pseudo_positions: Vec::with_capacity(total as usize),
            indicator_bits: Vec::with_capacity(total as usize),
            monotonicity_violations: 0,
            joints: req.joint_xs.iter().map(|_| Vec::with_capacity(total as usize)).collect(),
            n: 0,
        })
        .collect();
    let mut touched = 0u64;
    for r in replicas {
        let f = PoissonField::generate(seed, r, wlo - 1, whi, t)?;
        let mut st = SimState::new(init.clone());
        evolve_one(&mut st, &f, t, &EvolveOpts::default())?;
        if st.window_touched {
            touched += 1;
            continue;
        }
        let table = CountTable::from_state(&st);
        let nf = |x: Site| table.n(x);
        for (req, res) in requests.iter().zip(results.iter_mut()) {
            let mut pseudo = None;
            let mut seen_true_after_false = false;
            let mut prev = true;
            let mut bits = 0u64;
            for (gi, &x) in req.grid.iter().enumerate() {
                let ev = req.kind.rhs_event(&nf, x);
                if ev {
                    res.event_counts[gi] += 1;
                    bits |= 1u64 << gi;
                    pseudo = Some(x);
                    if !prev {
                        seen_true_after_false = true;
                    }
                }
                prev = ev;
            }
            if seen_true_after_false {
                res.monotonicity_violations += 1;
            }
            res.indicator_bits.push(bits);
            // grids are built wide enough that the event holds at the left
            // edge; a replica with no event anywhere would betray that
            res.pseudo_positions.push(pseudo.unwrap_or(req.grid[0] - 1));
            for (ji, &x) in req.joint_xs.iter().enumerate() {
                res.joints[ji].push(req.kind.rhs_joint(&nf, x));
            }
            res.n += 1;
        }
    }
    if touched > 0 {
        return Err(IdentityError::WindowTouched(touched, total));
    }
    Ok(results)
}

/// Range of evaluation points on a closed window where the identity is
/// unaffected by truncating the infinite lattice: the step functional at x
/// must not read counts that the finite left reservoir caps.
pub fn core_range(kind: ShockKind, window_lo: Site, window_hi: Site) -> (Site, Site) {
    let r = kind.reach();
    (window_lo + r, window_hi - r)
}

/// Exact survival P(second-class position >= x) on a closed micro window,
/// for each requested x, from the colored side.
pub fn oracle_lhs_survival(
    kind: ShockKind,
    t: f64,
    window_lo: Site,
    window_hi: Site,
    xs: &[Site],
    tol: f64,
) -> Result<Vec<f64>, IdentityError> {
    let mut init = make_initial(kind.lhs_initial(), window_lo, window_hi, None)?;
    init.left = crate::lattice::LeftBoundary::Closed;
    init.right = crate::lattice::RightBoundary::Closed;
    let space = oracle::enumerate_reachable(&init)?;
    let gen = oracle::build_generator(&space);
    let dist = oracle::transient_distribution(&space, &gen, space.initial_index(&init.colors), t, tol);
    let law = oracle::observable_law(&space, &dist, |st, lo| {
        lo + st.iter().position(|&c| c == 2).expect("second-class particle") as Site
    });
    Ok(xs
        .iter()
        .map(|&x| law.iter().filter(|(&p, _)| p >= x).map(|(_, &w)| w).sum())
        .collect())
}

/// Exact per-x event probability of the step functional on the same window.
pub fn oracle_rhs_survival(
    kind: ShockKind,
    t: f64,
    window_lo: Site,
    window_hi: Site,
    xs: &[Site],
    tol: f64,
) -> Result<Vec<f64>, IdentityError> {
    let mut init = make_initial(InitialKind::Step, window_lo, window_hi, None)?;
    init.left = crate::lattice::LeftBoundary::Closed;
    init.right = crate::lattice::RightBoundary::Closed;
    let space = oracle::enumerate_reachable(&init)?;
    let gen = oracle::build_generator(&space);
    let dist = oracle::transient_distribution(&space, &gen, space.initial_index(&init.colors), t, tol);
    let mut out = vec![0.0; xs.len()];
    for (i, st) in space.states.iter().enumerate() {
        let nf = |y: Site| oracle::count_right(st, window_lo, y.max(window_lo)) as i64;
        for (xi, &x) in xs.iter().enumerate() {
            if kind.rhs_event(&nf, x) {
                out[xi] += dist[i];
            }
        }
    }
    Ok(out)
}

/// Exact joint law (as a sorted map over vectors) of the colored counting
/// vector at x, from the block-sorted side, on a closed micro window.
pub fn oracle_lhs_joint_law(
    kind: ShockKind,
    t: f64,
    x: Site,
    window_lo: Site,
    window_hi: Site,
    tol: f64,
) -> Result<BTreeMap<Vec<i64>, f64>, IdentityError> {
    let mut init = make_initial(kind.sorted_initial(), window_lo, window_hi, None)?;
    init.left = crate::lattice::LeftBoundary::Closed;
    init.right = crate::lattice::RightBoundary::Closed;
    let space = oracle::enumerate_reachable(&init)?;
    let gen = oracle::build_generator(&space);
    let dist = oracle::transient_distribution(&space, &gen, space.initial_index(&init.colors), t, tol);
    let classes: Vec<i64> = match kind {
        ShockKind::One { .. } => vec![1, 2],
        ShockKind::Two { .. } => vec![1, 2, 3],
    };
    Ok(oracle::observable_law(&space, &dist, move |st, lo| {
        classes
            .iter()
            .map(|&c| oracle::count_colored_right(st, lo, c as i32, x) as i64)
            .collect::<Vec<i64>>()
    }))
}

/// Exact joint law of the step functional vector at x on the same window.
pub fn oracle_rhs_joint_law(
    kind: ShockKind,
    t: f64,
    x: Site,
    window_lo: Site,
    window_hi: Site,
    tol: f64,
) -> Result<BTreeMap<Vec<i64>, f64>, IdentityError> {
    let mut init = make_initial(InitialKind::Step, window_lo, window_hi, None)?;
    init.left = crate::lattice::LeftBoundary::Closed;
    init.right = crate::lattice::RightBoundary::Closed;
    let space = oracle::enumerate_reachable(&init)?;
    let gen = oracle::build_generator(&space);
    let dist = oracle::transient_distribution(&space, &gen, space.initial_index(&init.colors), t, tol);
    Ok(oracle::observable_law(&space, &dist, move |st, lo| {
        let nf = |y: Site| oracle::count_right(st, lo, y.max(lo)) as i64;
        kind.rhs_joint(&nf, x)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_time_mass_at_initial_positions() {
        // one-shock second class starts at 0; two-shock at m
        let one = sample_lhs_positions(ShockKind::One { m_plus: 2, m_minus: 1 }, 1e-9, 3, 0..200, 1.0)
            .unwrap();
        assert!(one.positions.iter().all(|&p| p == 0));
        let two =
            sample_lhs_positions(ShockKind::Two { m: 3, n: 2 }, 1e-9, 3, 0..200, 1.0).unwrap();
        assert!(two.positions.iter().all(|&p| p == 3));
    }

    #[test]
    fn rhs_event_at_time_zero_is_left_halfline() {
        // initial step: N(y) = max(0, 1 - y); the event holds iff x <= 0
        let kind = ShockKind::One { m_plus: 2, m_minus: 1 };
        let n0 = |y: Site| 0i64.max(1 - y as i64);
        for x in -6..=6 {
            assert_eq!(kind.rhs_event(&n0, x), x <= 0, "x = {x}");
        }
        let kind2 = ShockKind::Two { m: 1, n: 1 };
        for x in -6..=6 {
            assert_eq!(kind2.rhs_event(&n0, x), x <= 1, "x = {x}");
        }
    }

    #[test]
    fn rhs_joint_at_time_zero() {
        let kind = ShockKind::One { m_plus: 2, m_minus: 1 };
        let n0 = |y: Site| 0i64.max(1 - y as i64);
        // at x = 0: N1 = N(2) = 0, N2 = min(N(-2) - 0, 3) = 3
        assert_eq!(kind.rhs_joint(&n0, 0), vec![0, 3]);
    }

    #[test]
    fn caps_respected_on_random_counts() {
        // joint components never exceed their block caps, whatever N does
        let kind = ShockKind::Two { m: 2, n: 3 };
        let mut s = crate::rng::Stream::new(&[500]);
        for _ in 0..500 {
            let vals: Vec<i64> = (0..40).map(|_| s.next_below(30) as i64).collect();
            let n = |y: Site| {
                let idx = (y + 20).clamp(0, 39) as usize;
                // make it nonincreasing to mimic a counting function
                vals[idx..].iter().copied().max().unwrap_or(0)
            };
            let j = kind.rhs_joint(&n, 0);
            assert!(j[1] <= 2);
            assert!(j[2] <= 4);
        }
    }

    #[test]
    fn count_table_matches_direct_counts() {
        let init = make_initial(InitialKind::Step, -8, 8, None).unwrap();
        let f = PoissonField::generate(7, 0, -9, 8, 2.0).unwrap();
        let mut st = SimState::new(init);
        evolve_one(&mut st, &f, 2.0, &EvolveOpts::default()).unwrap();
        let table = CountTable::from_state(&st);
        for x in -8..=9 {
            assert_eq!(table.n(x), st.count_right(x), "x = {x}");
        }
    }

    #[test]
    fn micro_identity_is_exact_one_shock() {
        // matched closed window [-7, 7], m_plus = m_minus = 1, t = 1:
        // per-x survival agrees to series tolerance away from the edges
        let kind = ShockKind::One { m_plus: 1, m_minus: 1 };
        let (clo, chi) = core_range(kind, -7, 7);
        assert_eq!((clo, chi), (-5, 5));
        let xs: Vec<Site> = (clo..=chi).collect();
        let lhs = oracle_lhs_survival(kind, 1.0, -7, 7, &xs, 1e-12).unwrap();
        let rhs = oracle_rhs_survival(kind, 1.0, -7, 7, &xs, 1e-12).unwrap();
        let worst = lhs
            .iter()
            .zip(rhs.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "sup |diff| {worst}");
    }

    #[test]
    fn micro_identity_is_exact_two_shock() {
        let kind = ShockKind::Two { m: 1, n: 1 };
        let (clo, chi) = core_range(kind, -6, 6);
        assert_eq!((clo, chi), (-3, 3));
        let xs: Vec<Site> = (clo..=chi).collect();
        let lhs = oracle_lhs_survival(kind, 1.0, -6, 6, &xs, 1e-12).unwrap();
        let rhs = oracle_rhs_survival(kind, 1.0, -6, 6, &xs, 1e-12).unwrap();
        let worst = lhs
            .iter()
            .zip(rhs.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "sup |diff| {worst}");
    }

    #[test]
    fn micro_identity_is_exact_two_shock_joint() {
        let kind = ShockKind::Two { m: 1, n: 1 };
        let lhs = oracle_lhs_joint_law(kind, 1.0, 0, -6, 6, 1e-10).unwrap();
        let rhs = oracle_rhs_joint_law(kind, 1.0, 0, -6, 6, 1e-10).unwrap();
        let tv = oracle::tv_distance(&lhs, &rhs);
        assert!(tv < 1e-8, "TV {tv}");
    }

    #[test]
    fn sampled_sides_agree_pointwise_at_small_scale() {
        let kind = ShockKind::One { m_plus: 1, m_minus: 1 };
        let t = 2.0;
        let n = 20_000u64;
        let lhs = sample_lhs_positions(kind, t, 11, 0..n, 1.0).unwrap();
        let grid = kind.default_grid(t);
        let reqs = vec![RhsRequest { kind, grid: grid.clone(), joint_xs: vec![] }];
        let rhs = &sample_rhs_step(&reqs, t, 12, 0..n, 1.0).unwrap()[0];
        for (gi, &x) in grid.iter().enumerate() {
            let p_lhs = lhs.positions.iter().filter(|&&p| p >= x).count() as f64 / n as f64;
            let p_rhs = rhs.event_counts[gi] as f64 / rhs.n as f64;
            let pbar = 0.5 * (p_lhs + p_rhs);
            let sd = (pbar * (1.0 - pbar) * 2.0 / n as f64).sqrt().max(1e-9);
            assert!(
                (p_lhs - p_rhs).abs() <= 4.0 * sd + 1e-9,
                "x={x}: {p_lhs} vs {p_rhs} (sd {sd})"
            );
        }
    }
}
