//! Exact transient laws for micro systems.
//!
//! Enumerates the reachable state space of the swap dynamics on a closed
//! window, builds the jump structure (every admissible swap fires at rate 1),
//! and evaluates the distribution at time t by uniformization. All numbers
//! here are exact up to the stated series tolerance, independent of the
//! Monte Carlo engine, so they serve as ground truth for it.

use crate::lattice::{Color, ColorConfig, LeftBoundary, RightBoundary, Site};
use std::collections::{BTreeMap, HashMap, VecDeque};
use thiserror::Error;

/// Hard cap on enumerated states.
pub const MAX_STATES: usize = 200_000;

/// Default truncation tolerance of the uniformized series (L1 mass left out).
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle needs a closed window on both sides")]
    NotClosed,
    #[error("state space exceeds {MAX_STATES} states")]
    TooLarge,
}

/// Reachable states of a closed system, indexed densely.
pub struct StateSpace {
    pub window_lo: Site,
    pub states: Vec<Vec<Color>>,
    pub index: HashMap<Vec<Color>, u32>,
    /// Bonds are (z, z+1) for z in window_lo ..= window_hi - 1.
    pub n_bonds: usize,
}

impl StateSpace {
    pub fn initial_index(&self, init: &[Color]) -> u32 {
        self.index[init]
    }
}

/// Breadth-first enumeration of every configuration reachable from `init`
/// under single-bond swaps.
pub fn enumerate_reachable(init: &ColorConfig) -> Result<StateSpace, OracleError> {
    if init.left != LeftBoundary::Closed || init.right != RightBoundary::Closed {
        return Err(OracleError::NotClosed);
    }
    let n_sites = init.len();
    let n_bonds = n_sites.saturating_sub(1);
    let mut states: Vec<Vec<Color>> = Vec::new();
    let mut index: HashMap<Vec<Color>, u32> = HashMap::new();
    let mut queue: VecDeque<u32> = VecDeque::new();
    index.insert(init.colors.clone(), 0);
    states.push(init.colors.clone());
    queue.push_back(0);
    while let Some(i) = queue.pop_front() {
        let cur = states[i as usize].clone();
        for b in 0..n_bonds {
            if cur[b] < cur[b + 1] {
                let mut next = cur.clone();
                next.swap(b, b + 1);
                if !index.contains_key(&next) {
                    if states.len() >= MAX_STATES {
                        return Err(OracleError::TooLarge);
                    }
                    let id = states.len() as u32;
                    index.insert(next.clone(), id);
                    states.push(next);
                    queue.push_back(id);
                }
            }
        }
    }
    Ok(StateSpace { window_lo: init.window_lo, states, index, n_bonds })
}

/// Sparse jump structure: for each state, the list of states reachable by
/// one swap (each at rate 1).
pub struct Generator {
    pub targets: Vec<Vec<u32>>,
}

pub fn build_generator(space: &StateSpace) -> Generator {
    let mut targets = Vec::with_capacity(space.states.len());
    for st in &space.states {
        let mut outs = Vec::new();
        for b in 0..space.n_bonds {
            if st[b] < st[b + 1] {
                let mut next = st.clone();
                next.swap(b, b + 1);
                outs.push(space.index[&next]);
            }
        }
        targets.push(outs);
    }
    Generator { targets }
}

/// Distribution at time `t` started from state `init_idx`, by uniformization
/// with rate Lambda = number of bonds. The returned vector sums to 1 minus
/// at most `tol`.
pub fn transient_distribution(
    space: &StateSpace,
    gen: &Generator,
    init_idx: u32,
    t: f64,
    tol: f64,
) -> Vec<f64> {
    let n = space.states.len();
    let lambda = space.n_bonds as f64;
    let mut cur = vec![0.0f64; n];
    cur[init_idx as usize] = 1.0;
    if lambda == 0.0 || t == 0.0 {
        return cur;
    }
    let lt = lambda * t;
    let mut result = vec![0.0f64; n];
    // Poisson(lt) weights, accumulated until 1 - tol of the mass is spent
    let mut w = (-lt).exp();
    let mut cum = w;
    for (r, c) in result.iter_mut().zip(cur.iter()) {
        *r += w * c;
    }
    let k_cap = (lt + 12.0 * (lt + 10.0).sqrt() + 60.0) as usize;
    let mut next = vec![0.0f64; n];
    for k in 1..=k_cap {
        if 1.0 - cum <= tol {
            break;
        }
        // one step of P = I + Q/Lambda
        next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let p = cur[i];
            if p == 0.0 {
                continue;
            }
            let outs = &gen.targets[i];
            next[i] += p * (1.0 - outs.len() as f64 / lambda);
            let share = p / lambda;
            for &j in outs {
                next[j as usize] += share;
            }
        }
        std::mem::swap(&mut cur, &mut next);
        w *= lt / k as f64;
        cum += w;
        for (r, c) in result.iter_mut().zip(cur.iter()) {
            *r += w * c;
        }
    }
    result
}

/// Push a distribution over states through an observable, producing the exact
/// law of the observable as a sorted map.
pub fn observable_law<K: Ord, F: Fn(&[Color], Site) -> K>(
    space: &StateSpace,
    dist: &[f64],
    f: F,
) -> BTreeMap<K, f64> {
    let mut law: BTreeMap<K, f64> = BTreeMap::new();
    for (st, &p) in space.states.iter().zip(dist.iter()) {
        if p > 0.0 {
            *law.entry(f(st, space.window_lo)).or_insert(0.0) += p;
        }
    }
    law
}

/// Total variation distance between two laws given as maps.
pub fn tv_distance<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<K> = a.keys().cloned().collect();
    keys.extend(b.keys().cloned());
    keys.sort();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Count particles (any color) at sites >= x in a raw state vector.
pub fn count_right(st: &[Color], window_lo: Site, x: Site) -> u64 {
    let start = (x.max(window_lo) as i64 - window_lo as i64) as usize;
    if start >= st.len() {
        return 0;
    }
    st[start..].iter().filter(|&&c| c != crate::lattice::INF).count() as u64
}

/// Count particles of color exactly c at sites >= x in a raw state vector.
pub fn count_colored_right(st: &[Color], window_lo: Site, c: Color, x: Site) -> u64 {
    let start = (x.max(window_lo) as i64 - window_lo as i64) as usize;
    if start >= st.len() {
        return 0;
    }
    st[start..].iter().filter(|&&cc| cc == c).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_initial, InitialKind, INF};

    fn closed(colors: Vec<Color>, lo: Site) -> ColorConfig {
        ColorConfig {
            window_lo: lo,
            colors,
            left: LeftBoundary::Closed,
            right: RightBoundary::Closed,
        }
    }

    #[test]
    fn single_particle_stays_put_with_prob_exp_minus_t() {
        // one particle at 0 on [0,3]: it leaves site 0 at rate 1
        let cfg = closed(vec![1, INF, INF, INF], 0);
        let space = enumerate_reachable(&cfg).unwrap();
        assert_eq!(space.states.len(), 4);
        let gen = build_generator(&space);
        let dist = transient_distribution(&space, &gen, 0, 1.0, 1e-12);
        let p_stay = dist[space.index[&vec![1, INF, INF, INF]] as usize];
        assert!((p_stay - (-1.0f64).exp()).abs() < 1e-10, "p_stay {p_stay}");
        let total: f64 = dist.iter().sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn identity_three_sites_reaches_all_permutations() {
        let cfg = make_initial(InitialKind::Identity, 0, 2, None).unwrap();
        let space = enumerate_reachable(&cfg).unwrap();
        assert_eq!(space.states.len(), 6);
        let gen = build_generator(&space);
        let dist = transient_distribution(&space, &gen, 0, 50.0, 1e-9);
        // by t = 50 everything is sorted descending
        let sorted_idx = space.index[&vec![2, 1, 0]] as usize;
        assert!(dist[sorted_idx] > 0.999999);
    }

    #[test]
    fn law_of_counts_is_a_probability() {
        let cfg = closed(vec![1, 1, 1, INF, INF, INF], -2);
        let space = enumerate_reachable(&cfg).unwrap();
        let gen = build_generator(&space);
        let dist = transient_distribution(&space, &gen, 0, 1.5, 1e-10);
        let law = observable_law(&space, &dist, |st, lo| count_right(st, lo, 1));
        let mass: f64 = law.values().sum();
        assert!((mass - 1.0).abs() < 1e-8);
        // 0..=3 particles can sit at sites >= 1 on this window
        assert!(law.keys().all(|&k| k <= 3));
    }

    #[test]
    fn too_large_is_detected() {
        // 13 distinct colors on 13 sites has 13! >> MAX_STATES states
        let cfg = make_initial(InitialKind::Identity, 0, 12, None).unwrap();
        assert!(matches!(enumerate_reachable(&cfg), Err(OracleError::TooLarge)));
    }
}
