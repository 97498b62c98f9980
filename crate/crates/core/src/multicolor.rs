//! Multicolor structure: transposition words, the color-position symmetry
//! between a word applied before and after the dynamics, and threshold
//! projections down to fewer colors.

use crate::kinetics::{evolve_one, EvolveOpts, PoissonField, SimState};
use crate::lattice::{
    make_initial, Color, ColorConfig, InitialKind, LatticeError, LeftBoundary, RightBoundary,
    Site, INF,
};
use crate::oracle::{self, OracleError};
use crate::rng::Stream;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum MulticolorError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Kinetics(#[from] crate::kinetics::KineticsError),
    #[error("projection needs a packed color below the threshold or walls")]
    BadProjection,
}

/// Application order of a transposition word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeqOrder {
    /// bonds[0] acts first.
    Forward,
    /// bonds[last] acts first.
    Reversed,
}

/// Apply a word of bond swaps to a configuration.
pub fn apply_seq(
    config: &ColorConfig,
    bonds: &[Site],
    order: SeqOrder,
) -> Result<ColorConfig, LatticeError> {
    let mut out = config.clone();
    match order {
        SeqOrder::Forward => {
            for &z in bonds {
                out.apply_swap(z)?;
            }
        }
        SeqOrder::Reversed => {
            for &z in bonds.iter().rev() {
                out.apply_swap(z)?;
            }
        }
    }
    Ok(out)
}

/// Smallest closed identity window on which a word acts.
pub fn window_for_word(bonds: &[Site]) -> (Site, Site) {
    let lo = bonds.iter().copied().min().unwrap_or(0) - 1;
    let hi = bonds.iter().copied().max().unwrap_or(0) + 2;
    (lo, hi)
}

/// Deterministic color-position symmetry: applying a word to the identity
/// equals the inverse of applying the reversed word.
pub fn check_symmetry(bonds: &[Site]) -> Result<bool, LatticeError> {
    let (lo, hi) = window_for_word(bonds);
    let id = make_initial(InitialKind::Identity, lo, hi, None)?;
    let lhs = apply_seq(&id, bonds, SeqOrder::Forward)?;
    let rhs = apply_seq(&id, bonds, SeqOrder::Reversed)?.invert()?;
    Ok(lhs == rhs)
}

/// Random word of up to `max_len` bonds drawn from [bond_lo, bond_hi].
pub fn random_word(stream: &mut Stream, max_len: usize, bond_lo: Site, bond_hi: Site) -> Vec<Site> {
    let len = stream.next_below(max_len as u64 + 1) as usize;
    let span = (bond_hi - bond_lo + 1) as u64;
    (0..len).map(|_| bond_lo + stream.next_below(span) as Site).collect()
}

/// One sample of the two generalized-step constructions driven by
/// independent clock fields: the word applied before the dynamics, and the
/// reversed word applied after the dynamics followed by inversion. The two
/// results are equal in distribution.
pub fn sample_gen_pair(
    bonds: &[Site],
    window_lo: Site,
    window_hi: Site,
    t: f64,
    seed: u64,
    replica: u64,
) -> Result<(ColorConfig, ColorConfig), MulticolorError> {
    let id = make_initial(InitialKind::Identity, window_lo, window_hi, None)?;
    let opts = EvolveOpts::default();
    let f1 = PoissonField::generate(seed, 2 * replica, window_lo, window_hi - 1, t)?;
    let mut s1 = SimState::new(apply_seq(&id, bonds, SeqOrder::Forward)?);
    evolve_one(&mut s1, &f1, t, &opts)?;
    let f2 = PoissonField::generate(seed, 2 * replica + 1, window_lo, window_hi - 1, t)?;
    let mut s2 = SimState::new(id);
    evolve_one(&mut s2, &f2, t, &opts)?;
    let g2 = apply_seq(&s2.config, bonds, SeqOrder::Reversed)?.invert()?;
    Ok((s1.config, g2))
}

/// Exact laws of the two generalized-step constructions, via the transient
/// oracle. The second law is the pushforward of the plain identity dynamics
/// through (reversed word, inversion), so the two computations share no
/// code path with each other.
pub fn gen_pair_laws(
    bonds: &[Site],
    window_lo: Site,
    window_hi: Site,
    t: f64,
    tol: f64,
) -> Result<(BTreeMap<Vec<Color>, f64>, BTreeMap<Vec<Color>, f64>), MulticolorError> {
    let id = make_initial(InitialKind::Identity, window_lo, window_hi, None)?;
    let init1 = apply_seq(&id, bonds, SeqOrder::Forward)?;
    let law1 = {
        let space = oracle::enumerate_reachable(&init1)?;
        let gen = oracle::build_generator(&space);
        let dist =
            oracle::transient_distribution(&space, &gen, space.initial_index(&init1.colors), t, tol);
        oracle::observable_law(&space, &dist, |st, _| st.to_vec())
    };
    let law2 = {
        let space = oracle::enumerate_reachable(&id)?;
        let gen = oracle::build_generator(&space);
        let dist =
            oracle::transient_distribution(&space, &gen, space.initial_index(&id.colors), t, tol);
        let mut law: BTreeMap<Vec<Color>, f64> = BTreeMap::new();
        for (st, &p) in space.states.iter().zip(dist.iter()) {
            if p > 0.0 {
                let cfg = ColorConfig {
                    window_lo,
                    colors: st.clone(),
                    left: LeftBoundary::Closed,
                    right: RightBoundary::Closed,
                };
                let mapped = apply_seq(&cfg, bonds, SeqOrder::Reversed)?.invert()?;
                *law.entry(mapped.colors).or_insert(0.0) += p;
            }
        }
        law
    };
    Ok((law1, law2))
}

/// Project colors below the threshold to a single particle species; the
/// rest become holes. Commutes with the dynamics pathwise.
pub fn project_threshold(config: &ColorConfig, c: Color) -> Result<ColorConfig, MulticolorError> {
    let left = match config.left {
        LeftBoundary::Closed => LeftBoundary::Closed,
        LeftBoundary::Packed(k) if k < c => LeftBoundary::Packed(1),
        LeftBoundary::Packed(_) => return Err(MulticolorError::BadProjection),
    };
    Ok(ColorConfig {
        window_lo: config.window_lo,
        colors: config.colors.iter().map(|&k| if k < c { 1 } else { INF }).collect(),
        left,
        right: config.right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::GenMode;
    use crate::rng::domain;
    use crate::stats;

    #[test]
    fn single_swap_on_identity() {
        let id = make_initial(InitialKind::Identity, -1, 2, None).unwrap();
        let out = apply_seq(&id, &[0], SeqOrder::Forward).unwrap();
        assert_eq!(out.colors, vec![-1, 1, 0, 2]);
        let same = apply_seq(&id, &[], SeqOrder::Forward).unwrap();
        assert_eq!(same, id);
    }

    #[test]
    fn sorting_word_equals_sort() {
        // long enough alternating word fully sorts a 4-site window
        let id = make_initial(InitialKind::Identity, 0, 3, None).unwrap();
        let word = [0, 1, 2, 0, 1, 0, 2, 1, 0, 2, 1, 2];
        let out = apply_seq(&id, &word, SeqOrder::Forward).unwrap();
        let mut sorted = id.clone();
        sorted.sort_descending(0, 3).unwrap();
        assert_eq!(out, sorted);
    }

    #[test]
    fn symmetry_single_bond_and_random_words() {
        assert!(check_symmetry(&[0]).unwrap());
        let mut s = Stream::new(&[1234, domain::SEQ]);
        for _ in 0..300 {
            let word = random_word(&mut s, 50, -20, 19);
            assert!(check_symmetry(&word).unwrap(), "word {word:?}");
        }
    }

    #[test]
    fn gen_pair_at_time_zero_is_deterministic_equality() {
        let mut s = Stream::new(&[55, domain::SEQ]);
        for r in 0..20 {
            let word = random_word(&mut s, 12, -3, 2);
            let (g1, g2) = sample_gen_pair(&word, -4, 4, 0.0, 77, r).unwrap();
            assert_eq!(g1, g2);
        }
    }

    #[test]
    fn gen_pair_empty_word_same_distribution() {
        // with an empty word both constructions are S(t) id up to inversion;
        // compare the position of the smallest color by a two-sample KS test
        let n = 10_000u64;
        let mut a = Vec::with_capacity(n as usize);
        let mut b = Vec::with_capacity(n as usize);
        for r in 0..n {
            let (g1, g2) = sample_gen_pair(&[], -3, 3, 1.0, 99, r).unwrap();
            a.push(g1.position_of_color(-3).unwrap() as f64);
            b.push(g2.position_of_color(-3).unwrap() as f64);
        }
        let d = stats::ks_two_sample(&a, &b);
        let band = stats::ks_band(n as usize, n as usize, 0.01);
        assert!(d < band, "KS {d} band {band}");
    }

    #[test]
    fn gen_pair_exact_laws_close_for_sorting_word() {
        // sorter word on [-1, 1]; both exact laws via independent routes
        let word = [-1, 0, -1];
        let (l1, l2) = gen_pair_laws(&word, -1, 1, 0.5, 1e-10).unwrap();
        let tv = oracle::tv_distance(&l1, &l2);
        assert!(tv < 1e-8, "TV {tv}");
    }

    #[test]
    fn gen_pair_exact_laws_on_wider_window() {
        let word = [0, -2, 1, -1, 0, 2];
        let (l1, l2) = gen_pair_laws(&word, -3, 3, 0.5, 1e-10).unwrap();
        let tv = oracle::tv_distance(&l1, &l2);
        assert!(tv < 1e-8, "TV {tv}");
    }

    #[test]
    fn projection_commutes_with_dynamics() {
        for r in 0..50 {
            let cfg = make_initial(InitialKind::TwoShockSorted { m: 1, n: 1 }, -20, 20, None)
                .unwrap();
            let f = PoissonField::generate(111, r, -21, 20, 2.0).unwrap();
            let mut colored = SimState::new(cfg.clone());
            evolve_one(&mut colored, &f, 2.0, &EvolveOpts::default()).unwrap();
            let projected_after = project_threshold(&colored.config, 3).unwrap();
            let mut plain = SimState::new(project_threshold(&cfg, 3).unwrap());
            evolve_one(&mut plain, &f, 2.0, &EvolveOpts::default()).unwrap();
            assert_eq!(projected_after.colors, plain.config.colors);
            // and for the identity in a closed vessel under full generation
            let id = make_initial(InitialKind::Identity, -4, 4, None).unwrap();
            let g = PoissonField::generate(113, r, -4, 3, 1.5).unwrap();
            let full = EvolveOpts { gen: GenMode::Full, ..Default::default() };
            let mut colored = SimState::new(id.clone());
            evolve_one(&mut colored, &g, 1.5, &full).unwrap();
            let mut plain = SimState::new(project_threshold(&id, 0).unwrap());
            evolve_one(&mut plain, &g, 1.5, &full).unwrap();
            assert_eq!(project_threshold(&colored.config, 0).unwrap().colors, plain.config.colors);
        }
    }
}
