//! Colored particle configurations on a finite lattice window.
//!
//! Colors are integers with *smaller = higher priority*; holes carry the
//! sentinel [`INF`]. A window `[window_lo, window_hi]` stores one color per
//! site. Outside the window the configuration is described by boundary
//! conditions: the left boundary is either an infinite packed reservoir of a
//! single color or a wall, the right boundary is either all holes or a wall.

use crate::rng::Stream;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lattice site index.
pub type Site = i32;

/// Particle color; smaller values take priority in swaps. Holes are [`INF`].
pub type Color = i32;

/// Hole sentinel. Compares strictly greater than every real color.
pub const INF: Color = i32::MAX;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LatticeError {
    #[error("site {0} outside window [{1}, {2}]")]
    OutOfWindow(Site, Site, Site),
    #[error("window [{0}, {1}] is empty or too small")]
    BadWindow(Site, Site),
    #[error("operation needs an empty right boundary, found a wall")]
    RightNotEmpty,
    #[error("operation needs walls on both sides")]
    NotClosed,
    #[error("colors are not a permutation of the window sites")]
    NotPermutation,
    #[error("window [{0}, {1}] cannot hold this initial condition")]
    WindowTooSmall(Site, Site),
    #[error("initial condition needs a random stream")]
    MissingStream,
}

/// State of the half-line left of the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeftBoundary {
    /// Every site `< window_lo` holds a particle of this color.
    Packed(Color),
    /// Wall: no site exists left of the window.
    Closed,
}

/// State of the half-line right of the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RightBoundary {
    /// Every site `> window_hi` is a hole.
    Empty,
    /// Wall: no site exists right of the window.
    Closed,
}

/// A colored configuration on a window plus boundary conditions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorConfig {
    pub window_lo: Site,
    pub colors: Vec<Color>,
    pub left: LeftBoundary,
    pub right: RightBoundary,
}

/// Supported initial conditions.
///
/// The single-shock and two-shock variants place second-class (and
/// third-class) particles between density blocks; the `Sorted` forms are the
/// same particle content with each color block contiguous, which is what the
/// coupled counting identities evolve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialKind {
    /// Color 1 on sites <= 0, holes to the right.
    Step,
    /// Color 1 for z < -m_minus and 1 <= z <= m_plus, color 2 at 0, holes
    /// elsewhere.
    OneShock { m_plus: u32, m_minus: u32 },
    /// Color 1 for z < -m_minus, color 2 for 0 <= z <= m_plus, holes
    /// elsewhere.
    OneShockSorted { m_plus: u32, m_minus: u32 },
    /// Color 1 for z < -m-n, -m <= z <= -1 and m+1 <= z <= m+n, color 2 at
    /// m, holes elsewhere.
    TwoShock { m: u32, n: u32 },
    /// Color 1 for z < -m-n, color 2 for -m <= z <= -1, color 3 for
    /// m <= z <= m+n, holes elsewhere.
    TwoShockSorted { m: u32, n: u32 },
    /// Independent occupation by color-1 particles with density rho; walls.
    Bernoulli { rho: f64 },
    /// Every site z holds its own color z; walls. The multicolor identity
    /// configuration.
    Identity,
}

impl ColorConfig {
    pub fn window_hi(&self) -> Site {
        self.window_lo + self.colors.len() as Site - 1
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    #[inline(always)]
    fn idx(&self, z: Site) -> Option<usize> {
        let off = z as i64 - self.window_lo as i64;
        if off < 0 || off >= self.colors.len() as i64 {
            None
        } else {
            Some(off as usize)
        }
    }

    /// Color at site `z`, resolving boundary sites through the boundary
    /// conditions. Errors on wall sites.
    pub fn color_at(&self, z: Site) -> Result<Color, LatticeError> {
        if let Some(i) = self.idx(z) {
            return Ok(self.colors[i]);
        }
        if z < self.window_lo {
            match self.left {
                LeftBoundary::Packed(c) => Ok(c),
                LeftBoundary::Closed => {
                    Err(LatticeError::OutOfWindow(z, self.window_lo, self.window_hi()))
                }
            }
        } else {
            match self.right {
                RightBoundary::Empty => Ok(INF),
                RightBoundary::Closed => {
                    Err(LatticeError::OutOfWindow(z, self.window_lo, self.window_hi()))
                }
            }
        }
    }

    pub fn set(&mut self, z: Site, c: Color) -> Result<(), LatticeError> {
        let (lo, hi) = (self.window_lo, self.window_hi());
        let i = self.idx(z).ok_or(LatticeError::OutOfWindow(z, lo, hi))?;
        self.colors[i] = c;
        Ok(())
    }

    pub fn occupied(&self, z: Site) -> Result<bool, LatticeError> {
        Ok(self.color_at(z)? != INF)
    }

    /// Apply the swap operator of bond `(z, z+1)`: exchanges the two colors
    /// iff `color(z) < color(z+1)`. Returns whether a swap happened. Both
    /// sites must lie in the window.
    pub fn apply_swap(&mut self, z: Site) -> Result<bool, LatticeError> {
        let (lo, hi) = (self.window_lo, self.window_hi());
        let i = self.idx(z).ok_or(LatticeError::OutOfWindow(z, lo, hi))?;
        let j = self.idx(z + 1).ok_or(LatticeError::OutOfWindow(z + 1, lo, hi))?;
        if self.colors[i] < self.colors[j] {
            self.colors.swap(i, j);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Number of particles (any color) at sites >= x. Requires an empty
    /// right boundary so the window count equals the full-lattice count; for
    /// closed vessels use [`Self::count_particles_in_window`].
    pub fn count_particles(&self, x: Site) -> Result<u64, LatticeError> {
        if self.right != RightBoundary::Empty {
            return Err(LatticeError::RightNotEmpty);
        }
        Ok(self.count_particles_in_window(x))
    }

    /// Same count without any boundary contract; used internally and by the
    /// oracle.
    pub fn count_particles_in_window(&self, x: Site) -> u64 {
        let start = (x.max(self.window_lo) as i64 - self.window_lo as i64) as usize;
        if start >= self.colors.len() {
            return 0;
        }
        self.colors[start..].iter().filter(|&&c| c != INF).count() as u64
    }

    /// Number of particles of exactly color `c` at sites >= x in the window.
    pub fn count_colored(&self, c: Color, x: Site) -> u64 {
        let start = (x.max(self.window_lo) as i64 - self.window_lo as i64) as usize;
        if start >= self.colors.len() {
            return 0;
        }
        self.colors[start..].iter().filter(|&&cc| cc == c).count() as u64
    }

    /// Position of the unique particle of color `c`; errors if absent or
    /// duplicated.
    pub fn position_of_color(&self, c: Color) -> Result<Site, LatticeError> {
        let mut found = None;
        for (i, &cc) in self.colors.iter().enumerate() {
            if cc == c {
                if found.is_some() {
                    return Err(LatticeError::NotPermutation);
                }
                found = Some(self.window_lo + i as Site);
            }
        }
        found.ok_or(LatticeError::NotPermutation)
    }

    /// Position of the (unique) second-class particle, color 2.
    pub fn second_class_position(&self) -> Result<Site, LatticeError> {
        self.position_of_color(2)
    }

    /// Sort the colors on `[lo, hi]` into descending order (holes first from
    /// the left since `INF` is largest). This is the terminal state of the
    /// swap dynamics restricted to that interval.
    pub fn sort_descending(&mut self, lo: Site, hi: Site) -> Result<(), LatticeError> {
        let (wlo, whi) = (self.window_lo, self.window_hi());
        let i = self.idx(lo).ok_or(LatticeError::OutOfWindow(lo, wlo, whi))?;
        let j = self.idx(hi).ok_or(LatticeError::OutOfWindow(hi, wlo, whi))?;
        if i > j {
            return Err(LatticeError::BadWindow(lo, hi));
        }
        self.colors[i..=j].sort_unstable_by(|a, b| b.cmp(a));
        Ok(())
    }

    /// Invert a permutation configuration: if site z holds color c then the
    /// result has color z at site c. Requires walls and colors forming a
    /// permutation of the window sites.
    pub fn invert(&self) -> Result<ColorConfig, LatticeError> {
        if self.left != LeftBoundary::Closed || self.right != RightBoundary::Closed {
            return Err(LatticeError::NotClosed);
        }
        let n = self.colors.len();
        let lo = self.window_lo as i64;
        let mut out = vec![INF; n];
        let mut seen = vec![false; n];
        for (i, &c) in self.colors.iter().enumerate() {
            let slot = c as i64 - lo;
            if slot < 0 || slot >= n as i64 || seen[slot as usize] {
                return Err(LatticeError::NotPermutation);
            }
            seen[slot as usize] = true;
            out[slot as usize] = self.window_lo + i as Site;
        }
        Ok(ColorConfig {
            window_lo: self.window_lo,
            colors: out,
            left: LeftBoundary::Closed,
            right: RightBoundary::Closed,
        })
    }

    /// Multiset of colors, sorted; used by conservation checks.
    pub fn color_multiset(&self) -> Vec<Color> {
        let mut v = self.colors.clone();
        v.sort_unstable();
        v
    }

    /// Height value `h(x) = 2 N(x+1) + x` where N counts window particles at
    /// sites >= x+1. Valid for a configuration that has not evolved (no
    /// exits); the running simulation keeps its own height state.
    pub fn height_at(&self, x: Site) -> i64 {
        2 * self.count_particles_in_window(x + 1) as i64 + x as i64
    }
}

/// Build one of the canonical initial conditions on the given window.
///
/// Block conditions get a packed color-1 reservoir on the left and holes on
/// the right; `Bernoulli` and `Identity` live in a closed vessel. `stream`
/// is only consulted for `Bernoulli`, which draws each site from a dedicated
/// per-site substream so that enlarging the window preserves the overlap.
pub fn make_initial(
    kind: InitialKind,
    window_lo: Site,
    window_hi: Site,
    stream: Option<&Stream>,
) -> Result<ColorConfig, LatticeError> {
    if window_hi < window_lo {
        return Err(LatticeError::BadWindow(window_lo, window_hi));
    }
    let n = (window_hi as i64 - window_lo as i64 + 1) as usize;
    let require = |lo_need: i64, hi_need: i64| -> Result<(), LatticeError> {
        if (window_lo as i64) <= lo_need && (window_hi as i64) >= hi_need {
            Ok(())
        } else {
            Err(LatticeError::WindowTooSmall(window_lo, window_hi))
        }
    };
    let mut colors = vec![INF; n];
    let fill = |colors: &mut Vec<Color>, f: &dyn Fn(i64) -> Color| {
        for (i, c) in colors.iter_mut().enumerate() {
            *c = f(window_lo as i64 + i as i64);
        }
    };
    let (left, right) = match kind {
        InitialKind::Bernoulli { .. } | InitialKind::Identity => {
            (LeftBoundary::Closed, RightBoundary::Closed)
        }
        _ => (LeftBoundary::Packed(1), RightBoundary::Empty),
    };
    match kind {
        InitialKind::Step => {
            fill(&mut colors, &|z| if z <= 0 { 1 } else { INF });
        }
        InitialKind::OneShock { m_plus, m_minus } => {
            let (mp, mm) = (m_plus as i64, m_minus as i64);
            require(-mm - 1, mp + 1)?;
            fill(&mut colors, &|z| {
                if z < -mm || (1 <= z && z <= mp) {
                    1
                } else if z == 0 {
                    2
                } else {
                    INF
                }
            });
        }
        InitialKind::OneShockSorted { m_plus, m_minus } => {
            let (mp, mm) = (m_plus as i64, m_minus as i64);
            require(-mm - 1, mp + 1)?;
            fill(&mut colors, &|z| {
                if z < -mm {
                    1
                } else if 0 <= z && z <= mp {
                    2
                } else {
                    INF
                }
            });
        }
        InitialKind::TwoShock { m, n } => {
            let (m, nn) = (m as i64, n as i64);
            require(-m - nn - 1, m + nn + 1)?;
            fill(&mut colors, &|z| {
                if z < -m - nn || (-m <= z && z <= -1) || (m + 1 <= z && z <= m + nn) {
                    1
                } else if z == m {
                    2
                } else {
                    INF
                }
            });
        }
        InitialKind::TwoShockSorted { m, n } => {
            let (m, nn) = (m as i64, n as i64);
            require(-m - nn - 1, m + nn + 1)?;
            fill(&mut colors, &|z| {
                if z < -m - nn {
                    1
                } else if -m <= z && z <= -1 {
                    2
                } else if m <= z && z <= m + nn {
                    3
                } else {
                    INF
                }
            });
        }
        InitialKind::Bernoulli { rho } => {
            let base = stream.ok_or(LatticeError::MissingStream)?;
            for (i, c) in colors.iter_mut().enumerate() {
                let z = window_lo as i64 + i as i64;
                let mut s = base.substream(z as u64);
                *c = if s.bernoulli(rho) { 1 } else { INF };
            }
        }
        InitialKind::Identity => {
            fill(&mut colors, &|z| z as Color);
        }
    }
    Ok(ColorConfig { window_lo, colors, left, right })
}

/// Height bookkeeping carried by a running simulation: the height at the
/// anchor vertex plus the integrated current through the origin bond.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeightState {
    /// Vertex just left of the window where the height is pinned.
    pub anchor_site: Site,
    /// Height value at the anchor, in units where the initial profile at the
    /// origin vertex is 0.
    pub anchor_value: i64,
    /// Number of growth events recorded at the origin bond.
    pub jumps_origin: i64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: InitialKind, lo: Site, hi: Site) -> ColorConfig {
        make_initial(kind, lo, hi, None).unwrap()
    }

    #[test]
    fn step_window_matches() {
        let c = cfg(InitialKind::Step, -5, 5);
        assert_eq!(c.colors, vec![1, 1, 1, 1, 1, 1, INF, INF, INF, INF, INF]);
        assert_eq!(c.left, LeftBoundary::Packed(1));
        assert_eq!(c.right, RightBoundary::Empty);
    }

    #[test]
    fn one_shock_window_matches() {
        let c = cfg(InitialKind::OneShock { m_plus: 2, m_minus: 1 }, -3, 3);
        assert_eq!(c.colors, vec![1, 1, INF, 2, 1, 1, INF]);
    }

    #[test]
    fn two_shock_window_matches() {
        // m = n = 1: color 1 at z < -2 and z = -1, 2..2; second class at 1
        let c = cfg(InitialKind::TwoShock { m: 1, n: 1 }, -4, 4);
        assert_eq!(c.colors, vec![1, 1, INF, 1, INF, 2, 1, INF, INF]);
        assert_eq!(c.second_class_position().unwrap(), 1);
        let c3 = cfg(InitialKind::TwoShock { m: 3, n: 2 }, -8, 8);
        assert_eq!(c3.second_class_position().unwrap(), 3);
    }

    #[test]
    fn sorted_variants_match() {
        let c = cfg(InitialKind::OneShockSorted { m_plus: 2, m_minus: 1 }, -4, 4);
        assert_eq!(c.colors, vec![1, 1, 1, INF, 2, 2, 2, INF, INF]);
        let d = cfg(InitialKind::TwoShockSorted { m: 1, n: 1 }, -4, 4);
        assert_eq!(d.colors, vec![1, 1, INF, 2, INF, 3, 3, INF, INF]);
    }

    #[test]
    fn colored_counts_on_sorted_shapes() {
        let c = cfg(InitialKind::OneShockSorted { m_plus: 2, m_minus: 1 }, -6, 6);
        assert_eq!(c.count_colored(2, 0), 3);
        assert_eq!(c.count_colored(1, -1), 0);
        assert_eq!(c.count_colored(1, -2), 1);
        let d = cfg(InitialKind::TwoShockSorted { m: 1, n: 1 }, -6, 6);
        assert_eq!(d.count_colored(1, 0), 0);
        assert_eq!(d.count_colored(2, 0), 0);
        assert_eq!(d.count_colored(3, 0), 2);
    }

    #[test]
    fn counting_examples() {
        let mut c = cfg(InitialKind::Step, -5, 5);
        assert_eq!(c.count_particles(0).unwrap(), 1);
        assert_eq!(c.count_particles(1).unwrap(), 0);
        assert_eq!(c.count_particles(-5).unwrap(), 6);
        // lone particle at 4
        for z in -5..=5 {
            c.set(z, if z == 4 { 1 } else { INF }).unwrap();
        }
        assert_eq!(c.count_particles(0).unwrap(), 1);
    }

    #[test]
    fn identity_invert_sort() {
        let id = cfg(InitialKind::Identity, -1, 1);
        assert_eq!(id.colors, vec![-1, 0, 1]);
        let mut p = cfg(InitialKind::Identity, 0, 2);
        p.colors = vec![2, 0, 1];
        assert_eq!(p.invert().unwrap().colors, vec![1, 2, 0]);
        assert_eq!(p.invert().unwrap().invert().unwrap(), p);
        let mut s = cfg(InitialKind::Identity, 0, 2);
        s.sort_descending(0, 2).unwrap();
        assert_eq!(s.colors, vec![2, 1, 0]);
        s.sort_descending(0, 2).unwrap();
        assert_eq!(s.colors, vec![2, 1, 0]);
    }

    #[test]
    fn swap_semantics() {
        let mut c = cfg(InitialKind::Identity, 0, 2);
        assert!(c.apply_swap(0).unwrap());
        assert_eq!(c.colors, vec![1, 0, 2]);
        // ordered pair does not move again
        assert!(!c.apply_swap(0).unwrap());
        assert_eq!(c.colors, vec![1, 0, 2]);
        assert!(c.apply_swap(0).is_ok());
        assert!(c.apply_swap(2).is_err());
        // hole right of a particle swaps, hole left of a particle does not
        let mut d = cfg(InitialKind::Step, -2, 2);
        assert!(d.apply_swap(0).unwrap());
        assert_eq!(d.colors, vec![1, 1, INF, 1, INF]);
        assert!(!d.apply_swap(0).unwrap());
        assert_eq!(d.colors, vec![1, 1, INF, 1, INF]);
    }

    #[test]
    fn height_examples() {
        let c = cfg(InitialKind::Step, -8, 8);
        assert_eq!(c.height_at(5), 5);
        assert_eq!(c.height_at(-3), 3);
        assert_eq!(c.height_at(0), 0);
        // steps of the profile are +-1
        for x in -8..8 {
            let d = c.height_at(x + 1) - c.height_at(x);
            assert!(d == 1 || d == -1);
        }
    }

    #[test]
    fn bernoulli_density_and_window_stability() {
        let s = Stream::new(&[42, crate::rng::domain::INIT]);
        let c = make_initial(InitialKind::Bernoulli { rho: 0.5 }, -2000, 2000, Some(&s)).unwrap();
        let occ = c.colors.iter().filter(|&&x| x != INF).count() as f64;
        let frac = occ / c.len() as f64;
        assert!((frac - 0.5).abs() < 0.03, "density {frac}");
        // enlarging the window keeps the shared sites identical
        let d = make_initial(InitialKind::Bernoulli { rho: 0.5 }, -4000, 4000, Some(&s)).unwrap();
        for z in -2000..=2000 {
            assert_eq!(c.color_at(z).unwrap(), d.color_at(z).unwrap());
        }
    }

    #[test]
    fn window_too_small_is_rejected() {
        assert!(matches!(
            make_initial(InitialKind::OneShock { m_plus: 2, m_minus: 1 }, -1, 3, None),
            Err(LatticeError::WindowTooSmall(..))
        ));
        assert!(matches!(
            make_initial(InitialKind::TwoShock { m: 2, n: 2 }, -4, 9, None),
            Err(LatticeError::WindowTooSmall(..))
        ));
    }

    #[test]
    fn multiset_is_conserved_by_ops() {
        let mut c = cfg(InitialKind::TwoShock { m: 2, n: 1 }, -6, 6);
        let before = c.color_multiset();
        c.apply_swap(2).unwrap();
        c.apply_swap(-3).unwrap();
        c.sort_descending(-2, 4).unwrap();
        assert_eq!(c.color_multiset(), before);
    }
}
