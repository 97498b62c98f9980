//! Poisson-clock event engine.
//!
//! Time is cut into unit slices and every (bond, slice) pair owns a keyed
//! counter stream yielding a Poisson(1) number of event times inside the
//! slice. An event at bond (z, z+1) applies the swap operator of that bond.
//! Because draws are addressed by (seed, replica, bond, slice), the clock
//! field is a pure function of its coordinates: runs can be resumed from any
//! time, windows can be enlarged, and several states can be coupled to the
//! same clocks, all without disturbing a single draw.

use crate::lattice::{Color, ColorConfig, HeightState, LeftBoundary, RightBoundary, Site, INF};
use crate::rng::{domain, Stream};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::{self, Read, Write};
use thiserror::Error;

/// Length of one time slice; one Poisson(1) clock per bond per slice.
pub const SLICE_DT: f64 = 1.0;

/// Hard cap on simulated horizons.
pub const MAX_HORIZON: f64 = 1_000_000.0;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum KineticsError {
    #[error("horizon {0} exceeds the maximum {MAX_HORIZON}")]
    HorizonTooLong(f64),
    #[error("bond {bond} outside the field's range [{lo}, {hi}]")]
    BondOutOfRange { bond: Site, lo: Site, hi: Site },
    #[error("event logging requires full-window generation")]
    LoggingNeedsFullGeneration,
    #[error("coupled states must share the same current time")]
    MismatchedTimes,
    #[error("target time {0} is before the current time {1}")]
    TimeReversed(f64, f64),
    #[error("target time {0} is beyond the field horizon {1}")]
    BeyondHorizon(f64, f64),
    #[error("snapshot time outside [current, target]")]
    SnapshotOutOfRange,
    #[error("no states to evolve")]
    EmptyStateSet,
}

/// Local height geometry at a bond the moment its clock rings, read off the
/// pre-swap colors: growth fills a local minimum of the height profile, a
/// local maximum cannot move, and the two suppressed classes are the
/// descending (particle-particle) and ascending (hole-hole) slopes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum EventClass {
    Growth = 0,
    LocalMax = 1,
    SuppressedAsc = 2,
    SuppressedDesc = 3,
}

impl EventClass {
    pub fn from_u8(v: u8) -> Option<EventClass> {
        match v {
            0 => Some(EventClass::Growth),
            1 => Some(EventClass::LocalMax),
            2 => Some(EventClass::SuppressedAsc),
            3 => Some(EventClass::SuppressedDesc),
            _ => None,
        }
    }
}

/// One logged clock ring. `site` is the bond's left site, which is also the
/// height vertex the event acts on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub site: Site,
    pub class: EventClass,
}

/// Time-ordered event log of one state over one run.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryLog {
    pub events: Vec<EventRecord>,
}

/// Binary event dump: 13-byte little-endian records (f64 time, i32 site,
/// u8 class).
pub fn dump_events<W: Write>(log: &TrajectoryLog, w: &mut W) -> io::Result<()> {
    for ev in &log.events {
        w.write_all(&ev.time.to_le_bytes())?;
        w.write_all(&ev.site.to_le_bytes())?;
        w.write_all(&[ev.class as u8])?;
    }
    Ok(())
}

pub fn load_events<R: Read>(r: &mut R) -> io::Result<TrajectoryLog> {
    let mut events = Vec::new();
    let mut rec = [0u8; 13];
    'outer: loop {
        let mut filled = 0usize;
        while filled < rec.len() {
            let n = r.read(&mut rec[filled..])?;
            if n == 0 {
                if filled == 0 {
                    break 'outer;
                }
                return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated record"));
            }
            filled += n;
        }
        let time = f64::from_le_bytes(rec[0..8].try_into().unwrap());
        let site = i32::from_le_bytes(rec[8..12].try_into().unwrap());
        let class = EventClass::from_u8(rec[12])
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "bad class byte"))?;
        events.push(EventRecord { time, site, class });
    }
    Ok(TrajectoryLog { events })
}

/// A reproducible Poisson clock field on a bond range up to a horizon.
/// Only a coordinate system: events are regenerated on demand.
#[derive(Clone, Copy, Debug)]
pub struct PoissonField {
    pub seed: u64,
    pub replica: u64,
    pub bond_lo: Site,
    pub bond_hi: Site,
    pub horizon: f64,
    base_key: u64,
}

impl PoissonField {
    pub fn generate(
        seed: u64,
        replica: u64,
        bond_lo: Site,
        bond_hi: Site,
        horizon: f64,
    ) -> Result<PoissonField, KineticsError> {
        if !(horizon >= 0.0) || horizon > MAX_HORIZON {
            return Err(KineticsError::HorizonTooLong(horizon));
        }
        let base_key = crate::rng::key_of(&[seed, replica, domain::EVENTS]);
        Ok(PoissonField { seed, replica, bond_lo, bond_hi, horizon, base_key })
    }

    #[inline]
    fn cell_stream(&self, bond: Site, slice: u32) -> Stream {
        let k = crate::rng::absorb(crate::rng::absorb(self.base_key, bond as i64 as u64), slice as u64);
        Stream::from_key(k)
    }

    fn append_slice_events(&self, bond: Site, slice: u32, out: &mut Vec<(u64, Site)>) {
        let mut s = self.cell_stream(bond, slice);
        let k = s.poisson(SLICE_DT);
        let base = slice as f64 * SLICE_DT;
        let start = out.len();
        for _ in 0..k {
            let t = base + s.next_f64() * SLICE_DT;
            out.push((t.to_bits(), bond));
        }
        // positive f64 bit patterns sort like the numbers themselves
        out[start..].sort_unstable();
    }

    /// Generate one slice's events for a bond range, time-sorted, using a
    /// bucket pass (events are uniform in the slice, so near-linear).
    fn collect_slice_sorted(
        &self,
        glo: Site,
        ghi: Site,
        slice: u32,
        buckets: &mut Vec<Vec<(u64, Site)>>,
        out: &mut Vec<(u64, Site)>,
    ) {
        const NB: usize = 256;
        if buckets.len() < NB {
            buckets.resize_with(NB, Vec::new);
        }
        for b in buckets.iter_mut() {
            b.clear();
        }
        let base = slice as f64 * SLICE_DT;
        for bond in glo..=ghi {
            let mut s = self.cell_stream(bond, slice);
            let k = s.poisson(SLICE_DT);
            for _ in 0..k {
                let u = s.next_f64();
                let t = base + u * SLICE_DT;
                buckets[(u * NB as f64) as usize].push((t.to_bits(), bond));
            }
        }
        out.clear();
        for b in buckets.iter_mut() {
            b.sort_unstable();
            out.extend_from_slice(b);
        }
    }

    /// Sorted event times of one (bond, slice) cell.
    pub fn slice_times(&self, bond: Site, slice: u32) -> Vec<f64> {
        let mut buf = Vec::new();
        self.append_slice_events(bond, slice, &mut buf);
        buf.into_iter().map(|(bits, _)| f64::from_bits(bits)).collect()
    }
}

/// A configuration in flight: colors, exit/injection ledgers and height
/// bookkeeping. `origin` is the vertex where the initial height profile
/// vanishes, so step data replayed from (y, tau) carries origin = y.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimState {
    pub config: ColorConfig,
    pub time: f64,
    pub origin: Site,
    /// Growth events seen at the origin bond; h(origin, t) = 2 * this.
    pub jumps_origin: i64,
    pub injected: u64,
    pub exited: BTreeMap<Color, u64>,
    pub exited_total: u64,
    /// Set when the dynamics touched the window edges; data from a touched
    /// run does not represent the infinite system and must be discarded.
    pub window_touched: bool,
    /// For step-like boundaries: (first site differing from the reservoir
    /// color, last occupied site). Everything outside is frozen, which the
    /// engine exploits when generating events.
    pub active: Option<(Site, Site)>,
}

impl SimState {
    pub fn new(config: ColorConfig) -> SimState {
        SimState::with_origin(config, 0)
    }

    pub fn with_origin(config: ColorConfig, origin: Site) -> SimState {
        let active = derive_active(&config);
        SimState {
            config,
            time: 0.0,
            origin,
            jumps_origin: 0,
            injected: 0,
            exited: BTreeMap::new(),
            exited_total: 0,
            window_touched: false,
            active,
        }
    }

    /// Inclusive range of bonds that can act on this state. Boundary bonds
    /// exist only where the boundary has content to move.
    pub fn applicable_bonds(&self) -> (Site, Site) {
        let lo = self.config.window_lo;
        let hi = self.config.window_hi();
        let blo = if matches!(self.config.left, LeftBoundary::Packed(_)) { lo - 1 } else { lo };
        let bhi = if matches!(self.config.right, RightBoundary::Empty) { hi } else { hi - 1 };
        (blo, bhi)
    }

    /// Particles (any color) at sites >= x, including exited ones.
    /// Valid for x >= window_lo.
    pub fn count_right(&self, x: Site) -> i64 {
        self.config.count_particles_in_window(x) as i64 + self.exited_total as i64
    }

    /// Particles of color c at sites >= x, including exited ones.
    pub fn count_colored_right(&self, c: Color, x: Site) -> i64 {
        self.config.count_colored(c, x) as i64
            + self.exited.get(&c).copied().unwrap_or(0) as i64
    }

    /// Height at vertex x: h(x) = 2 N(x+1) + (x - origin). Valid on
    /// [window_lo - 1, window_hi].
    pub fn height_at(&self, x: Site) -> i64 {
        2 * self.count_right(x + 1) + (x as i64 - self.origin as i64)
    }

    pub fn height_state(&self) -> HeightState {
        let anchor = self.config.window_lo - 1;
        HeightState {
            anchor_site: anchor,
            anchor_value: self.height_at(anchor),
            jumps_origin: self.jumps_origin,
        }
    }

    /// Ring the clock of bond (z, z+1). Returns the event class, or None if
    /// that bond cannot act on this state. The class reflects the pre-swap
    /// geometry; the swap itself happens iff color(z) < color(z+1).
    pub fn apply_event(&mut self, z: Site) -> Option<EventClass> {
        let (blo, bhi) = self.applicable_bonds();
        if z < blo || z > bhi {
            return None;
        }
        let lo = self.config.window_lo;
        let hi = self.config.window_hi();
        let i = z as i64 - lo as i64;
        let a = if z < lo {
            match self.config.left {
                LeftBoundary::Packed(c) => c,
                LeftBoundary::Closed => unreachable!(),
            }
        } else {
            self.config.colors[i as usize]
        };
        let b = if z >= hi { INF } else { self.config.colors[(i + 1) as usize] };
        if a >= b {
            return Some(if a == INF {
                if b == INF {
                    EventClass::SuppressedAsc
                } else {
                    EventClass::LocalMax
                }
            } else {
                EventClass::SuppressedDesc
            });
        }
        // a < b: the swap fires
        let class = if b == INF { EventClass::Growth } else { EventClass::SuppressedDesc };
        if z < lo {
            // reservoir bond: a particle enters iff site lo is a hole;
            // anything else at lo means the run has hit the window edge
            if b == INF {
                self.config.colors[(i + 1) as usize] = a;
                self.injected += 1;
            }
            self.window_touched = true;
        } else if z >= hi {
            // exit into the empty half-line
            self.config.colors[i as usize] = INF;
            *self.exited.entry(a).or_insert(0) += 1;
            self.exited_total += 1;
            self.window_touched = true;
        } else {
            self.config.colors.swap(i as usize, (i + 1) as usize);
        }
        if z == self.origin && class == EventClass::Growth {
            self.jumps_origin += 1;
        }
        if let Some((l, r)) = self.active.as_mut() {
            if z == *l - 1 {
                *l -= 1;
            }
            if z == *r {
                *r += 1;
            }
            if *l <= lo + 1 || *r >= hi - 1 {
                self.window_touched = true;
            }
        }
        Some(class)
    }
}

fn derive_active(config: &ColorConfig) -> Option<(Site, Site)> {
    let c = match (config.left, config.right) {
        (LeftBoundary::Packed(c), RightBoundary::Empty) => c,
        _ => return None,
    };
    let lo = config.window_lo;
    let mut l = config.window_hi() + 1;
    for (i, &col) in config.colors.iter().enumerate() {
        if col != c {
            l = lo + i as Site;
            break;
        }
    }
    let mut r = lo - 1;
    for (i, &col) in config.colors.iter().enumerate().rev() {
        if col != INF {
            r = lo + i as Site;
            break;
        }
    }
    Some((l, r))
}

/// Which bonds to generate clocks for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GenMode {
    /// Only around the active region (exact for the dynamics, but blind to
    /// far-field suppressed events, hence incompatible with logging).
    Active { slack: i32 },
    /// Every bond the states can see.
    Full,
}

#[derive(Clone, Debug)]
pub struct EvolveOpts {
    pub gen: GenMode,
    pub log: bool,
    pub snapshots: Vec<f64>,
}

impl Default for EvolveOpts {
    fn default() -> Self {
        EvolveOpts { gen: GenMode::Active { slack: 4 }, log: false, snapshots: Vec::new() }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub states: Vec<SimState>,
}

#[derive(Debug, Default)]
pub struct EvolveOutput {
    pub logs: Vec<TrajectoryLog>,
    pub snapshots: Vec<Snapshot>,
}

fn need_range(states: &[SimState], gen: GenMode) -> (Site, Site) {
    let mut glo = Site::MAX;
    let mut ghi = Site::MIN;
    for st in states {
        let (alo, ahi) = st.applicable_bonds();
        let (lo, hi) = match (gen, st.active) {
            (GenMode::Active { slack }, Some((l, r))) => {
                ((l - 1 - slack).max(alo), (r + slack).min(ahi))
            }
            _ => (alo, ahi),
        };
        if lo <= hi {
            glo = glo.min(lo);
            ghi = ghi.max(hi);
        }
    }
    (glo, ghi)
}

fn check_range(glo: Site, ghi: Site, field: &PoissonField) -> Result<(), KineticsError> {
    if glo < field.bond_lo || ghi > field.bond_hi {
        let bond = if glo < field.bond_lo { glo } else { ghi };
        return Err(KineticsError::BondOutOfRange { bond, lo: field.bond_lo, hi: field.bond_hi });
    }
    Ok(())
}

fn snapshot_of(states: &[SimState], time: f64) -> Snapshot {
    let mut clones = states.to_vec();
    for c in clones.iter_mut() {
        c.time = time;
    }
    Snapshot { time, states: clones }
}

/// Drive one or more coupled states from their shared current time to
/// `t_to` under the given clock field.
pub fn evolve(
    states: &mut [SimState],
    field: &PoissonField,
    t_to: f64,
    opts: &EvolveOpts,
) -> Result<EvolveOutput, KineticsError> {
    if states.is_empty() {
        return Err(KineticsError::EmptyStateSet);
    }
    if opts.log && matches!(opts.gen, GenMode::Active { .. }) {
        return Err(KineticsError::LoggingNeedsFullGeneration);
    }
    let t_from = states[0].time;
    if states.iter().any(|s| s.time != t_from) {
        return Err(KineticsError::MismatchedTimes);
    }
    if t_to < t_from {
        return Err(KineticsError::TimeReversed(t_to, t_from));
    }
    if t_to > field.horizon {
        return Err(KineticsError::BeyondHorizon(t_to, field.horizon));
    }
    let mut snaps = opts.snapshots.clone();
    snaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if snaps.first().is_some_and(|&s| s < t_from) || snaps.last().is_some_and(|&s| s > t_to) {
        return Err(KineticsError::SnapshotOutOfRange);
    }
    let mut out = EvolveOutput {
        logs: if opts.log {
            states.iter().map(|_| TrajectoryLog::default()).collect()
        } else {
            Vec::new()
        },
        snapshots: Vec::new(),
    };
    let mut snap_idx = 0usize;
    if t_to > t_from {
        let k_from = t_from.floor() as u32;
        let k_last =
            if t_to.fract() == 0.0 { (t_to as u32).saturating_sub(1) } else { t_to.floor() as u32 };
        let mut buf: Vec<(u64, Site)> = Vec::new();
        let mut buckets: Vec<Vec<(u64, Site)>> = Vec::new();
        let mut aux: BinaryHeap<Reverse<(u64, Site)>> = BinaryHeap::new();
        let mut done = false;
        for k in k_from..=k_last {
            if done {
                break;
            }
            let (mut glo, mut ghi) = need_range(states, opts.gen);
            check_range(glo, ghi, field)?;
            aux.clear();
            field.collect_slice_sorted(glo, ghi, k, &mut buckets, &mut buf);
            let mut i = 0usize;
            loop {
                let from_buf = buf.get(i).copied();
                let from_aux = aux.peek().map(|&Reverse(e)| e);
                let (bits, bond) = match (from_buf, from_aux) {
                    (Some(x), Some(y)) => {
                        if x <= y {
                            i += 1;
                            x
                        } else {
                            aux.pop();
                            y
                        }
                    }
                    (Some(x), None) => {
                        i += 1;
                        x
                    }
                    (None, Some(y)) => {
                        aux.pop();
                        y
                    }
                    (None, None) => break,
                };
                let t_ev = f64::from_bits(bits);
                if t_ev > t_to {
                    done = true;
                    break;
                }
                if t_ev <= t_from {
                    continue;
                }
                while snap_idx < snaps.len() && snaps[snap_idx] < t_ev {
                    out.snapshots.push(snapshot_of(states, snaps[snap_idx]));
                    snap_idx += 1;
                }
                let mut edges_moved = false;
                for (si, st) in states.iter_mut().enumerate() {
                    let edges_before = st.active;
                    if let Some(class) = st.apply_event(bond) {
                        if opts.log {
                            out.logs[si].events.push(EventRecord { time: t_ev, site: bond, class });
                        }
                        if st.active != edges_before {
                            edges_moved = true;
                        }
                    }
                }
                // active region grew: fetch clocks of newly needed bonds for
                // the rest of this slice (their earlier rings were no-ops)
                if edges_moved && matches!(opts.gen, GenMode::Active { .. }) {
                    let (nlo, nhi) = need_range(states, opts.gen);
                    check_range(nlo, nhi, field)?;
                    let mut tmp = Vec::new();
                    let mut fetch = |b: Site, aux: &mut BinaryHeap<Reverse<(u64, Site)>>| {
                        tmp.clear();
                        field.append_slice_events(b, k, &mut tmp);
                        for &e in &tmp {
                            if e.0 > bits {
                                aux.push(Reverse(e));
                            }
                        }
                    };
                    if nlo < glo {
                        for b in nlo..glo {
                            fetch(b, &mut aux);
                        }
                        glo = nlo;
                    }
                    if nhi > ghi {
                        for b in (ghi + 1)..=nhi {
                            fetch(b, &mut aux);
                        }
                        ghi = nhi;
                    }
                }
            }
        }
    }
    for st in states.iter_mut() {
        st.time = t_to;
    }
    while snap_idx < snaps.len() {
        out.snapshots.push(snapshot_of(states, snaps[snap_idx]));
        snap_idx += 1;
    }
    Ok(out)
}

pub fn evolve_one(
    state: &mut SimState,
    field: &PoissonField,
    t_to: f64,
    opts: &EvolveOpts,
) -> Result<EvolveOutput, KineticsError> {
    evolve(std::slice::from_mut(state), field, t_to, opts)
}

/// Fresh step data started from (y, tau): color 1 on sites <= y at time tau,
/// evolved to time t under the same clock field. Its height is anchored so
/// that h(x, tau) = |x - y|.
pub fn replay_step_from(
    field: &PoissonField,
    y: Site,
    tau: f64,
    t: f64,
    window_lo: Site,
    window_hi: Site,
) -> Result<SimState, KineticsError> {
    let n = (window_hi as i64 - window_lo as i64 + 1) as usize;
    let colors: Vec<Color> = (0..n)
        .map(|i| if window_lo as i64 + i as i64 <= y as i64 { 1 } else { INF })
        .collect();
    let config = ColorConfig {
        window_lo,
        colors,
        left: LeftBoundary::Packed(1),
        right: RightBoundary::Empty,
    };
    let mut st = SimState::with_origin(config, y);
    st.time = tau;
    evolve_one(&mut st, field, t, &EvolveOpts::default())?;
    Ok(st)
}

/// Margin rule: a window that the dynamics cannot influence from the edges
/// before time t, with `factor` >= 1 widening for safety checks.
pub fn margin_window(x_lo: Site, x_hi: Site, t: f64, factor: f64) -> (Site, Site) {
    let m = (1.5 * t * factor).ceil() as Site + 50;
    (x_lo - m, x_hi + m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_initial, InitialKind};
    use crate::oracle;

    fn closed(colors: Vec<Color>, lo: Site) -> ColorConfig {
        ColorConfig {
            window_lo: lo,
            colors,
            left: LeftBoundary::Closed,
            right: RightBoundary::Closed,
        }
    }

    #[test]
    fn field_is_deterministic_and_replica_separated() {
        let f = PoissonField::generate(5, 0, -10, 10, 8.0).unwrap();
        let g = PoissonField::generate(5, 0, -10, 10, 8.0).unwrap();
        let h = PoissonField::generate(5, 1, -10, 10, 8.0).unwrap();
        assert_eq!(f.slice_times(-3, 2), g.slice_times(-3, 2));
        let same = (0..8).all(|k| f.slice_times(0, k) == h.slice_times(0, k));
        assert!(!same);
    }

    #[test]
    fn field_counts_are_poisson_one() {
        let mut total = 0usize;
        let n = 100_000;
        for r in 0..n {
            let f = PoissonField::generate(17, r, 0, 0, 1.0).unwrap();
            total += f.slice_times(0, 0).len();
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * 10f64.powf(-2.5), "mean {mean}");
    }

    #[test]
    fn horizon_guard() {
        assert!(matches!(
            PoissonField::generate(1, 0, 0, 1, 2e6),
            Err(KineticsError::HorizonTooLong(_))
        ));
    }

    #[test]
    fn event_classes_from_local_shape() {
        let mut st = SimState::new(closed(vec![1, INF, 1, 1, 2, 1, INF, INF], 0));
        // (1, INF): growth, swap
        assert_eq!(st.apply_event(0), Some(EventClass::Growth));
        assert_eq!(st.config.colors[0..2], [INF, 1]);
        // (INF, 1): local max, frozen
        assert_eq!(st.apply_event(0), Some(EventClass::LocalMax));
        assert_eq!(st.config.colors[0..2], [INF, 1]);
        // (1, 1): suppressed descent, no colored move
        assert_eq!(st.apply_event(2), Some(EventClass::SuppressedDesc));
        assert_eq!(st.config.colors[2..4], [1, 1]);
        // (1, 2): suppressed descent with a colored swap
        assert_eq!(st.apply_event(3), Some(EventClass::SuppressedDesc));
        assert_eq!(st.config.colors[3..5], [2, 1]);
        // (INF, INF): suppressed ascent
        assert_eq!(st.apply_event(6), Some(EventClass::SuppressedAsc));
        // bond outside the closed window
        assert_eq!(st.apply_event(7), None);
        assert_eq!(st.apply_event(-1), None);
    }

    #[test]
    fn single_particle_waits_exponentially() {
        let n = 100_000u64;
        let mut stayed = 0u64;
        for r in 0..n {
            let f = PoissonField::generate(23, r, 0, 2, 1.0).unwrap();
            let mut st = SimState::new(closed(vec![1, INF, INF, INF], 0));
            evolve_one(&mut st, &f, 1.0, &EvolveOpts::default()).unwrap();
            if st.config.colors[0] == 1 {
                stayed += 1;
            }
        }
        let p = stayed as f64 / n as f64;
        let target = (-1.0f64).exp();
        // binomial sd ~ 0.0015
        assert!((p - target).abs() < 4.0 * 0.00153, "p {p} target {target}");
    }

    #[test]
    fn evolve_matches_oracle_on_micro_step() {
        // closed window [-4, 4], step data, law of N(1, 1)
        let cfg = ColorConfig {
            window_lo: -4,
            colors: vec![1, 1, 1, 1, 1, INF, INF, INF, INF],
            left: LeftBoundary::Closed,
            right: RightBoundary::Closed,
        };
        let space = oracle::enumerate_reachable(&cfg).unwrap();
        let gen = oracle::build_generator(&space);
        let dist = oracle::transient_distribution(&space, &gen, 0, 1.0, 1e-10);
        let law = oracle::observable_law(&space, &dist, |st, lo| oracle::count_right(st, lo, 1));
        let n = 20_000u64;
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for r in 0..n {
            let f = PoissonField::generate(31, r, -4, 3, 1.0).unwrap();
            let mut st = SimState::new(cfg.clone());
            evolve_one(&mut st, &f, 1.0, &EvolveOpts::default()).unwrap();
            *counts.entry(st.count_right(1) as u64).or_insert(0) += 1;
        }
        // one-sample KS against the exact discrete law
        let mut d: f64 = 0.0;
        let mut f_exact = 0.0;
        let mut f_emp = 0.0;
        for k in 0..=5u64 {
            f_exact += law.get(&k).copied().unwrap_or(0.0);
            f_emp += counts.get(&k).copied().unwrap_or(0) as f64 / n as f64;
            d = d.max((f_exact - f_emp).abs());
        }
        assert!(d < 0.013, "KS {d}");
    }

    #[test]
    fn active_and_full_generation_agree() {
        for r in 0..30 {
            let f = PoissonField::generate(37, r, -17, 16, 3.0).unwrap();
            let cfg = make_initial(InitialKind::Step, -16, 16, None).unwrap();
            let mut a = SimState::new(cfg.clone());
            let mut b = SimState::new(cfg);
            evolve_one(&mut a, &f, 3.0, &EvolveOpts::default()).unwrap();
            evolve_one(&mut b, &f, 3.0, &EvolveOpts { gen: GenMode::Full, ..Default::default() })
                .unwrap();
            assert_eq!(a.config, b.config);
            assert_eq!(a.jumps_origin, b.jumps_origin);
        }
    }

    #[test]
    fn resume_equals_single_run() {
        for r in 0..20 {
            let f = PoissonField::generate(41, r, -17, 16, 4.0).unwrap();
            let cfg = make_initial(InitialKind::Step, -16, 16, None).unwrap();
            let mut once = SimState::new(cfg.clone());
            evolve_one(&mut once, &f, 4.0, &EvolveOpts::default()).unwrap();
            let mut twice = SimState::new(cfg);
            evolve_one(&mut twice, &f, 1.7, &EvolveOpts::default()).unwrap();
            evolve_one(&mut twice, &f, 4.0, &EvolveOpts::default()).unwrap();
            assert_eq!(once.config, twice.config);
            assert_eq!(once.jumps_origin, twice.jumps_origin);
        }
    }

    #[test]
    fn window_extension_is_bit_exact() {
        for r in 0..20 {
            let t = 3.0;
            let (lo, hi) = margin_window(0, 0, t, 1.0);
            let f1 = PoissonField::generate(43, r, lo - 1, hi, t).unwrap();
            let f2 = PoissonField::generate(43, r, 2 * lo - 1, 2 * hi, t).unwrap();
            let c1 = make_initial(InitialKind::Step, lo, hi, None).unwrap();
            let c2 = make_initial(InitialKind::Step, 2 * lo, 2 * hi, None).unwrap();
            let mut s1 = SimState::new(c1);
            let mut s2 = SimState::new(c2);
            evolve_one(&mut s1, &f1, t, &EvolveOpts::default()).unwrap();
            evolve_one(&mut s2, &f2, t, &EvolveOpts::default()).unwrap();
            assert!(!s1.window_touched && !s2.window_touched);
            for x in 0..=8 {
                assert_eq!(s1.count_right(x), s2.count_right(x));
            }
            assert_eq!(s1.jumps_origin, s2.jumps_origin);
        }
    }

    #[test]
    fn replay_from_zero_equals_direct_run() {
        let t = 3.0;
        let (lo, hi) = margin_window(0, 0, t, 1.0);
        for r in 0..10 {
            let f = PoissonField::generate(47, r, lo - 1, hi, t).unwrap();
            let cfg = make_initial(InitialKind::Step, lo, hi, None).unwrap();
            let mut direct = SimState::new(cfg);
            evolve_one(&mut direct, &f, t, &EvolveOpts::default()).unwrap();
            let replayed = replay_step_from(&f, 0, 0.0, t, lo, hi).unwrap();
            assert_eq!(direct.config, replayed.config);
        }
    }

    #[test]
    fn replay_at_final_time_is_a_wedge() {
        let f = PoissonField::generate(53, 0, -20, 19, 2.0).unwrap();
        let st = replay_step_from(&f, 3, 2.0, 2.0, -20, 20).unwrap();
        for x in -5..=10 {
            assert_eq!(st.height_at(x), (x as i64 - 3).abs());
        }
    }

    #[test]
    fn origin_jump_count_matches_height() {
        for r in 0..20 {
            let t = 4.0;
            let (lo, hi) = margin_window(0, 0, t, 1.0);
            let f = PoissonField::generate(59, r, lo - 1, hi, t).unwrap();
            let cfg = make_initial(InitialKind::Step, lo, hi, None).unwrap();
            let mut st = SimState::new(cfg);
            evolve_one(&mut st, &f, t, &EvolveOpts::default()).unwrap();
            assert_eq!(st.height_at(0), 2 * st.jumps_origin);
        }
    }

    #[test]
    fn height_profile_steps_are_unit() {
        let t = 3.0;
        let (lo, hi) = margin_window(0, 0, t, 1.0);
        let f = PoissonField::generate(61, 7, lo - 1, hi, t).unwrap();
        let cfg = make_initial(InitialKind::Step, lo, hi, None).unwrap();
        let mut st = SimState::new(cfg);
        evolve_one(&mut st, &f, t, &EvolveOpts::default()).unwrap();
        for x in (lo - 1)..hi {
            let d = st.height_at(x + 1) - st.height_at(x);
            assert!(d == 1 || d == -1);
        }
    }

    #[test]
    fn conservation_with_exits() {
        // deliberately tight window so particles leave on the right
        let cfg = make_initial(InitialKind::Step, -4, 6, None).unwrap();
        let initial_particles = cfg.count_particles_in_window(-4);
        for r in 0..50 {
            let f = PoissonField::generate(67, r, -5, 6, 3.0).unwrap();
            let mut st = SimState::new(cfg.clone());
            evolve_one(&mut st, &f, 3.0, &EvolveOpts::default()).unwrap();
            let inside = st.config.count_particles_in_window(-4);
            assert_eq!(inside + st.exited_total, initial_particles + st.injected);
        }
    }

    #[test]
    fn logging_requires_full_generation() {
        let f = PoissonField::generate(71, 0, -11, 10, 1.0).unwrap();
        let cfg = make_initial(InitialKind::Step, -10, 10, None).unwrap();
        let mut st = SimState::new(cfg);
        let opts = EvolveOpts { log: true, ..Default::default() };
        assert!(matches!(
            evolve_one(&mut st, &f, 1.0, &opts),
            Err(KineticsError::LoggingNeedsFullGeneration)
        ));
    }

    #[test]
    fn log_covers_all_classes_and_is_time_ordered() {
        let f = PoissonField::generate(74, 0, -11, 10, 2.0).unwrap();
        let cfg = make_initial(InitialKind::Step, -10, 10, None).unwrap();
        let mut st = SimState::new(cfg);
        let opts = EvolveOpts { gen: GenMode::Full, log: true, snapshots: vec![] };
        let out = evolve_one(&mut st, &f, 2.0, &opts).unwrap();
        let log = &out.logs[0];
        assert!(!log.events.is_empty());
        // every ring that lands on an applicable bond is recorded, local
        // maxima included: backward scans need those records too
        for cls in [
            EventClass::Growth,
            EventClass::LocalMax,
            EventClass::SuppressedAsc,
            EventClass::SuppressedDesc,
        ] {
            assert!(log.events.iter().any(|e| e.class == cls), "missing {cls:?}");
        }
        assert!(log.events.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn coupled_runs_preserve_height_dominance() {
        // A = step at 0, B = step at 1; B has one extra particle so
        // h_B >= h_A pointwise at t = 0, and coupling must keep it that way
        let t = 2.0;
        let (lo, hi) = margin_window(-1, 2, t, 1.0);
        let mk = |y: Site| {
            let colors: Vec<Color> = (lo..=hi).map(|z| if z <= y { 1 } else { INF }).collect();
            ColorConfig {
                window_lo: lo,
                colors,
                left: LeftBoundary::Packed(1),
                right: RightBoundary::Empty,
            }
        };
        for r in 0..40 {
            let f = PoissonField::generate(101, r, lo - 1, hi, t).unwrap();
            let mut pair = vec![SimState::new(mk(0)), SimState::new(mk(1))];
            let opts = EvolveOpts { snapshots: vec![0.7, 1.4], ..Default::default() };
            let out = evolve(&mut pair, &f, t, &opts).unwrap();
            let check = |a: &SimState, b: &SimState| {
                for x in (lo - 1)..=hi {
                    let (ha, hb) = (a.height_at(x), b.height_at(x));
                    assert!(hb >= ha, "dominance broken at x={x}: {hb} < {ha}");
                    assert!(hb - ha <= 2, "extra-particle bound broken at x={x}");
                }
            };
            for snap in &out.snapshots {
                check(&snap.states[0], &snap.states[1]);
            }
            check(&pair[0], &pair[1]);
        }
    }

    #[test]
    fn dump_load_roundtrip() {
        let f = PoissonField::generate(79, 0, -9, 8, 2.0).unwrap();
        let cfg = make_initial(InitialKind::Step, -8, 8, None).unwrap();
        let mut st = SimState::new(cfg);
        let opts = EvolveOpts { gen: GenMode::Full, log: true, snapshots: vec![] };
        let out = evolve_one(&mut st, &f, 2.0, &opts).unwrap();
        let mut bytes = Vec::new();
        dump_events(&out.logs[0], &mut bytes).unwrap();
        assert_eq!(bytes.len(), 13 * out.logs[0].events.len());
        let back = load_events(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.events, out.logs[0].events);
    }

    #[test]
    fn snapshots_interleave_correctly() {
        let f = PoissonField::generate(83, 0, -13, 12, 3.0).unwrap();
        let cfg = make_initial(InitialKind::Step, -12, 12, None).unwrap();
        let mut direct = SimState::new(cfg.clone());
        let opts = EvolveOpts { snapshots: vec![1.0, 2.5], ..Default::default() };
        let out = evolve_one(&mut direct, &f, 3.0, &opts).unwrap();
        assert_eq!(out.snapshots.len(), 2);
        // snapshot at 1.0 equals an independent run stopped at 1.0
        let mut stopped = SimState::new(cfg);
        evolve_one(&mut stopped, &f, 1.0, &EvolveOpts::default()).unwrap();
        assert_eq!(out.snapshots[0].states[0].config, stopped.config);
        assert_eq!(out.snapshots[0].time, 1.0);
    }
}
