//! Backwards paths through a logged event history.
//!
//! Scanning a trajectory log in reverse time, the path sits at a height
//! vertex and moves only when a suppressed event fires at its current site:
//! one step right on a descending slope, one step left on an ascending one.
//! Along the resulting trajectory the height at the endpoint decomposes
//! exactly into an intermediate height plus a freshly planted step evolution
//! (the concatenation property), which is checked here pathwise, together
//! with the two-initial-condition comparison inequalities and the
//! localization statistics of the path itself.

use crate::kinetics::{
    evolve, evolve_one, margin_window, replay_step_from, EventClass, EvolveOpts, GenMode,
    KineticsError, PoissonField, SimState, TrajectoryLog,
};
use crate::lattice::{make_initial, InitialKind, LatticeError, Site};
use crate::rng::{domain, Stream};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum GeodesicError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error("no quiet interval at the path origin")]
    NoQuietInterval,
}

/// A piecewise-constant backwards trajectory. `jumps` holds (time, new
/// site) pairs in strictly decreasing time order: the path occupies
/// `end_site` on the top segment and `jumps[k].1` for times below
/// `jumps[k].0` (until the next recorded jump).
#[derive(Clone, Debug)]
pub struct BackwardPath {
    pub end_site: Site,
    pub end_time: f64,
    pub jumps: Vec<(f64, Site)>,
    /// The scan left the logged site range; positions below that time are
    /// not trustworthy.
    pub escaped: bool,
}

impl BackwardPath {
    /// x(tau). Right-continuous: at a jump time the pre-jump (later-time)
    /// site is returned.
    pub fn position_at(&self, tau: f64) -> Site {
        let k = self.jumps.partition_point(|&(s, _)| s > tau);
        if k == 0 {
            self.end_site
        } else {
            self.jumps[k - 1].1
        }
    }

    pub fn origin(&self) -> Site {
        self.jumps.last().map_or(self.end_site, |&(_, p)| p)
    }

    /// sup over tau in [0, end_time] of |x(tau) - alpha*tau|, exact on the
    /// jump representation (the sup over each constant segment is attained
    /// at a segment endpoint).
    pub fn sup_deviation(&self, alpha: f64) -> f64 {
        let mut best = 0.0f64;
        let mut seg_hi = self.end_time;
        let mut pos = self.end_site as f64;
        for &(s, p) in &self.jumps {
            best = best.max((pos - alpha * seg_hi).abs()).max((pos - alpha * s).abs());
            seg_hi = s;
            pos = p as f64;
        }
        best.max((pos - alpha * seg_hi).abs()).max(pos.abs())
    }
}

/// Construct the backwards path from (x_end, t_end). `site_lo..=site_hi`
/// is the range the log covers; leaving it sets `escaped`.
pub fn backward_path(
    log: &TrajectoryLog,
    x_end: Site,
    t_end: f64,
    site_lo: Site,
    site_hi: Site,
) -> BackwardPath {
    let mut cur = x_end;
    let mut jumps = Vec::new();
    let mut escaped = !(site_lo..=site_hi).contains(&cur);
    if !escaped {
        for ev in log.events.iter().rev() {
            if ev.time >= t_end {
                continue;
            }
            if ev.site != cur {
                continue;
            }
            match ev.class {
                EventClass::SuppressedDesc => cur += 1,
                EventClass::SuppressedAsc => cur -= 1,
                // at a local maximum both neighbors sit one step down; the
                // path must leave (a fresh wedge planted here would grow on
                // this ring while the true profile stays put, breaking the
                // height split along the path). Either neighbor restores the
                // split; we fix the right one, matching the descending case.
                EventClass::LocalMax => cur += 1,
                EventClass::Growth => continue,
            }
            jumps.push((ev.time, cur));
            if cur < site_lo || cur > site_hi {
                escaped = true;
                break;
            }
        }
    }
    BackwardPath { end_site: x_end, end_time: t_end, jumps, escaped }
}

/// Times at which the pair of paths can change relative position: the left
/// endpoints of the constancy intervals of the union partition.
fn pair_eval_times(a: &BackwardPath, b: &BackwardPath) -> Vec<f64> {
    let top = a.end_time.min(b.end_time);
    let mut ts = vec![0.0, top];
    ts.extend(a.jumps.iter().map(|j| j.0).filter(|&s| s < top));
    ts.extend(b.jumps.iter().map(|j| j.0).filter(|&s| s < top));
    ts
}

/// Whether the two paths occupy the same site at some common time.
pub fn paths_intersect(a: &BackwardPath, b: &BackwardPath) -> bool {
    pair_eval_times(a, b).iter().any(|&s| a.position_at(s) == b.position_at(s))
}

/// Whether lo's position never exceeds hi's on their common time range.
pub fn ordered_everywhere(lo: &BackwardPath, hi: &BackwardPath) -> bool {
    pair_eval_times(lo, hi).iter().all(|&s| lo.position_at(s) <= hi.position_at(s))
}

/// Redirect the path to end at the origin by replacing its initial segment
/// with a staircase over a quiet interval [0, eps): half the earliest of
/// the path's first jump, the first logged event at a staircase site, and
/// t_end. Returns the modified path and eps.
pub fn canonicalize_to_origin(
    path: &BackwardPath,
    log: &TrajectoryLog,
) -> Result<(BackwardPath, f64), GeodesicError> {
    let x0 = path.origin();
    let mut quiet = path.jumps.last().map_or(path.end_time, |j| j.0).min(path.end_time);
    if x0 != 0 {
        let (slo, shi) = if x0 > 0 { (0, x0 - 1) } else { (x0 + 1, 0) };
        for ev in &log.events {
            if ev.time >= quiet {
                break;
            }
            if (slo..=shi).contains(&ev.site) {
                quiet = ev.time;
                break;
            }
        }
    }
    let eps = 0.5 * quiet;
    if !(eps > 0.0) {
        return Err(GeodesicError::NoQuietInterval);
    }
    let mut canon = path.clone();
    let steps = x0.unsigned_abs();
    let dir = if x0 > 0 { 1 } else { -1 };
    for k in (0..steps).rev() {
        canon.jumps.push((eps * (k + 1) as f64 / steps as f64, dir * k as Site));
    }
    Ok((canon, eps))
}

/// One pathwise concatenation check at a single tau.
#[derive(Clone, Debug)]
pub struct TauCheck {
    pub tau: f64,
    pub y_star: Site,
    pub h_total: i64,
    pub h_through_path: i64,
    pub equal: bool,
    pub inequality_checks: u32,
    pub inequality_violations: u32,
    pub strict_inequalities: u32,
}

#[derive(Clone, Debug, Default)]
pub struct ConcatReport {
    pub x_end: Site,
    pub checks: Vec<TauCheck>,
    pub escaped: bool,
    pub touched: bool,
}

/// Evolve one step run with logging, build the backwards path from
/// (x_end, t), and at each tau verify the exact integer equality
/// h(x,t) = h(x(tau),tau) + h_step_from(x(tau),tau)(x,t), plus the
/// matching inequality at n_y sampled other starting sites.
pub fn check_concatenation(
    seed: u64,
    replica: u64,
    t: f64,
    taus: &[f64],
    n_y: u32,
    x_end: Site,
    window_factor: f64,
) -> Result<ConcatReport, GeodesicError> {
    let (wlo, whi) = margin_window(x_end.min(0), x_end.max(0), t, window_factor);
    let field = PoissonField::generate(seed, replica, wlo - 1, whi, t)?;
    let mut st = SimState::new(make_initial(InitialKind::Step, wlo, whi, None)?);
    let opts = EvolveOpts { gen: GenMode::Full, log: true, snapshots: taus.to_vec() };
    let out = evolve_one(&mut st, &field, t, &opts)?;
    let path = backward_path(&out.logs[0], x_end, t, wlo - 1, whi);
    let h_total = st.height_at(x_end);
    let mut draw = Stream::new(&[seed, replica, domain::SAMPLE]);
    let span = t.ceil() as i64 + 8;
    let mut report = ConcatReport {
        x_end,
        checks: Vec::new(),
        escaped: path.escaped,
        touched: st.window_touched,
    };
    for snap in &out.snapshots {
        let tau = snap.time;
        let mid = &snap.states[0];
        let y_star = path.position_at(tau);
        let rep = replay_step_from(&field, y_star, tau, t, wlo, whi)?;
        let h_through_path = mid.height_at(y_star) + rep.height_at(x_end);
        let mut check = TauCheck {
            tau,
            y_star,
            h_total,
            h_through_path,
            equal: h_total == h_through_path,
            inequality_checks: 0,
            inequality_violations: 0,
            strict_inequalities: 0,
        };
        for _ in 0..n_y {
            let y = (x_end as i64 + draw.next_below((2 * span + 1) as u64) as i64 - span)
                .clamp(wlo as i64 + 1, whi as i64 - 1) as Site;
            let ry = replay_step_from(&field, y, tau, t, wlo, whi)?;
            let bound = mid.height_at(y) + ry.height_at(x_end);
            check.inequality_checks += 1;
            if h_total > bound {
                check.inequality_violations += 1;
            } else if h_total < bound {
                check.strict_inequalities += 1;
            }
        }
        report.checks.push(check);
    }
    Ok(report)
}

#[derive(Clone, Debug, Default)]
pub struct ComparisonReport {
    pub pairs: u32,
    pub forward_intersections: u32,
    pub forward_violations: u32,
    pub reverse_intersections: u32,
    pub reverse_violations: u32,
    pub escaped: u32,
}

/// Couple a step run (1) and a Bernoulli(1/2) run (2) on one field; for each
/// x < y, on the event that the path of run 1 from x meets the path of run 2
/// from y, the height increments over [x, y] must satisfy
/// h2(y)-h2(x) >= h1(y)-h1(x); symmetrically with the endpoints swapped.
pub fn check_comparison(
    seed: u64,
    replica: u64,
    t: f64,
    pairs: &[(Site, Site)],
    window_factor: f64,
) -> Result<ComparisonReport, GeodesicError> {
    let lo_pt = pairs.iter().map(|p| p.0).min().unwrap_or(0).min(0);
    let hi_pt = pairs.iter().map(|p| p.1).max().unwrap_or(0).max(0);
    let (wlo, whi) = margin_window(lo_pt, hi_pt, t, window_factor);
    let field = PoissonField::generate(seed, replica, wlo - 1, whi, t)?;
    let ic_stream = Stream::new(&[seed, replica, domain::INIT]);
    let mut states = vec![
        SimState::new(make_initial(InitialKind::Step, wlo, whi, None)?),
        SimState::new(make_initial(InitialKind::Bernoulli { rho: 0.5 }, wlo, whi, Some(&ic_stream))?),
    ];
    let opts = EvolveOpts { gen: GenMode::Full, log: true, snapshots: vec![] };
    let out = evolve(&mut states, &field, t, &opts)?;
    let mut report = ComparisonReport::default();
    let dh = |st: &SimState, x: Site, y: Site| st.height_at(y) - st.height_at(x);
    for &(x, y) in pairs {
        assert!(x < y, "pairs must be ordered");
        report.pairs += 1;
        let p1x = backward_path(&out.logs[0], x, t, wlo - 1, whi);
        let p1y = backward_path(&out.logs[0], y, t, wlo - 1, whi);
        let p2x = backward_path(&out.logs[1], x, t, wlo - 1, whi);
        let p2y = backward_path(&out.logs[1], y, t, wlo - 1, whi);
        if p1x.escaped || p1y.escaped || p2x.escaped || p2y.escaped {
            report.escaped += 1;
            continue;
        }
        if paths_intersect(&p1x, &p2y) {
            report.forward_intersections += 1;
            if dh(&states[1], x, y) < dh(&states[0], x, y) {
                report.forward_violations += 1;
            }
        }
        if paths_intersect(&p1y, &p2x) {
            report.reverse_intersections += 1;
            if dh(&states[1], x, y) > dh(&states[0], x, y) {
                report.reverse_violations += 1;
            }
        }
    }
    Ok(report)
}

/// Initial condition for path-localization runs.
#[derive(Clone, Copy, Debug)]
pub enum PathIc {
    Step,
    Bernoulli { rho: f64 },
}

/// Localization observables of one backwards path ending at
/// (round(alpha*t), t).
#[derive(Clone, Copy, Debug)]
pub struct PathStats {
    pub x_end: Site,
    pub origin: Site,
    pub mid: Site,
    pub sup_deviation: f64,
    pub escaped: bool,
    pub touched: bool,
}

pub fn path_endpoint_stats(
    seed: u64,
    replica: u64,
    t: f64,
    ic: PathIc,
    alpha: f64,
    window_factor: f64,
) -> Result<PathStats, GeodesicError> {
    let x_end = (alpha * t).round() as Site;
    let (wlo, whi) = margin_window(x_end.min(0), x_end.max(0), t, window_factor);
    let field = PoissonField::generate(seed, replica, wlo - 1, whi, t)?;
    let init = match ic {
        PathIc::Step => make_initial(InitialKind::Step, wlo, whi, None)?,
        PathIc::Bernoulli { rho } => {
            let s = Stream::new(&[seed, replica, domain::INIT]);
            make_initial(InitialKind::Bernoulli { rho }, wlo, whi, Some(&s))?
        }
    };
    let mut st = SimState::new(init);
    let opts = EvolveOpts { gen: GenMode::Full, log: true, snapshots: vec![] };
    let out = evolve_one(&mut st, &field, t, &opts)?;
    let path = backward_path(&out.logs[0], x_end, t, wlo - 1, whi);
    Ok(PathStats {
        x_end,
        origin: path.origin(),
        mid: path.position_at(0.5 * t),
        sup_deviation: path.sup_deviation(alpha),
        escaped: path.escaped,
        touched: st.window_touched,
    })
}

/// One slow-decorrelation sample: the height at (alpha*t, t) against a step
/// replay planted on the same characteristic at time tau.
#[derive(Clone, Copy, Debug)]
pub struct SlowdecSample {
    /// |h(at,t) - replay - (1+a^2)/2 * tau|: deterministic centering.
    pub deviation: f64,
    /// |h(at,t) - replay - h(a*tau, tau)|: the realized intermediate height
    /// instead of its law-of-large-numbers value.
    pub deviation_snapshot: f64,
    pub touched: bool,
}

pub fn slowdec_sample(
    seed: u64,
    replica: u64,
    t: f64,
    alpha: f64,
    tau: f64,
    window_factor: f64,
) -> Result<SlowdecSample, GeodesicError> {
    let x_t = (alpha * t).round() as Site;
    let x_tau = (alpha * tau).round() as Site;
    let lo = x_t.min(x_tau).min(0);
    let hi = x_t.max(x_tau).max(0);
    let (wlo, whi) = margin_window(lo, hi, t, window_factor);
    let field = PoissonField::generate(seed, replica, wlo - 1, whi, t)?;
    let mut st = SimState::new(make_initial(InitialKind::Step, wlo, whi, None)?);
    let opts = EvolveOpts { snapshots: vec![tau], ..EvolveOpts::default() };
    let out = evolve_one(&mut st, &field, t, &opts)?;
    let h_t = st.height_at(x_t);
    let h_tau = out.snapshots[0].states[0].height_at(x_tau);
    let rep = replay_step_from(&field, x_tau, tau, t, wlo, whi)?;
    let h_rep = rep.height_at(x_t);
    Ok(SlowdecSample {
        deviation: (h_t as f64 - h_rep as f64 - 0.5 * (1.0 + alpha * alpha) * tau).abs(),
        deviation_snapshot: ((h_t - h_rep - h_tau) as f64).abs(),
        touched: st.window_touched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::EventRecord;

    fn rec(time: f64, site: Site, class: EventClass) -> EventRecord {
        EventRecord { time, site, class }
    }

    #[test]
    fn growth_only_log_leaves_path_constant() {
        let log = TrajectoryLog {
            events: vec![
                rec(0.2, 3, EventClass::Growth),
                rec(0.5, 2, EventClass::Growth),
                rec(0.9, 3, EventClass::Growth),
            ],
        };
        let p = backward_path(&log, 3, 1.0, -10, 10);
        assert!(p.jumps.is_empty());
        assert_eq!(p.origin(), 3);
        assert!(!p.escaped);
    }

    #[test]
    fn hand_built_scan_moves_and_positions() {
        // reverse scan from t=1: the event at 0.7 is at site 4 (not current),
        // the one at 0.5 moves the path right, the growth at 0.3 leaves it
        // alone, the one at 0.2 (now at site 4) moves it left again, and the
        // local max at 0.1 kicks it right once more
        let log = TrajectoryLog {
            events: vec![
                rec(0.1, 3, EventClass::LocalMax),
                rec(0.2, 4, EventClass::SuppressedAsc),
                rec(0.3, 4, EventClass::Growth),
                rec(0.5, 3, EventClass::SuppressedDesc),
                rec(0.7, 4, EventClass::SuppressedAsc),
            ],
        };
        let p = backward_path(&log, 3, 1.0, -10, 10);
        assert_eq!(p.jumps, vec![(0.5, 4), (0.2, 3), (0.1, 4)]);
        assert_eq!(p.position_at(0.8), 3);
        assert_eq!(p.position_at(0.5), 3);
        assert_eq!(p.position_at(0.45), 4);
        assert_eq!(p.position_at(0.15), 3);
        assert_eq!(p.position_at(0.05), 4);
        assert_eq!(p.origin(), 4);
        assert_eq!(p.sup_deviation(0.0), 4.0);
    }

    #[test]
    fn events_after_end_time_are_ignored() {
        let log = TrajectoryLog {
            events: vec![
                rec(0.4, 5, EventClass::SuppressedDesc),
                rec(0.9, 5, EventClass::SuppressedDesc),
            ],
        };
        let p = backward_path(&log, 5, 0.6, -10, 10);
        assert_eq!(p.jumps, vec![(0.4, 6)]);
    }

    #[test]
    fn concatenation_equality_is_exact() {
        for r in 0..30 {
            let rep = check_concatenation(41, r, 4.0, &[1.0, 2.0, 3.0], 6, 1, 1.0).unwrap();
            assert!(!rep.escaped && !rep.touched);
            for c in &rep.checks {
                assert!(c.equal, "replica {r} tau {}: {} vs {}", c.tau, c.h_total, c.h_through_path);
                assert_eq!(c.inequality_violations, 0, "replica {r} tau {}", c.tau);
            }
        }
    }

    #[test]
    fn concatenation_at_tau_equals_t_is_trivial() {
        let rep = check_concatenation(42, 0, 3.0, &[3.0], 4, 2, 1.0).unwrap();
        assert_eq!(rep.checks[0].y_star, 2);
        assert!(rep.checks[0].equal);
    }

    #[test]
    fn strict_inequality_shows_up_somewhere() {
        // the minimum over y is attained on the path; other y values should
        // often be strictly worse
        let mut strict = 0;
        for r in 0..20 {
            let rep = check_concatenation(43, r, 4.0, &[2.0], 20, 0, 1.0).unwrap();
            strict += rep.checks[0].strict_inequalities;
        }
        assert!(strict > 0);
    }

    #[test]
    fn comparison_no_violations() {
        let pairs: Vec<(Site, Site)> = vec![(-3, -1), (-2, 2), (0, 1), (1, 3)];
        let mut met = 0;
        for r in 0..60 {
            let rep = check_comparison(44, r, 3.0, &pairs, 1.0).unwrap();
            assert_eq!(rep.forward_violations, 0, "replica {r}");
            assert_eq!(rep.reverse_violations, 0, "replica {r}");
            assert_eq!(rep.escaped, 0);
            met += rep.forward_intersections + rep.reverse_intersections;
        }
        assert!(met > 0, "intersections should occur at these distances");
    }

    #[test]
    fn same_log_paths_stay_ordered_and_merge() {
        for r in 0..40 {
            let (wlo, whi) = margin_window(-4, 4, 3.0, 1.0);
            let field = PoissonField::generate(45, r, wlo - 1, whi, 3.0).unwrap();
            let mut st = SimState::new(make_initial(InitialKind::Step, wlo, whi, None).unwrap());
            let opts = EvolveOpts { gen: GenMode::Full, log: true, snapshots: vec![] };
            let out = evolve_one(&mut st, &field, 3.0, &opts).unwrap();
            let paths: Vec<BackwardPath> =
                (-3..=3).map(|x| backward_path(&out.logs[0], x, 3.0, wlo - 1, whi)).collect();
            for w in paths.windows(2) {
                assert!(ordered_everywhere(&w[0], &w[1]), "replica {r}");
                // merger: once the two paths share a site, they coincide at
                // every earlier eval time
                let ts = {
                    let mut ts = pair_eval_times(&w[0], &w[1]);
                    ts.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    ts
                };
                let mut merged = false;
                for &s in &ts {
                    let (pa, pb) = (w[0].position_at(s), w[1].position_at(s));
                    if merged {
                        assert_eq!(pa, pb, "replica {r}: diverged after merging at {s}");
                    } else if pa == pb {
                        merged = true;
                    }
                }
            }
        }
    }

    #[test]
    fn canonicalization_reaches_origin_and_preserves_equality() {
        let t = 3.0;
        let mut nontrivial = 0;
        for r in 0..50 {
            let (wlo, whi) = margin_window(-3, 3, t, 1.0);
            let field = PoissonField::generate(46, r, wlo - 1, whi, t).unwrap();
            let mut st = SimState::new(make_initial(InitialKind::Step, wlo, whi, None).unwrap());
            let opts = EvolveOpts { gen: GenMode::Full, log: true, snapshots: vec![] };
            let out = evolve_one(&mut st, &field, t, &opts).unwrap();
            let x_end = 2;
            let path = backward_path(&out.logs[0], x_end, t, wlo - 1, whi);
            let (canon, eps) = canonicalize_to_origin(&path, &out.logs[0]).unwrap();
            assert_eq!(canon.origin(), 0, "replica {r}");
            if path.origin() != 0 {
                nontrivial += 1;
            }
            // steps are +-1 and times strictly decreasing
            let mut prev_t = canon.end_time;
            let mut prev_p = canon.end_site;
            for &(s, p) in &canon.jumps {
                assert!(s < prev_t, "replica {r}");
                assert_eq!((p - prev_p).abs(), 1, "replica {r}");
                prev_t = s;
                prev_p = p;
            }
            // equality at tau = 0 through the origin
            let rep0 = replay_step_from(&field, 0, 0.0, t, wlo, whi).unwrap();
            assert_eq!(st.height_at(x_end), rep0.height_at(x_end), "replica {r}");
            // equality at tau = eps/2 through the canonical path, with the
            // intermediate height read from a fresh pass
            let tau = 0.5 * eps;
            let y = canon.position_at(tau);
            let mut st2 = SimState::new(make_initial(InitialKind::Step, wlo, whi, None).unwrap());
            let opts2 = EvolveOpts { snapshots: vec![tau], ..EvolveOpts::default() };
            let out2 = evolve_one(&mut st2, &field, t, &opts2).unwrap();
            let h_mid = out2.snapshots[0].states[0].height_at(y);
            let rep = replay_step_from(&field, y, tau, t, wlo, whi).unwrap();
            assert_eq!(st.height_at(x_end), h_mid + rep.height_at(x_end), "replica {r}");
        }
        assert!(nontrivial > 0, "want at least one path that needed redirecting");
    }

    #[test]
    fn path_stats_smoke_and_scaling_shape() {
        let mut sups = Vec::new();
        for r in 0..60 {
            let s = path_endpoint_stats(47, r, 40.0, PathIc::Step, 0.0, 1.0).unwrap();
            assert!(!s.escaped && !s.touched);
            assert_eq!(s.x_end, 0);
            assert!(s.sup_deviation >= s.mid.unsigned_abs() as f64);
            assert!(s.sup_deviation >= s.origin.unsigned_abs() as f64);
            sups.push(s.sup_deviation);
        }
        // t^{2/3} ~ 11.7 at t=40; far smaller than ballistic scale
        let mean = sups.iter().sum::<f64>() / sups.len() as f64;
        assert!(mean > 0.5 && mean < 30.0, "mean sup deviation {mean}");
    }

    #[test]
    fn stationary_path_stats_smoke() {
        for r in 0..20 {
            let s =
                path_endpoint_stats(48, r, 30.0, PathIc::Bernoulli { rho: 0.5 }, 0.0, 1.0).unwrap();
            assert!(!s.escaped && !s.touched);
        }
    }

    #[test]
    fn slowdec_snapshot_centering_vanishes_at_tau_t() {
        for r in 0..10 {
            let s = slowdec_sample(49, r, 20.0, 0.0, 20.0, 1.0).unwrap();
            assert_eq!(s.deviation_snapshot, 0.0, "replica {r}");
        }
    }

    #[test]
    fn slowdec_deviation_is_subscale() {
        // at tau = t^{0.8} the deviation should be well below the t^{1/3}
        // fluctuation scale most of the time
        let t = 100.0f64;
        let tau = t.powf(0.8);
        let mut below = 0;
        for r in 0..40 {
            let s = slowdec_sample(50, r, t, 0.0, tau, 1.0).unwrap();
            if s.deviation < 2.0 * t.cbrt() {
                below += 1;
            }
        }
        assert!(below >= 32, "only {below}/40 below twice the fluctuation scale");
    }
}
