use std::time::Instant;
use tasep_core::asymptotics::{
    h_rescale, increment_rescale, reference_combo, sample_xi, shock1_linear, step_count_batch,
    BatchSpec,
};
use tasep_core::identities::{sample_lhs_positions, ShockKind};
use tasep_core::stats;

fn main() {
    // Forecast the t=4000 one-point batch: H at alpha=0 and the delta=0.4
    // increment from one fused run (bond-keyed clocks make the union window
    // equivalent to the separate ones).
    let t = 4000.0f64;
    let spec = BatchSpec::new(1, 0..2000, t);
    let x2 = t.powf(0.4).floor() as i64;
    let dg = x2 as f64 / t.powf(0.4);
    let start = Instant::now();
    let (rows, touched) =
        step_count_batch(&spec, (0, x2 as i32), |table| (table.n(1), table.n(x2 as i32) - table.n(0)))
            .unwrap();
    let hs: Vec<f64> = rows.iter().map(|&(n1, _)| h_rescale(2.0 * n1 as f64, 0.0, t)).collect();
    let incs: Vec<f64> = rows
        .iter()
        .map(|&(_, dn)| increment_rescale(dn as f64, 0.0, 0.0, dg, 0.4, t).unwrap())
        .collect();
    let mh = stats::moments(&hs);
    let mi = stats::moments(&incs);
    eprintln!(
        "H t=4000 n=2000 mean={:.4} var={:.4} (targets -1.7711/0.8132) touched={touched} ({:.0}s)",
        mh.mean,
        mh.var,
        start.elapsed().as_secs_f64()
    );
    eprintln!(
        "incr t=4000 n=2000 var={:.4} skew={:.3} kurt={:.3}",
        mi.var, mi.skewness, mi.excess_kurtosis
    );

    // Forecast the tagged sub-scale moments at the acceptance parameters.
    let m = t.powf(0.4).floor() as u32;
    let start = Instant::now();
    let lhs =
        sample_lhs_positions(ShockKind::One { m_plus: m, m_minus: m }, t, 1, 0..2000, 1.0).unwrap();
    let fs = t.powf(0.8);
    let vals: Vec<f64> = lhs.positions.iter().map(|&p| p as f64 / fs).collect();
    let mo = stats::moments(&vals);
    eprintln!(
        "tagged sub t=4000 m={m} n={} var={:.4} skew={:.3} kurt={:.3} mean={:.4} ({:.0}s)",
        vals.len(),
        mo.var,
        mo.skewness,
        mo.excess_kurtosis,
        mo.mean,
        start.elapsed().as_secs_f64()
    );

    // Tagged linear rung vs the self-consistent reference at t=2000.
    let t = 2000.0f64;
    let (a, b) = (0.5f64, 0.5f64);
    let consts = shock1_linear(a, b).unwrap();
    let n = 1000u64;
    let start = Instant::now();
    let lhs = sample_lhs_positions(
        ShockKind::One { m_plus: (a * t) as u32, m_minus: (b * t) as u32 },
        t,
        9,
        0..n,
        1.0,
    )
    .unwrap();
    let f: Vec<f64> =
        lhs.positions.iter().map(|&p| (p as f64 - consts.v * t) / t.powf(1.0 / 3.0)).collect();
    let mk = |lo: u64, hi: u64| BatchSpec { seed: 9, replicas: lo..hi, t, window_factor: 1.0 };
    let (xi1, _) = sample_xi(&mk(n, 2 * n), consts.v + b).unwrap();
    let (xi2, _) = sample_xi(&mk(2 * n, 3 * n), consts.v - a).unwrap();
    let w = 2.0 / (a + b);
    let reference = reference_combo(&xi1, &xi2, w * consts.c1, -w * consts.c2);
    let d = stats::ks_two_sample(&f, &reference);
    let (_, pv) = stats::ks_permutation_pvalue(&f, &reference, 300, 77);
    let mf = stats::moments(&f);
    let mr = stats::moments(&reference);
    eprintln!(
        "ladder rung t=2000 n={n} ks={d:.4} perm_p={pv:.3} f(mean={:.3} var={:.3}) ref(mean={:.3} var={:.3}) ({:.0}s)",
        mf.mean,
        mf.var,
        mr.mean,
        mr.var,
        start.elapsed().as_secs_f64()
    );
}
