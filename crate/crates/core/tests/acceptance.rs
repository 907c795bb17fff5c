//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the process
//! exits with status 1 if any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rotcon::constellation::{
    make_qam_product, normalize_unit_bit_energy, rotate, Constellation, NuqamParams,
};
use rotcon::channel::{ber_monte_carlo, BerOptions};
use rotcon::liegroup::{
    expm_skew, logm_rotation, rotation_at, skew_family, DescentOptions, RotationMatrix, SkewMatrix,
};
use rotcon::metrics::{
    cutoff_rate, diversity_order, local_cutoff_rate, min_product_distance, r0_expected_mc,
    ChannelSpec, Radius, COORDINATE_TOL,
};
use rotcon::optimize::{
    cutoff_rate_gradient, default_initial_rotation, g_of_t, grid_search_t, low_snr_optimal_t,
    optimize_nuqam, optimize_rotation_full, search, standard_qam_energy, FamilyObjective,
    NuqamOptions,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn qam(order: usize, half_dims: usize) -> Constellation {
    normalize_unit_bit_energy(&make_qam_product(order, half_dims).unwrap()).unwrap()
}

fn db(v: f64) -> ChannelSpec {
    ChannelSpec::from_ebn0_db(v).unwrap()
}

fn family_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_square = 0.0f64;
    let mut rejected = 0;
    for k in 1..=5u32 {
        let f = skew_family(k).unwrap();
        let a = f.generator().as_matrix();
        let n = f.dim();
        let dev = (a * a + DMatrix::<f64>::identity(n, n)).amax();
        worst_square = worst_square.max(dev);
        for _ in 0..1000 {
            let t = rng.random_range(0.0..2.0 * PI);
            if RotationMatrix::new(rotation_at(&f, t).into_matrix()).is_err() {
                rejected += 1;
            }
        }
    }
    outcome(
        worst_square <= 1e-12 && rejected == 0,
        format!("max |A^2 + I| = {worst_square:.1e}, {rejected} of 5000 Q(t) rejected"),
    )
}

fn low_snr_8d() -> Outcome {
    let x = qam(4, 4);
    let target = low_snr_optimal_t(8).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for v in [4.0, 5.0, 6.0, 7.0] {
        let r = grid_search_t(&x, &db(v), 1e-3).unwrap();
        let ok = (r.t_opt - target).abs() <= 1e-3;
        pass &= ok;
        parts.push(format!("{v} dB: {:.4} deg", r.t_opt_deg()));
    }
    outcome(pass, format!("target {:.4} deg; {}", target.to_degrees(), parts.join(", ")))
}

fn low_snr_4d() -> Outcome {
    let x = qam(64, 2);
    let target = low_snr_optimal_t(4).unwrap();
    let mut hits = Vec::new();
    for v in 0..=14 {
        let r = grid_search_t(&x, &db(f64::from(v)), 1e-3).unwrap();
        hits.push((v, (r.t_opt - target).abs() <= 1e-3, r.t_opt_deg()));
    }
    // Longest run of consecutive hits.
    let (mut best, mut run, mut best_end) = (0, 0, 0);
    for (v, hit, _) in &hits {
        run = if *hit { run + 1 } else { 0 };
        if run > best {
            best = run;
            best_end = *v;
        }
    }
    let angles: Vec<String> = hits.iter().map(|(v, _, a)| format!("{v}:{a:.2}")).collect();
    outcome(
        best >= 2,
        format!(
            "60 deg plateau {}..{} dB; t_opt by dB {}",
            best_end + 1 - best,
            best_end,
            angles.join(" ")
        ),
    )
}

const TARGET_LOG: [[f64; 4]; 4] = [
    [0.0, 0.73, 0.73, 0.73],
    [-0.73, 0.0, 0.72, -0.72],
    [-0.73, -0.72, 0.0, 0.72],
    [-0.73, 0.72, -0.72, 0.0],
];

fn descent_reproduces_log() -> Outcome {
    let x = qam(4, 2);
    let ch = db(10.0);
    let q0 = default_initial_rotation(4).unwrap();
    let trace = optimize_rotation_full(&x, &ch, &q0, &DescentOptions::default()).unwrap();
    let log = logm_rotation(trace.final_rotation()).unwrap();
    let mut dev = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            dev = dev.max((log.as_matrix()[(i, j)].abs() - TARGET_LOG[i][j].abs()).abs());
        }
    }
    let rate = -trace.final_objective();
    let family = search(&FamilyObjective::new(&x, &ch).unwrap(), 1e-5, false).unwrap();
    let gap = family.objective - rate;
    let upper: Vec<String> = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        .iter()
        .map(|&(i, j)| format!("{:.3}", log.as_matrix()[(i, j)]))
        .collect();
    outcome(
        dev <= 0.05 && gap.abs() <= 1e-6,
        format!(
            "{} iterations ({:?}); log entries [{}], max |.| deviation {dev:.3}; R = {rate:.7}, family max {:.7} at {:.3} deg",
            trace.last().iteration,
            trace.reason,
            upper.join(", "),
            family.objective,
            family.t_opt_deg()
        ),
    )
}

fn nuqam_table() -> Outcome {
    let rows: [(u32, f64, &[f64], f64); 2] = [
        (4, 8.0, &[0.9732, 3.0088], 2e-2),
        (6, 12.0, &[0.9179, 2.7927, 4.8112, 7.2257], 5e-2),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (bits, ebn0, table, tol) in rows {
        let k = table.len();
        let init = NuqamParams::uniform(k).unwrap();
        let r = optimize_nuqam(bits, &db(ebn0), &init, &NuqamOptions::default()).unwrap();
        let a = r.alpha.alpha();
        let ratio_err = a
            .iter()
            .zip(table)
            .map(|(x, t)| (x / a[0] - t / table[0]).abs())
            .fold(0.0, f64::max);
        let absolute = r.alpha.with_energy(standard_qam_energy(bits)).unwrap();
        let abs_err = absolute
            .alpha()
            .iter()
            .zip(table)
            .map(|(x, t)| (x - t).abs())
            .fold(0.0, f64::max);
        pass &= ratio_err <= tol;
        let shown: Vec<String> = absolute.alpha().iter().map(|v| format!("{v:.4}")).collect();
        parts.push(format!(
            "{}-NUQAM @ {ebn0} dB: ({}) at QAM energy, ratio err {ratio_err:.4}, absolute err {abs_err:.4} (tol {tol}), converged {} in {} it",
            1 << bits,
            shown.join(", "),
            r.converged,
            r.iterations
        ));
    }
    outcome(pass, parts.join("; "))
}

fn diversity_facts() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let f4 = skew_family(2).unwrap();
    let x4 = qam(4, 2);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let local_ok = (0..20).all(|_| {
        let t = rng.random_range(1e-3..FRAC_PI_2 - 1e-3);
        let y = rotate(&x4, &rotation_at(&f4, t)).unwrap();
        diversity_order(&y, Radius::Finite(2.0), COORDINATE_TOL).order == 4
    });
    pass &= local_ok;
    parts.push(format!("L(.,2)=4 at 20 t: {local_ok}"));

    for (order, name) in [(4, "4D 4-QAM"), (16, "4D 16-QAM")] {
        let x = qam(order, 2);
        let orders: Vec<usize> = (8..=16)
            .map(|v| {
                let t = grid_search_t(&x, &db(f64::from(v)), 1e-3).unwrap().t_opt;
                let y = rotate(&x, &rotation_at(&f4, t)).unwrap();
                diversity_order(&y, Radius::Infinite, COORDINATE_TOL).order
            })
            .collect();
        pass &= orders.iter().all(|&l| l == 3);
        parts.push(format!("{name} L(.,inf) over 8..16 dB {orders:?}"));
    }

    let x8 = qam(4, 4);
    let f8 = skew_family(3).unwrap();
    let orders: Vec<usize> = (8..=16)
        .map(|v| {
            let t = grid_search_t(&x8, &db(f64::from(v)), 1e-3).unwrap().t_opt;
            let y = rotate(&x8, &rotation_at(&f8, t)).unwrap();
            diversity_order(&y, Radius::Infinite, COORDINATE_TOL).order
        })
        .collect();
    pass &= orders.iter().all(|&l| l == 5);
    parts.push(format!("8D 4-QAM L(.,inf) over 8..16 dB {orders:?}"));

    let d = [0.0, 0.0, 2.0, -2.0];
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let q = rotation_at(&f4, rng.random_range(0.0..2.0 * PI));
        let mut z = [0.0; 4];
        q.apply(&d, &mut z);
        worst = worst.max(z[0].abs());
    }
    pass &= worst <= 1e-12;
    parts.push(format!("counterexample |first coordinate| <= {worst:.1e}"));
    outcome(pass, parts.join("; "))
}

// Naive ordered-pair cutoff rate, independent of the library kernels.
fn oracle_rate(points: &[Vec<f64>], r: f64, n0: f64) -> f64 {
    let m = points.len() as f64;
    let mut s = 0.0;
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let dist = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            if dist > r * (1.0 + 1e-12) {
                continue;
            }
            s += a
                .iter()
                .zip(b)
                .map(|(u, v)| 1.0 / (1.0 + (u - v).powi(2) / (8.0 * n0)))
                .product::<f64>();
        }
    }
    (m.log2() - (1.0 + s / m).log2()).clamp(0.0, m.log2())
}

fn oracle_div(points: &[Vec<f64>], r: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            let dist = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            if i == j || dist > r * (1.0 + 1e-12) {
                continue;
            }
            let diffs: Vec<f64> = a
                .iter()
                .zip(b)
                .map(|(u, v)| (u - v).abs())
                .filter(|d| *d > COORDINATE_TOL)
                .collect();
            let cand = (diffs.len(), diffs.iter().product::<f64>());
            best = Some(best.map_or(cand, |(l, p)| (l.min(cand.0), p.min(cand.1))));
        }
    }
    best
}

fn random_constellation(rng: &mut ChaCha8Rng) -> Constellation {
    loop {
        let n = rng.random_range(1..=4usize);
        let m = 1usize << rng.random_range(1..=6u32);
        let points: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        if let Ok(x) = Constellation::new(points, None) {
            return x;
        }
    }
}

fn bounds_and_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let radii = [0.5, 1.0, 2.0, 4.0, 8.0];
    let mut violations = Vec::new();
    for case in 0..200 {
        let x = random_constellation(&mut rng);
        let n0 = 10f64.powf(rng.random_range(-2.0..1.0));
        let ch = ChannelSpec::new(n0).unwrap();
        let q = f64::from(x.bits());
        let points: Vec<Vec<f64>> = x.points().map(<[f64]>::to_vec).collect();
        let r = cutoff_rate(&x, &ch);
        if !(0.0..=q).contains(&r) {
            violations.push(format!("case {case}: R = {r} outside [0, {q}]"));
        }
        let mut last = f64::INFINITY;
        for &radius in &radii {
            let v = local_cutoff_rate(&x, Radius::Finite(radius), &ch);
            if v > last + 1e-15 {
                violations.push(format!("case {case}: R(X, r) increases at r = {radius}"));
            }
            last = v;
            if (v - oracle_rate(&points, radius, n0)).abs() > 1e-12 {
                violations.push(format!("case {case}: local rate differs from oracle at r = {radius}"));
            }
            let div = diversity_order(&x, Radius::Finite(radius), COORDINATE_TOL);
            let dp = min_product_distance(&x, Radius::Finite(radius), COORDINATE_TOL);
            match oracle_div(&points, radius) {
                None if !(div.empty_ball && dp.empty_ball) => {
                    violations.push(format!("case {case}: empty ball not flagged at r = {radius}"))
                }
                Some((l, p)) if div.order != l || dp.value != p => {
                    violations.push(format!("case {case}: diversity differs from oracle at r = {radius}"))
                }
                _ => {}
            }
        }
        if local_cutoff_rate(&x, Radius::Infinite, &ch).to_bits() != r.to_bits() {
            violations.push(format!("case {case}: R(X, inf) != R(X)"));
        }
        if (r - oracle_rate(&points, f64::INFINITY, n0)).abs() > 1e-12 {
            violations.push(format!("case {case}: R differs from oracle"));
        }
    }
    let mut jensen = Vec::new();
    for (order, half, v) in [(4, 1, 0.0), (16, 1, 6.0), (4, 2, 10.0), (16, 2, 12.0)] {
        let x = qam(order, half);
        let ch = db(v);
        let est = r0_expected_mc(&x, &ch, 10_000, 11).unwrap();
        let r = cutoff_rate(&x, &ch);
        if est.mean < r - 3.0 * est.stderr {
            violations.push(format!("Jensen violated: {} < {r}", est.mean));
        }
        jensen.push(format!("{:.4}>={r:.4}", est.mean));
    }
    outcome(
        violations.is_empty(),
        if violations.is_empty() {
            format!("200 random constellations, MC R0 vs R: {}", jensen.join(" "))
        } else {
            violations.join("; ")
        },
    )
}

fn ber_sanity() -> Outcome {
    let x = qam(16, 2);
    let f = skew_family(2).unwrap();
    let points = [10.0, 14.0, 18.0];
    let opts = BerOptions {
        min_bits: 1_000_000,
        seed: 2024,
    };
    let chans: Vec<ChannelSpec> = points.iter().map(|&v| db(v)).collect();
    let plain = ber_monte_carlo(&x, &chans, &opts).unwrap();
    let mut rotated = Vec::new();
    for ch in &chans {
        let t = grid_search_t(&x, ch, 1e-3).unwrap().t_opt;
        let y = rotate(&x, &rotation_at(&f, t)).unwrap();
        rotated.push(ber_monte_carlo(&y, std::slice::from_ref(ch), &opts).unwrap().rows[0].clone());
    }
    let monotone = |rows: &[rotcon::channel::BerRow]| rows.windows(2).all(|w| w[1].ber < w[0].ber);
    let below = rotated[2].ber_hi <= plain.rows[2].ber_lo;
    let pass = monotone(&plain.rows) && monotone(&rotated) && below;
    let fmt = |rows: &[rotcon::channel::BerRow]| {
        rows.iter()
            .map(|r| format!("{:.2e}", r.ber))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        pass,
        format!(
            "unrotated BER {}; rotated BER {}; 18 dB intervals rotated [{:.2e}, {:.2e}] vs unrotated [{:.2e}, {:.2e}]",
            fmt(&plain.rows),
            fmt(&rotated),
            rotated[2].ber_lo,
            rotated[2].ber_hi,
            plain.rows[2].ber_lo,
            plain.rows[2].ber_hi
        ),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = if rng.random_bool(0.5) { 2 } else { 4 };
        let x = loop {
            let m = 1usize << rng.random_range(1..=6u32);
            let pts: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            if let Ok(x) = Constellation::new(pts, None) {
                break x;
            }
        };
        let n0 = 10f64.powf(rng.random_range(-1.5..1.0));
        let ch = ChannelSpec::new(n0).unwrap();
        let s = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        let q = expm_skew(&SkewMatrix::antisymmetrize(&s)).unwrap();
        let g = cutoff_rate_gradient(&x, &ch, &q).unwrap();
        let points: Vec<Vec<f64>> = x.points().map(<[f64]>::to_vec).collect();
        let rate = |m: &DMatrix<f64>| {
            let moved: Vec<Vec<f64>> = points
                .iter()
                .map(|p| (0..n).map(|i| (0..n).map(|j| m[(i, j)] * p[j]).sum()).collect())
                .collect();
            oracle_rate(&moved, f64::INFINITY, n0)
        };
        let h = 1e-6;
        let fd = DMatrix::from_fn(n, n, |i, j| {
            let mut plus = q.as_matrix().clone();
            let mut minus = q.as_matrix().clone();
            plus[(i, j)] += h;
            minus[(i, j)] -= h;
            (rate(&plus) - rate(&minus)) / (2.0 * h)
        });
        let scale = fd.amax().max(g.amax());
        if scale > 1e-9 {
            worst = worst.max((&g - &fd).amax() / scale);
        }
    }
    outcome(worst <= 1e-5, format!("max relative error {worst:.2e} over 100 instances"))
}

fn g_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    for n in [4, 8, 16] {
        for n0 in [0.1, 1.0, 10.0] {
            let ch = ChannelSpec::new(n0).unwrap();
            let steps = (FRAC_PI_2 / 1e-5).floor() as usize;
            let mut best = (f64::NEG_INFINITY, 0.0);
            for j in 0..=steps {
                let t = j as f64 * 1e-5;
                let v = g_of_t(n, &ch, t).unwrap();
                if v > best.0 {
                    best = (v, t);
                }
            }
            worst = worst.max((best.1 - low_snr_optimal_t(n).unwrap()).abs());
        }
    }
    outcome(worst <= 1e-4, format!("max |argmax g - arccos(1/sqrt n)| = {worst:.1e} rad"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("family structure", Duration::from_secs(1), family_structure),
        ("low-SNR optimum, 8D 4-QAM", Duration::from_secs(60), low_snr_8d),
        ("low-SNR plateau, 4D 64-QAM", Duration::from_secs(600), low_snr_4d),
        ("geodesic descent log pattern", Duration::from_secs(60), descent_reproduces_log),
        ("NUQAM table rows", Duration::from_secs(300), nuqam_table),
        ("diversity facts", Duration::from_secs(60), diversity_facts),
        ("bounds and consistency", Duration::from_secs(120), bounds_and_consistency),
        ("desk-scale BER", Duration::from_secs(600), ber_sanity),
        ("gradient correctness", Duration::from_secs(60), gradient_check),
        ("closed-form g(t)", Duration::from_secs(5), g_closed_form),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.2}s of {}s{}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
