//! End-to-end acceptance checks. Each test prints one PASS/FAIL line with the
//! measured quantities and its wall time, then asserts.
//!
//! Tests hold a shared lock so wall times are not inflated by each other.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::{
    gradient_error, mimo_problem, random_positions, rate, two_path_siso, wsr_problem, LAMBDA,
};
use ma_toolkit::bench::{run_wsr_sweep, wsr_ordering, ExperimentKind, Provenance, ScenarioConfig};
use ma_toolkit::chanest::{
    build_dictionary, joint_estimate, on_grid_pathset, planted_estimate, simulate_pilots,
    strcs_estimate, strcs_positions, strcs_split, AngularDictionary, OmpResult, SparseEstimate,
    NOISELESS_EPS0,
};
use ma_toolkit::field_channel::{channel_response, PathSet};
use ma_toolkit::geometry::{MovingRegion, PathAngles, Position3D};
use ma_toolkit::placement::{
    discrete_placement, fpa_layout, grad_ascent_placement, pso_placement, zo_placement,
    DiscreteConfig, DiscreteMode, GradientConfig, MeasurementOracle, PsoConfig, ZoConfig,
};
use ma_toolkit::sensing::{
    crb_optimal_placement, single_target_crb, virtual_array_synthesis, ArrayGeometry,
    CrbPlacementMethod,
};
use ma_toolkit::spatial_corr::{eigen_truncate, jakes_correlation, sample_port_channels, PortGrid};
use ma_toolkit::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn report(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, limit_s: f64) -> bool {
    let in_time = elapsed.as_secs_f64() < limit_s;
    let ok = pass && in_time;
    let limit = if limit_s.is_finite() {
        format!("limit {limit_s} s")
    } else {
        "no limit".to_string()
    };
    println!(
        "[{}] criterion {id} ({name}): {detail}; runtime {:.2} s ({limit})",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

// ---------------------------------------------------------------- criterion 1

/// `Σ_i Σ_j conj(e^{jκ k_i·r}) σ_ij e^{jκ k_j·t}` written out with raw trigonometry.
fn double_sum(
    tx: &[(f64, f64)],
    rx: &[(f64, f64)],
    prm: &DMatrix<Complex64>,
    lambda: f64,
    t: [f64; 3],
    r: [f64; 3],
) -> Complex64 {
    let kappa = 2.0 * PI / lambda;
    let phase = |(el, az): (f64, f64), p: [f64; 3]| {
        kappa * (el.cos() * az.cos() * p[0] + el.cos() * az.sin() * p[1] + el.sin() * p[2])
    };
    let mut h = Complex64::new(0.0, 0.0);
    for (i, &a) in rx.iter().enumerate() {
        for (j, &b) in tx.iter().enumerate() {
            let pr = phase(a, r);
            let pt = phase(b, t);
            h += Complex64::new(pr.cos(), -pr.sin())
                * prm[(i, j)]
                * Complex64::new(pt.cos(), pt.sin());
        }
    }
    h
}

#[test]
fn criterion_1_field_response() {
    let _g = lock();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lambda = 0.01;
    let mut worst_rel = 0.0f64;
    for _ in 0..1000 {
        let lt = rng.random_range(1..=5);
        let lr = rng.random_range(1..=5);
        let tx: Vec<PathAngles> = (0..lt).map(|_| PathAngles::random(&mut rng)).collect();
        let rx: Vec<PathAngles> = (0..lr).map(|_| PathAngles::random(&mut rng)).collect();
        let prm = DMatrix::from_fn(lr, lt, |_, _| cgauss(&mut rng));
        let ps = PathSet::new(tx.clone(), rx.clone(), prm.clone(), lambda).unwrap();
        let mut pos =
            || std::array::from_fn::<f64, 3, _>(|_| rng.random_range(-5.0 * lambda..5.0 * lambda));
        let (t, r) = (pos(), pos());
        let want = double_sum(
            &tx.iter()
                .map(|a| (a.elevation, a.azimuth))
                .collect::<Vec<_>>(),
            &rx.iter()
                .map(|a| (a.elevation, a.azimuth))
                .collect::<Vec<_>>(),
            &prm,
            lambda,
            t,
            r,
        );
        let got = channel_response(&ps, Position3D::from_array(t), Position3D::from_array(r));
        worst_rel = worst_rel.max((got - want).norm() / want.norm());
    }
    let mut worst_flat = 0.0f64;
    for _ in 0..1000 {
        let gain = cgauss(&mut rng);
        let ps = PathSet::line_of_sight(
            PathAngles::random(&mut rng),
            PathAngles::random(&mut rng),
            gain,
            lambda,
        )
        .unwrap();
        let mut pos = || {
            Position3D::new(
                rng.random_range(-10.0 * lambda..10.0 * lambda),
                rng.random_range(-10.0 * lambda..10.0 * lambda),
                rng.random_range(-10.0 * lambda..10.0 * lambda),
            )
        };
        let h = channel_response(&ps, pos(), pos());
        worst_flat = worst_flat.max((h.norm() - gain.norm()).abs() / gain.norm());
    }
    let pass = worst_rel <= 1e-12 && worst_flat <= 1e-12;
    let ok = report(
        1,
        "field response",
        pass,
        &format!("max rel err vs double sum {worst_rel:.2e} (tol 1e-12), single-path |h| spread {worst_flat:.2e} (tol 1e-12)"),
        start.elapsed(),
        5.0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 2

/// `J₀(x) = (1/π)∫₀^π cos(x sin θ) dθ` by the trapezoid rule on a periodic
/// integrand, which converges geometrically once the node count exceeds `x`.
fn j0_quadrature(x: f64) -> f64 {
    let n = 512;
    let h = PI / n as f64;
    let mut s = 0.5 * (1.0 + (x * PI.sin()).cos());
    for k in 1..n {
        s += (x * (k as f64 * h).sin()).cos();
    }
    s * h / PI
}

/// Power series `Σ (−x²/4)^k / (k!)²`, used only where cancellation is mild.
fn j0_series(x: f64) -> f64 {
    let q = -x * x / 4.0;
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..80 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

#[test]
fn criterion_2_spatial_correlation() {
    let _g = lock();
    let start = Instant::now();
    // The two oracles agree with each other where the series is reliable.
    let mut oracle_gap = 0.0f64;
    for i in 0..=400 {
        let x = i as f64 * 0.02;
        oracle_gap = oracle_gap.max((j0_series(x) - j0_quadrature(x)).abs());
    }
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cases: Vec<(usize, f64, f64)> = vec![
        (2, 4.0, 1.0),
        (64, 4.0, 1.0),
        (64, 0.1, 2.5),
        (33, 1.0, 0.3),
    ];
    for _ in 0..200 {
        cases.push((
            rng.random_range(2..=64),
            rng.random_range(0.01..=4.0),
            rng.random_range(0.1..3.0),
        ));
    }
    for &(n, w, s2) in &cases {
        let lam = jakes_correlation(&PortGrid::new(n, w, s2).unwrap());
        let step = 2.0 * PI * w / (n - 1) as f64;
        for a in 0..n {
            for b in 0..n {
                let lag = a.abs_diff(b) as f64;
                let want = s2 * j0_quadrature(step * lag);
                worst = worst.max((lam.matrix()[(a, b)] - want).abs() / s2);
            }
        }
    }

    let (n, w, s2) = (16, 2.0, 2.0);
    let grid = PortGrid::new(n, w, s2).unwrap();
    let tr = eigen_truncate(&jakes_correlation(&grid), 1e-3 * s2).unwrap();
    let model = tr.model_covariance(s2).unwrap();
    let draws = 100_000;
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    for d in 0..draws {
        let h = sample_port_channels(&tr, &grid, 10_000_000 + d).unwrap();
        for a in 0..n {
            for b in 0..n {
                acc[(a, b)] += h[a] * h[b].conj();
            }
        }
    }
    acc /= Complex64::new(draws as f64, 0.0);
    let mut cov_err = 0.0f64;
    let mut power_err = 0.0f64;
    for a in 0..n {
        power_err = power_err.max((acc[(a, a)].re - s2).abs() / s2);
        for b in 0..n {
            cov_err = cov_err.max((acc[(a, b)] - Complex64::new(model[(a, b)], 0.0)).norm() / s2);
        }
    }
    let pass = oracle_gap <= 1e-12 && worst <= 1e-10 && cov_err <= 0.05 && power_err <= 0.02;
    let ok = report(
        2,
        "spatial correlation",
        pass,
        &format!(
            "max |Λ − σ²J₀| / σ² {worst:.2e} (tol 1e-10, oracle agreement {oracle_gap:.1e}), \
             covariance err {cov_err:.4} σ² (tol 0.05), port power err {:.2}% (tol 2%), rank {}",
            100.0 * power_err,
            tr.rank()
        ),
        start.elapsed(),
        60.0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 3

/// Field synthesized directly from on-grid atoms: atom `k` sits at
/// `(x, y) = (grid[k mod G], grid[k div G])`, column `c = tx·G² + rx`.
fn synthesize(
    est: &SparseEstimate,
    g: usize,
    lambda: f64,
    t: Position3D,
    r: Position3D,
) -> Complex64 {
    let kappa = 2.0 * PI / lambda;
    let cos = |i: usize| -1.0 + (2 * i + 1) as f64 / g as f64;
    est.support
        .iter()
        .zip(&est.gains)
        .map(|(&c, &u)| {
            let (jt, ir) = (c / (g * g), c % (g * g));
            let ph = kappa * (t.x * cos(jt % g) + t.y * cos(jt / g))
                - kappa * (r.x * cos(ir % g) + r.y * cos(ir / g));
            u * Complex64::from_polar(1.0, ph)
        })
        .sum()
}

fn field_nmse(
    ps: &PathSet,
    est: &SparseEstimate,
    g: usize,
    eval: &[(Position3D, Position3D)],
) -> f64 {
    let (mut err, mut energy) = (0.0, 0.0);
    for &(t, r) in eval {
        let h = channel_response(ps, t, r);
        err += (h - synthesize(est, g, ps.wavelength(), t, r)).norm_sqr();
        energy += h.norm_sqr();
    }
    err / energy
}

fn monotone(o: &OmpResult) -> bool {
    o.residual_norms.windows(2).all(|w| w[1] <= w[0])
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

#[test]
fn criterion_3_sparse_recovery() {
    let _g = lock();
    let start = Instant::now();
    let (g, m, lambda) = (16usize, 60usize, 0.01);
    let dict: AngularDictionary = build_dictionary(g).unwrap();
    let region = MovingRegion::centered_square(g as f64 / 2.0 * lambda, 0.0).unwrap();
    let mut ok_joint = 0;
    let mut ok_strcs = 0;
    let mut residuals_monotone = true;
    let (mut worst_joint, mut worst_strcs) = (0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let k = 1 + (seed % 4) as usize;
        let ps = on_grid_pathset(&dict, k, lambda, seed).unwrap();
        let want = sorted(planted_estimate(&dict, &ps).support);
        let eval = ma_toolkit::chanest::random_positions(&region, &region, 256, 5000 + seed);

        let pos = ma_toolkit::chanest::random_positions(&region, &region, m, 1000 + seed);
        let c = simulate_pilots(&ps, &pos, 1.0, 0.0, 0).unwrap();
        let j = joint_estimate(&dict, &c, NOISELESS_EPS0, None).unwrap();
        residuals_monotone &= monotone(&j.omp);
        let nj = field_nmse(&ps, &j.estimate, g, &eval);
        worst_joint = worst_joint.max(nj);
        ok_joint += usize::from(sorted(j.estimate.support.clone()) == want && nj <= 1e-6);

        let [a, b, cc] = strcs_positions(&region, &region, strcs_split(m), 2000 + seed);
        let camp = |p: &[(Position3D, Position3D)]| simulate_pilots(&ps, p, 1.0, 0.0, 0).unwrap();
        let s = strcs_estimate(&dict, &camp(&a), &camp(&b), &camp(&cc), NOISELESS_EPS0).unwrap();
        residuals_monotone &= monotone(&s.tx_omp) && monotone(&s.rx_omp);
        let ns = field_nmse(&ps, &s.estimate, g, &eval);
        worst_strcs = worst_strcs.max(ns);
        ok_strcs += usize::from(sorted(s.estimate.support.clone()) == want && ns <= 1e-6);
    }
    let pass = ok_joint >= 99 && ok_strcs >= 99 && residuals_monotone;
    let ok = report(
        3,
        "sparse recovery",
        pass,
        &format!(
            "joint {ok_joint}/100, successive {ok_strcs}/100 (need 99), worst NMSE {worst_joint:.1e} / {worst_strcs:.1e}, \
             OMP residuals non-increasing: {residuals_monotone}"
        ),
        start.elapsed(),
        120.0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_placement() {
    let _g = lock();
    let start = Instant::now();
    let mut flags = [vec![], vec![], vec![], vec![]];
    for seed in 0..100u64 {
        let tp = two_path_siso(1000 + seed, 2.0);
        let opt = tp.grid_optimum(1e-2);
        let g = grad_ascent_placement(
            &tp.problem,
            &GradientConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let p = pso_placement(
            &tp.problem,
            &PsoConfig {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let d = discrete_placement(
            &tp.problem,
            &DiscreteConfig {
                grid_step: 0.01,
                mode: DiscreteMode::Exhaustive,
                ..Default::default()
            },
        )
        .unwrap();
        let mut oracle = MeasurementOracle::from_problem(&tp.problem, 2000, 0.0, seed).unwrap();
        let z = zo_placement(
            &mut oracle,
            &tp.problem.region,
            1,
            &ZoConfig {
                seed,
                ..ZoConfig::for_wavelength(LAMBDA)
            },
        )
        .unwrap();
        assert!(oracle.calls() <= 2000);
        flags[0].push(g.objective_value >= 0.99 * opt);
        flags[1].push(p.objective_value >= 0.99 * opt);
        flags[2].push(d.objective_value >= 0.99 * opt);
        flags[3].push(z.objective_value >= 0.95 * opt);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut fd = 0.0f64;
    for seed in 0..50 {
        fd = fd.max(gradient_error(
            &two_path_siso(seed, 2.0).problem,
            &random_positions(&mut rng, 1, LAMBDA),
        ));
        fd = fd.max(gradient_error(
            &mimo_problem(seed),
            &random_positions(&mut rng, 2, LAMBDA),
        ));
        fd = fd.max(gradient_error(
            &wsr_problem(seed, 3, 4, 2.0),
            &random_positions(&mut rng, 4, LAMBDA),
        ));
    }
    let r: Vec<f64> = flags.iter().map(|f| rate(f)).collect();
    let pass = r[0] >= 0.95 && r[1] >= 0.95 && r[2] >= 0.95 && r[3] >= 0.90 && fd <= 1e-5;
    let ok = report(
        4,
        "placement optimizers",
        pass,
        &format!(
            "within 1%: gradient {:.0}/100, pso {:.0}/100, discrete {:.0}/100 (need 95); zo within 5%: {:.0}/100 (need 90); \
             gradient vs finite differences {fd:.1e} (tol 1e-5)",
            100.0 * r[0],
            100.0 * r[1],
            100.0 * r[2],
            100.0 * r[3]
        ),
        start.elapsed(),
        180.0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_wsr_ordering() {
    let _g = lock();
    let start = Instant::now();
    let cfg = ScenarioConfig::defaults(ExperimentKind::WsrSweep);
    let sweep = cfg.wsr_sweep.clone().unwrap();
    assert!(cfg.repetitions >= 20);
    assert_eq!(sweep.sizes, vec![1.0, 2.0, 3.0, 4.0]);
    let r = run_wsr_sweep(&sweep, cfg.seed, cfg.repetitions, Provenance::of(&cfg)).unwrap();
    let o = wsr_ordering(&r, &sweep.methods);
    let summary: Vec<String> = sweep
        .sizes
        .iter()
        .map(|&s| {
            let cells: Vec<String> = sweep
                .methods
                .iter()
                .map(|m| format!("{}={:.3}", m.name(), r.row(s, m.name()).unwrap().mean))
                .collect();
            format!("A={s}λ [{}]", cells.join(" "))
        })
        .collect();
    let pass = o.all_at_least_fpa && o.monotone_in_size && o.pso_best;
    let ok = report(
        5,
        "multiuser sum-rate ordering",
        pass,
        &format!(
            "{} reps; all >= fpa: {}, non-decreasing in size: {}, pso best: {}; {}",
            cfg.repetitions,
            o.all_at_least_fpa,
            o.monotone_in_size,
            o.pso_best,
            summary.join("; ")
        ),
        start.elapsed(),
        600.0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 6

/// `6 / (snr·K·N(N²−1)(κd)²)` for an `N`-element uniform line of pitch `d`.
fn ula_crb(n: usize, d: f64, lambda: f64, snr: f64, k: usize) -> f64 {
    let kd = 2.0 * PI / lambda * d;
    let n = n as f64;
    6.0 / (snr * k as f64 * n * (n * n - 1.0) * kd * kd)
}

#[test]
fn criterion_6_sensing_crb() {
    let _g = lock();
    let start = Instant::now();
    let lambda = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let angle = |rng: &mut ChaCha8Rng| {
        PathAngles::new(rng.random_range(-1.2..1.2), rng.random_range(-PI..PI)).unwrap()
    };

    let mut ula_err = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=32);
        let d = rng.random_range(0.1..2.0) * lambda;
        let snr = 10f64.powf(rng.random_range(-2.0..3.0));
        let k = rng.random_range(1..=16);
        let g = ArrayGeometry::uniform_line(n, d, lambda).unwrap();
        let got = single_target_crb(&g, angle(&mut rng), snr, k)
            .unwrap()
            .spatial_frequency[0];
        ula_err = ula_err.max((got / ula_crb(n, d, lambda, snr, k) - 1.0).abs());
    }

    let mut dil_err = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=12);
        let pos: Vec<Position3D> = (0..n)
            .map(|i| {
                Position3D::new(
                    i as f64 * 0.7 * lambda + rng.random_range(0.0..0.3) * lambda,
                    rng.random_range(-1.0..1.0) * lambda,
                    0.0,
                )
            })
            .collect();
        let g = ArrayGeometry::new(pos, lambda).unwrap();
        let c = rng.random_range(0.2..5.0);
        let a = angle(&mut rng);
        let base = single_target_crb(&g, a, 1.0, 1).unwrap().spatial_frequency[0];
        let big = single_target_crb(&g.dilated(c).unwrap(), a, 1.0, 1)
            .unwrap()
            .spatial_frequency[0];
        dil_err = dil_err.max((big * c * c / base - 1.0).abs());
    }

    let mut edge_wins = 0;
    let mut worst_ratio = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=16);
        let s = rng.random_range(0.1..0.5);
        let length = (n - 1) as f64 * 0.5 + rng.random_range(0.25..8.0);
        let seg = MovingRegion::segment_x(0.0, length * lambda, s * lambda).unwrap();
        let a = angle(&mut rng);
        let (snr, k) = (rng.random_range(0.1..10.0), rng.random_range(1..=8));
        let edge =
            crb_optimal_placement(&seg, n, a, snr, k, lambda, CrbPlacementMethod::ClosedForm)
                .unwrap();
        let centered = ArrayGeometry::new(fpa_layout(&seg, n, lambda).unwrap(), lambda).unwrap();
        let ce = single_target_crb(&edge, a, snr, k)
            .unwrap()
            .spatial_frequency[0];
        let cc = single_target_crb(&centered, a, snr, k)
            .unwrap()
            .spatial_frequency[0];
        edge_wins += usize::from(ce < cc);
        worst_ratio = worst_ratio.max(ce / cc);
    }
    let pass = ula_err <= 1e-9 && dil_err <= 1e-12 && edge_wins == 1000;
    let ok = report(
        6,
        "sensing CRB",
        pass,
        &format!(
            "uniform-line rel err {ula_err:.1e} (tol 1e-9), dilation c² law err {dil_err:.1e}, \
             edge < centered {edge_wins}/1000 (worst ratio {worst_ratio:.3})"
        ),
        start.elapsed(),
        30.0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_virtual_array() {
    let _g = lock();
    let start = Instant::now();
    let lambda = 0.01;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let a = PathAngles::new(rng.random_range(-1.2..1.2), rng.random_range(-PI..PI)).unwrap();
        let snr = 10f64.powf(rng.random_range(-1.0..2.0));
        let trajectory: Vec<ArrayGeometry> = (0..8)
            .map(|i| {
                ArrayGeometry::new(vec![Position3D::xy(i as f64 * lambda / 2.0, 0.0)], lambda)
                    .unwrap()
            })
            .collect();
        let virt = virtual_array_synthesis(&trajectory).unwrap();
        let physical = ArrayGeometry::uniform_line(8, lambda / 2.0, lambda).unwrap();
        let cv = single_target_crb(&virt, a, snr, 1)
            .unwrap()
            .spatial_frequency[0];
        let cp = single_target_crb(&physical, a, snr, 1)
            .unwrap()
            .spatial_frequency[0];
        let closed = ula_crb(8, lambda / 2.0, lambda, snr, 1);
        worst = worst
            .max((cv / cp - 1.0).abs())
            .max((cv / closed - 1.0).abs());
    }
    let ok = report(
        7,
        "virtual array",
        worst <= 1e-9,
        &format!("8-position trajectory vs 8-element array rel err {worst:.1e} (tol 1e-9)"),
        start.elapsed(),
        5.0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- criterion 8

fn small_configs() -> Vec<(&'static str, ScenarioConfig)> {
    let mut wsr = ScenarioConfig::defaults(ExperimentKind::WsrSweep);
    wsr.seed = 11;
    wsr.repetitions = 2;
    {
        let w = wsr.wsr_sweep.as_mut().unwrap();
        w.sizes = vec![1.0, 2.0];
        w.n_antennas = 2;
        w.users = 2;
        w.paths = 3;
        w.settings.pso.swarm = 12;
        w.settings.pso.iters = 30;
        w.settings.gradient.starts = 3;
        w.settings.gradient.max_iters = 40;
        w.settings.zo.iters = 40;
    }
    let mut nmse = ScenarioConfig::defaults(ExperimentKind::NmseSweep);
    nmse.seed = 12;
    nmse.repetitions = 3;
    {
        let n = nmse.nmse_sweep.as_mut().unwrap();
        n.measurements = vec![10, 30];
        n.grid = 8;
        n.paths = 2;
        n.noise_variance = 0.01;
        n.eval_points = 32;
    }
    let mut crb = ScenarioConfig::defaults(ExperimentKind::CrbSweep);
    crb.seed = 13;
    crb.repetitions = 2;
    vec![("wsr-sweep", wsr), ("nmse-sweep", nmse), ("crb-sweep", crb)]
}

fn run_cli(sub: &str, config: &Path, out: &Path, threads: usize) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_ma-toolkit"))
        .args([sub, "--quiet", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .status()
        .expect("binary runs");
    assert!(status.success(), "{sub} exited with {status}");
    std::fs::read(out).unwrap()
}

#[test]
fn criterion_8_determinism() {
    let _g = lock();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    let mut total = 0;
    let mut notes = Vec::new();
    for (sub, cfg) in small_configs() {
        let path = dir.path().join(format!("{sub}.toml"));
        std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
        let runs: Vec<Vec<u8>> = [1, 1, 4]
            .iter()
            .enumerate()
            .map(|(i, &t)| run_cli(sub, &path, &dir.path().join(format!("{sub}-{i}.csv")), t))
            .collect();
        for r in &runs[1..] {
            total += 1;
            identical += usize::from(*r == runs[0]);
        }
        notes.push(format!("{sub} {} bytes", runs[0].len()));
    }
    let ok = report(
        8,
        "determinism",
        identical == total,
        &format!(
            "{identical}/{total} reruns byte-identical (1 and 4 worker threads; {})",
            notes.join(", ")
        ),
        start.elapsed(),
        f64::INFINITY,
    );
    assert!(ok);
}
