//! End-to-end acceptance checks. Runs without the libtest harness so that one
//! PASS/FAIL line per criterion is always printed; exits nonzero on failure.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sphericoh::coherence::{
    direct_inner_product, max_equal_order_product, product_expansion, theorem_lower_bound,
    welch_bound,
};
use sphericoh::grids::{min_samples, mode_count};
use sphericoh::identities::{
    direct_legendre_sum, l2_norm_estimate, legendre_sum_closed_form, monotone_sum_check,
    odd_even_split_check, residual_bound_check, residual_min_samples, weighted_threej_sum,
    ResidualCheck,
};
use sphericoh::optimize::{gradient, pnorm_objective, run, AngleFamily, Method, OptimizerConfig};
use sphericoh::specfun::legendre;
use sphericoh::wigner3j::{threej, threej_squared_exact, ExactRational, ThreeJArgs};
use sphericoh::{BasisKind, Grid, ModeIndex};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn equispaced(m: usize) -> Grid {
    Grid::equispaced(m, BasisKind::Wigner).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for b in 3..=20u32 {
        let m = min_samples(b);
        let grid = equispaced(m);
        let best = max_equal_order_product(&grid, b).unwrap();
        let want: f64 = grid
            .cos_theta()
            .iter()
            .map(|&x| legendre(b - 1, x).unwrap() * legendre(b - 3, x).unwrap())
            .sum::<f64>()
            .abs();
        let arg_ok = (best.l1, best.l2, best.k, best.n) == (b - 3, b - 1, 0, 0);
        let val_ok = (best.value - want).abs() <= 1e-10 * want;
        if !(arg_ok && val_ok) {
            // Smallest sample count from which the argmax matches.
            let first_ok = (m + 1..=4 * m).find(|&mm| {
                let r = max_equal_order_product(&equispaced(mm), b).unwrap();
                (r.l1, r.l2, r.k, r.n) == (b - 3, b - 1, 0, 0)
            });
            failures.push(format!(
                "B={b} m={m}: got ({},{},{},{}) {:.6} > {want:.6}, first holds at m={}",
                best.l1,
                best.l2,
                best.k,
                best.n,
                best.value,
                first_ok.map_or("?".to_string(), |v| v.to_string())
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 120.0;
    outcome(pass, format!("B=3..20 argmax (B-3,B-1,0,0), {secs:.1}s {}", failures.join("; ")))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for l in (2..=40u32).step_by(2) {
        let base = residual_min_samples(l);
        for m in [base, 2 * base, 5 * base] {
            let closed = legendre_sum_closed_form(l, m).unwrap().total();
            let direct = direct_legendre_sum(l, m).unwrap();
            let rel = (closed - direct).abs() / direct.abs();
            worst = worst.max(rel);
            if rel > 1e-9 {
                failures.push(format!("l={l} m={m} rel={rel:e}"));
            }
        }
    }
    let mut worst_odd: f64 = 0.0;
    for l in (1..=39u32).step_by(2) {
        let base = residual_min_samples(l);
        for m in [base, 2 * base, 5 * base] {
            worst_odd = worst_odd.max(direct_legendre_sum(l, m).unwrap().abs());
        }
    }
    if worst_odd > 1e-10 {
        failures.push(format!("odd sum {worst_odd:e}"));
    }
    outcome(
        failures.is_empty(),
        format!("max rel {worst:.2e}, max odd |sum| {worst_odd:.2e} {}", failures.join("; ")),
    )
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for l in (4..=60u32).step_by(2) {
        let m = residual_min_samples(l);
        match residual_bound_check(l, m).unwrap() {
            ResidualCheck::Holds { residual } => {
                lo = lo.min(residual);
                hi = hi.max(residual);
            }
            other => failures.push(format!("l={l} m={m} {other:?}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!("R_l(m) in [{lo:.4}, {hi:.4}] for l=4..60 {}", failures.join("; ")),
    )
}

fn criterion_4() -> Outcome {
    let m = min_samples(20);
    let ok = monotone_sum_check(20, m).unwrap();
    let sums: Vec<String> = (2..20)
        .step_by(2)
        .map(|l| format!("{:.4}", direct_legendre_sum(l, m).unwrap()))
        .collect();
    outcome(ok, format!("m={m} sums [{}]", sums.join(", ")))
}

fn criterion_5() -> Outcome {
    let mut failures = Vec::new();
    // (a) orthogonality in the degree
    let mut worst_a: f64 = 0.0;
    for l1 in 0..=12u32 {
        for l2 in 0..=12u32 {
            let (a, b) = (l1 as i32, l2 as i32);
            for k1 in -a..=a {
                for k2 in -b..=b {
                    let s: f64 = (l1.abs_diff(l2)..=l1 + l2)
                        .map(|lh| {
                            (2 * lh + 1) as f64
                                * threej(&ThreeJArgs::new(l1, l2, lh, k1, k2, -k1 - k2)).powi(2)
                        })
                        .sum();
                    worst_a = worst_a.max((s - 1.0).abs());
                    for n1 in -a..=a {
                        let n2 = k1 + k2 - n1;
                        if n1 == k1 || n2.abs() > b {
                            continue;
                        }
                        let cross: f64 = (l1.abs_diff(l2)..=l1 + l2)
                            .map(|lh| {
                                (2 * lh + 1) as f64
                                    * threej(&ThreeJArgs::new(l1, l2, lh, k1, k2, -k1 - k2))
                                    * threej(&ThreeJArgs::new(l1, l2, lh, n1, n2, -k1 - k2))
                            })
                            .sum();
                        worst_a = worst_a.max(cross.abs());
                    }
                }
            }
        }
    }
    if worst_a > 1e-11 {
        failures.push(format!("(a) worst {worst_a:e}"));
    }
    // (b) odd/even split. For k = -n ≠ 0 the order-reversal symmetry turns the
    // alternating sum into an orthogonality sum, so the split is
    // (-1)^{l1+l2} (1/2, -1/2) rather than (0, 0); both cases are checked.
    let mut worst_b: f64 = 0.0;
    let mut reversed_cases = 0;
    for l1 in 1..=12u32 {
        for l2 in 1..=12u32 {
            if l1 == l2 {
                continue;
            }
            let t = l1.min(l2) as i32;
            for k in -t..=t {
                for n in -t..=t {
                    let (e, o) = odd_even_split_check(l1, l2, k, n);
                    let (we, wo) = if k == n {
                        if k == 0 {
                            continue;
                        }
                        (0.5, 0.5)
                    } else if k == -n {
                        reversed_cases += 1;
                        let s = if (l1 + l2) % 2 == 0 { 0.5 } else { -0.5 };
                        (s, -s)
                    } else {
                        (0.0, 0.0)
                    };
                    worst_b = worst_b.max((e - we).abs()).max((o - wo).abs());
                }
            }
        }
    }
    if worst_b > 1e-12 {
        failures.push(format!("(b) worst {worst_b:e}"));
    }
    // (c) exact weighted sum
    for l1 in 0..=21u32 {
        let want = ExactRational::from_integer(2 + 2 * (l1 as i64 + 2) * (l1 as i64 + 1));
        let got = weighted_threej_sum(l1);
        if got != want {
            failures.push(format!("(c) l1={l1}: {got} != {want}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "(a) {worst_a:.1e} (b) {worst_b:.1e} incl. {reversed_cases} k=-n cases (c) exact for l1<=21 {}",
            failures.join("; ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut count = 0;
    let mut failures = Vec::new();
    for l2 in 1..=15u32 {
        for l1 in 0..l2 {
            for l3 in (l2 - l1)..=(l1 + l2) {
                if (l1 + l2 + l3) % 2 == 1 {
                    continue;
                }
                let sq = |a, b| threej_squared_exact(&ThreeJArgs::zero_orders(a, b, l3));
                let base = sq(l1, l2);
                count += 2;
                if base < sq(l1 + 1, l2 + 1) {
                    failures.push(format!("({l1},{l2},{l3}) vs +1,+1"));
                }
                if base < sq(l1 + 2, l2) {
                    failures.push(format!("({l1},{l2},{l3}) vs +2,0"));
                }
            }
        }
    }
    outcome(failures.is_empty(), format!("{count} exact comparisons {}", failures.join("; ")))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let m = rng.gen_range(3..=24);
        let theta = (0..m).map(|_| rng.gen_range(0.0..=PI)).collect();
        let phi = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
        let chi = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
        let grid = Grid::new(theta, phi, chi, BasisKind::Wigner).unwrap();
        let mode = |rng: &mut ChaCha8Rng| {
            let l = rng.gen_range(0..=6u32);
            let li = l as i32;
            ModeIndex::new(l, rng.gen_range(-li..=li), rng.gen_range(-li..=li))
        };
        let (a, b) = (mode(&mut rng), mode(&mut rng));
        let direct = direct_inner_product(a, b, &grid).unwrap();
        let expanded = product_expansion(a, b, &grid).unwrap();
        // Scale by the Cauchy-Schwarz bound so that near-cancelling sums are
        // judged against the size of their terms.
        let na = direct_inner_product(a, a, &grid).unwrap().re.sqrt();
        let nb = direct_inner_product(b, b, &grid).unwrap().re.sqrt();
        let scale = direct.norm().max(na * nb);
        worst = worst.max((direct - expanded).norm() / scale);
    }
    outcome(worst <= 1e-8, format!("200 instances, worst rel {worst:.2e}"))
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    // Leading Euler-Maclaurin term l(l+1)/(3(m-1)), reported for context.
    let mut sharp_ok = true;
    for l in 0..=10u32 {
        let li = l as i32;
        for k in -li..=li {
            for n in -li..=li {
                let mut prev = f64::INFINITY;
                for m in [50usize, 100, 200, 400] {
                    let e = l2_norm_estimate(l, k, n, m).unwrap();
                    worst_ratio = worst_ratio.max(e.error * m as f64 / 5.0);
                    sharp_ok &= e.error * (m - 1) as f64 <= (l * (l + 1)) as f64 / 3.0 + 1e-9;
                    if e.error > 5.0 / m as f64 {
                        failures.push(format!("l={l} k={k} n={n} m={m} err {:e}", e.error));
                    }
                    if !(e.error < prev || e.error <= 1e-12) {
                        failures.push(format!("l={l} k={k} n={n} m={m} not decreasing"));
                    }
                    prev = e.error;
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "all (k,n) for l<=10, max err/(5/m) {worst_ratio:.3}, err <= l(l+1)/(3(m-1)): {sharp_ok}; {} violations, first: {}",
            failures.len(),
            failures.iter().take(4).cloned().collect::<Vec<_>>().join("; ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    for kind in [BasisKind::Wigner, BasisKind::Spherical] {
        for b in 6..=16u32 {
            let m = min_samples(b);
            let n = mode_count(b, kind);
            let lb = theorem_lower_bound(b, m, true).unwrap();
            let w = welch_bound(m, n);
            if lb <= w {
                failures.push(format!("{kind} B={b}: {lb} <= {w}"));
            }
        }
    }
    outcome(failures.is_empty(), format!("B=6..16, both kinds {}", failures.join("; ")))
}

fn random_grid(rng: &mut ChaCha8Rng, kind: BasisKind) -> Grid {
    let m = rng.gen_range(4..=12);
    let theta = (0..m).map(|_| rng.gen_range(0.15..PI - 0.15)).collect();
    let phi = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
    let chi = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
    Grid::new(theta, phi, chi, kind).unwrap()
}

fn finite_difference(grid: &Grid, b: u32, wrt: AngleFamily) -> Vec<f64> {
    let h = 1e-6;
    (0..grid.len())
        .map(|i| {
            let eval = |d: f64| {
                let (mut t, mut ph, mut ch) =
                    (grid.theta().to_vec(), grid.phi().to_vec(), grid.chi().to_vec());
                match wrt {
                    AngleFamily::Phi => ph[i] += d,
                    AngleFamily::Chi => ch[i] += d,
                    AngleFamily::Theta => t[i] += d,
                }
                pnorm_objective(&Grid::new(t, ph, ch, grid.kind()).unwrap(), b, 8).unwrap()
            };
            (eval(h) - eval(-h)) / (2.0 * h)
        })
        .collect()
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut report = Vec::new();
    let mut pass = true;
    for wrt in [AngleFamily::Phi, AngleFamily::Chi, AngleFamily::Theta] {
        let mut worst: f64 = 0.0;
        for i in 0..24 {
            let kind = if wrt == AngleFamily::Chi || i % 2 == 0 {
                BasisKind::Wigner
            } else {
                BasisKind::Spherical
            };
            let b = rng.gen_range(2..=4);
            let grid = random_grid(&mut rng, kind);
            let an = gradient(&grid, b, 8, wrt).unwrap();
            let fd = finite_difference(&grid, b, wrt);
            let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let err = an.iter().zip(&fd).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            worst = worst.max(err / scale);
        }
        pass &= worst <= 1e-5;
        report.push(format!("{wrt:?} {worst:.1e}"));
    }
    outcome(pass, format!("24 instances per family, worst rel: {}", report.join(", ")))
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();

    let m_sh = 100;
    let lb_sh = theorem_lower_bound(10, m_sh, true).unwrap();
    let mut hits = 0;
    for seed in 0..10 {
        let cfg = OptimizerConfig {
            i_max: 5000,
            method: Method::Adam,
            seed,
            ..OptimizerConfig::default()
        };
        let r = run(&cfg, 10, m_sh, BasisKind::Spherical).unwrap();
        if r.trace.iter().any(|t| t.mu < lb_sh - 1e-12) {
            failures.push(format!("sh seed {seed}: trace below bound"));
        }
        if r.final_mu <= 1.05 * lb_sh {
            hits += 1;
        }
    }
    if hits < 8 {
        failures.push(format!("sh: only {hits}/10 seeds within 5%"));
    }

    let (b_w, m_w) = (4, 84);
    let lb_w = theorem_lower_bound(b_w, m_w, true).unwrap();
    let seeds = 0..5u64;
    let mut adam_margin = f64::INFINITY;
    for seed in seeds.clone() {
        let mut finals = Vec::new();
        for method in Method::ALL {
            let cfg = OptimizerConfig {
                i_max: 5000,
                method,
                seed,
                ..OptimizerConfig::default()
            };
            let r = run(&cfg, b_w, m_w, BasisKind::Wigner).unwrap();
            if r.trace.iter().any(|t| t.mu < lb_w - 1e-12) {
                failures.push(format!("wigner {method} seed {seed}: trace below bound"));
            }
            finals.push((method, r.final_mu));
        }
        let adam = finals.iter().find(|(m, _)| *m == Method::Adam).unwrap().1;
        for &(method, mu) in &finals {
            if method != Method::Adam {
                adam_margin = adam_margin.min(mu - adam);
                if adam > mu {
                    failures.push(format!("seed {seed}: adam {adam:.5} > {method} {mu:.5}"));
                }
            }
        }
        if adam <= lb_w {
            failures.push(format!("seed {seed}: adam reached the bound"));
        }
    }
    // Sensitivity to half as many samples as columns; reported, not asserted.
    let mut sensitivity = Vec::new();
    for (kind, b, m) in [(BasisKind::Spherical, 10, 50), (BasisKind::Wigner, 4, 42)] {
        let lb = theorem_lower_bound(b, m, true).unwrap();
        let ratios: Vec<String> = (0..3u64)
            .map(|seed| {
                let cfg = OptimizerConfig { i_max: 5000, seed, ..OptimizerConfig::default() };
                let r = run(&cfg, b, m, kind).unwrap();
                format!("{:.3}", r.final_mu / lb)
            })
            .collect();
        sensitivity.push(format!("{kind} B={b} m={m} mu/bound [{}]", ratios.join(", ")));
    }
    outcome(
        failures.is_empty(),
        format!(
            "sh {hits}/10 within 5% of {lb_sh:.5}; wigner adam best on seeds 0..4 (min margin {adam_margin:.2e}), bound {lb_w:.5}; m=N/2: {}; {:.0}s {}",
            sensitivity.join(", "),
            start.elapsed().as_secs_f64(),
            failures.join("; ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 equal-order argmax", criterion_1),
        ("2 legendre sum closed form", criterion_2),
        ("3 residual band", criterion_3),
        ("4 monotone even sums", criterion_4),
        ("5 3j identities", criterion_5),
        ("6 3j monotonicity", criterion_6),
        ("7 product expansion", criterion_7),
        ("8 column norms", criterion_8),
        ("9 bound vs welch", criterion_9),
        ("10 gradient checks", criterion_10),
        ("11 optimization", criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(&format!("{f} "))) {
            continue;
        }
        let o = check();
        println!("criterion {name}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail.trim_end());
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
