//! Analytic formulas against independent numeric routes.

use alc_core::analysis::*;
use approx::assert_relative_eq;

fn fixed(p: f64, n: u64) -> ModelParams {
    ModelParams::new(p, 0.5, Size::Fixed { n }).unwrap()
}

fn poisson(p: f64, lambda: f64) -> ModelParams {
    ModelParams::new(p, 0.5, Size::Poisson { lambda }).unwrap()
}

/// Phi from the Taylor series of erf.
fn phi_series(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let mut term = z;
    let mut sum = z;
    let mut n = 0.0;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) || n < 5.0 {
        n += 1.0;
        term *= -z * z / n;
        sum += term / (2.0 * n + 1.0);
        if n > 400.0 {
            break;
        }
    }
    0.5 * (1.0 + 2.0 / std::f64::consts::PI.sqrt() * sum)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f(hi) > 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// E X_k / 2^k for n fixed keys by enumerating every assignment of the
/// first k bits of all keys.
fn enumerate_fill_fraction(p: f64, n: usize, k: usize) -> f64 {
    let q = 1.0 - p;
    let mut total = 0.0;
    for outcome in 0u64..1 << (n * k) {
        let prefixes: Vec<u64> = (0..n).map(|i| (outcome >> (i * k)) & ((1 << k) - 1)).collect();
        let ones = outcome.count_ones() as i32;
        let weight = p.powi(ones) * q.powi((n * k) as i32 - ones);
        let mut distinct = prefixes.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let filled = distinct
            .iter()
            .filter(|v| prefixes.iter().filter(|w| w == v).count() >= 2)
            .count();
        total += weight * filled as f64;
    }
    total / (1u64 << k) as f64
}

/// Poisson model by summing over every prefix r of length k.
fn prefix_sum_fill_fraction(p: f64, lambda: f64, k: usize) -> f64 {
    let q = 1.0 - p;
    let mut total = 0.0;
    for r in 0u32..1 << k {
        let ones = r.count_ones() as i32;
        let mu = lambda * p.powi(ones) * q.powi(k as i32 - ones);
        total += 1.0 - (1.0 + mu) * (-mu).exp();
    }
    total / (1u64 << k) as f64
}

#[test]
fn fixed_n_matches_enumeration() {
    for p in [0.3, 0.5, 0.7] {
        for (n, k) in [(2, 1), (2, 3), (3, 1), (3, 2), (3, 4), (4, 2), (4, 3), (5, 2), (6, 2)] {
            let oracle = enumerate_fill_fraction(p, n, k);
            let got = expected_fill_fraction(&fixed(p, n as u64), k);
            assert!((got - oracle).abs() < 1e-13, "p={p} n={n} k={k} {got} vs {oracle}");
        }
    }
}

#[test]
fn poisson_matches_prefix_sum() {
    for p in [0.2, 0.5, 0.7] {
        for lambda in [3.0, 100.0, 4096.0] {
            for k in [0, 1, 5, 9, 14] {
                let oracle = prefix_sum_fill_fraction(p, lambda, k);
                let got = expected_fill_fraction(&poisson(p, lambda), k);
                assert!((got - oracle).abs() < 1e-12, "p={p} λ={lambda} k={k}");
            }
        }
    }
}

#[test]
fn half_poisson_closed_form() {
    for lambda in [10.0, 1e3, 1e6] {
        for k in 0..=40 {
            let mu = lambda * 2f64.powi(-k);
            let closed = 1.0 - (1.0 + mu) * (-mu).exp();
            let got = expected_fill_fraction(&poisson(0.5, lambda), k as usize);
            assert!((got - closed).abs() <= 1e-12, "λ={lambda} k={k}");
        }
    }
}

#[test]
fn fill_fraction_monotone() {
    for p in [0.3, 0.5, 0.7, 0.9] {
        for size in [2u64, 5, 64, 1000, 4096] {
            for model in [fixed(p, size), poisson(p, size as f64)] {
                let values: Vec<f64> = (0..=60).map(|k| expected_fill_fraction(&model, k)).collect();
                assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-13), "{model:?}");
                if size >= 2 {
                    assert!(values[..=40].iter().all(|&v| v > 0.0 && v <= 1.0));
                }
            }
        }
        for k in [1, 4, 10, 20] {
            let by_size: Vec<f64> = [2u64, 3, 10, 100, 1000, 4096]
                .iter()
                .map(|&n| expected_fill_fraction(&fixed(p, n), k))
                .collect();
            assert!(by_size.windows(2).all(|w| w[1] >= w[0] - 1e-13));
        }
    }
}

#[test]
fn poisson_close_to_fixed() {
    let n = 4096;
    for k in 0..=40 {
        let f = expected_fill_fraction(&fixed(0.7, n), k);
        let po = expected_fill_fraction(&poisson(0.7, n as f64), k);
        assert!((f - po).abs() <= 0.02, "k={k}");
    }
}

#[test]
fn gamma_root_property() {
    for p in [0.2, 0.6, 0.7, 0.95] {
        for k in [1, 10, 20, 60, 300] {
            for lambda in [2.0, 1e3, 2f64.powi(14), 1e9] {
                let g = gamma_threshold(k, lambda, p).unwrap();
                let value = (lambda.ln() + g * p.ln() + (k as f64 - g) * (1.0 - p).ln()).exp();
                assert_relative_eq!(value, 1.0, max_relative = 1e-9);
            }
        }
    }
}

#[test]
fn gamma_example_by_root_finding() {
    let (p, k, lambda) = (0.7f64, 20, 2f64.powi(14));
    let oracle = bisect(|g| lambda * p.powf(g) * 0.3f64.powf(k as f64 - g) - 1.0, 0.0, 20.0);
    let g = gamma_threshold(k, lambda, p).unwrap();
    assert!((g - oracle).abs() < 1e-9);
    assert!((g - 16.966).abs() < 5e-4);
}

#[test]
fn mu_at_ceiling_of_gamma_in_unit_to_rho() {
    for p in [0.55, 0.7, 0.9] {
        let rho = p / (1.0 - p);
        for k in [5, 12, 20, 40] {
            for lambda in [50.0, 1e4, 1e6] {
                let g = gamma_threshold(k, lambda, p).unwrap();
                let j = g.ceil();
                if j < 0.0 || j > k as f64 {
                    continue;
                }
                let mu = mu_j(lambda, k, j as usize, p).unwrap();
                assert!(mu >= 1.0 - 1e-12 && mu <= rho * (1.0 + 1e-12), "p={p} k={k} λ={lambda}");
            }
        }
    }
}

#[test]
fn normal_cdf_against_series() {
    let mut x = -4.0;
    while x <= 4.0 {
        assert!((normal_cdf(x) - phi_series(x)).abs() <= 1e-9, "x={x}");
        x += 0.05;
    }
}

#[test]
fn quantile_975() {
    let oracle = bisect(|x| phi_series(x) - 0.975, 0.0, 5.0);
    let got = normal_quantile(0.975).unwrap();
    assert!((got - oracle).abs() < 1e-8);
    assert!((got - 1.959964).abs() < 1e-6);
}

#[test]
fn quantile_round_trip_and_symmetry() {
    let mut grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    grid.extend([1e-12, 1e-8, 1e-4, 0.02425, 1.0 - 1e-4, 1.0 - 1e-8]);
    for a in grid {
        let x = normal_quantile(a).unwrap();
        assert!((normal_cdf(x) - a).abs() <= 1e-8 * a.clamp(1e-6, 1.0), "a={a}");
        if a > 1e-10 && a < 1.0 - 1e-10 {
            let mirrored = normal_quantile(1.0 - a).unwrap();
            assert!((x + mirrored).abs() <= 1e-7, "a={a}");
        }
    }
}

#[test]
fn normal_tail_examples() {
    let got = binomial_tail_normal_approx(100, 60.0).unwrap();
    assert!((got - (1.0 - phi_series(2.0))).abs() < 1e-10);
    assert!((got - 0.02275).abs() < 1e-5);
}

#[test]
fn normal_tail_error_scale() {
    for k in [16usize, 64, 256] {
        let mut row = vec![1.0f64];
        for _ in 0..k {
            let mut next = vec![0.5; row.len() + 1];
            next[0] = row[0] / 2.0;
            for j in 1..row.len() {
                next[j] = (row[j - 1] + row[j]) / 2.0;
            }
            next[row.len()] = row[row.len() - 1] / 2.0;
            row = next;
        }
        let bound = 0.5 / (k as f64).sqrt();
        let mut g = 0.0;
        while g <= k as f64 {
            let exact: f64 = row.iter().skip(g.ceil() as usize).sum();
            let approx = binomial_tail_normal_approx(k, g).unwrap();
            assert!((approx - exact).abs() <= bound, "k={k} γ={g}");
            g += 0.25;
        }
    }
}

#[test]
fn constants_at_point_seven() {
    let c = derived_constants(0.7).unwrap();
    let h_nat = (0.7 * (1.0f64 / 0.7).ln() + 0.3 * (1.0f64 / 0.3).ln()) / std::f64::consts::LN_2;
    assert_relative_eq!(c.h, h_nat, max_relative = 1e-14);
    assert!((c.h - 0.881291).abs() < 1e-6);
    assert!((c.b - 1.125769).abs() < 1e-6);
    assert!((c.kappa - 0.783).abs() < 5e-4);
    assert!((c.h_inf - 1.737).abs() < 5e-4);
    assert_relative_eq!(c.rho, 7.0 / 3.0, max_relative = 1e-14);

    let alpha_lc = depth_constant(0.7, DepthVariant::AlphaLc).unwrap();
    let full_lc = depth_constant(0.7, DepthVariant::FullLc).unwrap();
    assert!((alpha_lc - 0.453899).abs() < 1e-6);
    assert!((alpha_lc - 0.4537).abs() < 5e-4);
    assert!((full_lc - 0.9790).abs() < 1e-4);
}

#[test]
fn constants_over_grid() {
    for i in 1..100 {
        let p = i as f64 / 100.0;
        let c = derived_constants(p).unwrap();
        assert!(c.h <= 1.0 + 1e-15);
        if i == 50 {
            assert!((c.h - 1.0).abs() < 1e-15);
            continue;
        }
        assert!(c.h < 1.0);
        assert!(c.kappa > 0.0 && c.kappa < 1.0, "p={p}");
        let a = depth_constant(p, DepthVariant::AlphaLc).unwrap();
        let f = depth_constant(p, DepthVariant::FullLc).unwrap();
        assert!(a < f, "p={p}");
    }
}

#[test]
fn closed_form_values() {
    let cf = predict_level_closed_form(65536.0, 0.25, 0.7).unwrap();
    assert!((cf - 15.59).abs() < 5e-3);
    let mid = predict_level_closed_form(65536.0, 0.5, 0.7).unwrap();
    assert!((mid - 14.21).abs() < 5e-3);
    let full = predict_full_fillup(65536.0, 0.7).unwrap();
    assert!((full - 8.061).abs() < 2e-3);
    assert!(mid > full);
    assert!((predict_full_fillup(65536.0, 0.3).unwrap() - full).abs() <= 1e-12);
}

#[test]
fn p_q_symmetry() {
    for p in [0.1, 0.25, 0.4, 0.7] {
        let q = 1.0 - p;
        for k in [0, 3, 10, 25] {
            for n in [2u64, 300, 4096] {
                let a = expected_fill_fraction(&fixed(p, n), k);
                let b = expected_fill_fraction(&fixed(q, n), k);
                assert!((a - b).abs() <= 1e-12);
                let a = expected_fill_fraction(&poisson(p, n as f64), k);
                let b = expected_fill_fraction(&poisson(q, n as f64), k);
                assert!((a - b).abs() <= 1e-12);
            }
        }
        for alpha in [0.1, 0.5, 0.9] {
            let a = predict_level_closed_form(1e5, alpha, p).unwrap();
            let b = predict_level_closed_form(1e5, alpha, q).unwrap();
            assert!((a - b).abs() <= 1e-12);
            let pa = ModelParams::new(p, alpha, Size::Fixed { n: 100_000 }).unwrap();
            let pb = ModelParams::new(q, alpha, Size::Fixed { n: 100_000 }).unwrap();
            assert_eq!(predict_level_calibrated(&pa).unwrap(), predict_level_calibrated(&pb).unwrap());
        }
        let (a, b) = (derived_constants(p).unwrap(), derived_constants(q).unwrap());
        for (x, y) in [(a.h, b.h), (a.h_inf, b.h_inf), (a.b, b.b), (a.kappa, b.kappa)] {
            assert!((x - y).abs() <= 1e-12);
        }
        for v in [DepthVariant::AlphaLc, DepthVariant::FullLc] {
            assert!((depth_constant(p, v).unwrap() - depth_constant(q, v).unwrap()).abs() <= 1e-12);
        }
        let (fa, fb) = (predict_full_fillup(1e6, p).unwrap(), predict_full_fillup(1e6, q).unwrap());
        assert!((fa - fb).abs() <= 1e-12);
    }
}

#[test]
fn calibrated_within_three_of_closed_form() {
    for alpha in [0.25, 0.5, 0.75] {
        for e in 10..=20 {
            let n = 1u64 << e;
            let params = ModelParams::new(0.7, alpha, Size::Fixed { n }).unwrap();
            let k = predict_level_calibrated(&params).unwrap();
            let cf = predict_level_closed_form(n as f64, alpha, 0.7).unwrap();
            assert!((k as f64 - cf).abs() <= 3.0, "α={alpha} n=2^{e}: {k} vs {cf}");
            assert!(expected_fill_fraction(&params, k) >= alpha);
            assert!(expected_fill_fraction(&params, k + 1) < alpha);
        }
    }
}
