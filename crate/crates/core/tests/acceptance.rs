//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line, then asserts.

use polylat::cbc::{cbc_construct, wce_squared, Criterion, Search};
use polylat::gfpoly::{find_irreducible, Poly};
use polylat::harness::{dimension_fixed_rates, fit_slope, sweep, ConvergenceRecord, Regime, SweepConfig};
use polylat::infdim::{
    cost_fixed, cost_variable, plan_fixed, plan_multilevel, FixedPlan, FixedRule, Level, MultilevelPlan,
    MultilevelRule, PlanTuning,
};
use polylat::polylattice::{generate_points, net_strength, GeneratingVector, PointSet};
use polylat::scramble::ScrambleSpec;
use polylat::wspace::{bernoulli1, bernoulli2, kernel, kernel_eval, Beta, ProductIntegrand, Shape, WeightSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: &str, pass: bool, detail: &str) {
    println!("[{}] criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn show(records: &[ConvergenceRecord]) {
    for r in records {
        println!(
            "    N={:>9} cost={:>9} n={} s={} rmse={:.4e} se={:.2e}",
            r.budget, r.cost, r.n_or_levels, r.s_or_dims, r.rmse, r.stderr
        );
    }
}

fn powers(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|k| 1u64 << k).collect()
}

#[test]
fn criterion_1_multivariate_rate() {
    let mut cfg = SweepConfig::new(Regime::Fixed, 3.0, 0.1);
    cfg.anchor = 0.5;
    cfg.shape = Shape::Linear;
    cfg.reps = 32;
    cfg.seed = 1;
    cfg.criterion = Criterion::WorstCase;
    let recs = dimension_fixed_rates(&cfg, 10, 4..=12).unwrap();
    show(&recs);
    let fit = fit_slope(&recs).unwrap();
    let pass = fit.slope <= -1.35 && fit.r_squared >= 0.95;
    verdict("1", pass, &format!("slope {:.4} (<= -1.35), R^2 {:.4} (>= 0.95)", fit.slope, fit.r_squared));
    assert!(pass);
}

#[test]
fn criterion_2_fixed_subspace_rate() {
    let (alpha, eps) = (4.0, 0.1);
    let predicted = -(3.0 - eps) / 2.0 * (alpha - 1.0) / (alpha + 2.0 - eps);
    let mut cfg = SweepConfig::new(Regime::Fixed, alpha, eps);
    cfg.anchor = 0.0;
    cfg.seed = 2;
    let recs = sweep(&cfg, &powers(10, 22)).unwrap();
    show(&recs);
    let fit = fit_slope(&recs).unwrap();
    let pass = (fit.slope - predicted).abs() <= 0.15;
    verdict("2", pass, &format!("slope {:.4}, predicted {predicted:.4} +- 0.15", fit.slope));
    assert!(pass);
}

#[test]
fn criterion_3_multilevel_rate_low_alpha() {
    let (alpha, eps) = (6.0, 0.1);
    let predicted = -(3.0 - eps) / 2.0 * (alpha - 1.0) / 9.0;
    let mut cfg = SweepConfig::new(Regime::Multilevel, alpha, eps);
    cfg.anchor = 0.0;
    cfg.seed = 3;
    let recs = sweep(&cfg, &powers(12, 24)).unwrap();
    show(&recs);
    let fit = fit_slope(&recs).unwrap();
    let pass = fit.slope <= -0.65;
    verdict("3", pass, &format!("slope {:.4} (<= -0.65; predicted {predicted:.4})", fit.slope));
    assert!(pass);
}

#[test]
fn criterion_4_multilevel_beats_fixed() {
    let budget = [1u64 << 18, 1 << 20, 1 << 22];
    let mut fixed = SweepConfig::new(Regime::Fixed, 8.0, 0.1);
    fixed.anchor = 0.0;
    fixed.seed = 4;
    let mut ml = fixed.clone();
    ml.regime = Regime::Multilevel;
    let f = sweep(&fixed, &budget).unwrap();
    let m = sweep(&ml, &budget).unwrap();
    show(&f);
    show(&m);
    let (a, b) = (m.last().unwrap(), f.last().unwrap());
    let pass = a.rmse + 2.0 * a.stderr < b.rmse - 2.0 * b.stderr;
    verdict(
        "4",
        pass,
        &format!(
            "N = 2^22: multilevel {:.3e} +- {:.1e} vs fixed {:.3e} +- {:.1e} (2 se bands disjoint)",
            a.rmse,
            2.0 * a.stderr,
            b.rmse,
            2.0 * b.stderr
        ),
    );
    assert!(pass);
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    let left = (m - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + m)) + f(m));
    let right = (b - m) / 6.0 * (f(m) + 4.0 * f(0.5 * (m + b)) + f(b));
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, tol / 2.0, depth - 1) + simpson(f, m, b, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    simpson(f, a, b, 1e-14, 40)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

fn cube() -> WeightSequence<f64> {
    WeightSequence::power_law(1.0, 3.0).unwrap()
}

fn oracle_a() -> bool {
    let g = GeneratingVector::new(2, Poly::from_bits(0b111), vec![Poly::ONE, Poly::X]).unwrap();
    let ps = generate_points(&g, 2).unwrap();
    let pts: Vec<(f64, f64)> = (0..4).map(|i| (ps.value(i, 0), ps.value(i, 1))).collect();
    pts == vec![(0.0, 0.0), (0.25, 0.75), (0.75, 0.5), (0.5, 0.25)]
}

fn oracle_b() -> bool {
    let w = cube();
    let (g, _) = cbc_construct(2, 2, &w, Search::Full).unwrap();
    let p = find_irreducible(2).unwrap();
    let mut best = f64::INFINITY;
    for q1 in 1..4 {
        for q2 in 1..4 {
            let v = GeneratingVector::new(2, p, vec![Poly::from_bits(q1), Poly::from_bits(q2)]).unwrap();
            best = best.min(wce_squared(&generate_points(&v, 2).unwrap(), &w, 2).unwrap());
        }
    }
    let got = wce_squared(&generate_points(&g, 2).unwrap(), &w, 2).unwrap();
    (got - best).abs() < 1e-14
}

fn oracle_c() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gammas = [0.8, 0.35];
    let mut worst: f64 = 0.0;
    for s in 1..=2 {
        for _ in 0..20 {
            let words: Vec<u32> = (0..8 * s).map(|_| rng.gen_range(0..8)).collect();
            let ps = PointSet::from_digits(3, s, words).unwrap();
            let w = WeightSequence::explicit(gammas[..s].to_vec(), None).unwrap();
            let fast = wce_squared(&ps, &w, s).unwrap();
            let pts: Vec<Vec<f64>> = (0..8).map(|i| (0..s).map(|j| ps.value(i, j)).collect()).collect();
            let cross: f64 = pts
                .iter()
                .map(|x| {
                    (0..s).map(|j| integrate(&|y| 1.0 + gammas[j] * kernel(x[j], y), 0.0, 1.0)).product::<f64>()
                })
                .sum::<f64>()
                / 8.0;
            let double: f64 = pts
                .iter()
                .flat_map(|x| pts.iter().map(move |y| (x, y)))
                .map(|(x, y)| (0..s).map(|j| 1.0 + gammas[j] * kernel(x[j], y[j])).product::<f64>())
                .sum::<f64>()
                / 64.0;
            worst = worst.max((fast - (1.0 - 2.0 * cross + double)).abs());
        }
    }
    worst < 1e-10
}

fn oracle_d() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let centred = (0..100).all(|_| {
        let x: f64 = rng.gen();
        let v = integrate(&|y| kernel(x, y), 0.0, x) + integrate(&|y| kernel(x, y), x, 1.0);
        v.abs() < 1e-12
    });
    let bernoulli = (0..1000).all(|_| {
        let (x, y): (f64, f64) = (rng.gen(), rng.gen());
        let b = bernoulli1(x) * bernoulli1(y) + bernoulli2((x - y).abs()) / 2.0;
        (kernel_eval(x, y).unwrap() - b).abs() < 1e-15
    });
    let psd = (0..20).all(|_| {
        let pts: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
        let mut l = vec![vec![0.0f64; 10]; 10];
        for i in 0..10 {
            for j in 0..=i {
                let mut v = kernel(pts[i], pts[j]) + if i == j { 1e-10 } else { 0.0 };
                v -= l[i][..j].iter().zip(&l[j][..j]).map(|(a, b)| a * b).sum::<f64>();
                if i == j {
                    if v <= 0.0 {
                        return false;
                    }
                    l[i][j] = v.sqrt();
                } else {
                    l[i][j] = v / l[j][j];
                }
            }
        }
        true
    });
    centred && bernoulli && psd
}

fn oracle_e() -> bool {
    // telescoping with exact level integrals: affine factors integrate to their centre value
    let f = ProductIntegrand::new(cube(), Shape::Linear, Beta::default()).normalized().unwrap();
    let dims = [2usize, 4, 8, 16];
    let mut tele_ok = true;
    for a in [0.0, 0.25, 1.0] {
        let centre = vec![0.5; 16];
        let mut sum = 0.0;
        for (l, &s) in dims.iter().enumerate() {
            let fine = f.truncate(s, a).unwrap().eval(&centre);
            let coarse = if l == 0 { 0.0 } else { f.truncate(dims[l - 1], a).unwrap().eval(&centre) };
            sum += fine - coarse;
        }
        tele_ok &= (sum - f.truncated_integral(16, a).unwrap()).abs() < 1e-12;
    }
    // bias-variance split at a = 0
    let levels = vec![Level { s: 2, n: 32 }, Level { s: 4, n: 16 }, Level { s: 8, n: 8 }];
    let plan = MultilevelPlan::new(512, 6.0, 0.1, 0.0, levels.clone()).unwrap();
    let vecs: Vec<_> = levels.iter().map(|l| cbc_construct(l.m(), l.s, &cube(), Search::Full).unwrap().0).collect();
    let rule = MultilevelRule::new(&f, &plan, &vecs).unwrap();
    let exact = f.exact_integral().unwrap();
    let bias = exact - f.truncated_integral(8, 0.0).unwrap();
    let est: Vec<f64> = (0..1000).map(|r| rule.estimate(&ScrambleSpec::owen(12, r)).unwrap()).collect();
    let sq: Vec<f64> = est.iter().map(|q| (exact - q).powi(2)).collect();
    let (mse, se) = mean_se(&sq);
    let mean = est.iter().sum::<f64>() / 1000.0;
    let var = est.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / 1000.0;
    tele_ok && (mse - (bias * bias + var)).abs() < 5.0 * se
}

fn oracle_f() -> bool {
    let g = GeneratingVector::new(2, Poly::from_bits(0b111), vec![Poly::ONE, Poly::X]).unwrap();
    let mut ok = net_strength(&generate_points(&g, 2).unwrap()).unwrap() == 0;
    for m in 1..=8u32 {
        let p = find_irreducible(m).unwrap();
        for q in 1..(1u64 << m) {
            let v = GeneratingVector::new(m, p, vec![Poly::from_bits(q)]).unwrap();
            ok &= net_strength(&generate_points(&v, 1).unwrap()).unwrap() == 0;
        }
    }
    ok
}

fn oracle_g() -> bool {
    let f = ProductIntegrand::new(cube(), Shape::Quadratic, Beta::default()).normalized().unwrap();
    let g = cbc_construct(5, 4, &cube(), Search::Full).unwrap().0;
    let plan = FixedPlan::new(128, 32, 4, 0.0).unwrap();
    let rule = FixedRule::new(&f, &plan, &g).unwrap();
    let est: Vec<f64> = (0..1000).map(|r| rule.estimate(&ScrambleSpec::owen(13, r)).unwrap()).collect();
    let (m1, s1) = mean_se(&est);
    let fixed_ok = (m1 - f.truncated_integral(4, 0.0).unwrap()).abs() < 4.0 * s1;
    let levels = vec![Level { s: 2, n: 32 }, Level { s: 4, n: 8 }];
    let ml = MultilevelPlan::new(96, 6.0, 0.1, 0.0, levels.clone()).unwrap();
    let vecs: Vec<_> = levels.iter().map(|l| cbc_construct(l.m(), l.s, &cube(), Search::Full).unwrap().0).collect();
    let rule = MultilevelRule::new(&f, &ml, &vecs).unwrap();
    let est: Vec<f64> = (0..1000).map(|r| rule.estimate(&ScrambleSpec::owen(14, r)).unwrap()).collect();
    let (m2, s2) = mean_se(&est);
    fixed_ok && (m2 - f.truncated_integral(4, 0.0).unwrap()).abs() < 4.0 * s2
}

type OracleCheck = (&'static str, fn() -> bool);

#[test]
fn criterion_5_oracle_suite() {
    let checks: [OracleCheck; 7] = [
        ("a: m = 2 hand-computed points", oracle_a),
        ("b: CBC equals exhaustive search at m = 2, s = 2", oracle_b),
        ("c: double sum equals definitional form within 1e-10", oracle_c),
        ("d: kernel centring, Bernoulli form, PSD Gram", oracle_d),
        ("e: telescoping and bias-variance identities", oracle_e),
        ("f: net strength t = 0 (example, all s = 1 rules)", oracle_f),
        ("g: unbiasedness of fixed and multilevel estimators", oracle_g),
    ];
    let mut all = true;
    for (name, check) in checks {
        let ok = check();
        println!("    {} {name}", if ok { "ok  " } else { "FAIL" });
        all &= ok;
    }
    verdict("5", all, "oracle equivalence suite (a)-(g)");
    assert!(all);
}

#[test]
fn criterion_6_planner_compliance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = PlanTuning::default();
    let (mut fixed_n, mut ml_n, mut ok) = (0, 0, true);
    for _ in 0..3000 {
        let budget = (rng.gen_range(8.0f64..32.0)).exp2() as u64;
        let alpha = rng.gen_range(3.0..16.0);
        let eps = rng.gen_range(0.001..2.999);
        if let Ok(p) = plan_fixed(budget, alpha, eps, 0.5, &t) {
            fixed_n += 1;
            let cost = cost_fixed(&p);
            ok &= cost <= budget && 4 * cost >= budget;
            ok &= (p.raw_n * p.raw_s / budget as f64 - 1.0).abs() < 1e-9;
        }
        let eps_ml = rng.gen_range(0.0..1.0) * 6.0f64.min(alpha - 3.0);
        if let Ok(p) = plan_multilevel(budget, alpha, eps_ml, 0.5, &t) {
            ml_n += 1;
            ok &= cost_variable(&p) <= budget;
        }
    }
    let pass = ok && fixed_n > 2000 && ml_n > 2000;
    verdict("6", pass, &format!("{fixed_n} fixed and {ml_n} multilevel plans within budget; raw n s = N"));
    assert!(pass);
}
