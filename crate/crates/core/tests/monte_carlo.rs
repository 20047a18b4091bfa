use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skbm::bernstein::catalog;
use skbm::domain::{dist, Domain};
use skbm::heat::HeatKernelEval;
use skbm::mc::rng::derive_seed;
use skbm::mc::*;
use skbm::quad::{integrate, QuadOptions};

fn adaptive(n: usize, seed: u64, fraction: f64) -> PathConfig {
    PathConfig {
        n_paths: n,
        h: 1.0,
        seed,
        step_rule: StepRule::Adaptive { fraction, min_length: 1e-4 },
        ..Default::default()
    }
}

#[test]
fn killed_bm_survival_matches_heat_kernel() {
    let cases: [(Domain, Vec<(Vec<f64>, f64)>); 2] = [
        (
            Domain::half_space(3).unwrap(),
            vec![
                (vec![0.0, 0.0, 0.05], 0.01),
                (vec![0.0, 0.0, 0.1], 0.1),
                (vec![1.0, 0.0, 0.3], 0.05),
                (vec![0.0, 2.0, 0.5], 1.0),
                (vec![0.0, 0.0, 1.0], 0.2),
                (vec![0.0, 0.0, 0.2], 2.0),
                (vec![3.0, 0.0, 0.02], 0.001),
                (vec![0.0, 0.0, 0.7], 0.3),
                (vec![0.0, 0.0, 1.5], 5.0),
                (vec![0.0, 0.0, 0.4], 0.04),
            ],
        ),
        (
            Domain::cuboid(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 1.0]).unwrap(),
            vec![
                (vec![0.5, 1.0, 0.5], 0.05),
                (vec![0.5, 1.0, 0.5], 0.2),
                (vec![0.1, 1.0, 0.5], 0.02),
                (vec![0.1, 0.1, 0.1], 0.01),
                (vec![0.9, 1.9, 0.5], 0.05),
                (vec![0.5, 0.5, 0.5], 0.1),
                (vec![0.3, 1.5, 0.7], 0.08),
                (vec![0.5, 1.0, 0.02], 0.003),
                (vec![0.2, 0.2, 0.8], 0.15),
                (vec![0.5, 1.0, 0.5], 0.01),
            ],
        ),
    ];
    for (dom, pairs) in &cases {
        let h = HeatKernelEval::new(dom).unwrap();
        for (i, (x, t)) in pairs.iter().enumerate() {
            let exact = h.survival_probability(*t, x).unwrap();
            let est = killed_bm_survival(dom, x, *t, 8, 100_000, 100 + i as u64).unwrap();
            let z = (est.mean - exact) / est.se.max(1e-12);
            assert!(z.abs() < 4.0, "{:?} x={x:?} t={t}: {} vs {exact}", dom.kind, est.mean);
        }
    }
}

/// Strong Markov property at an intermediate ball: restarting from the exit
/// distribution of `V ⊂ U` reproduces the harmonic function on `U`.
#[test]
fn harmonic_function_restarts_consistently() {
    let f = catalog("stable:0.5").unwrap();
    let dom = Domain::half_space(3).unwrap();
    let c = vec![0.0, 0.0, 1.0];
    let u = Region::Set(Domain::ball(c.clone(), 0.6).unwrap());
    let v = Region::Set(Domain::ball(c.clone(), 0.3).unwrap());
    let x = vec![0.1, 0.0, 1.0];
    let g = |o: &Outcome| o.exit_point().map_or(0.0, |z| f64::from(z[0] > 0.0));
    let n = 20_000;
    let direct = estimate_harmonic(&dom, &u, &f, &g, std::slice::from_ref(&x), &adaptive(n, 1, 0.1), None).unwrap()[0].value;

    let first = simulate_exit(&dom, &v, &f, &x, &adaptive(n, 2, 0.1), Process::Killed).unwrap();
    let w = Walker::new(&dom, &u, &f, &adaptive(1, 0, 0.1), Process::Killed).unwrap();
    let vals: Vec<f64> = first
        .records
        .iter()
        .map(|r| match &r.outcome {
            Outcome::ExitedTo { z } if u.contains(z) => {
                let (v, _) = harmonic_values(&w, z, derive_seed(3, r.path_id), &[&g]).unwrap();
                v[0].mean
            }
            o => g(o),
        })
        .collect();
    let restarted = MeanEstimate::from_samples(&vals);
    let z = z_score(&direct, &restarted);
    assert!(z < 3.0, "direct {direct:?} restarted {restarted:?}");
    assert!(direct.mean > 0.2 && direct.mean < 0.8);
}

#[test]
fn exits_are_symmetric_parallel_to_the_boundary() {
    let f = catalog("stable:0.5").unwrap();
    let dom = Domain::half_space(3).unwrap();
    let c = vec![0.0, 0.0, 0.8];
    let u = Region::Set(Domain::ball(c.clone(), 0.5).unwrap());
    let e = simulate_exit(&dom, &u, &f, &c, &adaptive(40_000, 5, 0.1), Process::Killed).unwrap();
    for axis in [0, 1] {
        let right: Vec<f64> = e
            .records
            .iter()
            .map(|r| r.outcome.exit_point().map_or(0.0, |z| f64::from(z[axis] > 0.0)))
            .collect();
        let left: Vec<f64> = e
            .records
            .iter()
            .map(|r| r.outcome.exit_point().map_or(0.0, |z| f64::from(z[axis] < 0.0)))
            .collect();
        let (a, b) = (MeanEstimate::from_samples(&right), MeanEstimate::from_samples(&left));
        // the two indicators are negatively correlated; z_score treats them as independent,
        // which only makes the check stricter on the mean difference
        assert!((a.mean - b.mean).abs() < 4.0 * (a.se * a.se + b.se * b.se).sqrt(), "axis {axis}: {a:?} {b:?}");
    }
    // toward the boundary the killed process exits less often than away from it
    let up = e.exit_points().filter(|z| z[2] > c[2]).count();
    let down = e.exit_points().filter(|z| z[2] < c[2]).count();
    assert!(down < up);
}

/// Exit points have no atom on `∂U`: the mass within `ε` shrinks like a power
/// of `ε`, and it does not change once the step is fine.
#[test]
fn no_accumulation_on_the_exit_boundary() {
    let f = catalog("stable:0.5").unwrap();
    let dom = Domain::half_space(3).unwrap();
    let c = vec![0.0, 0.0, 2.0];
    let u = Region::Set(Domain::ball(c.clone(), 0.5).unwrap());
    let mut near = vec![];
    for (i, frac) in [0.05, 0.01].into_iter().enumerate() {
        let e = simulate_exit(&dom, &u, &f, &c, &adaptive(20_000, 7 + i as u64, frac), Process::Killed).unwrap();
        let gap: Vec<f64> = e.exit_points().map(|z| dist(z, &c) - 0.5).collect();
        assert!(gap.iter().all(|&s| s > 0.0));
        let frac_within = |eps: f64| {
            let v: Vec<f64> = gap.iter().map(|&s| f64::from(s < eps * u.diameter())).collect();
            MeanEstimate::from_samples(&v)
        };
        let (a, b) = (frac_within(1e-3), frac_within(1e-2));
        assert!(b.mean > 2.0 * a.mean, "{a:?} {b:?}");
        assert!(frac_within(1e-5).mean < 0.5 * a.mean);
        near.push(a);
    }
    assert!(z_score(&near[0], &near[1]) < 3.0, "{near:?}");
}

/// The first step from `x` lands in a far set `A = {z₁ > s}` with probability
/// `≈ h ∫ μ(t) P_x(W^D_t ∈ A) dt = h ∫ J^{Y^D}(x, z) dz`.
#[test]
fn first_step_follows_the_jump_kernel() {
    let f = catalog("stable:0.5").unwrap();
    let dom = Domain::half_space(3).unwrap();
    let heat = HeatKernelEval::new(&dom).unwrap();
    let x = [0.0, 0.0, 2.0];
    let (s, h, n) = (1.0, 1e-2, 1_000_000);
    let mass = |t: f64| 0.5 * libm::erfc(s / (2.0 * t.sqrt())) * heat.survival_probability(t, &x).unwrap();
    let integrand = |u: f64| {
        let t = u.exp();
        f.mu(t) * mass(t) * t
    };
    let rate = integrate(integrand, (1e-3f64).ln(), (1e10f64).ln(), &QuadOptions::with_rel_tol(1e-8)).unwrap().value;
    let sampler = SubordinatorSampler::new(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut hits = 0usize;
    for _ in 0..n {
        let ds = sampler.sample(h, &mut rng);
        if let Some(y) = step_with_killing(&dom, &x, ds, &mut rng).unwrap() {
            if y[0] > s {
                hits += 1;
            }
        }
    }
    assert!(hits > 1000, "{hits}");
    let p = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!(((p - h * rate) / se).abs() < 4.0, "{p} ± {se} vs {}", h * rate);
}

#[test]
fn killing_inside_small_balls_is_resolved() {
    let f = catalog("stable:0.5").unwrap();
    let dom = Domain::half_space(3).unwrap();
    let xs = vec![vec![0.0, 0.0, 0.1], vec![0.0, 0.0, 0.5]];
    let rep = estimate_delta_star(&dom, &f, &xs, &adaptive(20_000, 4, 0.1)).unwrap();
    let ds = rep.get("delta_star").unwrap();
    assert!(rep.pass && ds > 0.0 && ds < 1.0, "{:?}", rep.constants);
}

#[test]
fn ensembles_are_reproducible_and_seed_dependent() {
    let f = catalog("gamma").unwrap();
    let dom = Domain::cuboid(vec![0.0; 3], vec![1.0; 3]).unwrap();
    let u = Region::Set(Domain::ball(vec![0.5; 3], 0.3).unwrap());
    let cfg = adaptive(2000, 11, 0.2);
    let a = simulate_exit(&dom, &u, &f, &[0.5; 3], &cfg, Process::Killed).unwrap();
    let b = simulate_exit(&dom, &u, &f, &[0.5; 3], &cfg, Process::Killed).unwrap();
    let c = simulate_exit(&dom, &u, &f, &[0.5; 3], &cfg.with_seed(12), Process::Killed).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.records, c.records);
    let csv = a.to_csv(3);
    assert!(csv.starts_with("path_id,outcome,z1,z2,z3,steps\n"));
    assert_eq!(csv.lines().count(), 2001);
}
