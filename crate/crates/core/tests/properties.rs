use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trap_core::blockspace::{greedy_colors, DEFAULT_ACTIVE_TOL};
use trap_core::cauchy::{check_block_decrease, relative_error_bound, sufficient_decrease_bound};
use trap_core::fixtures::{BoxQp, QpSpec};
use trap_core::model::fd_gradient_error;
use trap_core::refine::regularised_model;
use trap_core::{
    active_set, cauchy_sweep, criticality, greedy_coloring, project_box, projected_gradient, scg_refine, trap_solve,
    BoxSet, CauchyParams, CommLedger, CouplingGraph, NlpProblem, Phase, QuadraticModel, RefineParams,
    RefineTermination, StepClass, TrapParams,
};

fn fixture(seed: u64, colors: usize, convex: bool) -> (BoxQp, trap_core::Partition, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = QpSpec {
        num_nodes: rng.gen_range(colors..=12),
        max_node_size: 3,
        colors,
        edge_prob: 0.5,
        convex,
        bounded_frac: 0.7,
    };
    let (qp, part) = BoxQp::random(&mut rng, &spec).unwrap();
    (qp, part, rng)
}

fn boxes(n: usize, rng: &mut ChaCha8Rng) -> BoxSet {
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for _ in 0..n {
        match rng.gen_range(0..4) {
            0 => {
                lo.push(f64::NEG_INFINITY);
                hi.push(f64::INFINITY);
            }
            1 => {
                lo.push(rng.gen_range(-2.0..0.0));
                hi.push(f64::INFINITY);
            }
            2 => {
                let v = rng.gen_range(-1.0..1.0);
                lo.push(v);
                hi.push(v);
            }
            _ => {
                let l = rng.gen_range(-2.0..0.0);
                lo.push(l);
                hi.push(l + rng.gen_range(0.1..3.0));
            }
        }
    }
    BoxSet::new(lo, hi).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_idempotent_and_nonexpansive(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = boxes(n, &mut rng);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let px = project_box(&x, &b).unwrap();
        let py = project_box(&y, &b).unwrap();
        prop_assert_eq!(project_box(&px, &b).unwrap(), px.clone());
        prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-15);
    }

    #[test]
    fn criticality_zero_iff_projected_gradient_zero(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = boxes(n, &mut rng);
        let mut x = b.lower().iter().zip(b.upper()).map(|(&l, &u)| {
            match rng.gen_range(0..3) {
                0 if l.is_finite() => l,
                1 if u.is_finite() => u,
                _ => rng.gen_range(l.max(-3.0)..=u.min(3.0)),
            }
        }).collect::<Vec<_>>();
        b.project_in_place(&mut x).unwrap();
        // Gradients that vanish or push into active bounds make x critical.
        let g: Vec<f64> = (0..n).map(|i| {
            let at_lo = x[i] == b.lower()[i];
            let at_hi = x[i] == b.upper()[i];
            match rng.gen_range(0..3) {
                0 => 0.0,
                1 if at_lo => rng.gen_range(0.1..2.0),
                1 if at_hi => -rng.gen_range(0.1..2.0),
                _ => rng.gen_range(-2.0..2.0),
            }
        }).collect();
        let c = criticality(&x, &g, &b).unwrap();
        let pg = projected_gradient(&x, &g, &b).unwrap();
        let pg_zero = pg.iter().all(|&v| v == 0.0);
        prop_assert_eq!(c == 0.0, pg_zero);
    }

    #[test]
    fn greedy_colouring_is_valid_and_two_on_trees(seed in any::<u64>(), n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
        let g = CouplingGraph::new(n, tree).unwrap();
        let p = greedy_coloring(&g, vec![1; n]).unwrap();
        p.validate_against(&g).unwrap();
        prop_assert_eq!(p.num_colors(), 2);

        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(0.2) {
                    edges.push((a, b));
                }
            }
        }
        let g = CouplingGraph::new(n, edges).unwrap();
        let c1 = greedy_colors(&g);
        prop_assert_eq!(&c1, &greedy_colors(&g));
        greedy_coloring(&g, vec![2; n]).unwrap().validate_against(&g).unwrap();
    }

    #[test]
    fn hessian_product_symmetric_and_pattern_exact(seed in any::<u64>(), colors in 1usize..=3) {
        let (qp, _, mut rng) = fixture(seed, colors, false);
        let n = qp.dim();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = &qp.hessian;
        let hu = h.hess_vec(&u).unwrap();
        let hv = h.hess_vec(&v).unwrap();
        let a: f64 = u.iter().zip(&hv).map(|(p, q)| p * q).sum();
        let b: f64 = hu.iter().zip(&v).map(|(p, q)| p * q).sum();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        let dense = h.to_dense();
        let dv = &dense * nalgebra::DVector::from_vec(v.clone());
        for i in 0..n {
            prop_assert!((dv[i] - hv[i]).abs() <= 1e-14 * (1.0 + hv[i].abs()) * n as f64);
        }
        let pattern = qp.hessian_matrix(&u).unwrap().nonzero_coupling().unwrap();
        prop_assert_eq!(pattern.edges().collect::<Vec<_>>(), qp.coupling().edges().collect::<Vec<_>>());
    }

    #[test]
    fn model_gradient_consistent_with_fd(seed in any::<u64>()) {
        let (qp, _, mut rng) = fixture(seed, 2, false);
        let x = qp.random_point(&mut rng);
        let m = QuadraticModel::from_problem(&qp, &x).unwrap();
        let xp: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
        let g = m.gradient_at(&xp).unwrap();
        prop_assert!(fd_gradient_error(|y| m.eval(y).unwrap(), &g, &xp) <= 1e-6);
    }

    #[test]
    fn cauchy_sweep_invariants(seed in any::<u64>(), colors in 1usize..=3, convex in any::<bool>()) {
        let (qp, part, mut rng) = fixture(seed, colors, convex);
        let x = qp.random_point(&mut rng);
        let m = QuadraticModel::from_problem(&qp, &x).unwrap();
        let delta = rng.gen_range(0.05..3.0);
        let prm = CauchyParams::default();
        let r = cauchy_sweep(&m, qp.bounds(), &part, delta, &prm, None).unwrap();
        prop_assert!(qp.bounds().contains(&r.z, 0.0));

        let floor = prm.nu3.powi(prm.max_backtracks as i32) * prm.nu4;
        prop_assert!(r.alphas.iter().all(|&a| a >= floor && a <= prm.nu5));

        // Per-colour sufficient decrease at the mixed point, and the model
        // is non-increasing along the sweep.
        let mut mixed = x.clone();
        let mut prev = m.eval(&mixed).unwrap();
        for k in 0..part.num_colors() {
            let idx = part.color_indices(k);
            let zk: Vec<f64> = idx.iter().map(|&j| r.z[j]).collect();
            prop_assert!(check_block_decrease(&m, &part, k, &zk, &mixed, delta, &prm).unwrap());
            for (&j, &v) in idx.iter().zip(&zk) {
                mixed[j] = v;
            }
            let now = m.eval(&mixed).unwrap();
            prop_assert!(now <= prev + 1e-12 * (1.0 + prev.abs()));
            prev = now;
        }
        prop_assert_eq!(&mixed, &r.z);

        let bound = sufficient_decrease_bound(&r, &m, &part, delta, &prm);
        prop_assert!(r.decrease >= bound * (1.0 - 1e-12) - 1e-14);

        let gz = qp.gradient_vec(&r.z);
        let pg = projected_gradient(&r.z, &gz, qp.bounds()).unwrap();
        let pg_norm = pg.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = relative_error_bound(&r, &m, &part, &gz).unwrap();
        prop_assert!(pg_norm <= rel * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn refinement_contracts(seed in any::<u64>(), colors in 1usize..=3, convex in any::<bool>(), precondition in any::<bool>()) {
        let (qp, part, mut rng) = fixture(seed, colors, convex);
        let x = qp.random_point(&mut rng);
        let m = QuadraticModel::from_problem(&qp, &x).unwrap();
        let delta = rng.gen_range(0.05..3.0);
        let c = cauchy_sweep(&m, qp.bounds(), &part, delta, &CauchyParams::default(), None).unwrap();
        let prm = RefineParams { precondition, ..RefineParams::default() };
        let r = scg_refine(&m, qp.bounds(), &part, &c, delta, &prm, None).unwrap();
        prop_assert!(qp.bounds().contains(&r.y, 0.0));
        let step = r.y.iter().zip(&x).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        prop_assert!(step <= prm.gamma2 * delta * (1.0 + 1e-12));
        let ay = active_set(&r.y, qp.bounds(), DEFAULT_ACTIVE_TOL);
        prop_assert!(c.active.is_subset_of(&ay));
        let my = m.decrease(&r.y).unwrap();
        prop_assert!(my >= prm.gamma1 * c.decrease - 1e-12 * (1.0 + c.decrease.abs()));
        if r.termination == RefineTermination::Converged && !r.fell_back {
            if let Some(&last) = r.residuals.last() {
                prop_assert!(last <= r.tolerance || r.tolerance == 0.0);
            }
        }
        // The regularised model is no worse at y than at z.
        let (gs, apply) = regularised_model(&m, &c.z, prm.sigma);
        let q = |p: &[f64]| {
            let d: Vec<f64> = p.iter().zip(&x).map(|(a, b)| a - b).collect();
            let bd = apply(&d);
            d.iter().zip(&gs).map(|(a, g)| a * g).sum::<f64>()
                + 0.5 * d.iter().zip(&bd).map(|(a, b)| a * b).sum::<f64>()
        };
        let (qz, qy) = (q(&c.z), q(&r.y));
        prop_assert!(qy <= qz + 1e-10 * (1.0 + qz.abs()) || r.fell_back);
    }

    #[test]
    fn driver_iterates_feasible_and_monotone(seed in any::<u64>(), colors in 1usize..=3, convex in any::<bool>()) {
        let (qp, part, mut rng) = fixture(seed, colors, convex);
        let x0 = qp.random_point(&mut rng);
        let prm = TrapParams { record_iterates: true, max_iters: 60, ..TrapParams::default() };
        let rep = trap_solve(&qp, &x0, &part, &prm, None).unwrap();
        for w in rep.iterates.windows(2) {
            prop_assert!(qp.bounds().contains(&w[1], 0.0));
        }
        for (i, rec) in rep.records.iter().enumerate() {
            let (before, after) = (&rep.iterates[i], &rep.iterates[i + 1]);
            if rec.class == StepClass::Rejected {
                prop_assert_eq!(before, after);
            } else {
                let lb = qp.value(before);
                let la = qp.value(after);
                prop_assert!(la <= lb - prm.eta1 * rec.m_dec + 1e-12 * (1.0 + lb.abs()));
            }
        }
    }

    #[test]
    fn radius_rules(rho in -5.0f64..5.0, delta in 1e-6f64..1e3) {
        let prm = TrapParams::default();
        let (class, next) = prm.classify(rho, delta);
        if rho < prm.eta1 {
            prop_assert_eq!(class, StepClass::Rejected);
            prop_assert!(next >= prm.sigma1 * delta && next <= prm.sigma2 * delta);
        } else if rho <= prm.eta2 {
            prop_assert_eq!(class, StepClass::Successful);
            prop_assert!(next >= prm.sigma2 * delta && next <= delta);
        } else {
            prop_assert_eq!(class, StepClass::VerySuccessful);
            prop_assert!(next >= delta && next <= prm.sigma3 * delta);
        }
    }

    #[test]
    fn ledger_deterministic_and_cauchy_local(seed in any::<u64>(), colors in 1usize..=3) {
        let (qp, part, mut rng) = fixture(seed, colors, true);
        let x0 = qp.random_point(&mut rng);
        let prm = TrapParams { max_iters: 30, ..TrapParams::default() };
        let run = || {
            let mut l = CommLedger::new(qp.coupling().clone());
            trap_solve(&qp, &x0, &part, &prm, Some(&mut l)).unwrap();
            l
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.to_csv(), b.to_csv());
        let cauchy = a.phase_totals(Phase::Cauchy);
        prop_assert_eq!(cauchy.reductions, 0);
        prop_assert_eq!(cauchy.broadcasts, 0);
    }
}

#[test]
fn projections_handle_infinite_bounds() {
    let b = BoxSet::new(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY, f64::INFINITY]).unwrap();
    assert_eq!(project_box(&[-1e300, -1.0], &b).unwrap(), vec![-1e300, 0.0]);
    let a = active_set(&[-1e300, 0.0], &b, DEFAULT_ACTIVE_TOL);
    assert!(!a.contains(0) && a.contains(1));
}
