use trap_core::fixtures::LinearEqualityQp;
use trap_core::{
    auglag_oracle, auglag_outer, lancelot_outer, trap_solve, BoxSet, CommLedger, CouplingGraph, EqualityNlp,
    LancelotParams, NlpProblem, OuterParams, OuterTermination, Partition, TrapParams,
};

fn distinct(n: usize) -> Partition {
    Partition::new(vec![1; n], (0..n).collect()).unwrap()
}

fn tight() -> OuterParams {
    OuterParams {
        outer_tol: 1e-10,
        inner: TrapParams {
            epsilon: 1e-10,
            ..TrapParams::default()
        },
        ..OuterParams::default()
    }
}

#[test]
fn sum_to_one_reaches_closed_form() {
    for n in [1, 3, 7] {
        let qp = LinearEqualityQp::sum_to_one(n);
        let part = distinct(n);
        let rep = auglag_outer(&qp, &vec![0.0; n], &part, &tight(), None).unwrap();
        assert_eq!(rep.termination, OuterTermination::Converged);
        for &v in &rep.x {
            assert!((v - 1.0 / n as f64).abs() <= 1e-8);
        }
        assert!((rep.mu[0] + 1.0 / n as f64).abs() <= 1e-8);
    }
}

#[test]
fn lancelot_matches_plain_loop() {
    let n = 5;
    let qp = LinearEqualityQp::sum_to_one(n);
    let part = distinct(n);
    let x0 = vec![0.3; n];
    let a = auglag_outer(&qp, &x0, &part, &tight(), None).unwrap();
    let b = lancelot_outer(&qp, &x0, &part, &tight(), &LancelotParams::default(), None).unwrap();
    for (p, q) in a.x.iter().zip(&b.x) {
        assert!((p - q).abs() <= 1e-8);
    }
}

#[test]
fn optimal_start_takes_one_outer_iteration() {
    let n = 4;
    let qp = LinearEqualityQp::sum_to_one(n);
    let part = distinct(n);
    let params = OuterParams {
        mu0: Some(vec![-0.25]),
        ..OuterParams::default()
    };
    let rep = auglag_outer(&qp, &[0.25; 4], &part, &params, None).unwrap();
    assert_eq!(rep.rows.len(), 1);
    assert!(rep.constraint_norm <= params.outer_tol);
}

#[test]
fn feasible_start_takes_multiplier_branch_first() {
    let n = 4;
    let qp = LinearEqualityQp::sum_to_one(n);
    let part = distinct(n);
    let rep = lancelot_outer(&qp, &[0.25; 4], &part, &OuterParams::default(), &LancelotParams::default(), None).unwrap();
    assert!(rep.rows[0].multiplier_update);
    assert_eq!(rep.rows[0].rho, OuterParams::default().rho0);
}

#[test]
fn updated_multipliers_inherit_inner_gradient() {
    let qp = LinearEqualityQp::new(
        BoxSet::new(vec![0.2, f64::NEG_INFINITY, f64::NEG_INFINITY], vec![f64::INFINITY; 3]).unwrap(),
        vec![1.0, -0.5, 0.3],
        vec![vec![(0, 1.0), (1, 1.0)], vec![(1, 1.0), (2, -2.0)]],
        vec![1.0, 0.5],
    );
    let part = distinct(3);
    let params = OuterParams {
        max_outer: 2,
        ..OuterParams::default()
    };
    let rep = auglag_outer(&qp, &[0.5, 0.5, 0.0], &part, &params, None).unwrap();
    let last = rep.rows.last().unwrap();
    let rho_used = last.rho;
    let c = qp.constraint_vec(&rep.x);
    let mu_before: Vec<f64> = rep.mu.iter().zip(&c).map(|(m, ci)| m - rho_used * ci).collect();
    let oracle = auglag_oracle(&qp, mu_before, rho_used).unwrap();
    let inner_grad = oracle.gradient_vec(&rep.x);
    let mut lag = vec![0.0; 3];
    qp.objective_gradient(&rep.x, &mut lag);
    for (j, row) in qp.rows.iter().enumerate() {
        for &(col, a) in row {
            lag[col] += a * rep.mu[j];
        }
    }
    for (p, q) in lag.iter().zip(&inner_grad) {
        assert!((p - q).abs() <= 1e-12);
    }
}

#[test]
fn constraint_norm_settles_over_last_outer_iterations() {
    let qp = LinearEqualityQp::new(
        BoxSet::uniform(4, -2.0, 2.0).unwrap(),
        vec![0.5, -1.0, 0.25, 0.0],
        vec![vec![(0, 1.0), (1, 2.0)], vec![(2, 1.0), (3, -1.0), (1, 0.5)]],
        vec![0.7, -0.2],
    );
    let part = distinct(4);
    let rep = auglag_outer(&qp, &[0.0; 4], &part, &tight(), None).unwrap();
    let cn: Vec<f64> = rep.rows.iter().map(|r| r.constraint_norm).collect();
    let tail = &cn[cn.len().saturating_sub(3)..];
    for w in tail.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn critical_start_leaves_ledger_empty() {
    let qp = LinearEqualityQp::sum_to_one(2);
    let o = auglag_oracle(&qp, vec![-0.5], 10.0).unwrap();
    let part = distinct(2);
    let mut ledger = CommLedger::new(CouplingGraph::new(2, [(0, 1)]).unwrap());
    let rep = trap_solve(&o, &[0.5, 0.5], &part, &TrapParams::default(), Some(&mut ledger)).unwrap();
    assert_eq!(rep.iterations, 0);
    assert!(ledger.is_empty());
}

#[test]
fn table_schema_has_five_columns() {
    let qp = LinearEqualityQp::sum_to_one(3);
    let part = distinct(3);
    let rep = auglag_outer(&qp, &[0.0; 3], &part, &OuterParams::default(), None).unwrap();
    let csv = rep.table_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "Outer iter. count,# inner it.,# cum. sCG,Inner KKT,PF eq. constr."
    );
    for l in lines {
        assert_eq!(l.split(',').count(), 5);
    }
}
