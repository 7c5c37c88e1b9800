use basis_lp::{check_kkt, solve, BasisStatus, ColId, LpProblem, PivotRule, Sense, SolveOptions, SolveStatus};
use proptest::prelude::*;

/// Four hours, one thermal (24/MWh, 1000 MW) and one wind unit (3/MWh) on a single bus.
fn four_hour_dispatch(ramp: Option<f64>) -> (LpProblem, Vec<ColId>, Vec<basis_lp::RowId>) {
    let demand = [170.2, 176.0, 281.7, 391.0];
    let wind = [40.0, 5.0, 15.7, 20.0];
    let mut p = LpProblem::new();
    let mut thermal = Vec::new();
    let mut balance = Vec::new();
    for k in 0..4 {
        let t = p.add_col(format!("p[g=T,k={}]", k + 1), 24.0, 0.0, 1000.0);
        let w = p.add_col(format!("p[g=W,k={}]", k + 1), 3.0, 0.0, wind[k]);
        let n = p.add_col(format!("nsp[k={}]", k + 1), 5000.0, 0.0, f64::INFINITY);
        balance.push(p.add_row(format!("balance[k={}]", k + 1), [(t, 1.0), (w, 1.0), (n, 1.0)], Sense::Eq, demand[k]));
        thermal.push(t);
    }
    if let Some(r) = ramp {
        for k in 1..4 {
            let (a, b) = (thermal[k - 1], thermal[k]);
            p.add_row(format!("rampup[k={}]", k + 1), [(b, 1.0), (a, -1.0)], Sense::Le, r);
            p.add_row(format!("rampdown[k={}]", k + 1), [(a, 1.0), (b, -1.0)], Sense::Le, r);
        }
    }
    (p, thermal, balance)
}

#[test]
fn four_hour_dispatch_without_ramping() {
    let (p, thermal, balance) = four_hour_dispatch(None);
    let r = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    let want_t = [130.2, 171.0, 266.0, 371.0];
    for k in 0..4 {
        assert!((r.value(thermal[k]) - want_t[k]).abs() < 1e-6);
        assert!((r.dual(balance[k]) - 24.0).abs() < 1e-6);
    }
    assert!(check_kkt(&p, &r).unwrap().pass);
}

/// With a ramp limit of 100 the optimal primal is unique but the duals are not: wind is
/// strictly inside its bounds in hour 3 (so its balance dual is 3), and the optimal dual set
/// is `y1 = 24, y3 = 3, y2 + y4 = 69, 3 <= y2 <= 24`.
#[test]
fn four_hour_dispatch_with_ramping() {
    let (p, thermal, balance) = four_hour_dispatch(Some(100.0));
    for split in [true, false] {
        let r = solve(&p, &SolveOptions { split_blocks: split, ..Default::default() }).unwrap();
        let want_t = [130.2, 171.0, 271.0, 371.0];
        for k in 0..4 {
            assert!((r.value(thermal[k]) - want_t[k]).abs() < 1e-6, "thermal hour {k}");
        }
        let y: Vec<f64> = balance.iter().map(|&b| r.dual(b)).collect();
        assert!((y[0] - 24.0).abs() < 1e-6);
        assert!((y[2] - 3.0).abs() < 1e-6);
        assert!((y[1] + y[3] - 69.0).abs() < 1e-6);
        assert!(y[1] >= 3.0 - 1e-6 && y[1] <= 24.0 + 1e-6);
        let kkt = check_kkt(&p, &r).unwrap();
        assert!(kkt.pass, "{kkt:?}");
    }
}

#[test]
fn hour_three_price_of_45_is_not_dual_feasible() {
    let (p, _, balance) = four_hour_dispatch(Some(100.0));
    let mut r = solve(&p, &SolveOptions::default()).unwrap();
    r.row_duals[balance[2].0] = 45.0;
    assert!(!check_kkt(&p, &r).unwrap().pass);
}

#[test]
fn duplicated_constraint_still_certifies() {
    let mut p = LpProblem::new();
    let x = p.add_col("x", 1.0, 0.0, 10.0);
    let y = p.add_col("y", 2.0, 0.0, 10.0);
    p.add_row("a", [(x, 1.0), (y, 1.0)], Sense::Ge, 4.0);
    p.add_row("b", [(x, 1.0), (y, 1.0)], Sense::Ge, 4.0);
    let r = solve(&p, &SolveOptions::default()).unwrap();
    assert!((r.objective - 4.0).abs() < 1e-12);
    // Duals split between the copies in some way; the sum is what is determined.
    assert!((r.row_duals[0] + r.row_duals[1] - 1.0).abs() < 1e-12);
    assert!(check_kkt(&p, &r).unwrap().pass);
}

#[test]
fn perturbed_dual_is_caught() {
    let (p, _, balance) = four_hour_dispatch(Some(100.0));
    let mut r = solve(&p, &SolveOptions::default()).unwrap();
    r.row_duals[balance[2].0] += 1.0;
    let kkt = check_kkt(&p, &r).unwrap();
    assert!(kkt.dual_residual >= 1.0 - 1e-12);
    assert!(!kkt.pass);
}

#[test]
fn kkt_rejects_mismatched_dimensions() {
    let (p, _, _) = four_hour_dispatch(None);
    let mut r = solve(&p, &SolveOptions::default()).unwrap();
    r.primal.pop();
    assert!(check_kkt(&p, &r).is_err());
}

#[test]
fn repeated_solves_are_identical() {
    let (p, _, _) = four_hour_dispatch(Some(100.0));
    let a = solve(&p, &SolveOptions::default()).unwrap();
    let b = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.col_status, b.col_status);
}

#[test]
fn bland_rule_reaches_the_same_optimum() {
    let (p, _, _) = four_hour_dispatch(Some(100.0));
    let d = solve(&p, &SolveOptions::default()).unwrap();
    let b = solve(&p, &SolveOptions { pivot_rule: PivotRule::Bland, ..Default::default() }).unwrap();
    assert!((d.objective - b.objective).abs() < 1e-9 * d.objective);
    assert!(check_kkt(&p, &b).unwrap().pass);
}

/// Long ramp-linked horizon: exercises refactorization and the eta file.
#[test]
fn long_staircase_problem_certifies() {
    let hours = 600;
    let mut p = LpProblem::new();
    let mut prev: Option<ColId> = None;
    let mut state = 12345u64;
    let mut rnd = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for k in 0..hours {
        let d = 300.0 + 250.0 * ((k as f64) * std::f64::consts::TAU / 24.0).sin() + 80.0 * rnd();
        let cap = 500.0 * rnd();
        let t = p.add_col(format!("t{k}"), 24.0, 0.0, 1000.0);
        let w = p.add_col(format!("w{k}"), 3.0, 0.0, cap);
        let n = p.add_col(format!("n{k}"), 5000.0, 0.0, f64::INFINITY);
        p.add_row(format!("b{k}"), [(t, 1.0), (w, 1.0), (n, 1.0)], Sense::Eq, d);
        if let Some(a) = prev {
            p.add_row(format!("ru{k}"), [(t, 1.0), (a, -1.0)], Sense::Le, 60.0);
            p.add_row(format!("rd{k}"), [(a, 1.0), (t, -1.0)], Sense::Le, 60.0);
        }
        prev = Some(t);
    }
    let r = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.diagnostics.refactorizations > 1);
    let kkt = check_kkt(&p, &r).unwrap();
    assert!(kkt.pass, "{kkt:?}");
    let basic = r.col_status.iter().chain(&r.row_status).filter(|s| **s == BasisStatus::Basic).count();
    assert_eq!(basic, p.n_rows());
}

/// Brute-force vertex enumeration for tiny boxed LPs: every vertex is the solution of
/// `n` tight constraints chosen among rows and bounds.
fn brute_force(p: &LpProblem) -> Option<f64> {
    let n = p.n_cols();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in p.rows() {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            a[j] = v;
        }
        planes.push((a, row.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), p.lower()[j]));
        planes.push((e, p.upper()[j]));
    }
    let feasible = |x: &[f64]| {
        let act = p.row_activity(x);
        p.rows().iter().zip(&act).all(|(r, &a)| match r.sense {
            Sense::Le => a <= r.rhs + 1e-7,
            Sense::Ge => a >= r.rhs - 1e-7,
            Sense::Eq => (a - r.rhs).abs() <= 1e-7,
        }) && (0..n).all(|j| x[j] >= p.lower()[j] - 1e-7 && x[j] <= p.upper()[j] + 1e-7)
    };
    let mut best: Option<f64> = None;
    let mut idx = vec![0usize; n];
    fn rec(
        start: usize,
        depth: usize,
        idx: &mut Vec<usize>,
        planes: &[(Vec<f64>, f64)],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if depth == idx.len() {
            visit(idx);
            return;
        }
        for i in start..planes.len() {
            idx[depth] = i;
            rec(i + 1, depth + 1, idx, planes, visit);
        }
    }
    let mut visit = |sel: &[usize]| {
        // Gaussian elimination with partial pivoting on the n x n system.
        let mut a: Vec<Vec<f64>> = sel.iter().map(|&i| {
            let mut r = planes[i].0.clone();
            r.push(planes[i].1);
            r
        }).collect();
        for c in 0..n {
            let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            if a[piv][c].abs() < 1e-10 {
                return;
            }
            a.swap(c, piv);
            for r in 0..n {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
        if feasible(&x) {
            let v = p.objective_value(&x);
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
    };
    rec(0, 0, &mut idx, &planes, &mut visit);
    best
}

fn small_lp() -> impl Strategy<Value = LpProblem> {
    let n = 2usize..=3;
    n.prop_flat_map(|n| {
        (
            prop::collection::vec(-5i32..=5, n),
            prop::collection::vec(1i32..=8, n),
            prop::collection::vec((prop::collection::vec(-4i32..=4, n), 0i32..=3, 0i32..=12), 1..=4),
        )
            .prop_map(move |(cost, ub, rows)| {
                let mut p = LpProblem::new();
                let cols: Vec<ColId> = (0..n).map(|j| p.add_col(format!("x{j}"), cost[j] as f64, 0.0, ub[j] as f64)).collect();
                for (i, (coef, sense, rhs)) in rows.into_iter().enumerate() {
                    let entries: Vec<(ColId, f64)> = coef
                        .iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0)
                        .map(|(j, &v)| (cols[j], v as f64))
                        .collect();
                    let entries = if entries.is_empty() { vec![(cols[0], 1.0)] } else { entries };
                    let sense = match sense {
                        0 | 1 => Sense::Le,
                        2 => Sense::Ge,
                        _ => Sense::Eq,
                    };
                    // Right-hand sides make x = 0 feasible for <= rows; others may be infeasible.
                    let rhs = if sense == Sense::Le { rhs as f64 } else { rhs as f64 / 4.0 };
                    p.add_row(format!("r{i}"), entries, sense, rhs);
                }
                p
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_vertex_enumeration(p in small_lp()) {
        let r = solve(&p, &SolveOptions::default()).unwrap();
        match brute_force(&p) {
            None => prop_assert_eq!(r.status, SolveStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(r.status, SolveStatus::Optimal);
                prop_assert!((r.objective - best).abs() < 1e-7 * best.abs().max(1.0), "{} vs {}", r.objective, best);
                let kkt = check_kkt(&p, &r).unwrap();
                prop_assert!(kkt.pass, "{:?}", kkt);
            }
        }
    }

    #[test]
    // Only rows whose optimal dual is unique: every hour without ramping, hours 1 and 3 with it.
    fn scaling_an_equality_row_scales_its_dual(lambda in 0.1f64..20.0, case in 0usize..6) {
        let (ramp, hour) = if case < 4 { (None, case) } else { (Some(100.0), 2 * (case - 4)) };
        let (p, _, balance) = four_hour_dispatch(ramp);
        let base = solve(&p, &SolveOptions::default()).unwrap();
        let mut q = p.clone();
        q.scale_row(balance[hour], lambda);
        let scaled = solve(&q, &SolveOptions::default()).unwrap();
        for (a, b) in base.primal.iter().zip(&scaled.primal) {
            prop_assert!((a - b).abs() < 1e-7);
        }
        let (y0, y1) = (base.dual(balance[hour]), scaled.dual(balance[hour]));
        prop_assert!((y1 - y0 / lambda).abs() < 1e-7 * y0.abs().max(1.0));
    }
}
