use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcuc_milp::*;

fn backends() -> Vec<Box<dyn Backend>> {
    let mut v: Vec<Box<dyn Backend>> = vec![Box::new(BuiltinBackend::default())];
    #[cfg(feature = "highs")]
    v.push(Box::new(HighsBackend::default()));
    v.push(Box::new(ExternalBackend::new(
        env!("CARGO_BIN_EXE_lpsolve"),
        vec!["{lp}".into(), "{sol}".into(), "--gap".into(), "{gap}".into(), "--backend".into(), "builtin".into()],
        SolutionFormat::NameValue,
    )));
    v
}

#[test]
fn integer_lower_bound() {
    let mut p = MilpProblem::new("single");
    let x = p.add_var("x", 0.0, 100.0, VarKind::Integer).unwrap();
    p.set_objective(&[(x, 1.0)]).unwrap();
    p.add_constraint("c", &[(x, 1.0)], Sense::Ge, 3.0).unwrap();
    for b in backends() {
        let r = solve(&p, b.as_ref(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "{}", b.name());
        assert_eq!(r.value(x), Some(3.0));
        assert_eq!(r.objective, Some(3.0));
    }
}

#[test]
fn contradiction_is_infeasible() {
    let mut p = MilpProblem::new("pair");
    let x = p.add_var("x", -10.0, 10.0, VarKind::Integer).unwrap();
    p.add_constraint("a", &[(x, 1.0)], Sense::Le, 0.0).unwrap();
    p.add_constraint("b", &[(x, 1.0)], Sense::Ge, 1.0).unwrap();
    for b in backends() {
        let r = solve(&p, b.as_ref(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible, "{}", b.name());
        assert!(r.values.is_none());
    }
}

#[test]
fn empty_solver_slot_is_an_error() {
    let p = MilpProblem::new("none");
    assert!(matches!(Solver::default().solve(&p), Err(SolverError::NoBackend)));
}

fn knapsack(seed: u64) -> (MilpProblem, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..10).map(|_| rng.random_range(1..30) as f64).collect();
    let v: Vec<f64> = (0..10).map(|_| rng.random_range(1..50) as f64).collect();
    let cap = w.iter().sum::<f64>() * 0.4;
    let mut p = MilpProblem::new("knap");
    let xs: Vec<VarId> = (0..10).map(|i| p.add_binary(format!("x{i}")).unwrap()).collect();
    let obj: Vec<(VarId, f64)> = xs.iter().zip(&v).map(|(&x, &c)| (x, -c)).collect();
    p.set_objective(&obj).unwrap();
    let row: Vec<(VarId, f64)> = xs.iter().zip(&w).map(|(&x, &c)| (x, c)).collect();
    p.add_constraint("cap", &row, Sense::Le, cap).unwrap();
    let mut best = 0.0f64;
    for mask in 0u32..1024 {
        let (mut ww, mut vv) = (0.0, 0.0);
        for i in 0..10 {
            if mask >> i & 1 == 1 {
                ww += w[i];
                vv += v[i];
            }
        }
        if ww <= cap {
            best = best.max(vv);
        }
    }
    (p, -best)
}

#[test]
fn knapsack_matches_enumeration() {
    let exact = SolveOptions { gap: 0.0, ..SolveOptions::default() };
    for seed in 0..5 {
        let (p, best) = knapsack(seed);
        for b in backends() {
            let r = solve(&p, b.as_ref(), &exact).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal, "{}", b.name());
            assert!((r.objective.unwrap() - best).abs() < 1e-9, "{} seed {seed}", b.name());
        }
    }
}

#[test]
fn random_mixed_problems_agree_across_backends() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let exact = SolveOptions { gap: 0.0, ..SolveOptions::default() };
    for case in 0..20 {
        let mut p = MilpProblem::new(format!("mix{case}"));
        let n = 6;
        let vars: Vec<VarId> = (0..n)
            .map(|j| {
                if j % 2 == 0 {
                    p.add_var(format!("y{j}"), 0.0, 5.0, VarKind::Integer).unwrap()
                } else {
                    p.add_continuous(format!("x{j}"), -3.0, 8.0).unwrap()
                }
            })
            .collect();
        let obj: Vec<(VarId, f64)> = vars.iter().map(|&v| (v, rng.random_range(-5.0..5.0))).collect();
        p.set_objective(&obj).unwrap();
        for r in 0..5 {
            let terms: Vec<(VarId, f64)> = vars.iter().map(|&v| (v, rng.random_range(-3.0..3.0))).collect();
            let sense = [Sense::Le, Sense::Ge, Sense::Le][r % 3];
            let rhs = match sense { Sense::Le => rng.random_range(0.0..10.0), _ => rng.random_range(-10.0..0.0) };
            p.add_constraint(format!("r{r}"), &terms, sense, rhs).unwrap();
        }
        let results: Vec<SolveResult> = backends().iter().map(|b| solve(&p, b.as_ref(), &exact).unwrap()).collect();
        let first = &results[0];
        for r in &results {
            assert_eq!(r.status, first.status, "case {case} backend {}", r.backend);
            if let (Some(a), Some(b)) = (r.objective, first.objective) {
                assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "case {case}: {a} vs {b} ({})", r.backend);
            }
            if let Some(v) = &r.values {
                assert!(check_feasible(&p, v, 1e-6).unwrap().is_feasible());
                assert!((p.objective_value(v) - r.objective.unwrap()).abs() <= 1e-6 * (1.0 + r.objective.unwrap().abs()));
            }
        }
    }
}

#[test]
fn crashing_backend_yields_error_status() {
    let p = knapsack(1).0;
    let b = ExternalBackend::new("sh", vec!["-c".into(), "echo broken > {sol}".into()], SolutionFormat::NameValue);
    let r = solve(&p, &b, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Error);
    assert!(!r.diagnostics.is_empty());
}

fn arb_problem() -> impl Strategy<Value = MilpProblem> {
    let var = (0u8..3, -50i32..50, 0i32..100);
    let row = (prop::collection::vec((0usize..6, -1000i32..1000), 1..5), 0u8..3, -500i32..500);
    (prop::collection::vec(var, 1..6), prop::collection::vec(row, 0..5), prop::collection::vec(-1e6f64..1e6, 6))
        .prop_map(|(vars, rows, obj)| {
            let mut p = MilpProblem::new("prop");
            let n = vars.len();
            for (j, (k, lo, span)) in vars.into_iter().enumerate() {
                let (lo, hi) = (lo as f64 / 7.0, (lo + span) as f64 / 7.0);
                let kind = [VarKind::Continuous, VarKind::Integer, VarKind::Binary][k as usize];
                let (lo, hi) = if kind == VarKind::Continuous && j % 3 == 2 { (f64::NEG_INFINITY, hi) } else { (lo, hi) };
                let (lo, hi) = if kind == VarKind::Binary { (0.0, 1.0) } else { (lo, hi) };
                p.add_var(format!("v{j}"), lo, hi, kind).unwrap();
            }
            let objt: Vec<(VarId, f64)> = (0..n).map(|j| (VarId(j), obj[j])).collect();
            p.set_objective(&objt).unwrap();
            for (i, (terms, s, rhs)) in rows.into_iter().enumerate() {
                let t: Vec<(VarId, f64)> = terms.into_iter().map(|(j, c)| (VarId(j % n), c as f64 * 0.013)).collect();
                let sense = [Sense::Le, Sense::Eq, Sense::Ge][s as usize];
                let _ = p.add_constraint(format!("c{i}"), &t, sense, rhs as f64 / 3.0);
            }
            p
        })
}

proptest! {
    #[test]
    fn lp_text_round_trip(p in arb_problem()) {
        let text = to_lp_string(&p);
        let q = parse_lp(&text).unwrap();
        prop_assert_eq!(q.variables(), p.variables());
        prop_assert_eq!(q.constraints(), p.constraints());
        prop_assert_eq!(q.objective(), p.objective());
        prop_assert_eq!(to_lp_string(&q), text);
    }
}
