//! Randomized cross-checks of the built-in solvers.
//!
//! LPs are compared with the `microlp` crate; small MILPs with exhaustive
//! enumeration of binary assignments (each assignment solved as an LP with the
//! binaries fixed).

use proptest::prelude::*;
use psh_core::milp::{fix_variable, Milp, Sense, Variable};
use psh_core::solver::{
    register_backend, solve_lp, solve_mip, solve_mip_observed, BnbEvent, LpStatus, MicrolpBackend,
    MipOptions, MipStatus,
};

type VarSpec = (bool, f64, f64, f64);
type RowSpec = (Vec<(usize, f64)>, u8, f64);

/// Rows are placed around a reference point (binaries rounded), so the
/// model is feasible unless a slack draw is negative.
fn random_model(vars: Vec<VarSpec>, rows: Vec<RowSpec>) -> Milp {
    let mut m = Milp::new();
    let n = vars.len();
    let mut point = Vec::with_capacity(n);
    for (j, (bin, cost, hi, frac)) in vars.into_iter().enumerate() {
        if bin {
            m.add_var(Variable::binary(format!("b[{j}]"), cost.round()));
            point.push(frac.round());
        } else {
            m.add_var(Variable::continuous(
                format!("x[{j}]"),
                0.0,
                hi.round(),
                cost.round(),
            ));
            point.push((frac * hi.round()).round());
        }
    }
    for (i, (terms, sense, slack)) in rows.into_iter().enumerate() {
        let terms: Vec<(usize, f64)> = terms.into_iter().map(|(j, a)| (j % n, a.round())).collect();
        let act: f64 = terms.iter().map(|&(j, a)| a * point[j]).sum();
        let slack = slack.round();
        let (sense, rhs) = match sense % 3 {
            0 => (Sense::Le, act + slack),
            1 => (Sense::Ge, act - slack),
            _ => (Sense::Eq, act),
        };
        m.add_row(format!("r[{i}]"), terms, sense, rhs);
    }
    m
}

fn arb_model(max_vars: usize, max_rows: usize) -> impl Strategy<Value = Milp> {
    (
        prop::collection::vec(
            (any::<bool>(), -10.0f64..10.0, 1.0f64..20.0, 0.0f64..1.0),
            2..max_vars,
        ),
        prop::collection::vec(
            (
                prop::collection::vec((0usize..64, -6.0f64..6.0), 1..6),
                any::<u8>(),
                -2.0f64..8.0,
            ),
            1..max_rows,
        ),
    )
        .prop_map(|(v, r)| random_model(v, r))
}

fn enumerate_mip(m: &Milp) -> Option<f64> {
    let bins: Vec<usize> = m.binary_indices().collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = m.clone();
        for (k, &j) in bins.iter().enumerate() {
            fixed = fix_variable(&fixed, j, f64::from((mask >> k) & 1)).unwrap();
        }
        let s = solve_lp(&fixed).unwrap();
        if s.status == LpStatus::Optimal {
            best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, ..ProptestConfig::default() })]

    #[test]
    fn lp_matches_microlp(m in arb_model(40, 30)) {
        let ours = solve_lp(&m).unwrap();
        let theirs = register_backend(MicrolpBackend).solve_lp(&m).unwrap();
        prop_assert_eq!(ours.status, theirs.status);
        if ours.status == LpStatus::Optimal {
            prop_assert!((ours.objective - theirs.objective).abs() <= 1e-6 * (1.0 + theirs.objective.abs()),
                "ours {} theirs {}", ours.objective, theirs.objective);
            prop_assert!(m.max_violation(&ours.primal) <= 1e-7);
            prop_assert!(ours.duality_gap() <= 1e-6 * (1.0 + ours.objective.abs()),
                "primal {} dual {}", ours.objective, ours.dual_objective);
        }
    }

    #[test]
    fn mip_matches_enumeration(m in arb_model(13, 12)) {
        let oracle = enumerate_mip(&m);
        let mut bounds = Vec::new();
        let mut incumbents = Vec::new();
        let s = solve_mip_observed(&m, &MipOptions::with_gap(0.0), |e| match e {
            BnbEvent::Progress { best_bound, .. } => bounds.push(*best_bound),
            BnbEvent::Incumbent { values, .. } => incumbents.push(values.to_vec()),
        }).unwrap();
        match oracle {
            None => prop_assert_eq!(s.status, MipStatus::Infeasible),
            Some(best) => {
                prop_assert!(s.has_incumbent());
                prop_assert!((s.objective - best).abs() <= 1e-6 * (1.0 + best.abs()), "bnb {} enum {}", s.objective, best);
                prop_assert!(s.best_bound <= s.objective + 1e-9);
                prop_assert!(m.max_integrality_violation(&s.incumbent) <= 1e-6);
            }
        }
        prop_assert!(bounds.windows(2).all(|w| w[1] >= w[0] - 1e-9), "bounds {:?}", bounds);
        for x in &incumbents {
            prop_assert!(m.max_violation(x) <= 1e-7);
        }
    }

    #[test]
    fn mip_without_cuts_matches_enumeration(m in arb_model(10, 8)) {
        let oracle = enumerate_mip(&m);
        let options = MipOptions { cut_rounds: 0, ..MipOptions::with_gap(0.0) };
        let s = solve_mip(&m, &options).unwrap();
        match oracle {
            None => prop_assert_eq!(s.status, MipStatus::Infeasible),
            Some(best) => prop_assert!((s.objective - best).abs() <= 1e-6 * (1.0 + best.abs()), "bnb {} enum {}", s.objective, best),
        }
    }

    #[test]
    fn mip_is_deterministic(m in arb_model(8, 7)) {
        let a = solve_mip(&m, &MipOptions::default()).unwrap();
        let b = solve_mip(&m, &MipOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}
