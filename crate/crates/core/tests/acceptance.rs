//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Reference values come from the brute-force enumerator, closed
//! forms written out here, and load-perturbation finite differences.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use psh_core::analysis::{
    brute_force_uc, compactness_report, compare_models, derive_matched_bounds, random_case,
    random_scenarios, run_model, RandomCaseSpec, RunOptions, SolvedRun,
};
use psh_core::formulation::{
    audit_solution, build_baseline, build_proposed, Audit, ModelKind, ObjectiveMode,
};
use psh_core::io::parse_case;
use psh_core::model::{
    two_unit_system, validate_case, LegacyBid, Mode, PriceProfile, ValidatedCase,
};
use psh_core::solver::{solve_mip, MipOptions, MipStatus, SolverHandle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUNDLED: &str = include_str!("../cases/two_unit.json");
const TOL: f64 = 1e-6;

type Check = Result<String, String>;

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1.0)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Audits and fixed-LP duality gaps gathered from every solved run.
#[derive(Default)]
struct Corpus {
    audits: Vec<(String, Audit)>,
    duality: Vec<(String, f64, f64)>,
}

impl Corpus {
    fn add(&mut self, label: &str, run: &SolvedRun) {
        self.audits
            .push((format!("{label}/{}", run.model.as_str()), run.audit.clone()));
        self.duality.push((
            format!("{label}/{}", run.model.as_str()),
            run.prices.fixed_objective,
            run.prices.dual_objective,
        ));
    }
}

fn modes_at(run: &SolvedRun, mode: Mode) -> BTreeSet<usize> {
    run.schedule
        .psh
        .iter()
        .flat_map(|u| {
            u.mode
                .iter()
                .enumerate()
                .filter(move |(_, m)| **m == mode)
                .map(|(t, _)| t)
        })
        .collect()
}

/// Six four-hour intervals with one unit of the two-unit system and a pump
/// window placed before the valley.
fn compressed_day() -> ValidatedCase {
    let mut c = two_unit_system(vec![450.0, 250.0, 700.0, 1150.0, 1150.0, 650.0]);
    c.horizon.dt_hours = 4.0;
    c.psh_units.truncate(1);
    c.legacy_bids = Some(vec![LegacyBid {
        psh_id: "psh1".into(),
        gen_offer_price: PriceProfile::Flat(26.0),
        pump_bid_price: PriceProfile::Flat(24.0),
        pump_window: [0].into(),
        gen_window: [2, 3, 4, 5].into(),
        daily_max_gen: 810.0,
    }]);
    validate_case(c).unwrap()
}

fn criterion_1(corpus: &mut Corpus) -> Check {
    let start = Instant::now();
    let case = parse_case(BUNDLED).map_err(|e| e.to_string())?;
    let c = compare_models(&case, &RunOptions::default()).map_err(|e| e.to_string())?;
    corpus.add("bundled", &c.legacy);
    corpus.add("bundled", &c.proposed);
    let r = &c.report;
    ensure(c.legacy.thermal_cost > c.proposed.thermal_cost, || {
        format!(
            "legacy {} not above proposed {}",
            c.legacy.thermal_cost, c.proposed.thermal_cost
        )
    })?;
    let pct = r.objective_improvement_pct.unwrap_or(0.0);
    ensure(pct > 0.0, || format!("improvement {pct}"))?;
    // every pumping hour is lighter, and no dearer, than every generating hour
    let load = &case.horizon.net_load;
    let lmp = &c.proposed.prices.lmp;
    let (pump, gen) = (
        modes_at(&c.proposed, Mode::Pump),
        modes_at(&c.proposed, Mode::Gen),
    );
    ensure(!pump.is_empty(), || "proposed never pumps".into())?;
    for &p in &pump {
        for &g in &gen {
            ensure(load[p] < load[g] && lmp[p] <= lmp[g] + TOL, || {
                format!("pump hour {p} vs gen hour {g}")
            })?;
        }
    }

    // compressed analog small enough to enumerate
    let day = compressed_day();
    let cd = compare_models(&day, &RunOptions::default()).map_err(|e| e.to_string())?;
    corpus.add("compressed", &cd.legacy);
    corpus.add("compressed", &cd.proposed);
    let matched = validate_case(derive_matched_bounds(&day, &cd.legacy.schedule).case)
        .map_err(|e| e.to_string())?;
    let oracle = brute_force_uc(&matched, ObjectiveMode::ThermalOnly, 10_000)
        .map_err(|e| e.to_string())?
        .ok_or("oracle found the matched day infeasible")?;
    ensure(rel_close(cd.proposed.solve.objective, oracle), || {
        format!(
            "compressed day: mip {} oracle {oracle}",
            cd.proposed.solve.objective
        )
    })?;
    let (model, _) =
        build_proposed(&matched, ObjectiveMode::ThermalOnly).map_err(|e| e.to_string())?;
    let cross = SolverHandle::by_name("microlp")
        .and_then(|s| s.solve_mip(&model, &MipOptions::default()))
        .map_err(|e| e.to_string())?;
    ensure(rel_close(cross.objective, oracle), || {
        format!("microlp {} oracle {oracle}", cross.objective)
    })?;
    let valley = (0..6)
        .min_by(|&a, &b| day.horizon.net_load[a].total_cmp(&day.horizon.net_load[b]))
        .unwrap();
    // the reservoir ceiling rules out pumping through both light intervals,
    // so only the valley itself is certain to be used
    let pumped = modes_at(&cd.proposed, Mode::Pump);
    ensure(pumped.contains(&valley), || {
        format!("compressed day pumps at {pumped:?}, valley is {valley}")
    })?;
    for &p in &pumped {
        for &g in &modes_at(&cd.proposed, Mode::Gen) {
            ensure(
                cd.proposed.prices.lmp[p] <= cd.proposed.prices.lmp[g] + TOL,
                || format!("compressed day: pump {p} dearer than gen {g}"),
            )?;
        }
    }
    ensure(cd.legacy.thermal_cost > cd.proposed.thermal_cost, || {
        "compressed legacy not dearer".into()
    })?;

    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "bundled improvement {pct:.3}%, pump hours {pump:?}; compressed day matches oracle {oracle:.2} (builtin and microlp); {elapsed:.1?}"
    ))
}

fn small_spec(n_intervals: usize) -> RandomCaseSpec {
    RandomCaseSpec {
        n_intervals,
        n_reservoirs: 1,
        units_per_reservoir: 1,
        n_thermal: 3,
        plant_exclusive: false,
        pump_start_limit: None,
        with_legacy_bids: true,
    }
}

fn criterion_2(corpus: &mut Corpus) -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut feasible, mut infeasible) = (0, 0);
    for i in 0..60 {
        let n_t = rng.gen_range(1..=6);
        let case =
            validate_case(random_case(&mut rng, &small_spec(n_t))).map_err(|e| e.to_string())?;
        let objective = if i % 2 == 0 {
            ObjectiveMode::ThermalOnly
        } else {
            ObjectiveMode::WithPshBids
        };
        let oracle = brute_force_uc(&case, objective, 10_000).map_err(|e| e.to_string())?;
        let (m, map) = build_proposed(&case, objective).map_err(|e| e.to_string())?;
        let s = solve_mip(&m, &MipOptions::default()).map_err(|e| e.to_string())?;
        match oracle {
            None => {
                ensure(!s.has_incumbent(), || {
                    format!("instance {i}: oracle infeasible, mip {}", s.objective)
                })?;
                infeasible += 1;
            }
            Some(best) => {
                ensure(rel_close(s.objective, best), || {
                    format!("instance {i}: mip {} oracle {best}", s.objective)
                })?;
                corpus.audits.push((
                    format!("oracle#{i}"),
                    audit_solution(&case, &map, &s.incumbent),
                ));
                feasible += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "60 instances agree ({feasible} feasible, {infeasible} infeasible); {elapsed:.1?}"
    ))
}

fn criterion_3(corpus: &mut Corpus) -> Check {
    let start = Instant::now();
    let base = parse_case(BUNDLED).map_err(|e| e.to_string())?;
    let mut worst = f64::INFINITY;
    for (i, (_, case)) in random_scenarios(base.case(), 100, 42)
        .into_iter()
        .enumerate()
    {
        let case = validate_case(case).map_err(|e| e.to_string())?;
        let c = compare_models(&case, &RunOptions::default())
            .map_err(|e| format!("scenario {i}: {e}"))?;
        let r = &c.report;
        ensure(
            r.proposed_objective <= r.legacy_objective + TOL * r.legacy_objective.abs(),
            || {
                format!(
                    "scenario {i}: proposed {} legacy {}",
                    r.proposed_objective, r.legacy_objective
                )
            },
        )?;
        worst = worst.min(r.legacy_objective - r.proposed_objective);
        corpus.add(&format!("scenario#{i}"), &c.legacy);
        corpus.add(&format!("scenario#{i}"), &c.proposed);
    }
    Ok(format!(
        "100/100 scenarios not worse (smallest saving ${:.2}); {:.1?}",
        worst.max(0.0),
        start.elapsed()
    ))
}

/// Shared plants and pump-start limits, which the other corpora leave off.
fn constrained_plants(corpus: &mut Corpus) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..20 {
        let spec = RandomCaseSpec {
            units_per_reservoir: 2,
            plant_exclusive: true,
            pump_start_limit: Some(1),
            with_legacy_bids: false,
            ..small_spec(rng.gen_range(2..=8))
        };
        let case = validate_case(random_case(&mut rng, &spec)).map_err(|e| e.to_string())?;
        match run_model(&case, ModelKind::Proposed, &RunOptions::default()) {
            Ok(run) => corpus.add(&format!("plant#{i}"), &run),
            Err(psh_core::analysis::AnalysisError::NoSolution {
                status: MipStatus::Infeasible,
                ..
            }) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(())
}

fn criterion_4(corpus: &mut Corpus) -> Check {
    constrained_plants(corpus)?;
    let mut worst = 0.0f64;
    for (label, a) in &corpus.audits {
        ensure(a.is_clean(TOL), || format!("{label}: {a:?}"))?;
        worst = worst.max(a.max_residual());
    }
    Ok(format!(
        "{} schedules audited, largest residual {worst:.1e}, no plant conflicts",
        corpus.audits.len()
    ))
}

fn thermal_only(load: f64) -> Result<SolvedRun, String> {
    let mut c = two_unit_system(vec![load]);
    c.psh_units.clear();
    c.reservoirs.clear();
    let case = validate_case(c).map_err(|e| e.to_string())?;
    run_model(&case, ModelKind::Proposed, &RunOptions::default()).map_err(|e| e.to_string())
}

fn criterion_5(corpus: &Corpus) -> Check {
    for (label, primal, dual) in &corpus.duality {
        ensure((primal - dual).abs() <= TOL * (1.0 + primal.abs()), || {
            format!("{label}: primal {primal} dual {dual}")
        })?;
    }
    let mut found = Vec::new();
    for (load, marginal) in [(100.0, 15.0), (600.0, 20.0)] {
        let run = thermal_only(load)?;
        ensure(!run.prices.degenerate, || {
            format!("load {load}: degenerate fixed LP")
        })?;
        let lmp = run.prices.lmp[0];
        let fd =
            (thermal_only(load + 1.0)?.thermal_cost - thermal_only(load - 1.0)?.thermal_cost) / 2.0;
        ensure(
            (lmp - marginal).abs() <= TOL && (fd - lmp).abs() <= TOL,
            || format!("load {load}: lmp {lmp} difference quotient {fd} offer {marginal}"),
        )?;
        found.push(lmp);
    }
    Ok(format!("{} fixed LPs close the duality gap; single-interval prices {found:?} match offers and differences", corpus.duality.len()))
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..20 {
        let n_t = rng.gen_range(1..=24);
        let n_res = rng.gen_range(1..=3);
        let per_res = rng.gen_range(1..=3);
        let exclusive = rng.gen_bool(0.5);
        let spec = RandomCaseSpec {
            n_reservoirs: n_res,
            units_per_reservoir: per_res,
            plant_exclusive: exclusive,
            ..small_spec(n_t)
        };
        let case = validate_case(random_case(&mut rng, &spec)).map_err(|e| e.to_string())?;
        let (p, _) =
            build_proposed(&case, ObjectiveMode::ThermalOnly).map_err(|e| e.to_string())?;
        let (b, _) = build_baseline(&case, ObjectiveMode::ThermalOnly);
        let report = compactness_report(&p, &b);
        let soc = report.added_variables.get("e").copied().unwrap_or(0);
        let plant = report.added_variables.get("ur").copied().unwrap_or(0);
        let exclusive_res = case.reservoirs.iter().filter(|r| r.plant_exclusive).count();
        ensure(soc == n_res * (n_t + 1), || {
            format!("shape {i}: {soc} SOC variables")
        })?;
        ensure(plant == 2 * exclusive_res * n_t, || {
            format!("shape {i}: {plant} plant variables")
        })?;
        ensure(report.added_binaries == 0, || {
            format!("shape {i}: added binaries")
        })?;
        for rows in report.soc_row_nonzeros.values() {
            ensure(
                rows.len() == n_t && rows.iter().all(|&nz| nz == 2 + 2 * per_res),
                || format!("shape {i}: SOC rows {rows:?}"),
            )?;
        }
    }
    Ok("20 shapes: R(T+1) SOC variables, 2RT plant variables, 2+2G nonzeros per SOC row".into())
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base = parse_case(BUNDLED).map_err(|e| e.to_string())?;
    let (proposed, _) =
        build_proposed(&base, ObjectiveMode::ThermalOnly).map_err(|e| e.to_string())?;
    let mut models = vec![proposed];
    for _ in 0..8 {
        let spec = RandomCaseSpec {
            n_reservoirs: 2,
            units_per_reservoir: 2,
            ..small_spec(rng.gen_range(4..=12))
        };
        let case = validate_case(random_case(&mut rng, &spec)).map_err(|e| e.to_string())?;
        models.push(
            build_proposed(&case, ObjectiveMode::ThermalOnly)
                .map_err(|e| e.to_string())?
                .0,
        );
    }
    let mut statuses = std::collections::BTreeMap::new();
    for gap in [1e-6, 1e-2] {
        for (i, m) in models.iter().enumerate() {
            for node_limit in [3, 5_000] {
                let s = solve_mip(
                    m,
                    &MipOptions {
                        rel_gap: gap,
                        node_limit,
                        ..MipOptions::default()
                    },
                )
                .map_err(|e| e.to_string())?;
                match s.status {
                    MipStatus::Optimal | MipStatus::GapReached => ensure(s.gap <= gap, || {
                        format!(
                            "model {i} gap {gap}: reported {} with {:?}",
                            s.gap, s.status
                        )
                    })?,
                    MipStatus::NodeLimit => ensure(s.nodes_explored >= node_limit, || {
                        format!("model {i}: early NodeLimit")
                    })?,
                    MipStatus::Infeasible => ensure(!s.has_incumbent(), || {
                        format!("model {i}: infeasible with incumbent")
                    })?,
                }
                if s.has_incumbent() {
                    ensure(s.best_bound <= s.objective, || {
                        format!("model {i}: bound {} above {}", s.best_bound, s.objective)
                    })?;
                }
                *statuses.entry(format!("{:?}", s.status)).or_insert(0) += 1;
            }
        }
    }
    Ok(format!(
        "{} runs at gaps 1e-6 and 1e-2: {statuses:?}",
        4 * models.len()
    ))
}

fn main() {
    let mut corpus = Corpus::default();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, r: Check| match r {
        Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
        Err(why) => {
            failed += 1;
            println!("FAIL criterion {n} ({name}): {why}");
        }
    };
    report(1, "two-unit reproduction", criterion_1(&mut corpus));
    report(2, "oracle equivalence", criterion_2(&mut corpus));
    report(3, "objective dominance", criterion_3(&mut corpus));
    report(4, "constraint invariants", criterion_4(&mut corpus));
    report(5, "pricing", criterion_5(&corpus));
    report(6, "compactness", criterion_6());
    report(7, "gap contract", criterion_7());
    if failed > 0 {
        std::process::exit(1);
    }
}
