//! Acceptance criteria 1-10, one PASS/FAIL line each. Exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{g_a, random_tree, t_a};
use mergetree::bench::{random_pair, rows_to_csv, run_benchmark, BenchConfig};
use mergetree::bounds::{bottom_up, d_opt, interleaving_bounds, interleaving_bounds_with, BoundsConfig};
use mergetree::coupling::{CouplingContext, Side};
use mergetree::maps::{check_eps_good, composition_check, extract_coupling, InducedMap};
use mergetree::oracle::{enumerate_couplings, exact_interleaving, verify_decomposition, FamilyKind, OracleConfig};
use mergetree::program::Direction;
use mergetree::prune::{check_pruning_lemma, prune};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Absolute tolerance for every distance comparison.
const TOL: f64 = 1e-9;
/// Minimum share of zero-gap pairs.
const GAP_RATE: f64 = 0.8;
/// Wall-clock budget per run in the performance smoke test.
const TIME_BUDGET: Duration = Duration::from_secs(600);
/// Interior samples per edge in the good-map checks.
const SAMPLES: usize = 3;

type Outcome = Result<String, String>;

fn oracle() -> OracleConfig {
    OracleConfig::default()
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Bounds sandwich the exact value on generator pairs with 2-5 leaves.
fn oracle_sandwich() -> Outcome {
    let mut bad = Vec::new();
    let mut count = 0;
    for n in 2..=5 {
        for rep in 0..60 {
            let (t, g) = random_pair(101, n, rep);
            let b = interleaving_bounds(&t, &g).unwrap();
            let d = exact_interleaving(&t, &g, &oracle()).unwrap().0;
            count += 1;
            if !(b.lower - TOL <= d && d <= b.upper + TOL) {
                bad.push(format!("n={n} rep={rep}: {} <= {d} <= {}", b.lower, b.upper));
            }
        }
    }
    check(bad.is_empty() && count >= 200, format!("{} of {count} pairs sandwiched {bad:?}", count - bad.len()))
}

/// Share of pairs with 2-8 leaves whose bounds coincide.
fn gap_rate() -> Outcome {
    let plain_cfg = BoundsConfig { collapse: false, ..Default::default() };
    let (mut zero, mut zero_plain, mut count) = (0, 0, 0);
    for n in 2..=8 {
        for rep in 0..20 {
            let (t, g) = random_pair(102, n, rep);
            let b = interleaving_bounds(&t, &g).unwrap();
            let p = interleaving_bounds_with(&t, &g, &plain_cfg).unwrap();
            count += 1;
            zero += (b.upper - b.lower <= TOL) as usize;
            zero_plain += (p.upper - p.lower <= TOL) as usize;
        }
    }
    let rate = zero as f64 / count as f64;
    check(
        count >= 100 && rate >= GAP_RATE,
        format!("zero gap on {zero}/{count} pairs ({:.1}%); without the collapse term {zero_plain}/{count}", 100.0 * rate),
    )
}

/// Fixture values, exact and bounded.
fn exact_fixtures() -> Outcome {
    let (t, g) = (t_a(), g_a());
    let d_tt = exact_interleaving(&t, &t, &oracle()).unwrap().0;
    let d_tg = exact_interleaving(&t, &g, &oracle()).unwrap().0;
    let b_tt = interleaving_bounds(&t, &t).unwrap();
    let b_tg = interleaving_bounds(&t, &g).unwrap();
    let near = |a: f64, b: f64| (a - b).abs() <= TOL;
    let ok = near(d_tt, 0.0)
        && near(d_tg, 1.0)
        && near(b_tt.lower, 0.0)
        && near(b_tt.upper, 0.0)
        && near(b_tg.lower, 1.0)
        && near(b_tg.upper, 1.0);
    check(ok, format!("d(T_A,T_A)={d_tt} [{}, {}], d(T_A,G_A)={d_tg} [{}, {}]", b_tt.lower, b_tt.upper, b_tg.lower, b_tg.upper))
}

/// Decomposition over antichains on pairs with at most 4 leaves.
fn decomposition() -> Outcome {
    let mut bad = Vec::new();
    let mut count = 0;
    for n in 2..=4 {
        for rep in 0..20 {
            let (t, g) = random_pair(104, n, rep);
            let r = verify_decomposition(&t, &g, &oracle()).unwrap();
            count += 1;
            if r.check().is_err() || (r.special_min - r.exact).abs() > TOL {
                bad.push(format!("n={n} rep={rep}: exact {} special {} lower {}", r.exact, r.special_min, r.lower));
            }
        }
    }
    check(bad.is_empty() && count >= 50, format!("{} of {count} pairs decompose {bad:?}", count - bad.len()))
}

/// Pairs for the good-map sweep: generator pairs and random shapes with at most 4 leaves.
fn map_pairs() -> Vec<(mergetree::MergeTree, mergetree::MergeTree)> {
    let mut out = Vec::new();
    for rep in 0..12 {
        out.push(random_pair(105, 2 + rep % 3, rep));
    }
    for s in 0..12u64 {
        out.push((random_tree(s, 2 + (s as usize) % 3), random_tree(s + 100, 2 + (s as usize + 1) % 3)));
    }
    out
}

/// Good-map properties and composition for every coupling of the sweep.
fn good_maps() -> Outcome {
    let (mut maps, mut bad) = (0, Vec::new());
    let pairs = map_pairs();
    for (k, (t, g)) in pairs.iter().enumerate() {
        let fam = enumerate_couplings(t, g, FamilyKind::All, &oracle()).unwrap();
        for m in &fam.members {
            let ctx = CouplingContext::new(t, g, &m.coupling);
            let eps = ctx.norm();
            let a = InducedMap::good(&ctx, Side::T, eps).unwrap();
            let b = InducedMap::good(&ctx, Side::G, eps).unwrap();
            let r = check_eps_good(&a, SAMPLES).unwrap();
            let (res, below) = composition_check(&a, &b, SAMPLES).unwrap();
            maps += 1;
            let ok = r.p1_max_residual <= TOL && r.p2_violations.is_empty() && r.p3_max_gap <= 2.0 * eps + TOL && res <= TOL && below == 0;
            if !ok {
                bad.push(format!("pair {k}: {:?}", m.coupling.to_file(t, g).pairs));
            }
        }
    }
    check(bad.is_empty() && pairs.len() >= 20, format!("{maps} couplings over {} pairs pass P1-P3 and composition {bad:?}", pairs.len()))
}

/// Couplings extracted from the induced maps cost at most ε.
fn round_trip() -> Outcome {
    let (mut count, mut bad) = (0, Vec::new());
    for (k, (t, g)) in map_pairs().iter().enumerate() {
        let fam = enumerate_couplings(t, g, FamilyKind::All, &oracle()).unwrap();
        for m in &fam.members {
            let ctx = CouplingContext::new(t, g, &m.coupling);
            let eps = ctx.norm();
            let a = InducedMap::good(&ctx, Side::T, eps).unwrap();
            let back = extract_coupling(t, g, &a.vertex_images().unwrap(), eps).unwrap();
            let cost = CouplingContext::new(t, g, &back).norm();
            count += 1;
            if cost > eps + TOL {
                bad.push(format!("pair {k}: {cost} > {eps}"));
            }
        }
    }
    check(bad.is_empty(), format!("{count} extracted couplings within ε {bad:?}"))
}

/// Pruning lemma on random trees and the pruning inequality via the oracle.
fn pruning() -> Outcome {
    let mut bad = Vec::new();
    let mut checks = 0;
    for s in 0..100u64 {
        let t = random_tree(1000 + s, 2 + (s as usize) % 9);
        let span = t.span();
        for f in [0.05, 0.2, 0.5] {
            let res = prune(&t, f * span);
            let r = check_pruning_lemma(&t, &res);
            checks += 1;
            if !r.pass() || r.cost > res.eps / 2.0 + TOL {
                bad.push(format!("tree {s} ε={}: {:?}", res.eps, r.failures));
            }
        }
    }
    let mut pairs = 0;
    for rep in 0..30 {
        let (t, g) = random_pair(107, 3 + rep % 3, rep);
        let d = exact_interleaving(&t, &g, &oracle()).unwrap().0;
        for f in [0.1, 0.3] {
            let eps = f * t.span().max(g.span());
            let dp = exact_interleaving(&prune(&t, eps).tree, &prune(&g, eps).tree, &oracle()).unwrap().0;
            if d > dp.max(eps / 2.0) + TOL {
                bad.push(format!("pair {rep} ε={eps}: {d} > max({dp}, {})", eps / 2.0));
            }
        }
        pairs += 1;
    }
    check(bad.is_empty(), format!("lemma on {checks} (tree, ε) cases, inequality on {pairs} pairs {bad:?}"))
}

/// Inflating one stored upper-bound cell by e moves d_upper by at most e.
fn error_injection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let (t, g) = random_pair(108, rng.random_range(3..=7), k);
        let base = interleaving_bounds(&t, &g).unwrap().upper;
        let (x, y) = (rng.random_range(0..t.len()), rng.random_range(0..g.len()));
        let e = rng.random_range(0.01..2.0);
        let cfg = BoundsConfig { inject: Some((x, y, e)), ..Default::default() };
        let up = interleaving_bounds_with(&t, &g, &cfg).unwrap().upper;
        worst = worst.max((up - base).abs() / e);
        if (up - base).abs() > e + TOL {
            bad.push(format!("injection {k} at ({},{}) e={e}: {base} -> {up}", t.id(x), g.id(y)));
        }
    }
    check(bad.is_empty(), format!("20 injections, largest |change|/e = {worst:.3} {bad:?}"))
}

/// 15-leaf bounds and 100-leaf pruned estimates within the time budget.
fn performance() -> Outcome {
    let start = Instant::now();
    let (t, g) = random_pair(109, 15, 0);
    let b = interleaving_bounds(&t, &g).unwrap();
    let t15 = start.elapsed();
    let mut msg = format!("15 leaves: [{:.6}, {:.6}] in {:.1} s", b.lower, b.upper, t15.as_secs_f64());
    let mut ok = t15 <= TIME_BUDGET && b.consistent();
    for n in [100, 101, 102] {
        let s = Instant::now();
        let (t, g) = random_pair(109, n, 0);
        let d = d_opt(&t, &g, 15, &BoundsConfig::default()).unwrap();
        let el = s.elapsed();
        ok &= el <= TIME_BUDGET && d.value.is_finite();
        msg += &format!("; {n} leaves: d_opt {:.6} ({:?} leaves) in {:.1} s", d.value, d.leaves, el.as_secs_f64());
    }
    check(ok, msg)
}

/// Same seeds, same bytes and tables.
fn determinism() -> Outcome {
    let cfg = BenchConfig { n_min: 2, n_max: 9, reps: 4, seed: 110, budget: 8, ..Default::default() };
    let a = rows_to_csv(&run_benchmark(&cfg));
    let b = rows_to_csv(&run_benchmark(&cfg));
    let (t, g) = random_pair(110, 9, 0);
    let c = BoundsConfig::default();
    let mut tables = true;
    for dir in [Direction::Up, Direction::Down] {
        let x = bottom_up(&t, &g, dir, &c).unwrap();
        let y = bottom_up(&t, &g, dir, &c).unwrap();
        tables &= x.w.iter().flatten().map(|v| v.to_bits()).eq(y.w.iter().flatten().map(|v| v.to_bits()));
        tables &= x.sel == y.sel && x.nodes == y.nodes;
    }
    check(a == b && tables, format!("bench CSV identical: {} ({} bytes); tables identical: {tables}", a == b, a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle sandwich", oracle_sandwich),
        ("gap rate", gap_rate),
        ("exact fixtures", exact_fixtures),
        ("decomposition", decomposition),
        ("good maps", good_maps),
        ("round trip", round_trip),
        ("pruning", pruning),
        ("error injection", error_injection),
        ("performance", performance),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|s| name.contains(s.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(m) => println!("PASS criterion {} ({name}, {secs:.1} s): {m}", i + 1),
            Err(m) => {
                failed += 1;
                println!("FAIL criterion {} ({name}, {secs:.1} s): {m}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
