use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mergetree::bench::{read_d_lab, rows_to_csv, run_benchmark, summarize, BenchConfig};
use mergetree::bounds::{bottom_up, d_opt, deletion_penalty, interleaving_bounds_with, BoundsConfig};
use mergetree::coupling::{Coupling, CouplingContext, CouplingFile, Side};
use mergetree::error::{OracleError, SolveError};
use mergetree::linkage::{single_linkage_tree, PointCloud};
use mergetree::maps::{check_eps_good, composition_check, extract_coupling, InducedMap};
use mergetree::oracle::{enumerate_couplings, exact_interleaving, FamilyKind, OracleConfig};
use mergetree::program::{build_program, linearize, CostTable, Direction, Penalty};
use mergetree::prune::{check_pruning_lemma, prune, prune_to_leaf_budget};
use mergetree::MergeTree;

#[derive(Parser)]
#[command(name = "mergetree", version, about = "Interleaving distance between merge trees")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Out {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Dir {
    Up,
    Down,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pen {
    Root,
    Father,
}

#[derive(Args)]
struct Trees {
    /// tree file (JSON); give it twice for commands on a pair
    #[arg(short = 't', long = "tree", required = true)]
    tree: Vec<PathBuf>,
    /// require distinct heights and a root of order ≥ 2
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check tree files
    Validate {
        #[command(flatten)]
        trees: Trees,
    },
    /// Exact distance by enumerating couplings (small trees only)
    Exact {
        #[command(flatten)]
        trees: Trees,
        /// leaf cap per tree
        #[arg(long, default_value_t = 5)]
        max_leaves: usize,
        #[arg(long, default_value_t = 60.0)]
        timeout_s: f64,
    },
    /// Lower and upper bounds from the bottom-up programs
    Bounds {
        #[command(flatten)]
        trees: Trees,
        #[arg(long, value_enum, default_value_t = Dir::Both)]
        direction: Dir,
        /// experimental deletion penalty
        #[arg(long, value_enum, default_value_t = Pen::Root)]
        penalty: Pen,
        /// prune both trees to this many leaves first
        #[arg(long)]
        max_leaves: Option<usize>,
        #[arg(long)]
        timeout_s: Option<f64>,
        /// print the linearized root-pair program instead
        #[arg(long)]
        dump_program: bool,
        /// lower bound without the collapsed-vertex term
        #[arg(long)]
        plain_lower: bool,
    },
    /// Cost report of a coupling file
    Cost {
        #[command(flatten)]
        trees: Trees,
        #[arg(short, long)]
        coupling: PathBuf,
        #[arg(long, value_enum, default_value_t = Out::Json)]
        out: Out,
    },
    /// Check the maps induced by a coupling
    VerifyMap {
        #[command(flatten)]
        trees: Trees,
        #[arg(short, long)]
        coupling: PathBuf,
        /// defaults to the coupling norm
        #[arg(long)]
        epsilon: Option<f64>,
        /// interior samples per edge
        #[arg(long, default_value_t = 3)]
        samples: usize,
    },
    /// Prune a tree by ε or to a leaf budget
    Prune {
        #[command(flatten)]
        trees: Trees,
        #[arg(long, conflicts_with = "max_leaves", required_unless_present = "max_leaves")]
        epsilon: Option<f64>,
        #[arg(long)]
        max_leaves: Option<usize>,
    },
    /// Single-linkage tree of a point cloud CSV
    Slink {
        /// `x,y` rows, or a `matrix` header followed by a distance matrix
        #[arg(short, long)]
        points: PathBuf,
        /// jitter tied heights by this fraction of the height span
        #[arg(long)]
        perturb: Option<f64>,
    },
    /// Random sweep of bounds over single-linkage pairs
    Bench {
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// sizes above this use the pruned estimate
        #[arg(long, default_value_t = 15)]
        max_leaves: usize,
        /// CSV with columns n,rep,d_lab
        #[arg(long)]
        d_lab: Option<PathBuf>,
        /// record wall times (the CSV is then no longer reproducible)
        #[arg(long)]
        timings: bool,
        #[arg(long, value_enum, default_value_t = Out::Csv)]
        out: Out,
        /// write rows here instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

enum Fail {
    Invalid(String),
    Limit(String),
    Internal(String),
}

impl From<SolveError> for Fail {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Timeout => Fail::Limit(e.to_string()),
            _ => Fail::Internal(e.to_string()),
        }
    }
}

impl From<OracleError> for Fail {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::CapExceeded { .. } => {
                Fail::Limit(format!("{e}; use `mergetree bounds` for larger trees"))
            }
            OracleError::Timeout(_) => Fail::Limit(e.to_string()),
            OracleError::Decomposition(_) => Fail::Internal(e.to_string()),
        }
    }
}

fn read(p: &Path) -> Result<String, Fail> {
    fs::read_to_string(p).map_err(|e| Fail::Invalid(format!("{}: {e}", p.display())))
}

fn load_tree(p: &Path, strict: bool) -> Result<MergeTree, Fail> {
    MergeTree::from_json(&read(p)?, strict).map_err(|e| Fail::Invalid(format!("{}: {e}", p.display())))
}

fn load_pair(t: &Trees) -> Result<(MergeTree, MergeTree), Fail> {
    if t.tree.len() != 2 {
        return Err(Fail::Invalid(format!("expected two --tree files, got {}", t.tree.len())));
    }
    Ok((load_tree(&t.tree[0], t.strict)?, load_tree(&t.tree[1], t.strict)?))
}

fn load_coupling(p: &Path, t: &MergeTree, g: &MergeTree) -> Result<Coupling, Fail> {
    let file: CouplingFile = serde_json::from_str(&read(p)?).map_err(|e| Fail::Invalid(format!("{}: {e}", p.display())))?;
    Coupling::from_file(t, g, &file).map_err(|e| Fail::Invalid(e.to_string()))
}

fn pairs_json(t: &MergeTree, g: &MergeTree, c: &Coupling) -> serde_json::Value {
    json!(c.to_file(t, g).pairs)
}

fn timeout(s: Option<f64>) -> Option<Duration> {
    s.filter(|s| *s > 0.0).map(Duration::from_secs_f64)
}

fn run(cli: Cli) -> Result<String, Fail> {
    match cli.cmd {
        Cmd::Validate { trees } => {
            let mut out = Vec::new();
            for p in &trees.tree {
                let t = load_tree(p, trees.strict)?;
                out.push(json!({
                    "file": p.display().to_string(),
                    "vertices": t.len(),
                    "leaves": t.leaf_count(),
                    "root": t.id(t.root()),
                    "generic": t.is_generic(),
                }));
            }
            Ok(serde_json::to_string_pretty(&out).unwrap())
        }
        Cmd::Exact { trees, max_leaves, timeout_s } => {
            let (t, g) = load_pair(&trees)?;
            let cfg = OracleConfig { cap: max_leaves, timeout: timeout(Some(timeout_s)) };
            let (d, w) = exact_interleaving(&t, &g, &cfg)?;
            let all = enumerate_couplings(&t, &g, FamilyKind::All, &cfg)?;
            let rooted = enumerate_couplings(&t, &g, FamilyKind::Rooted, &cfg)?;
            let special = enumerate_couplings(&t, &g, FamilyKind::RootedSpecial, &cfg)?;
            Ok(serde_json::to_string_pretty(&json!({
                "distance": d,
                "witness": pairs_json(&t, &g, &w),
                "family_sizes": {"all": all.members.len(), "rooted": rooted.members.len(), "rooted_special": special.members.len()},
                "family_minima": {"all": all.min, "rooted": rooted.min, "rooted_special": special.min},
                "minimizers": all.minimizers.iter().map(|c| pairs_json(&t, &g, c)).collect::<Vec<_>>(),
            }))
            .unwrap())
        }
        Cmd::Bounds { trees, direction, penalty, max_leaves, timeout_s, dump_program, plain_lower } => {
            let (t, g) = load_pair(&trees)?;
            let penalty = match penalty {
                Pen::Root => Penalty::Root,
                Pen::Father => Penalty::Father,
            };
            let cfg = BoundsConfig { penalty, inject: None, timeout: timeout(timeout_s), collapse: !plain_lower };
            if dump_program {
                let dir = if direction == Dir::Down { Direction::Down } else { Direction::Up };
                let tab = bottom_up(&t, &g, dir, &cfg)?;
                let mut table = CostTable::new(t.len(), g.len());
                for x in 0..t.len() {
                    for y in 0..g.len() {
                        table.set(x, y, tab.get(x, y));
                    }
                }
                let p = linearize(build_program(&t, &g, t.root(), g.root(), &table, dir, penalty)?.with_collapse(cfg.collapse));
                return Ok(p.dump().to_json());
            }
            if let Some(n) = max_leaves {
                let d = d_opt(&t, &g, n, &cfg)?;
                return Ok(serde_json::to_string_pretty(&d).unwrap());
            }
            match direction {
                Dir::Both => {
                    let b = interleaving_bounds_with(&t, &g, &cfg)?;
                    if !b.consistent() {
                        return Err(Fail::Internal(format!("inconsistent bounds {} > {}", b.lower, b.upper)));
                    }
                    Ok(b.to_json())
                }
                Dir::Up | Dir::Down => {
                    let dir = if direction == Dir::Up { Direction::Up } else { Direction::Down };
                    let tab = bottom_up(&t, &g, dir, &cfg)?;
                    let mut best = (0, 0, f64::INFINITY);
                    for x in 0..t.len() {
                        for y in 0..g.len() {
                            let v = deletion_penalty(&t, &g, x, y).max(tab.get(x, y));
                            if v < best.2 {
                                best = (x, y, v);
                            }
                        }
                    }
                    let key = if dir == Direction::Up { "upper" } else { "lower" };
                    let mut out = json!({key: best.2, "root_pair": [t.id(best.0), g.id(best.1)], "ms": tab.ms});
                    if dir == Direction::Up {
                        let w = Coupling::unchecked(tab.unwind(best.0, best.1));
                        out["witness"] = pairs_json(&t, &g, &w);
                    }
                    Ok(serde_json::to_string_pretty(&out).unwrap())
                }
            }
        }
        Cmd::Cost { trees, coupling, out } => {
            let (t, g) = load_pair(&trees)?;
            let c = load_coupling(&coupling, &t, &g)?;
            let rep = CouplingContext::new(&t, &g, &c).report();
            match out {
                Out::Json => Ok(serde_json::to_string_pretty(&rep).unwrap()),
                Out::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["tree", "id", "cost", "case"]).unwrap();
                    for (side, vs) in [("T", &rep.t), ("G", &rep.g)] {
                        for v in vs {
                            let case = serde_json::to_value(v.case).unwrap();
                            w.write_record([side, &v.id, &v.cost.to_string(), case.as_str().unwrap()]).unwrap();
                        }
                    }
                    Ok(String::from_utf8(w.into_inner().unwrap()).unwrap())
                }
            }
        }
        Cmd::VerifyMap { trees, coupling, epsilon, samples } => {
            let (t, g) = load_pair(&trees)?;
            let c = load_coupling(&coupling, &t, &g)?;
            let ctx = CouplingContext::new(&t, &g, &c);
            let eps = epsilon.unwrap_or_else(|| ctx.norm());
            let alpha = InducedMap::good(&ctx, Side::T, eps).map_err(|e| Fail::Invalid(e.to_string()))?;
            let beta = InducedMap::good(&ctx, Side::G, eps).map_err(|e| Fail::Invalid(e.to_string()))?;
            let internal = |e: mergetree::error::MapError| Fail::Internal(e.to_string());
            let ra = check_eps_good(&alpha, samples).map_err(internal)?;
            let rb = check_eps_good(&beta, samples).map_err(internal)?;
            let (res, bad) = composition_check(&alpha, &beta, samples).map_err(internal)?;
            let back = extract_coupling(&t, &g, &alpha.vertex_images().map_err(internal)?, eps).map_err(internal)?;
            let back_norm = CouplingContext::new(&t, &g, &back).norm();
            let pass = ra.pass && rb.pass && res <= 1e-9 && bad == 0 && back_norm <= eps + 1e-9;
            let out = json!({
                "eps": eps, "alpha": ra, "beta": rb,
                "composition": {"max_residual": res, "below": bad},
                "extracted": pairs_json(&t, &g, &back), "extracted_norm": back_norm, "pass": pass,
            });
            let s = serde_json::to_string_pretty(&out).unwrap();
            if pass {
                Ok(s)
            } else {
                println!("{s}");
                Err(Fail::Internal("map checks failed".into()))
            }
        }
        Cmd::Prune { trees, epsilon, max_leaves } => {
            let t = load_tree(&trees.tree[0], trees.strict)?;
            let res = match (epsilon, max_leaves) {
                (Some(e), _) if e > 0.0 => prune(&t, e),
                (Some(e), _) => return Err(Fail::Invalid(format!("epsilon must be positive, got {e}"))),
                (None, Some(n)) => prune_to_leaf_budget(&t, n).1,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let lemma = check_pruning_lemma(&t, &res);
            Ok(serde_json::to_string_pretty(&json!({
                "eps": res.eps,
                "tree": res.tree.to_file(),
                "removed": res.log,
                "degenerate": res.degenerate,
                "lemma": lemma,
            }))
            .unwrap())
        }
        Cmd::Slink { points, perturb } => {
            let cloud = PointCloud::from_csv(read(&points)?.as_bytes()).map_err(|e| Fail::Invalid(e.to_string()))?;
            let mut t = single_linkage_tree(&cloud).map_err(|e| Fail::Invalid(e.to_string()))?;
            if let Some(s) = perturb {
                t = t.perturb_to_generic(s * t.span().max(1.0)).map_err(|e| Fail::Invalid(e.to_string()))?;
            }
            Ok(t.to_json())
        }
        Cmd::Bench { n_min, n_max, reps, seed, max_leaves, d_lab, timings, out, output } => {
            if n_min < 2 || reps < 1 || n_max < n_min {
                return Err(Fail::Invalid("need 2 ≤ n-min ≤ n-max and reps ≥ 1".into()));
            }
            let d_lab = match d_lab {
                Some(p) => read_d_lab(read(&p)?.as_bytes()).map_err(|e| Fail::Invalid(e.to_string()))?,
                None => Default::default(),
            };
            let cfg = BenchConfig { n_min, n_max, reps, seed, budget: max_leaves, d_lab, timings };
            let rows = run_benchmark(&cfg);
            let summary = summarize(&rows);
            let body = match out {
                Out::Csv => rows_to_csv(&rows),
                Out::Json => serde_json::to_string_pretty(&json!({
                    "config": cfg, "rng": "ChaCha8, stream (n << 32) | rep", "sigma_floor": mergetree::bench::SIGMA_FLOOR,
                    "rows": rows, "summary": summary,
                }))
                .unwrap(),
            };
            eprintln!("{}", serde_json::to_string_pretty(&summary).unwrap());
            match output {
                Some(p) => {
                    fs::write(&p, body).map_err(|e| Fail::Invalid(format!("{}: {e}", p.display())))?;
                    Ok(String::new())
                }
                None => Ok(body),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(s) => {
            if !s.is_empty() {
                println!("{}", s.trim_end());
            }
            ExitCode::SUCCESS
        }
        Err(Fail::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Limit(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Fail::Internal(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(4)
        }
    }
}
