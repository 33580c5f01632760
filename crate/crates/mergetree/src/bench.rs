//! Random point-cloud pairs, their single-linkage trees, and the benchmark sweep.

use std::collections::HashMap;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{d_opt, interleaving_bounds_with, BoundsConfig};
use crate::error::CloudError;
use crate::linkage::{single_linkage_tree, PointCloud};
use crate::tree::{MergeTree, TAU};

pub const CSV_HEADER: [&str; 9] = ["n", "rep", "d_l", "d_u", "gap", "d_lab", "rel_err", "ms_lower", "ms_upper"];
pub const SIGMA_FLOOR: f64 = 0.05;

/// Generator for replicate `rep` of size `n`: one ChaCha8 stream per (n, rep).
pub fn replicate_rng(seed: u64, n: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) | rep as u64);
    rng
}

/// σ ~ N(3, 1), redrawn until above the floor.
pub fn sample_sigma<R: Rng>(rng: &mut R) -> f64 {
    let d = Normal::new(3.0, 1.0).unwrap();
    loop {
        let s = d.sample(rng);
        if s > SIGMA_FLOOR {
            return s;
        }
    }
}

fn cloud<R: Rng>(n: usize, rng: &mut R) -> PointCloud {
    let (sx, sy) = (sample_sigma(rng), sample_sigma(rng));
    let (dx, dy) = (Normal::new(5.0, sx).unwrap(), Normal::new(5.0, sy).unwrap());
    PointCloud::Points((0..n).map(|_| [dx.sample(rng), dy.sample(rng)]).collect())
}

pub fn generate_point_cloud_pair<R: Rng>(n: usize, rng: &mut R) -> (PointCloud, PointCloud) {
    let a = cloud(n, rng);
    let b = cloud(n, rng);
    (a, b)
}

/// Single-linkage tree made generic by a jitter of 1e-9 times its height span.
pub fn bench_tree(c: &PointCloud) -> Result<MergeTree, CloudError> {
    let t = single_linkage_tree(c)?;
    if t.is_generic() {
        return Ok(t);
    }
    let scale = 1e-9 * t.span().max(1.0);
    Ok(t.perturb_to_generic(scale).expect("jitter far below every merge gap"))
}

/// Tree pair of replicate `rep` at size `n`.
pub fn random_pair(seed: u64, n: usize, rep: usize) -> (MergeTree, MergeTree) {
    let mut rng = replicate_rng(seed, n, rep);
    let (a, b) = generate_point_cloud_pair(n, &mut rng);
    (bench_tree(&a).unwrap(), bench_tree(&b).unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub reps: usize,
    pub seed: u64,
    /// sizes above this use the pruned estimate
    pub budget: usize,
    /// external values keyed by (n, rep)
    #[serde(skip)]
    pub d_lab: HashMap<(usize, usize), f64>,
    /// record wall times; off keeps the CSV byte-reproducible
    pub timings: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { n_min: 2, n_max: 8, reps: 10, seed: 0, budget: 15, d_lab: HashMap::new(), timings: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub rep: usize,
    /// None for pruned estimates, which carry no lower bound
    pub d_l: Option<f64>,
    pub d_u: f64,
    pub gap: Option<f64>,
    pub d_lab: Option<f64>,
    pub rel_err: Option<f64>,
    pub ms_lower: Option<f64>,
    pub ms_upper: Option<f64>,
}

fn run_one(cfg: &BenchConfig, n: usize, rep: usize) -> Result<BenchRow, String> {
    let (t, g) = random_pair(cfg.seed, n, rep);
    let bc = BoundsConfig::default();
    let (d_l, d_u, ms_l, ms_u) = if n > cfg.budget {
        let start = std::time::Instant::now();
        let d = d_opt(&t, &g, cfg.budget, &bc).map_err(|e| e.to_string())?;
        (None, d.value, None, Some(start.elapsed().as_secs_f64() * 1e3))
    } else {
        let b = interleaving_bounds_with(&t, &g, &bc).map_err(|e| e.to_string())?;
        (Some(b.lower), b.upper, Some(b.ms_lower), Some(b.ms_upper))
    };
    let d_lab = cfg.d_lab.get(&(n, rep)).copied();
    let rel_err = d_lab.filter(|_| d_u > TAU).map(|l| (l - d_u) / d_u);
    let keep = |m: Option<f64>| if cfg.timings { m } else { None };
    Ok(BenchRow {
        n,
        rep,
        d_l,
        d_u,
        gap: d_l.map(|l| d_u - l),
        d_lab,
        rel_err,
        ms_lower: keep(ms_l),
        ms_upper: keep(ms_u),
    })
}

/// Rows in (n, rep) order. Failed rows are reported on stderr and left out.
pub fn run_benchmark(cfg: &BenchConfig) -> Vec<BenchRow> {
    let jobs: Vec<(usize, usize)> =
        (cfg.n_min.max(2)..=cfg.n_max).flat_map(|n| (0..cfg.reps).map(move |r| (n, r))).collect();
    let out: Vec<Result<BenchRow, String>> = jobs.par_iter().map(|&(n, r)| run_one(cfg, n, r)).collect();
    out.into_iter()
        .zip(&jobs)
        .filter_map(|(r, &(n, rep))| match r {
            Ok(row) => Some(row),
            Err(e) => {
                eprintln!("bench row n={n} rep={rep} failed: {e}");
                None
            }
        })
        .collect()
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).unwrap();
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.rep.to_string(),
            cell(r.d_l),
            cell(Some(r.d_u)),
            cell(r.gap),
            cell(r.d_lab),
            cell(r.rel_err),
            cell(r.ms_lower),
            cell(r.ms_upper),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Reads `n,rep,d_lab` rows.
pub fn read_d_lab<R: Read>(rdr: R) -> Result<HashMap<(usize, usize), f64>, csv::Error> {
    let mut out = HashMap::new();
    for rec in csv::Reader::from_reader(rdr).deserialize::<(usize, usize, f64)>() {
        let (n, rep, v) = rec?;
        out.insert((n, rep), v);
    }
    Ok(out)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(s: &[f64], p: f64) -> f64 {
    let h = (s.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

fn quartiles(mut v: Vec<f64>) -> Option<Quartiles> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(Quartiles { q1: quantile(&v, 0.25), median: quantile(&v, 0.5), q3: quantile(&v, 0.75) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub rows: usize,
    /// share of rows with gap ≤ τ, among rows with a gap
    pub zero_gap_rate: Option<f64>,
    pub gap: Option<Quartiles>,
    pub rel_err: Option<Quartiles>,
}

pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let rs: Vec<&BenchRow> = rows.iter().filter(|r| r.n == n).collect();
            let gaps: Vec<f64> = rs.iter().filter_map(|r| r.gap).collect();
            let zero = (!gaps.is_empty()).then(|| gaps.iter().filter(|&&g| g <= TAU).count() as f64 / gaps.len() as f64);
            SummaryRow {
                n,
                rows: rs.len(),
                zero_gap_rate: zero,
                gap: quartiles(gaps),
                rel_err: quartiles(rs.iter().filter_map(|r| r.rel_err).collect()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let mut r1 = replicate_rng(7, 2, 0);
        let mut r2 = replicate_rng(7, 2, 0);
        let (a, b) = generate_point_cloud_pair(2, &mut r1);
        assert_eq!((a.len(), b.len()), (2, 2));
        assert_eq!(generate_point_cloud_pair(2, &mut r2), (a, b));
    }

    #[test]
    fn coordinate_mean() {
        let mut rng = replicate_rng(1, 100, 0);
        let mut sum = 0.0;
        let mut k = 0;
        for _ in 0..5000 {
            if let (PointCloud::Points(a), PointCloud::Points(b)) = generate_point_cloud_pair(2, &mut rng) {
                for p in a.iter().chain(&b) {
                    sum += p[0] + p[1];
                    k += 2;
                }
            }
        }
        assert!(k >= 10_000);
        assert!((sum / k as f64 - 5.0).abs() < 0.1);
    }

    #[test]
    fn trees_are_generic() {
        for rep in 0..5 {
            let (t, g) = random_pair(3, 6, rep);
            assert!(t.is_generic() && g.is_generic());
            assert_eq!(t.leaf_count(), 6);
        }
    }

    #[test]
    fn small_sweep() {
        let cfg = BenchConfig { n_min: 2, n_max: 4, reps: 3, seed: 7, ..Default::default() };
        let rows = run_benchmark(&cfg);
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.gap.unwrap() >= -TAU));
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with("n,rep,d_l,d_u,gap,d_lab,rel_err,ms_lower,ms_upper\n"));
        assert_eq!(csv, rows_to_csv(&run_benchmark(&cfg)));
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|r| r.rows == 3));
    }

    #[test]
    fn quantiles() {
        let q = quartiles(vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
    }
}
