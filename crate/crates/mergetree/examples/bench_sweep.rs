//! A small reproducible sweep over random point-cloud pairs.

use mergetree::bench::{rows_to_csv, run_benchmark, summarize, BenchConfig};

fn main() {
    let cfg = BenchConfig { n_min: 2, n_max: 7, reps: 5, seed: 42, budget: 6, ..Default::default() };
    let rows = run_benchmark(&cfg);
    print!("{}", rows_to_csv(&rows));
    for s in summarize(&rows) {
        let med = s.gap.map(|q| q.median);
        println!("n={} rows={} zero-gap rate={:?} median gap={:?}", s.n, s.rows, s.zero_gap_rate, med);
    }
}
