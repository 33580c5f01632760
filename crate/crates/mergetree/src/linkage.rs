//! Point clouds and single-linkage dendrograms.

use std::io::Read;

use crate::error::CloudError;
use crate::tree::{MergeTree, NodeRecord};

#[derive(Debug, Clone, PartialEq)]
pub enum PointCloud {
    Points(Vec<[f64; 2]>),
    Matrix(Vec<Vec<f64>>),
}

impl PointCloud {
    pub fn len(&self) -> usize {
        match self {
            PointCloud::Points(p) => p.len(),
            PointCloud::Matrix(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Euclidean distances for point input, the matrix itself otherwise.
    pub fn distances(&self) -> Result<Vec<Vec<f64>>, CloudError> {
        match self {
            PointCloud::Points(p) => {
                for (i, q) in p.iter().enumerate() {
                    if !q[0].is_finite() || !q[1].is_finite() {
                        return Err(CloudError::NonFinite(i));
                    }
                }
                Ok(p.iter()
                    .map(|a| p.iter().map(|b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()).collect())
                    .collect())
            }
            PointCloud::Matrix(m) => {
                let n = m.len();
                for i in 0..n {
                    if m[i].len() != n {
                        return Err(CloudError::BadMatrix(i, m[i].len()));
                    }
                    for j in 0..n {
                        if !m[i][j].is_finite() {
                            return Err(CloudError::NonFinite(i));
                        }
                        if m[i][j] < 0.0 || m[i][j] != m[j][i] || (i == j && m[i][j] != 0.0) {
                            return Err(CloudError::BadMatrix(i, j));
                        }
                    }
                }
                Ok(m.clone())
            }
        }
    }

    /// Reads `x,y` rows, or a square matrix after a `matrix` header line.
    pub fn from_csv<R: Read>(rdr: R) -> Result<PointCloud, CloudError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(rdr);
        let mut rows: Vec<Vec<String>> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| CloudError::Format(e.to_string()))?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        let Some(head) = rows.first() else {
            return Err(CloudError::TooFewPoints(0));
        };
        let parse = |i: usize, s: &str| s.parse::<f64>().map_err(|_| CloudError::Format(format!("row {i}: {s:?}")));
        if head[0].eq_ignore_ascii_case("matrix") {
            let mut m = Vec::new();
            for (i, r) in rows.iter().enumerate().skip(1) {
                m.push(r.iter().map(|s| parse(i, s)).collect::<Result<Vec<_>, _>>()?);
            }
            return Ok(PointCloud::Matrix(m));
        }
        let body = if head[0].parse::<f64>().is_err() { &rows[1..] } else { &rows[..] };
        let mut pts = Vec::new();
        for (i, r) in body.iter().enumerate() {
            if r.len() != 2 {
                return Err(CloudError::Format(format!("row {i}: expected 2 columns")));
            }
            pts.push([parse(i, &r[0])?, parse(i, &r[1])?]);
        }
        Ok(PointCloud::Points(pts))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        match self {
            PointCloud::Points(p) => {
                w.write_record(["x", "y"]).unwrap();
                for q in p {
                    w.write_record([q[0].to_string(), q[1].to_string()]).unwrap();
                }
            }
            PointCloud::Matrix(m) => {
                w.write_record(["matrix"]).unwrap();
                for r in m {
                    w.write_record(r.iter().map(|x| x.to_string())).unwrap();
                }
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn find(uf: &mut [usize], mut x: usize) -> usize {
    while uf[x] != x {
        uf[x] = uf[uf[x]];
        x = uf[x];
    }
    x
}

/// Single-linkage dendrogram. Leaves `p..` sit at height 0, merges `m..` at the merge distance.
/// Leaf heights tie, so the result is not generic.
pub fn single_linkage_tree(cloud: &PointCloud) -> Result<MergeTree, CloudError> {
    let n = cloud.len();
    if n < 2 {
        return Err(CloudError::TooFewPoints(n));
    }
    let d = cloud.distances()?;
    let width = (2 * n).to_string().len();
    let leaf = |i: usize| format!("p{i:0width$}");
    let node = |i: usize| format!("m{i:0width$}");
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push((d[i][j], i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut uf: Vec<usize> = (0..n).collect();
    let mut recs: Vec<NodeRecord> = (0..n).map(|i| NodeRecord { id: leaf(i), height: 0.0, parent: None }).collect();
    let mut pos: Vec<usize> = (0..n).collect();
    let mut merges = 0;
    for (h, i, j) in edges {
        let (ri, rj) = (find(&mut uf, i), find(&mut uf, j));
        if ri == rj {
            continue;
        }
        let id = node(merges);
        merges += 1;
        recs[pos[ri]].parent = Some(id.clone());
        recs[pos[rj]].parent = Some(id.clone());
        recs.push(NodeRecord { id: id.clone(), height: h, parent: None });
        uf[rj] = ri;
        pos[ri] = recs.len() - 1;
        if merges == n - 1 {
            break;
        }
    }
    Ok(MergeTree::validate(recs, false).expect("single linkage builds a valid tree"))
}
