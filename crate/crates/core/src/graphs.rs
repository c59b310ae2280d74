//! Unweighted undirected adjacency matrices: random generators, the edge
//! perturbation model, exact integer powers and edge-list IO.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{BssError, Result};

/// Symmetric 0/1 adjacency matrix with zero diagonal.
///
/// The dense `f64` form is kept for direct use in matrix products; the
/// neighbour lists serve fast sparse products and exact edge counts.
#[derive(Clone)]
pub struct AdjacencyMatrix {
    dense: DMatrix<f64>,
    neighbors: Vec<Vec<u32>>,
    edge_count: usize,
    powers: Arc<Mutex<HashMap<u32, Arc<DMatrix<i64>>>>>,
}

impl fmt::Debug for AdjacencyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdjacencyMatrix")
            .field("n", &self.n())
            .field("edges", &self.edge_count)
            .finish()
    }
}

impl PartialEq for AdjacencyMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.neighbors == other.neighbors
    }
}

impl AdjacencyMatrix {
    fn from_neighbors(n: usize, mut neighbors: Vec<Vec<u32>>) -> Self {
        let mut dense = DMatrix::zeros(n, n);
        let mut twice_edges = 0;
        for (i, nb) in neighbors.iter_mut().enumerate() {
            nb.sort_unstable();
            for &j in nb.iter() {
                dense[(i, j as usize)] = 1.0;
            }
            twice_edges += nb.len();
        }
        Self {
            dense,
            neighbors,
            edge_count: twice_edges / 2,
            powers: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    /// Graph on `n` nodes without edges.
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(BssError::param("graph needs at least one node"));
        }
        Ok(Self::from_neighbors(n, vec![Vec::new(); n]))
    }

    /// Builds a graph from unordered edges `(i, j)`, `i != j`. Duplicates are merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(BssError::param("graph needs at least one node"));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(BssError::param(format!("edge ({i},{j}) outside {n} nodes")));
            }
            if i == j {
                return Err(BssError::param(format!("self-loop at node {i}")));
            }
            if !neighbors[i].contains(&(j as u32)) {
                neighbors[i].push(j as u32);
                neighbors[j].push(i as u32);
            }
        }
        Ok(Self::from_neighbors(n, neighbors))
    }

    /// Validates a dense matrix against the adjacency invariants.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(BssError::param("adjacency matrix must be square and non-empty"));
        }
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(BssError::param(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = m[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(BssError::param(format!("entry ({i},{j}) = {v} is not 0/1")));
                }
                if v != m[(j, i)] {
                    return Err(BssError::param(format!("asymmetric at ({i},{j})")));
                }
                if v == 1.0 {
                    neighbors[i].push(j as u32);
                }
            }
        }
        Ok(Self::from_neighbors(n, neighbors))
    }

    pub fn n(&self) -> usize {
        self.dense.nrows()
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (i, nb) in self.neighbors.iter().enumerate() {
            out.extend(nb.iter().map(|&j| j as usize).filter(|&j| j > i).map(|j| (i, j)));
        }
        out
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count as f64 / self.n() as f64
    }

    /// `X W` for a `rows × n` matrix `X`, using the neighbour lists.
    pub fn right_multiply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.ncols(), self.n(), "column count must equal node count");
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (j, nb) in self.neighbors.iter().enumerate() {
            for &i in nb {
                for r in 0..x.nrows() {
                    out[(r, j)] += x[(r, i as usize)];
                }
            }
        }
        out
    }

    /// `W y` for a vector of length `n`.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.n());
        DVector::from_iterator(
            self.n(),
            self.neighbors.iter().map(|nb| nb.iter().map(|&j| y[j as usize]).sum::<f64>()),
        )
    }

    /// Exact `k`-th power `W^k` in integer arithmetic, cached per `k`.
    pub fn power(&self, k: u32) -> Result<Arc<DMatrix<i64>>> {
        if k == 0 {
            return Err(BssError::param("power k must be >= 1"));
        }
        if let Some(p) = self.powers.lock().expect("power cache poisoned").get(&k) {
            return Ok(Arc::clone(p));
        }
        let base = self.dense.map(|v| v as i64);
        let result = if k == 1 {
            base
        } else {
            let prev = self.power(k - 1)?;
            &*prev * &base
        };
        let result = Arc::new(result);
        self.powers
            .lock()
            .expect("power cache poisoned")
            .insert(k, Arc::clone(&result));
        Ok(result)
    }

    /// Writes the graph as an edge list: a `# nodes <n>` header then `i j` per line, 0-based, `i < j`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# nodes {}", self.n())?;
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn save_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_edge_list(std::io::BufWriter::new(file))
    }

    /// Reads the format produced by [`write_edge_list`](Self::write_edge_list).
    /// Without a header the node count is one past the largest index.
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                if parts.next() == Some("nodes") {
                    let v = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| {
                        BssError::param(format!("line {}: bad nodes header", lineno + 1))
                    })?;
                    n = Some(v);
                }
                continue;
            }
            let mut parts = t.split_whitespace().map(str::parse::<usize>);
            match (parts.next(), parts.next(), parts.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => edges.push((i, j)),
                _ => {
                    return Err(BssError::param(format!(
                        "line {}: expected `i j`, got `{t}`",
                        lineno + 1
                    )))
                }
            }
        }
        let n = match n {
            Some(n) => n,
            None => edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0),
        };
        Self::from_edges(n, &edges)
    }

    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_edge_list(std::io::BufReader::new(file))
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BssError::param(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// Samples every unordered pair `i < j` in row-major order and keeps it when `keep` says so.
fn sample_pairs<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    mut keep: impl FnMut(usize, usize, &mut R) -> bool,
) -> Vec<Vec<u32>> {
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if keep(i, j, rng) {
                neighbors[i].push(j as u32);
                neighbors[j].push(i as u32);
            }
        }
    }
    neighbors
}

/// Erdős–Rényi graph: each pair carries an edge independently with probability `eps`.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> Result<AdjacencyMatrix> {
    if n == 0 {
        return Err(BssError::param("graph needs at least one node"));
    }
    check_probability("eps", eps)?;
    let nb = sample_pairs(n, rng, |_, _, r| r.random::<f64>() < eps);
    Ok(AdjacencyMatrix::from_neighbors(n, nb))
}

/// Two-community stochastic block model with blocks `0..n/2` and `n/2..n`.
pub fn sbm_two_block<R: Rng + ?Sized>(
    n: usize,
    p_in: f64,
    p_out: f64,
    rng: &mut R,
) -> Result<AdjacencyMatrix> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(BssError::param(format!("block model needs an even node count, got {n}")));
    }
    check_probability("p_in", p_in)?;
    check_probability("p_out", p_out)?;
    let half = n / 2;
    let nb = sample_pairs(n, rng, |i, j, r| {
        let p = if (i < half) == (j < half) { p_in } else { p_out };
        r.random::<f64>() < p
    });
    Ok(AdjacencyMatrix::from_neighbors(n, nb))
}

/// Random geometric graph on the unit square: edge iff distance `< radius`.
pub fn geometric_graph<R: Rng + ?Sized>(
    n: usize,
    radius: f64,
    rng: &mut R,
) -> Result<AdjacencyMatrix> {
    if n == 0 {
        return Err(BssError::param("graph needs at least one node"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(BssError::param(format!("radius must be positive, got {radius}")));
    }
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let r2 = radius * radius;
    let nb = sample_pairs(n, rng, |i, j, _| {
        let dx = pts[i].0 - pts[j].0;
        let dy = pts[i].1 - pts[j].1;
        dx * dx + dy * dy < r2
    });
    Ok(AdjacencyMatrix::from_neighbors(n, nb))
}

/// Edge perturbation: every existing edge is removed with probability `eps1`
/// and every absent edge is added with probability `eps2`.
pub fn graph_error<R: Rng + ?Sized>(
    w: &AdjacencyMatrix,
    eps1: f64,
    eps2: f64,
    rng: &mut R,
) -> Result<AdjacencyMatrix> {
    check_probability("eps1", eps1)?;
    check_probability("eps2", eps2)?;
    let n = w.n();
    let nb = sample_pairs(n, rng, |i, j, r| {
        let u: f64 = r.random();
        if w.dense[(i, j)] == 1.0 {
            u >= eps1
        } else {
            u < eps2
        }
    });
    Ok(AdjacencyMatrix::from_neighbors(n, nb))
}
