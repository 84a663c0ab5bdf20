//! Balanced transportation problems, solved with the transportation simplex
//! (MODI potentials, northwest-corner start).

use std::collections::VecDeque;

use thiserror::Error;

/// Allowed gap between total supply and total demand.
pub const MASS_TOLERANCE: f64 = 1e-9;
const REDUCED_COST_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum TransportError {
    #[error("supply {supply} and demand {demand} do not balance")]
    Infeasible { supply: f64, demand: f64 },
    #[error("masses and costs must be finite and non-negative")]
    InvalidInput,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flow {
    pub from: usize,
    pub to: usize,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub flows: Vec<Flow>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn row_sums(&self, rows: usize) -> Vec<f64> {
        let mut sums = vec![0.0; rows];
        for f in &self.flows {
            sums[f.from] += f.mass;
        }
        sums
    }

    pub fn col_sums(&self, cols: usize) -> Vec<f64> {
        let mut sums = vec![0.0; cols];
        for f in &self.flows {
            sums[f.to] += f.mass;
        }
        sums
    }
}

/// Spanning-tree basis over rows `0..m` and columns `m..m+n`.
struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    mass: Vec<f64>,
    basic: Vec<bool>,
}

impl Basis {
    fn northwest(a: &[f64], b: &[f64]) -> Basis {
        let (m, n) = (a.len(), b.len());
        let (mut s, mut d) = (a.to_vec(), b.to_vec());
        let mut basis = Basis { m, n, cells: Vec::new(), mass: Vec::new(), basic: vec![false; m * n] };
        let (mut i, mut j) = (0, 0);
        loop {
            let q = s[i].min(d[j]).max(0.0);
            basis.push(i, j, q);
            s[i] -= q;
            d[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        basis
    }

    fn push(&mut self, i: usize, j: usize, q: f64) {
        self.cells.push((i, j));
        self.mass.push(q);
        self.basic[i * self.n + j] = true;
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<(usize, usize)>], cost: &dyn Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>) {
        let mut pot = vec![f64::NAN; self.m + self.n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0]);
        while let Some(node) = queue.pop_front() {
            for &(next, k) in &adj[node] {
                if pot[next].is_nan() {
                    let (i, j) = self.cells[k];
                    pot[next] = cost(i, j) - pot[node];
                    queue.push_back(next);
                }
            }
        }
        let v = pot.split_off(self.m);
        (pot, v)
    }

    /// Basis cells on the tree path from column `j` to row `i`, in order.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        seen[i] = true;
        let mut queue = VecDeque::from([i]);
        let target = self.m + j;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, k) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while let Some((prev, k)) = parent[node] {
            cells.push(k);
            node = prev;
        }
        cells
    }
}

/// Minimum-cost plan moving `supply` onto `demand`, with `cost` row-major
/// of shape `supply.len() x demand.len()`. A total mismatch up to
/// [`MASS_TOLERANCE`] is absorbed by rescaling the demand.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan, TransportError> {
    let (m0, n0) = (supply.len(), demand.len());
    assert_eq!(cost.len(), m0 * n0, "cost matrix shape");
    let valid = |x: &f64| x.is_finite() && *x >= 0.0;
    if !supply.iter().all(valid) || !demand.iter().all(valid) || !cost.iter().all(valid) {
        return Err(TransportError::InvalidInput);
    }
    let s_total: f64 = supply.iter().sum();
    let d_total: f64 = demand.iter().sum();
    if (s_total - d_total).abs() > MASS_TOLERANCE {
        return Err(TransportError::Infeasible { supply: s_total, demand: d_total });
    }
    let rows: Vec<usize> = (0..m0).filter(|&i| supply[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n0).filter(|&j| demand[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Ok(TransportPlan { flows: Vec::new(), cost: 0.0 });
    }
    let a: Vec<f64> = rows.iter().map(|&i| supply[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| demand[j] * s_total / d_total).collect();
    let (m, n) = (a.len(), b.len());
    let c = |i: usize, j: usize| cost[rows[i] * n0 + cols[j]];

    let mut basis = Basis::northwest(&a, &b);
    let mut degenerate_run = 0;
    let mut bland = false;
    let max_pivots = 50 * m * n + 1000;
    for _ in 0..max_pivots {
        let adj = basis.adjacency();
        let (u, v) = basis.potentials(&adj, &c);
        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                if basis.basic[i * n + j] {
                    continue;
                }
                let rc = c(i, j) - ui - vj;
                if rc < -REDUCED_COST_EPS && entering.is_none_or(|(_, _, best)| rc < best) {
                    entering = Some((i, j, rc));
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            return Ok(extract(&basis, &rows, &cols, &c));
        };

        let path = basis.path(&adj, ei, ej);
        // path[0] touches column ej and loses mass; signs alternate from there
        let leaving = path
            .iter()
            .step_by(2)
            .copied()
            .min_by(|&x, &y| {
                let (cx, cy) = (basis.cells[x], basis.cells[y]);
                basis.mass[x].total_cmp(&basis.mass[y]).then((cx.0 * n + cx.1).cmp(&(cy.0 * n + cy.1)))
            })
            .expect("cycle has a minus cell");
        let theta = basis.mass[leaving];
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.mass[k] = (basis.mass[k] - theta).max(0.0);
            } else {
                basis.mass[k] += theta;
            }
        }
        let (li, lj) = basis.cells[leaving];
        basis.basic[li * n + lj] = false;
        basis.cells[leaving] = (ei, ej);
        basis.mass[leaving] = theta;
        basis.basic[ei * n + ej] = true;

        if theta <= 0.0 {
            degenerate_run += 1;
            if degenerate_run > m + n {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }
    }
    log::warn!("transportation simplex hit its pivot limit; returning the current plan");
    Ok(extract(&basis, &rows, &cols, &c))
}

fn extract(basis: &Basis, rows: &[usize], cols: &[usize], c: &dyn Fn(usize, usize) -> f64) -> TransportPlan {
    let mut flows: Vec<Flow> = basis
        .cells
        .iter()
        .zip(&basis.mass)
        .filter(|(_, &q)| q > 0.0)
        .map(|(&(i, j), &q)| Flow { from: rows[i], to: cols[j], mass: q })
        .collect();
    flows.sort_by_key(|f| (f.from, f.to));
    let cost = basis.cells.iter().zip(&basis.mass).map(|(&(i, j), &q)| q * c(i, j)).sum();
    TransportPlan { flows, cost }
}
