//! Primal network simplex for the uncapacitated transportation problem.
//!
//! The spanning tree is rooted at an artificial node connected to every
//! source (arc `i -> root`) and every sink (arc `root -> j`). Leaving arcs are
//! chosen so the tree stays strongly feasible, which rules out cycling on the
//! heavily degenerate instances that uniform weights produce. Entering arcs
//! come from a block search over reduced costs.

use crate::error::{Error, Result};

pub(crate) struct Solution {
    /// Row-major `n × m` flows.
    pub flow: Vec<f64>,
    /// Node potentials of the sources, as dual variables `φ`.
    pub phi: Vec<f64>,
    /// Node potentials of the sinks, as dual variables `ψ`.
    #[allow(dead_code)]
    pub psi: Vec<f64>,
    pub pivots: usize,
}

struct Graph<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    art_cost: f64,
}

impl Graph<'_> {
    fn real_arcs(&self) -> usize {
        self.n * self.m
    }

    fn arc_count(&self) -> usize {
        self.n * self.m + self.n + self.m
    }

    fn root(&self) -> usize {
        self.n + self.m
    }

    fn source(&self, e: usize) -> usize {
        let nm = self.real_arcs();
        if e < nm {
            e / self.m
        } else if e < nm + self.n {
            e - nm
        } else {
            self.root()
        }
    }

    fn target(&self, e: usize) -> usize {
        let nm = self.real_arcs();
        if e < nm {
            self.n + e % self.m
        } else if e < nm + self.n {
            self.root()
        } else {
            self.n + (e - nm - self.n)
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.real_arcs() {
            self.cost[e]
        } else {
            self.art_cost
        }
    }
}

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// True when the predecessor arc points from the node to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    adj: Vec<Vec<usize>>,
    stack: Vec<usize>,
}

impl Tree {
    /// Re-derives parents, depths and potentials from the tree adjacency.
    fn rebuild(&mut self, g: &Graph<'_>) {
        let root = g.root();
        self.parent[root] = usize::MAX;
        self.pred[root] = usize::MAX;
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        self.stack.clear();
        self.stack.push(root);
        while let Some(v) = self.stack.pop() {
            for k in 0..self.adj[v].len() {
                let e = self.adj[v][k];
                if e == self.pred[v] {
                    continue;
                }
                let (s, t) = (g.source(e), g.target(e));
                let (child, up) = if s == v { (t, false) } else { (s, true) };
                self.parent[child] = v;
                self.pred[child] = e;
                self.up[child] = up;
                self.depth[child] = self.depth[v] + 1;
                // Tree arcs have zero reduced cost c + π_s - π_t.
                self.pi[child] = if up {
                    self.pi[v] - g.arc_cost(e)
                } else {
                    self.pi[v] + g.arc_cost(e)
                };
                self.stack.push(child);
            }
        }
    }
}

/// Solves `min Σ c_ij x_ij` subject to row sums `a`, column sums `b`, `x ≥ 0`.
///
/// `a` and `b` must be strictly positive with (numerically) equal totals.
pub(crate) fn solve(a: &[f64], b: &[f64], cost: &[f64]) -> Result<Solution> {
    let (n, m) = (a.len(), b.len());
    debug_assert_eq!(cost.len(), n * m);
    if n == 0 || m == 0 {
        return Err(Error::EmptySupport);
    }
    let max_abs = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    // Any artificial cost above max|c| makes the artificial arcs unattractive
    // at the optimum: a unit routed i -> root -> j can move onto arc (i, j).
    let art_cost = 2.0 * max_abs + 1.0;
    let g = Graph {
        n,
        m,
        cost,
        art_cost,
    };
    let node_count = n + m + 1;
    let arc_count = g.arc_count();
    let nm = g.real_arcs();
    let root = g.root();

    let mut flow = vec![0.0; arc_count];
    let mut in_tree = vec![false; arc_count];
    let mut tree = Tree {
        parent: vec![usize::MAX; node_count],
        pred: vec![usize::MAX; node_count],
        up: vec![false; node_count],
        depth: vec![0; node_count],
        pi: vec![0.0; node_count],
        adj: vec![Vec::new(); node_count],
        stack: Vec::with_capacity(node_count),
    };
    for i in 0..n {
        let e = nm + i;
        flow[e] = a[i];
        in_tree[e] = true;
        tree.adj[i].push(e);
        tree.adj[root].push(e);
    }
    for j in 0..m {
        let e = nm + n + j;
        flow[e] = b[j];
        in_tree[e] = true;
        tree.adj[n + j].push(e);
        tree.adj[root].push(e);
    }
    tree.rebuild(&g);

    let tol = 1e-12 * (1.0 + max_abs);
    let block = ((arc_count as f64).sqrt().ceil() as usize).max(16);
    let max_pivots = 200 * arc_count + 10_000;
    let mut next_arc = 0usize;
    let mut pivots = 0usize;

    loop {
        // Block search for an entering arc.
        let mut entering = usize::MAX;
        let mut best = -tol;
        let mut scanned = 0usize;
        let mut in_block = 0usize;
        let mut e = next_arc;
        while scanned < arc_count {
            if !in_tree[e] {
                let rc = g.arc_cost(e) + tree.pi[g.source(e)] - tree.pi[g.target(e)];
                if rc < best {
                    best = rc;
                    entering = e;
                }
            }
            scanned += 1;
            in_block += 1;
            e += 1;
            if e == arc_count {
                e = 0;
            }
            if in_block == block {
                if entering != usize::MAX {
                    break;
                }
                in_block = 0;
            }
        }
        if entering == usize::MAX {
            break;
        }
        next_arc = e;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::NotConverged {
                solver: "network simplex",
                iterations: pivots,
                residual: best.abs(),
            });
        }

        let first = g.source(entering);
        let second = g.target(entering);
        let join = {
            let (mut u, mut v) = (first, second);
            while u != v {
                if tree.depth[u] >= tree.depth[v] {
                    u = tree.parent[u];
                } else {
                    v = tree.parent[v];
                }
            }
            u
        };

        // Leaving arc: last blocking arc met when walking the cycle from the
        // join node in the direction of the entering arc.
        let mut delta = f64::INFINITY;
        let mut leave_node = usize::MAX;
        let mut u = first;
        while u != join {
            if tree.up[u] {
                let d = flow[tree.pred[u]];
                if d < delta {
                    delta = d;
                    leave_node = u;
                }
            }
            u = tree.parent[u];
        }
        let mut u = second;
        while u != join {
            if !tree.up[u] {
                let d = flow[tree.pred[u]];
                if d <= delta {
                    delta = d;
                    leave_node = u;
                }
            }
            u = tree.parent[u];
        }
        if leave_node == usize::MAX {
            return Err(Error::Unsupported(
                "transportation problem is unbounded".into(),
            ));
        }

        if delta > 0.0 {
            flow[entering] += delta;
            let mut u = first;
            while u != join {
                let e = tree.pred[u];
                if tree.up[u] {
                    flow[e] -= delta;
                } else {
                    flow[e] += delta;
                }
                u = tree.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = tree.pred[u];
                if tree.up[u] {
                    flow[e] += delta;
                } else {
                    flow[e] -= delta;
                }
                u = tree.parent[u];
            }
        }

        let leaving = tree.pred[leave_node];
        flow[leaving] = 0.0;
        in_tree[leaving] = false;
        let p = tree.parent[leave_node];
        tree.adj[leave_node].retain(|&x| x != leaving);
        tree.adj[p].retain(|&x| x != leaving);
        in_tree[entering] = true;
        tree.adj[first].push(entering);
        tree.adj[second].push(entering);
        tree.rebuild(&g);
    }

    // Shift potentials so they stay O(max|c|) instead of carrying the
    // artificial offset, then read off φ_i = -π_i and ψ_j = π_j.
    let shift = tree.pi[n];
    let phi = (0..n).map(|i| shift - tree.pi[i]).collect();
    let psi = (0..m).map(|j| tree.pi[n + j] - shift).collect();
    let flow = flow[..nm].iter().map(|&f| f.max(0.0)).collect();
    Ok(Solution {
        flow,
        phi,
        psi,
        pivots,
    })
}
