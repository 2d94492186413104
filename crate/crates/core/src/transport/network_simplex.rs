//! Primal network simplex on the bipartite transportation graph.
//!
//! Supply nodes `0..n`, demand nodes `n..n+m` and an artificial root `n+m`.
//! Real arcs `i -> n+j` are uncapacitated; every node starts attached to the
//! root by an artificial arc, which gives a strongly feasible initial tree.
//! Leaving arcs are chosen with the strongly feasible rule (first blocking arc
//! on the source side, last on the target side), which rules out cycling on the
//! heavily degenerate problems produced by uniform weights. Pricing is block
//! search over the real arcs.

use super::Plan;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

struct Graph<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    art_cost: f64,
}

impl Graph<'_> {
    #[inline]
    fn real_arcs(&self) -> usize {
        self.n * self.m
    }
    #[inline]
    fn source(&self, e: usize) -> usize {
        let re = self.real_arcs();
        if e < re {
            e / self.m
        } else {
            // artificial arc of node u: u -> root for supply nodes, root -> u for demand nodes
            let u = e - re;
            if u < self.n {
                u
            } else {
                self.n + self.m
            }
        }
    }
    #[inline]
    fn target(&self, e: usize) -> usize {
        let re = self.real_arcs();
        if e < re {
            self.n + e % self.m
        } else {
            let u = e - re;
            if u < self.n {
                self.n + self.m
            } else {
                u
            }
        }
    }
    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        let re = self.real_arcs();
        if e < re {
            self.cost[e]
        } else if e - re < self.n {
            0.0
        } else {
            self.art_cost
        }
    }
}

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    // true when the predecessor arc points from the node to its parent
    pred_up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
}

fn remove_child(children: &mut [Vec<usize>], parent: usize, child: usize) {
    let list = &mut children[parent];
    if let Some(pos) = list.iter().position(|&c| c == child) {
        list.swap_remove(pos);
    }
}

/// Solve the balanced transportation problem exactly.
///
/// `cost` is row-major `n x m`. Supplies and demands must be nonnegative and
/// carry (numerically) equal total mass.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Plan> {
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 {
        return Err(Error::Solver("empty transportation problem".into()));
    }
    if cost.len() != n * m {
        return Err(Error::Solver("cost matrix has wrong shape".into()));
    }
    let max_cost = cost.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
    if !max_cost.is_finite() {
        return Err(Error::Solver("non-finite cost".into()));
    }
    let node_num = n + m + 1;
    let root = n + m;
    let g = Graph {
        n,
        m,
        cost,
        art_cost: (max_cost + 1.0) * node_num as f64,
    };
    let re = g.real_arcs();
    let arc_num = re + n + m;

    let mut flow = vec![0.0f64; arc_num];
    let mut in_tree = vec![false; arc_num];
    let mut tree = Tree {
        parent: vec![NONE; node_num],
        pred: vec![NONE; node_num],
        pred_up: vec![false; node_num],
        depth: vec![0; node_num],
        pi: vec![0.0; node_num],
        children: vec![Vec::new(); node_num],
    };
    tree.children[root].reserve(n + m);
    for u in 0..n + m {
        let e = re + u;
        tree.parent[u] = root;
        tree.pred[u] = e;
        tree.depth[u] = 1;
        in_tree[e] = true;
        if u < n {
            tree.pred_up[u] = true;
            flow[e] = supply[u];
            tree.pi[u] = 0.0;
        } else {
            tree.pred_up[u] = false;
            flow[e] = demand[u - n];
            tree.pi[u] = g.art_cost;
        }
        tree.children[root].push(u);
    }

    let eps = 1e-13 * (max_cost + 1.0);
    let block = ((re as f64).sqrt().ceil() as usize).max(10).min(re);
    let mut next_arc = 0usize;
    let mut path_s: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let max_pivots = 50 * arc_num + 10_000;
    let mut pivots = 0usize;

    loop {
        // block search pricing over real arcs
        let mut best = NONE;
        let mut best_rc = -eps;
        let mut scanned = 0usize;
        let mut in_block = 0usize;
        let mut e = next_arc;
        while scanned < re {
            if !in_tree[e] {
                let rc = cost[e] + tree.pi[e / m] - tree.pi[n + e % m];
                if rc < best_rc {
                    best_rc = rc;
                    best = e;
                }
            }
            scanned += 1;
            in_block += 1;
            e += 1;
            if e == re {
                e = 0;
            }
            if in_block == block {
                if best != NONE {
                    break;
                }
                in_block = 0;
            }
        }
        if best == NONE {
            break;
        }
        next_arc = e;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver("network simplex pivot limit exceeded".into()));
        }

        let e_in = best;
        let s = g.source(e_in);
        let t = g.target(e_in);

        // join node
        let (mut a, mut b) = (s, t);
        while a != b {
            if tree.depth[a] >= tree.depth[b] {
                a = tree.parent[a];
            } else {
                b = tree.parent[b];
            }
        }
        let join = a;

        // leaving arc, strongly feasible rule
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut side = 0u8;
        let mut u = s;
        while u != join {
            if tree.pred_up[u] {
                let d = flow[tree.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    side = 1;
                }
            }
            u = tree.parent[u];
        }
        let mut u = t;
        while u != join {
            if !tree.pred_up[u] {
                let d = flow[tree.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    side = 2;
                }
            }
            u = tree.parent[u];
        }
        if side == 0 {
            return Err(Error::Solver("unbounded transportation problem".into()));
        }
        let delta = delta.max(0.0);
        let (u_in, v_in) = if side == 1 { (s, t) } else { (t, s) };

        // augment along the cycle
        if delta > 0.0 {
            flow[e_in] += delta;
            let mut u = s;
            while u != join {
                let pe = tree.pred[u];
                if tree.pred_up[u] {
                    flow[pe] -= delta;
                } else {
                    flow[pe] += delta;
                }
                u = tree.parent[u];
            }
            let mut u = t;
            while u != join {
                let pe = tree.pred[u];
                if tree.pred_up[u] {
                    flow[pe] += delta;
                } else {
                    flow[pe] -= delta;
                }
                u = tree.parent[u];
            }
        }

        // swap arcs in the spanning tree
        let e_out = tree.pred[u_out];
        in_tree[e_out] = false;
        in_tree[e_in] = true;
        flow[e_out] = 0.0;

        // stem from u_in up to u_out gets re-rooted at u_in
        path_s.clear();
        let mut u = u_in;
        path_s.push(u);
        while u != u_out {
            u = tree.parent[u];
            path_s.push(u);
        }
        let old_parent_out = tree.parent[u_out];
        remove_child(&mut tree.children, old_parent_out, u_out);
        let mut carried_pred = tree.pred[path_s[0]];
        let mut carried_up = tree.pred_up[path_s[0]];
        for w in 1..path_s.len() {
            let child = path_s[w - 1];
            let node = path_s[w];
            remove_child(&mut tree.children, node, child);
            tree.children[child].push(node);
            let next_pred = tree.pred[node];
            let next_up = tree.pred_up[node];
            tree.parent[node] = child;
            tree.pred[node] = carried_pred;
            tree.pred_up[node] = !carried_up;
            carried_pred = next_pred;
            carried_up = next_up;
        }
        tree.parent[u_in] = v_in;
        tree.pred[u_in] = e_in;
        tree.pred_up[u_in] = s == u_in;
        tree.children[v_in].push(u_in);

        // recompute depth and potentials below u_in
        stack.clear();
        stack.push(u_in);
        while let Some(w) = stack.pop() {
            let p = tree.parent[w];
            let c = g.arc_cost(tree.pred[w]);
            tree.depth[w] = tree.depth[p] + 1;
            tree.pi[w] = if tree.pred_up[w] {
                tree.pi[p] - c
            } else {
                tree.pi[p] + c
            };
            stack.extend_from_slice(&tree.children[w]);
        }
    }

    let total_mass = supply.iter().sum::<f64>().max(demand.iter().sum::<f64>());
    let residual = flow[re..].iter().fold(0.0f64, |acc, &f| acc.max(f.abs()));
    if residual > 1e-9 * total_mass.max(1.0) {
        return Err(Error::Solver(format!(
            "artificial arcs still carry {residual:e} mass; problem is unbalanced"
        )));
    }
    let mut flows = Vec::new();
    let mut total = 0.0;
    for (e, &f) in flow[..re].iter().enumerate() {
        if f > 0.0 {
            flows.push((e / m, e % m, f));
            total += f * cost[e];
        }
    }
    Ok(Plan { flows, cost: total })
}
