//! Dense transportation simplex (MODI / u-v method) for small problems.
//!
//! North-west corner start with exactly `n + m - 1` basic cells, Dantzig
//! pricing, and Bland's rule while a run of degenerate pivots lasts.

use super::Plan;
use crate::error::{Error, Result};

const DEGENERATE_STREAK: usize = 32;

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
    let eps = 1e-13 * (max_cost + 1.0);

    let mut x = vec![0.0f64; n * m];
    let mut basic = vec![false; n * m];
    let mut basis: Vec<usize> = Vec::with_capacity(n + m - 1);
    {
        let mut ra = supply.to_vec();
        let mut rb = demand.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let f = ra[i].min(rb[j]);
            let cell = i * m + j;
            x[cell] = f;
            basic[cell] = true;
            basis.push(cell);
            ra[i] -= f;
            rb[j] -= f;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if (ra[i] <= 0.0 && i < n - 1) || j == m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        // push rounding residue into the last cell
        let last = (n - 1) * m + (m - 1);
        x[last] = (x[last] + ra[n - 1].max(rb[m - 1])).max(0.0);
    }

    let nodes = n + m;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; m];
    let mut parent = vec![(usize::MAX, usize::MAX); nodes];
    let mut seen = vec![false; nodes];
    let mut queue: Vec<usize> = Vec::with_capacity(nodes);
    let mut streak = 0usize;
    let max_iter = 100 * n * m + 1000;

    for _ in 0..max_iter {
        for list in adj.iter_mut() {
            list.clear();
        }
        for &cell in &basis {
            let (i, j) = (cell / m, cell % m);
            adj[i].push((n + j, cell));
            adj[n + j].push((i, cell));
        }
        // potentials via BFS from row 0: u_i + v_j = c_ij on basic cells
        seen.iter_mut().for_each(|s| *s = false);
        queue.clear();
        queue.push(0);
        seen[0] = true;
        u[0] = 0.0;
        let mut head = 0;
        while head < queue.len() {
            let a = queue[head];
            head += 1;
            for &(b, cell) in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    if b >= n {
                        v[b - n] = cost[cell] - u[a];
                    } else {
                        u[b] = cost[cell] - v[a - n];
                    }
                    parent[b] = (a, cell);
                    queue.push(b);
                }
            }
        }
        if queue.len() != nodes {
            return Err(Error::Solver("basis is not a spanning tree".into()));
        }

        let bland = streak >= DEGENERATE_STREAK;
        let mut enter = usize::MAX;
        let mut best = -eps;
        'price: for i in 0..n {
            for j in 0..m {
                let cell = i * m + j;
                if basic[cell] {
                    continue;
                }
                let rc = cost[cell] - u[i] - v[j];
                if rc < best {
                    enter = cell;
                    if bland {
                        break 'price;
                    }
                    best = rc;
                }
            }
        }
        if enter == usize::MAX {
            let flows = basis
                .iter()
                .filter(|&&c| x[c] > 0.0)
                .map(|&c| (c / m, c % m, x[c]))
                .collect::<Vec<_>>();
            let total = flows.iter().map(|&(i, j, f)| f * cost[i * m + j]).sum();
            return Ok(Plan { flows, cost: total });
        }

        // tree path from column node back to row 0 and from row node back to row 0,
        // cut at their meeting point, gives the pivot cycle
        let (ei, ej) = (enter / m, enter % m);
        let path_to_root = |mut a: usize| {
            let mut p = vec![a];
            while a != 0 {
                a = parent[a].0;
                p.push(a);
            }
            p
        };
        let pr = path_to_root(ei);
        let pc = path_to_root(n + ej);
        let mut ir = pr.len();
        let mut ic = pc.len();
        while ir > 0 && ic > 0 && pr[ir - 1] == pc[ic - 1] {
            ir -= 1;
            ic -= 1;
        }
        // cycle: enter(+), then from column node up to LCA, then down to row node
        let mut cycle: Vec<usize> = Vec::with_capacity(ir + ic);
        for &node in &pc[..ic] {
            cycle.push(parent[node].1);
        }
        for &node in pr[..ir].iter().rev() {
            cycle.push(parent[node].1);
        }
        // cells alternate -, +, -, ... starting right after the entering cell
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &cell) in cycle.iter().enumerate() {
            if k % 2 == 0 && (x[cell] < theta || (x[cell] == theta && bland && cell < leave)) {
                theta = x[cell];
                leave = cell;
            }
        }
        if leave == usize::MAX {
            return Err(Error::Solver("no leaving cell".into()));
        }
        let theta = theta.max(0.0);
        if theta > 0.0 {
            streak = 0;
        } else {
            streak += 1;
        }
        x[enter] = theta;
        for (k, &cell) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                x[cell] = (x[cell] - theta).max(0.0);
            } else {
                x[cell] += theta;
            }
        }
        x[leave] = 0.0;
        basic[leave] = false;
        basic[enter] = true;
        let pos = basis.iter().position(|&c| c == leave).expect("leaving cell in basis");
        basis[pos] = enter;
    }
    Err(Error::Solver("transportation simplex iteration limit exceeded".into()))
}
