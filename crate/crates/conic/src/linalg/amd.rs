use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Fill-reducing ordering for a symmetric sparsity pattern.
///
/// Minimum degree on the quotient graph with approximate external degrees and
/// element absorption. `adjacency[i]` lists the off-diagonal neighbours of node
/// `i`; the pattern must be symmetric. Returns `perm` with `perm[new] = old`.
/// Ties are broken by node index, so the ordering is deterministic.
pub fn approximate_minimum_degree(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut var_adj: Vec<Vec<usize>> = adjacency
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let mut v: Vec<usize> = nbrs.iter().copied().filter(|&j| j != i).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    // Elements adjacent to each variable, and the variables of each element.
    // An element is identified by the pivot that created it.
    let mut var_elems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut elem_vars: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut elem_alive = vec![false; n];
    let mut eliminated = vec![false; n];
    let mut degree: Vec<usize> = var_adj.iter().map(Vec::len).collect();

    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|i| Reverse((degree[i], i))).collect();

    let mut mark = vec![0usize; n];
    let mut elem_mark = vec![0usize; n];
    let mut external = vec![0usize; n];
    let mut stamp = 0usize;

    let mut order = Vec::with_capacity(n);
    let mut pivot_vars: Vec<usize> = Vec::new();

    while let Some(Reverse((d, p))) = heap.pop() {
        if eliminated[p] || d != degree[p] {
            continue;
        }
        eliminated[p] = true;
        order.push(p);
        stamp += 1;

        // Variables of the new element: neighbours of p plus the variables of
        // every element p touches. Those elements are absorbed.
        pivot_vars.clear();
        for &v in &var_adj[p] {
            if !eliminated[v] && mark[v] != stamp {
                mark[v] = stamp;
                pivot_vars.push(v);
            }
        }
        for &e in &var_elems[p] {
            if !elem_alive[e] {
                continue;
            }
            for &v in &elem_vars[e] {
                if v != p && !eliminated[v] && mark[v] != stamp {
                    mark[v] = stamp;
                    pivot_vars.push(v);
                }
            }
            elem_alive[e] = false;
            elem_vars[e] = Vec::new();
        }
        var_adj[p] = Vec::new();
        var_elems[p] = Vec::new();
        pivot_vars.sort_unstable();
        elem_alive[p] = true;
        elem_vars[p] = pivot_vars.clone();

        for &i in &pivot_vars {
            var_elems[i].retain(|&e| elem_alive[e]);
            var_elems[i].push(p);
            var_adj[i].retain(|&v| !eliminated[v] && mark[v] != stamp);
        }

        // |L_e \ L_p| for every element adjacent to the pivot's variables.
        for &i in &pivot_vars {
            for &e in &var_elems[i] {
                if e == p {
                    continue;
                }
                if elem_mark[e] != stamp {
                    elem_mark[e] = stamp;
                    external[e] = elem_vars[e].len();
                }
                external[e] -= 1;
            }
        }
        for &i in &pivot_vars {
            for &e in &var_elems[i] {
                if e != p && elem_alive[e] && external[e] == 0 {
                    elem_alive[e] = false;
                    elem_vars[e] = Vec::new();
                }
            }
        }

        let remaining = n - order.len();
        let lp_len = pivot_vars.len();
        for &i in &pivot_vars {
            var_elems[i].retain(|&e| elem_alive[e]);
            let mut d = var_adj[i].len() + lp_len - 1;
            for &e in &var_elems[i] {
                if e != p {
                    d += external[e];
                }
            }
            let d = d.min(remaining.saturating_sub(1));
            degree[i] = d;
            heap.push(Reverse((d, i)));
        }
    }
    debug_assert_eq!(order.len(), n);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_permutation(p: &[usize]) -> bool {
        let mut seen = vec![false; p.len()];
        p.iter().all(|&i| i < p.len() && !std::mem::replace(&mut seen[i], true))
    }

    #[test]
    fn arrow_matrix_eliminates_hub_last() {
        // Node 0 connected to everything: eliminating it first would fill in
        // a dense clique.
        let n = 6;
        let mut adj = vec![Vec::new(); n];
        for i in 1..n {
            adj[0].push(i);
            adj[i].push(0);
        }
        let p = approximate_minimum_degree(&adj);
        assert!(is_permutation(&p));
        // once one leaf remains the hub and the leaf are interchangeable
        assert!(p[..n - 2].iter().all(|&i| i != 0), "{p:?}");
    }

    #[test]
    fn path_graph_is_permutation() {
        let n = 50;
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        let p = approximate_minimum_degree(&adj);
        assert!(is_permutation(&p));
    }

    #[test]
    fn empty_and_isolated() {
        assert!(approximate_minimum_degree(&[]).is_empty());
        let p = approximate_minimum_degree(&[vec![], vec![], vec![]]);
        assert_eq!(p, vec![0, 1, 2]);
    }
}
