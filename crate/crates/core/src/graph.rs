//! Directed-graph helpers over adjacency lists.

/// Tarjan's algorithm, iterative. SCCs come out in reverse topological order
/// of the condensation: every SCC precedes the SCCs that can reach it. Each
/// component lists its vertices in ascending order.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut out = Vec::new();
    // (vertex, position in its successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort_unstable();
                out.push(component);
            }
        }
    }
    out
}

/// Component index per vertex for a list of SCCs.
pub fn component_map(n: usize, sccs: &[Vec<usize>]) -> Vec<usize> {
    let mut map = vec![0; n];
    for (i, c) in sccs.iter().enumerate() {
        for &v in c {
            map[v] = i;
        }
    }
    map
}

/// Longest path (edge count) into each SCC of the condensation, given SCCs
/// in the order produced by [`tarjan_scc`].
pub fn condensation_levels(adj: &[Vec<usize>], sccs: &[Vec<usize>]) -> Vec<usize> {
    let comp = component_map(adj.len(), sccs);
    let mut level = vec![0usize; sccs.len()];
    // Reverse Tarjan order is a topological order (sources first).
    for c in (0..sccs.len()).rev() {
        for &v in &sccs[c] {
            for &w in &adj[v] {
                let d = comp[w];
                if d != c {
                    level[d] = level[d].max(level[c] + 1);
                }
            }
        }
    }
    level
}

/// Bottom SCCs: components with no edge leaving them.
pub fn bottom_sccs(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let sccs = tarjan_scc(adj);
    let comp = component_map(adj.len(), &sccs);
    sccs.iter()
        .enumerate()
        .filter(|(i, c)| c.iter().all(|&v| adj[v].iter().all(|&w| comp[w] == *i)))
        .map(|(_, c)| c.clone())
        .collect()
}

/// Vertices that can reach `targets` through vertices in `allowed`
/// (targets themselves always included). `preds` is the reversed graph.
pub fn backward_reachable(preds: &[Vec<usize>], targets: &[bool], allowed: &[bool]) -> Vec<bool> {
    let mut seen = targets.to_vec();
    let mut queue: Vec<usize> = (0..targets.len()).filter(|&s| targets[s]).collect();
    while let Some(v) = queue.pop() {
        for &u in &preds[v] {
            if !seen[u] && allowed[u] {
                seen[u] = true;
                queue.push(u);
            }
        }
    }
    seen
}

pub fn forward_reachable(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    seen[from] = true;
    let mut queue = vec![from];
    while let Some(v) = queue.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push(w);
            }
        }
    }
    seen
}

pub fn reverse(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut preds = vec![Vec::new(); adj.len()];
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            if preds[w].last() != Some(&v) {
                preds[w].push(v);
            }
        }
    }
    preds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycle_and_tail() {
        // 0 -> 1 <-> 2 -> 3
        let adj = vec![vec![1], vec![2], vec![1, 3], vec![]];
        let sccs = tarjan_scc(&adj);
        assert_eq!(sccs, vec![vec![3], vec![1, 2], vec![0]]);
        assert_eq!(condensation_levels(&adj, &sccs), vec![2, 1, 0]);
        assert_eq!(bottom_sccs(&adj), vec![vec![3]]);
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![0] }).collect();
        let sccs = tarjan_scc(&adj);
        assert_eq!(sccs.len(), 1);
        assert_eq!(sccs[0].len(), n);
    }

    #[test]
    fn reachability() {
        let adj = vec![vec![1], vec![2], vec![], vec![2]];
        let preds = reverse(&adj);
        let back = backward_reachable(&preds, &[false, false, true, false], &[true; 4]);
        assert_eq!(back, vec![true, true, true, true]);
        let back = backward_reachable(&preds, &[false, false, true, false], &[true, false, true, true]);
        assert_eq!(back, vec![false, false, true, true]);
        assert_eq!(forward_reachable(&adj, 1), vec![false, true, true, false]);
    }
}
