//! Strongly connected components of the transition graph.

/// Tarjan's algorithm over successor lists, iterative so that large star
/// truncations do not recurse deeply.
///
/// Components are returned in reverse topological order of the condensation
/// (sinks first); vertices inside a component are sorted ascending.
pub fn strongly_connected_components(successors: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = successors.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next_index = 0usize;
    // (vertex, position in its successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(top) = call.last_mut() {
            let v = top.0;
            if let Some(&w) = successors[v].get(top.1) {
                top.1 += 1;
                if index[w] == usize::MAX {
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
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// Whether every vertex reaches every other vertex.
pub fn is_strongly_connected(successors: &[Vec<usize>]) -> bool {
    strongly_connected_components(successors).len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycle_is_one_component() {
        let g = vec![vec![1], vec![0]];
        assert!(is_strongly_connected(&g));
    }

    #[test]
    fn chain_splits() {
        let g = vec![vec![0, 1], vec![1], vec![2, 0]];
        let mut comps = strongly_connected_components(&g);
        comps.sort();
        assert_eq!(comps, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn sinks_come_first() {
        // 0 -> 1 <-> 2
        let g = vec![vec![1], vec![2], vec![1]];
        let comps = strongly_connected_components(&g);
        assert_eq!(comps, vec![vec![1, 2], vec![0]]);
    }

    #[test]
    fn long_cycle_does_not_recurse() {
        let n = 100_000;
        let g: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + 1) % n]).collect();
        assert!(is_strongly_connected(&g));
    }
}
