//! Tarjan's strongly connected components, iteratively.

const UNVISITED: usize = usize::MAX;

/// Component id of every vertex plus the number of components. Ids come out
/// in reverse topological order: a component only reaches components with
/// smaller or equal ids.
pub fn strongly_connected(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNVISITED; n];
    let mut next = 0;
    let mut count = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));

        while let Some(&(v, pos)) = call.last() {
            if pos < adj[v].len() {
                call.last_mut().unwrap().1 += 1;
                let w = adj[v][pos];
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(p, _)) = call.last() {
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = count;
                    if w == v {
                        break;
                    }
                }
                count += 1;
            }
        }
    }
    (comp, count)
}

/// Components with no edge leaving them.
pub fn bottom_components(adj: &[Vec<usize>], comp: &[usize], count: usize) -> Vec<bool> {
    let mut bottom = vec![true; count];
    for (v, succ) in adj.iter().enumerate() {
        if succ.iter().any(|&w| comp[w] != comp[v]) {
            bottom[comp[v]] = false;
        }
    }
    bottom
}
