use std::collections::VecDeque;

/// Residual capacities below this are treated as saturated.
pub(crate) const RESIDUAL_EPS: f64 = 1e-9;

/// Residual network for shortest-augmenting-path max flow (Edmonds–Karp).
/// Arc `2i` and `2i + 1` are reverses of each other.
pub(crate) struct FlowNetwork {
    adjacency: Vec<Vec<usize>>,
    head: Vec<usize>,
    residual: Vec<f64>,
}

impl FlowNetwork {
    pub(crate) fn new(nodes: usize) -> Self {
        FlowNetwork {
            adjacency: vec![Vec::new(); nodes],
            head: Vec::new(),
            residual: Vec::new(),
        }
    }

    /// Arc pair `u -> v` with capacity `forward` and `v -> u` with `backward`.
    /// An undirected edge of cost `c` is `add_arc_pair(u, v, c, c)`.
    pub(crate) fn add_arc_pair(&mut self, u: usize, v: usize, forward: f64, backward: f64) {
        let id = self.head.len();
        self.head.push(v);
        self.residual.push(forward);
        self.adjacency[u].push(id);
        self.head.push(u);
        self.residual.push(backward);
        self.adjacency[v].push(id + 1);
    }

    pub(crate) fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let n = self.adjacency.len();
        let mut total = 0.0;
        let mut parent_arc = vec![usize::MAX; n];
        loop {
            parent_arc.fill(usize::MAX);
            let mut visited = vec![false; n];
            visited[source] = true;
            let mut queue = VecDeque::from([source]);
            'bfs: while let Some(u) = queue.pop_front() {
                for &arc in &self.adjacency[u] {
                    let w = self.head[arc];
                    if !visited[w] && self.residual[arc] > RESIDUAL_EPS {
                        visited[w] = true;
                        parent_arc[w] = arc;
                        if w == sink {
                            break 'bfs;
                        }
                        queue.push_back(w);
                    }
                }
            }
            if !visited[sink] {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let arc = parent_arc[v];
                bottleneck = bottleneck.min(self.residual[arc]);
                v = self.head[arc ^ 1];
            }
            let mut v = sink;
            while v != source {
                let arc = parent_arc[v];
                self.residual[arc] -= bottleneck;
                self.residual[arc ^ 1] += bottleneck;
                v = self.head[arc ^ 1];
            }
            total += bottleneck;
        }
    }

    /// Nodes reachable from `source` in the residual network.
    pub(crate) fn source_side(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adjacency.len()];
        seen[source] = true;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &arc in &self.adjacency[u] {
                let w = self.head[arc];
                if !seen[w] && self.residual[arc] > RESIDUAL_EPS {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}
