//! Maximum-cardinality bipartite matching (Hopcroft-Karp) on a compressed
//! adjacency structure, with support for warm starts from a previous matching.

pub(crate) const NONE: u32 = u32::MAX;

/// Compressed sparse adjacency: neighbours of left vertex `u` are
/// `targets[offsets[u]..offsets[u + 1]]`.
#[derive(Debug, Default, Clone)]
pub(crate) struct Adjacency {
    pub offsets: Vec<u32>,
    pub targets: Vec<u32>,
}

impl Adjacency {
    pub fn clear(&mut self) {
        self.offsets.clear();
        self.targets.clear();
        self.offsets.push(0);
    }

    /// Closes the neighbour list of the current left vertex.
    pub fn finish_vertex(&mut self) {
        self.offsets.push(self.targets.len() as u32);
    }

    pub fn n_left(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    #[inline]
    pub fn neighbours(&self, u: usize) -> &[u32] {
        &self.targets[self.offsets[u] as usize..self.offsets[u + 1] as usize]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct HopcroftKarp {
    pub match_l: Vec<u32>,
    pub match_r: Vec<u32>,
    dist: Vec<u32>,
    queue: Vec<u32>,
    cursor: Vec<u32>,
}

impl HopcroftKarp {
    pub fn new(n_left: usize, n_right: usize) -> Self {
        Self {
            match_l: vec![NONE; n_left],
            match_r: vec![NONE; n_right],
            dist: vec![0; n_left],
            queue: Vec::with_capacity(n_left),
            cursor: vec![0; n_left],
        }
    }

    pub fn size(&self) -> usize {
        self.match_l.iter().filter(|&&v| v != NONE).count()
    }

    /// Drops matched pairs for which `keep(u, v)` is false.
    pub fn retain(&mut self, mut keep: impl FnMut(usize, usize) -> bool) {
        for u in 0..self.match_l.len() {
            let v = self.match_l[u];
            if v != NONE && !keep(u, v as usize) {
                self.match_l[u] = NONE;
                self.match_r[v as usize] = NONE;
            }
        }
    }

    /// Grows the current matching to maximum cardinality on `adj`. Every
    /// matched pair must already be an edge of `adj`.
    pub fn run(&mut self, adj: &Adjacency) -> usize {
        debug_assert_eq!(adj.n_left(), self.match_l.len());
        while self.bfs(adj) {
            for u in 0..self.match_l.len() {
                self.cursor[u] = adj.offsets[u];
            }
            for u in 0..self.match_l.len() {
                if self.match_l[u] == NONE {
                    self.dfs(adj, u);
                }
            }
        }
        self.size()
    }

    fn bfs(&mut self, adj: &Adjacency) -> bool {
        self.queue.clear();
        for u in 0..self.match_l.len() {
            if self.match_l[u] == NONE {
                self.dist[u] = 0;
                self.queue.push(u as u32);
            } else {
                self.dist[u] = NONE;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head] as usize;
            head += 1;
            for &v in adj.neighbours(u) {
                let w = self.match_r[v as usize];
                if w == NONE {
                    found = true;
                } else if self.dist[w as usize] == NONE {
                    self.dist[w as usize] = self.dist[u] + 1;
                    self.queue.push(w);
                }
            }
        }
        found
    }

    fn dfs(&mut self, adj: &Adjacency, u: usize) -> bool {
        let end = adj.offsets[u + 1];
        while self.cursor[u] < end {
            let v = adj.targets[self.cursor[u] as usize];
            self.cursor[u] += 1;
            let w = self.match_r[v as usize];
            let ok = w == NONE
                || (self.dist[w as usize] == self.dist[u].wrapping_add(1)
                    && self.dfs(adj, w as usize));
            if ok {
                self.match_l[u] = v;
                self.match_r[v as usize] = u as u32;
                return true;
            }
        }
        self.dist[u] = NONE;
        false
    }
}
