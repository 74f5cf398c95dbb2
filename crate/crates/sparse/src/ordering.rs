//! Nested dissection ordering and the assembly tree of the multifrontal
//! factorization.
//!
//! Separators are BFS level sets rooted at a pseudo-peripheral vertex.
//! Every tree node owns a contiguous range of elimination positions:
//! a leaf owns a small connected block, an interior node owns the
//! separator splitting its two subtrees. Children always precede their
//! parent, so the node list is a postorder.

use crate::csr::SparsityPattern;

/// Blocks at or below this size are eliminated as one dense front.
const LEAF_SIZE: usize = 96;
const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone)]
pub(crate) struct TreeNode {
    /// First elimination position owned by the node.
    pub start: usize,
    /// One past the last owned position.
    pub end: usize,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct AssemblyTree {
    /// `perm[pos]` is the original index eliminated at position `pos`.
    pub perm: Vec<usize>,
    /// Inverse of `perm`.
    pub inv: Vec<usize>,
    /// Nodes in postorder.
    pub nodes: Vec<TreeNode>,
}

/// Symmetrised adjacency without self loops.
pub(crate) struct Graph {
    ptr: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    pub fn from_pattern(pattern: &SparsityPattern) -> Self {
        let n = pattern.dim();
        let mut deg = vec![0usize; n];
        for i in 0..n {
            for &j in pattern.row(i) {
                if i != j {
                    deg[i] += 1;
                    if pattern.find(j, i).is_none() {
                        deg[j] += 1;
                    }
                }
            }
        }
        let mut ptr = vec![0usize; n + 1];
        for i in 0..n {
            ptr[i + 1] = ptr[i] + deg[i];
        }
        let mut fill = ptr[..n].to_vec();
        let mut adj = vec![0usize; ptr[n]];
        for i in 0..n {
            for &j in pattern.row(i) {
                if i != j {
                    adj[fill[i]] = j;
                    fill[i] += 1;
                    if pattern.find(j, i).is_none() {
                        adj[fill[j]] = i;
                        fill[j] += 1;
                    }
                }
            }
        }
        Self { ptr, adj }
    }

    pub fn n(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }
}

struct Dissector<'g> {
    graph: &'g Graph,
    /// Subgraph membership stamp per vertex.
    stamp: Vec<u32>,
    current: u32,
    /// BFS level per vertex, valid for the current stamp.
    level: Vec<u32>,
    perm: Vec<usize>,
    nodes: Vec<TreeNode>,
}

impl<'g> Dissector<'g> {
    fn new(graph: &'g Graph) -> Self {
        let n = graph.n();
        Self {
            graph,
            stamp: vec![0; n],
            current: 0,
            level: vec![0; n],
            perm: Vec::with_capacity(n),
            nodes: Vec::new(),
        }
    }

    fn mark(&mut self, verts: &[usize]) {
        self.current += 1;
        for &v in verts {
            self.stamp[v] = self.current;
        }
    }

    fn push_node(&mut self, verts: &[usize], children: Vec<usize>) -> usize {
        let start = self.perm.len();
        self.perm.extend_from_slice(verts);
        let id = self.nodes.len();
        for &c in &children {
            self.nodes[c].parent = Some(id);
        }
        self.nodes.push(TreeNode {
            start,
            end: self.perm.len(),
            children,
            parent: None,
        });
        id
    }

    /// Returns the roots of the subtrees built for `verts`.
    fn dissect(&mut self, verts: Vec<usize>, depth: usize) -> Vec<usize> {
        if verts.len() <= LEAF_SIZE || depth >= MAX_DEPTH {
            return vec![self.push_node(&verts, Vec::new())];
        }
        let components = self.components(&verts);
        if components.len() > 1 {
            let mut roots = Vec::new();
            let mut batch: Vec<usize> = Vec::new();
            for comp in components {
                if comp.len() <= LEAF_SIZE {
                    if batch.len() + comp.len() > LEAF_SIZE {
                        roots.push(self.push_node(&batch, Vec::new()));
                        batch.clear();
                    }
                    batch.extend(comp);
                } else {
                    roots.extend(self.dissect(comp, depth + 1));
                }
            }
            if !batch.is_empty() {
                roots.push(self.push_node(&batch, Vec::new()));
            }
            return roots;
        }
        match self.bisect(&verts) {
            Some((left, sep, right)) => {
                let mut children = self.dissect(left, depth + 1);
                children.extend(self.dissect(right, depth + 1));
                vec![self.push_node(&sep, children)]
            }
            None => vec![self.push_node(&verts, Vec::new())],
        }
    }

    fn components(&mut self, verts: &[usize]) -> Vec<Vec<usize>> {
        self.mark(verts);
        let inside = self.current;
        // Visited vertices get a fresh stamp so membership and visitation
        // share one array.
        self.current += 1;
        let visited = self.current;
        let mut comps = Vec::new();
        let mut queue = Vec::new();
        for &s in verts {
            if self.stamp[s] != inside {
                continue;
            }
            self.stamp[s] = visited;
            queue.clear();
            queue.push(s);
            let mut head = 0;
            while head < queue.len() {
                let v = queue[head];
                head += 1;
                for &w in self.graph.neighbors(v) {
                    if self.stamp[w] == inside {
                        self.stamp[w] = visited;
                        queue.push(w);
                    }
                }
            }
            comps.push(queue.clone());
        }
        comps
    }

    /// BFS from `root` inside the marked subgraph; fills `level` and returns
    /// the vertices in BFS order together with the number of levels.
    fn bfs(&mut self, root: usize, order: &mut Vec<usize>) -> u32 {
        let inside = self.current;
        self.current += 1;
        let seen = self.current;
        order.clear();
        order.push(root);
        self.stamp[root] = seen;
        self.level[root] = 0;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let lv = self.level[v];
            for &w in self.graph.neighbors(v) {
                if self.stamp[w] == inside {
                    self.stamp[w] = seen;
                    self.level[w] = lv + 1;
                    order.push(w);
                }
            }
        }
        // Restore membership for the next sweep.
        for &v in order.iter() {
            self.stamp[v] = inside;
        }
        self.current = inside;
        self.level[*order.last().unwrap()] + 1
    }

    fn bisect(&mut self, verts: &[usize]) -> Option<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        self.mark(verts);
        let mut order = Vec::with_capacity(verts.len());
        let mut depth = self.bfs(verts[0], &mut order);
        // Pseudo-peripheral root: restart from a low-degree vertex on the
        // last level until the eccentricity stops growing.
        for _ in 0..4 {
            let last = self.level[*order.last().unwrap()];
            let candidate = order
                .iter()
                .rev()
                .take_while(|&&v| self.level[v] == last)
                .copied()
                .min_by_key(|&v| self.graph.neighbors(v).len())
                .unwrap();
            let mut trial = Vec::with_capacity(verts.len());
            let d = self.bfs(candidate, &mut trial);
            if d > depth {
                depth = d;
                order = trial;
            } else {
                break;
            }
        }
        if depth < 3 {
            return None;
        }
        let mut counts = vec![0usize; depth as usize];
        for &v in &order {
            counts[self.level[v] as usize] += 1;
        }
        let n = verts.len();
        let mut below = 0usize;
        let mut best: Option<(usize, usize)> = None;
        let mut median = None;
        for (l, &c) in counts.iter().enumerate() {
            let above = n - below - c;
            if l > 0 && l + 1 < counts.len() {
                if median.is_none() && below + c >= n / 2 {
                    median = Some(l);
                }
                let balanced = below * 10 >= n * 3 && above * 10 >= n * 3;
                if balanced && best.map_or(true, |(_, bc)| c < bc) {
                    best = Some((l, c));
                }
            }
            below += c;
        }
        let split = best.map(|(l, _)| l).or(median)? as u32;
        let mut left = Vec::new();
        let mut sep = Vec::new();
        let mut right = Vec::new();
        for &v in &order {
            match self.level[v].cmp(&split) {
                std::cmp::Ordering::Less => left.push(v),
                std::cmp::Ordering::Equal => sep.push(v),
                std::cmp::Ordering::Greater => right.push(v),
            }
        }
        if left.is_empty() || right.is_empty() || sep.len() * 2 > n {
            return None;
        }
        Some((left, sep, right))
    }
}

/// Builds the nested dissection assembly tree for a square pattern.
pub(crate) fn nested_dissection(graph: &Graph) -> AssemblyTree {
    let n = graph.n();
    let mut d = Dissector::new(graph);
    if n > 0 {
        d.dissect((0..n).collect(), 0);
    }
    let perm = d.perm;
    let mut inv = vec![0usize; n];
    for (pos, &v) in perm.iter().enumerate() {
        inv[v] = pos;
    }
    AssemblyTree {
        perm,
        inv,
        nodes: d.nodes,
    }
}
