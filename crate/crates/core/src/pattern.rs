//! The input pattern graph H: simple, undirected, vertices 0..n-1.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternGraph {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl PatternGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> PatternGraph {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            assert!(a != b && a < n && b < n, "simple graph edge expected");
            if !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
        }
        PatternGraph { n, adj }
    }

    /// Parse the plain `u v` edge-list format; `#` starts a comment. Vertex
    /// labels are arbitrary non-negative integers and get compacted to
    /// 0..n-1 in order of first appearance. Duplicate edges are dropped with
    /// a warning; self-loops are rejected.
    pub fn parse(text: &str) -> Result<(PatternGraph, Vec<String>)> {
        let mut warnings = Vec::new();
        let mut ids: Vec<u64> = Vec::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let compact = |label: u64, ids: &mut Vec<u64>| -> usize {
            match ids.iter().position(|&x| x == label) {
                Some(i) => i,
                None => {
                    ids.push(label);
                    ids.len() - 1
                }
            }
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let a: u64 = it
                .next()
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected vertex label, got {line:?}"),
                })?;
            let b: u64 = match it.next() {
                Some(tok) => tok.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected vertex label, got {tok:?}"),
                })?,
                None => {
                    // A single label declares an isolated vertex.
                    compact(a, &mut ids);
                    continue;
                }
            };
            if it.next().is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "expected `u v` edge line".into(),
                });
            }
            if a == b {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("self-loop at vertex {a} (simple graphs only)"),
                });
            }
            let ia = compact(a, &mut ids);
            let ib = compact(b, &mut ids);
            let key = (ia.min(ib), ia.max(ib));
            if edges.contains(&key) {
                warnings.push(format!("line {}: duplicate edge {a} {b} ignored", lineno + 1));
            } else {
                edges.push(key);
            }
        }
        Ok((PatternGraph::from_edges(ids.len(), &edges), warnings))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(|l| l.len()).max().unwrap_or(0)
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|l| l.len()).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for &v in &self.adj[u] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().len() == 1
    }

    /// Induced subgraph on `verts` (sorted); returns the subgraph and the
    /// map from new indices to the original ones.
    pub fn induced(&self, verts: &[usize]) -> (PatternGraph, Vec<usize>) {
        let map: Vec<usize> = verts.to_vec();
        let inv: std::collections::HashMap<usize, usize> =
            map.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut edges = Vec::new();
        for (i, &v) in map.iter().enumerate() {
            for &u in &self.adj[v] {
                if let Some(&j) = inv.get(&u) {
                    if i < j {
                        edges.push((i, j));
                    }
                }
            }
        }
        (PatternGraph::from_edges(map.len(), &edges), map)
    }

    /// Vertices in BFS order from `root` (its component only), each paired
    /// with the index of its BFS parent within the returned order (root: 0).
    pub fn bfs_order(&self, root: usize) -> Vec<(usize, usize)> {
        let mut order = vec![(root, 0)];
        let mut pos = vec![usize::MAX; self.n];
        pos[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if pos[v] == usize::MAX {
                    pos[v] = order.len();
                    order.push((v, pos[u]));
                    queue.push_back(v);
                }
            }
        }
        order
    }

    pub fn is_forest(&self) -> bool {
        let comps = self.components();
        let mut edges = 0;
        for c in &comps {
            let (sub, _) = self.induced(c);
            edges += sub.edge_count();
        }
        edges == self.n - comps.len()
    }

    /// Length of a shortest cycle, None for forests.
    pub fn girth(&self) -> Option<usize> {
        let mut best = usize::MAX;
        for s in 0..self.n {
            // BFS from s; a non-tree edge at depths (d1, d2) closes a cycle
            // of length d1 + d2 + 1 through s.
            let mut dist = vec![usize::MAX; self.n];
            let mut parent = vec![usize::MAX; self.n];
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        parent[v] = u;
                        queue.push_back(v);
                    } else if parent[u] != v {
                        best = best.min(dist[u] + dist[v] + 1);
                    }
                }
            }
        }
        if best == usize::MAX {
            None
        } else {
            Some(best)
        }
    }

    pub fn is_bipartite(&self) -> bool {
        let mut color = vec![2u8; self.n];
        for s in 0..self.n {
            if color[s] != 2 {
                continue;
            }
            color[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if color[v] == 2 {
                        color[v] = 1 - color[u];
                        queue.push_back(v);
                    } else if color[v] == color[u] {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Lengths of simple cycles present in the graph (bounded enumeration;
    /// exact for the small patterns the solvers accept).
    pub fn cycle_lengths(&self) -> std::collections::BTreeSet<usize> {
        let mut out = std::collections::BTreeSet::new();
        let mut budget = 200_000usize;
        for root in 0..self.n {
            let mut path = vec![root];
            let mut on_path = vec![false; self.n];
            on_path[root] = true;
            self.cycle_dfs(root, &mut path, &mut on_path, &mut out, &mut budget);
        }
        out
    }

    fn cycle_dfs(
        &self,
        root: usize,
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        out: &mut std::collections::BTreeSet<usize>,
        budget: &mut usize,
    ) {
        if *budget == 0 {
            return;
        }
        *budget -= 1;
        let cur = *path.last().unwrap();
        for &next in &self.adj[cur] {
            if next == root && path.len() >= 3 {
                out.insert(path.len());
            }
            // Canonical form: cycles rooted at their minimum vertex.
            if next <= root || on_path[next] {
                continue;
            }
            path.push(next);
            on_path[next] = true;
            self.cycle_dfs(root, path, on_path, out, budget);
            path.pop();
            on_path[next] = false;
        }
    }

    pub fn relabel(&self, perm: &[usize]) -> PatternGraph {
        let edges: Vec<(usize, usize)> = self
            .edges()
            .iter()
            .map(|&(a, b)| (perm[a], perm[b]))
            .collect();
        PatternGraph::from_edges(self.n, &edges)
    }

    /// Adjacency bitmask of v (n <= 64 only).
    pub fn adj_mask(&self, v: usize) -> u64 {
        debug_assert!(self.n <= 64);
        self.adj[v].iter().fold(0u64, |m, &u| m | (1 << u))
    }

    pub fn path(n: usize) -> PatternGraph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        PatternGraph::from_edges(n, &edges)
    }

    pub fn cycle(n: usize) -> PatternGraph {
        assert!(n >= 3);
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((n - 1, 0));
        PatternGraph::from_edges(n, &edges)
    }

    pub fn star(leaves: usize) -> PatternGraph {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        PatternGraph::from_edges(leaves + 1, &edges)
    }

    pub fn complete(n: usize) -> PatternGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        PatternGraph::from_edges(n, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_basics() {
        let (g, warn) = PatternGraph::parse("0 1\n1 2\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 2);
        assert!(warn.is_empty());
        assert!(g.adjacent(0, 1) && g.adjacent(1, 2) && !g.adjacent(0, 2));
    }

    #[test]
    fn parse_duplicate_edge_warns() {
        let (g, warn) = PatternGraph::parse("0 1\n1 0\n").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(warn.len(), 1);
    }

    #[test]
    fn parse_self_loop_rejected() {
        assert!(matches!(
            PatternGraph::parse("3 3\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn parse_comments_and_compaction() {
        let (g, _) = PatternGraph::parse("# a path\n10 20\n20 30 # tail\n").unwrap();
        assert_eq!(g.n(), 3);
        assert!(g.adjacent(0, 1) && g.adjacent(1, 2));
    }

    #[test]
    fn girth_and_forest() {
        assert_eq!(PatternGraph::cycle(5).girth(), Some(5));
        assert_eq!(PatternGraph::complete(4).girth(), Some(3));
        assert_eq!(PatternGraph::path(6).girth(), None);
        assert!(PatternGraph::path(6).is_forest());
        assert!(!PatternGraph::cycle(4).is_forest());
    }

    #[test]
    fn bipartite() {
        assert!(PatternGraph::cycle(6).is_bipartite());
        assert!(!PatternGraph::cycle(5).is_bipartite());
        assert!(PatternGraph::path(4).is_bipartite());
    }

    #[test]
    fn components_and_induced() {
        let g = PatternGraph::from_edges(5, &[(0, 1), (2, 3)]);
        let comps = g.components();
        assert_eq!(comps, vec![vec![0, 1], vec![2, 3], vec![4]]);
        let (sub, map) = g.induced(&[2, 3]);
        assert_eq!(sub.n(), 2);
        assert!(sub.adjacent(0, 1));
        assert_eq!(map, vec![2, 3]);
    }
}
