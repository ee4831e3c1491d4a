use std::time::Instant;
use tilingrec::hyperbolic::*;
use tilingrec::oracle::{self, Mode};
use tilingrec::pattern::PatternGraph;

/// All connected graphs on exactly n vertices up to isomorphism.
fn connected_graphs(n: usize) -> Vec<PatternGraph> {
    if n == 1 {
        return vec![PatternGraph::from_edges(1, &[])];
    }
    let prev = connected_graphs(n - 1);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for g in &prev {
        for nbrs in 1u64..(1 << (n - 1)) {
            let mut edges = g.edges();
            for v in 0..n - 1 {
                if nbrs >> v & 1 == 1 {
                    edges.push((v, n - 1));
                }
            }
            let cand = PatternGraph::from_edges(n, &edges);
            if seen.insert(canon(&cand)) {
                out.push(cand);
            }
        }
    }
    out
}

fn canon(g: &PatternGraph) -> Vec<u64> {
    let n = g.n();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<Vec<u64>> = None;
    permute(&mut perm, 0, &mut |p| {
        let mut rows = vec![0u64; n];
        for (a, b) in g.edges() {
            rows[p[a]] |= 1 << p[b];
            rows[p[b]] |= 1 << p[a];
        }
        if best.as_ref().map_or(true, |b| rows < *b) {
            best = Some(rows);
        }
    });
    best.unwrap()
}

fn permute(perm: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == perm.len() {
        f(perm);
        return;
    }
    for j in i..perm.len() {
        perm.swap(i, j);
        permute(perm, i + 1, f);
        perm.swap(i, j);
    }
}

fn main() {
    let n_max: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let (p, q): (u16, u16) = (5, 4);
    let t0 = Instant::now();
    let mut ws = Workspace::new(p, q, n_max).unwrap();
    let cfg = SolverConfig::default();
    let mut total = 0usize;
    let mut yes = 0usize;
    for n in 1..=n_max {
        let graphs: Vec<PatternGraph> = connected_graphs(n)
            .into_iter()
            .filter(|g| g.max_degree() <= q as usize)
            .collect();
        let tn = Instant::now();
        for h in &graphs {
            for mode in [Mode::Plain, Mode::Induced] {
                let (expect, _) = oracle::brute_force_embed(h, &ws.atlas, mode, n as u32 + 1).unwrap();
                let out = solve_in_workspace(&mut ws, h, mode, &cfg).unwrap();
                let got = out.decision == Decision::Yes;
                if got {
                    yes += 1;
                    if let Some(w) = out.witness.as_ref() {
                        assert!(oracle::verify_witness(h, w, &ws.atlas, mode));
                    }
                }
                assert_eq!(got, expect, "n={n} mode={mode:?} edges={:?}", h.edges());
                total += 1;
            }
        }
        println!("n={n}: {} graphs done in {:?} (cum {:?})", graphs.len(), tn.elapsed(), t0.elapsed());
    }
    println!("AGREE {total} instances ({yes} yes) in {:?}", t0.elapsed());
}
