use std::time::Instant;
use tilingrec::hyperbolic::*;
use tilingrec::oracle::Mode;
use tilingrec::pattern::PatternGraph;

fn main() {
    let mut ws = Workspace::new(5, 4, 6).unwrap();
    let h = PatternGraph::cycle(6);
    for k in 1..=5usize {
        ws.ensure_k(k).unwrap();
        let t = Instant::now();
        let c = enumerate_valid_triplets(&mut ws, &h, Mode::Plain, k).unwrap();
        let mut by_size = std::collections::BTreeMap::new();
        for tr in &c { *by_size.entry(tr.size()).or_insert(0usize) += 1; }
        println!("C6 k={k}: {} triplets {:?} (+{:?})", c.len(), by_size, t.elapsed());
    }
}
