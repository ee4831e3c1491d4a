use std::sync::atomic::Ordering::Relaxed;
use std::time::Instant;
use tilingrec::hyperbolic::*;
use tilingrec::oracle::Mode;
use tilingrec::pattern::PatternGraph;

fn main() {
    let mut ws = Workspace::new(5, 4, 6).unwrap();
    for k in 1..=5usize {
        let t = Instant::now();
        ws.ensure_k(k).unwrap();
        println!("ensure_k({k}): nooses={} (+{:?})", ws.nooses().len(), t.elapsed());
    }
    let cfg = SolverConfig::default();
    for l in [5usize, 6] {
        let t = Instant::now();
        let out = solve_in_workspace(&mut ws, &PatternGraph::cycle(l), Mode::Plain, &cfg).unwrap();
        println!("C{l}: {:?} k={} in {:?}  pc={} misses={} geom_time={:?}",
            out.decision, out.k_used, t.elapsed(),
            ws.stats.pc_calls.load(Relaxed),
            ws.stats.geom_misses.load(Relaxed),
            std::time::Duration::from_nanos(ws.stats.geom_ns.load(Relaxed)));
    }
}
