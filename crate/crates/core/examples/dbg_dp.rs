use std::sync::atomic::Ordering::Relaxed;
use std::time::Instant;
use tilingrec::hyperbolic::*;
use tilingrec::oracle::Mode;
use tilingrec::pattern::PatternGraph;

fn main() {
    let mut ws = Workspace::new(5, 4, 5).unwrap();
    let cfg = SolverConfig { parallel: false, ..Default::default() };
    let c5 = PatternGraph::cycle(5);
    let t = Instant::now();
    let out = solve_in_workspace(&mut ws, &c5, Mode::Plain, &cfg).unwrap();
    println!("C5: {:?} k={} in {:?}", out.decision, out.k_used, t.elapsed());
    println!(
        "pc_calls={} geom_reached={} geom_calls={} misses={} geom_time={:?} place_time={:?}",
        ws.stats.pc_calls.load(Relaxed),
        ws.stats.pc_geom_reached.load(Relaxed),
        ws.stats.geom_calls.load(Relaxed),
        ws.stats.geom_misses.load(Relaxed),
        std::time::Duration::from_nanos(ws.stats.geom_ns.load(Relaxed)),
        std::time::Duration::from_nanos(ws.stats.place_ns.load(Relaxed)),
    );
}
