use std::time::Instant;
use tilingrec::hyperbolic::Workspace;

fn main() {
    let t = Instant::now();
    let mut ws = Workspace::new(5, 4, 6).unwrap();
    println!("workspace new in {:?}", t.elapsed());
    for k in 1..=5usize {
        let t = Instant::now();
        ws.ensure_k(k).unwrap();
        println!("ensure_k({k}): {} nooses (+{:?})", ws.nooses().len(), t.elapsed());
    }
}
