use std::time::Instant;
use tilingrec::atlas::TilingAtlas;
use tilingrec::noose::*;

fn main() {
    let mut atlas = TilingAtlas::new(5, 4).unwrap();
    let wr = 7u32;
    atlas.ensure_radius(exploration_radius(5, wr)).unwrap();
    println!("atlas {} verts", atlas.vertex_count());
    let t = Instant::now();
    let cands = enumerate_candidate_nooses_bounded(&atlas, 5, 5).unwrap();
    println!("enumerate k<=5 ext 5: {} in {:?}", cands.len(), t.elapsed());
    let sample: Vec<_> = cands.iter().rev().take(2000).cloned().collect();
    let t = Instant::now();
    let mut placed = Vec::new();
    for c in &sample {
        placed.push(place(&atlas, c, (0, 0), wr).unwrap());
    }
    println!("2000 places in {:?}", t.elapsed());
    let t = Instant::now();
    for p in &placed {
        let _ = boundary_region_edges(&atlas, p);
    }
    println!("2000 boundary_region_edges in {:?}", t.elapsed());
    let t = Instant::now();
    for p in placed.iter().take(200) {
        let _ = region(&atlas, p, wr).unwrap();
    }
    println!("200 regions in {:?}", t.elapsed());
    // count closed nooses and time their regions
    let closed: Vec<_> = cands.iter().filter(|c| c.is_closed() && !c.is_empty()).collect();
    println!("{} closed nooses of {}", closed.len(), cands.len());
    let t = Instant::now();
    let mut placed2 = Vec::new();
    for c in closed.iter().take(500) {
        placed2.push(place(&atlas, c, (0, 0), wr).unwrap());
    }
    println!("500 closed places in {:?}", t.elapsed());
    let t = Instant::now();
    for p in placed2.iter().take(500) {
        let _ = region(&atlas, p, wr).unwrap();
    }
    println!("500 closed regions in {:?}", t.elapsed());
}
