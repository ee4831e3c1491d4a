use tilingrec::atlas::TilingAtlas;
fn main() {
    for (p, q) in [(5u16, 4u16), (4, 5), (3, 7), (7, 3)] {
        let mut a = TilingAtlas::new(p, q).unwrap();
        for r in [8u32, 10, 12, 13, 14, 15, 16] {
            match a.ensure_radius(r) {
                Ok(()) => {
                    let t = std::time::Instant::now();
                    let n = a.vertex_count();
                    println!("{{{p},{q}}} r={r}: {n} verts ({:?})", t.elapsed());
                }
                Err(e) => {
                    println!("{{{p},{q}}} r={r}: {e}");
                    break;
                }
            }
        }
    }
}
