use tilingrec::atlas::TilingAtlas;
use tilingrec::noose::*;

fn main() {
    let mut atlas = TilingAtlas::new(4, 5).unwrap();
    atlas.ensure_radius(10).unwrap();
    let t0 = atlas.tile_at(0, 0);
    let (cand, anchor) = region_boundary_noose(&atlas, &[t0], false, &[]).unwrap();
    println!("cand: {cand}  anchor {anchor:?}");
    let base = place(&atlas, &cand, anchor, 8).unwrap();
    println!("base verts {:?} centers {:?}", base.verts, base.centers);
    for slot in 0..cand.complexity() {
        let target = base.verts[slot];
        for rot in 0..5u16 {
            match place_pinned(&atlas, &cand, slot, target, rot, 8) {
                Ok(p2) => {
                    println!(
                        "slot {slot} rot {rot}: verts {:?} centers {:?} match={}",
                        p2.verts,
                        p2.centers,
                        p2.verts == base.verts && p2.centers == base.centers
                    );
                }
                Err(e) => println!("slot {slot} rot {rot}: ERR {e}"),
            }
        }
    }
}
