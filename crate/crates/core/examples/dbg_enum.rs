use tilingrec::atlas::TilingAtlas;
use tilingrec::noose::*;

fn main() {
    let mut atlas = TilingAtlas::new(5, 4).unwrap();
    atlas.ensure_radius(11).unwrap();
    let ours = enumerate_candidate_nooses(&atlas, 3).unwrap();
    // filter generator inline
    let q = atlas.params.q;
    let p = atlas.params.p;
    let mut reference = vec![CandidateNoose::empty()];
    let mut words: Vec<Vec<NooseStep>> = vec![Vec::new()];
    for _len in 0..3 {
        let mut next = Vec::new();
        for w in &words {
            for t in 0..q {
                for s in 1..p {
                    let mut w2 = w.clone();
                    w2.push(NooseStep { tile_turn: t, vertex_skip: s });
                    next.push(w2);
                }
            }
        }
        for w in &next {
            if w.len() <= 3 {
                if let DecodeOutcome::Valid(c) = decode(&atlas, w, None, 8).unwrap() {
                    reference.push(c);
                }
            }
            if w.len() + 1 <= 3 {
                for rs in 0..q {
                    for re in 0..q {
                        if let DecodeOutcome::Valid(c) = decode(&atlas, w, Some((rs, re)), 8).unwrap() {
                            reference.push(c);
                        }
                    }
                }
            }
        }
        words = next;
    }
    for rs in 0..q {
        for re in 0..q {
            if let DecodeOutcome::Valid(c) = decode(&atlas, &[], Some((rs, re)), 8).unwrap() {
                reference.push(c);
            }
        }
    }
    reference.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    reference.dedup();
    println!("ours {} reference {}", ours.len(), reference.len());
    let oset: std::collections::BTreeSet<_> = ours.iter().cloned().collect();
    let rset: std::collections::BTreeSet<_> = reference.iter().cloned().collect();
    for x in oset.difference(&rset).take(5) {
        println!("only ours: {x}");
    }
    for x in rset.difference(&oset).take(5) {
        println!("only ref: {x}");
    }
}
