use tilingrec::atlas::VertexId;
use tilingrec::hyperbolic::*;
use tilingrec::noose;
use tilingrec::oracle::Mode;
use tilingrec::pattern::PatternGraph;

/// Ground truth for a triplet: exhaustive embedding search of H(mask) into
/// the noose region with the boundary pinned to the slots.
fn triplet_truth(ws: &Workspace, h: &PatternGraph, mode: Mode, t: &Triplet) -> bool {
    let nd = &ws.nooses()[t.noose];
    let inner = &nd.region.inner_vertices;
    let curve = nd.placed.curve_vertices();
    let b = t.b_mask();
    let mut assign: Vec<Option<VertexId>> = vec![None; h.n()];
    for (slot, &hv) in t.phi.iter().enumerate() {
        assign[hv as usize] = Some(nd.placed.verts[slot]);
    }
    let free: Vec<usize> = (0..h.n())
        .filter(|&v| t.mask >> v & 1 == 1 && b >> v & 1 == 0)
        .collect();
    fn rec(
        ws: &Workspace,
        h: &PatternGraph,
        mode: Mode,
        mask: u64,
        inner: &[VertexId],
        curve: &std::collections::BTreeSet<VertexId>,
        free: &[usize],
        idx: usize,
        assign: &mut Vec<Option<VertexId>>,
    ) -> bool {
        if idx == free.len() {
            return true;
        }
        let hv = free[idx];
        'cand: for &u in inner {
            if curve.contains(&u) {
                continue;
            }
            if assign.iter().flatten().any(|&x| x == u) {
                continue;
            }
            for other in 0..h.n() {
                if mask >> other & 1 == 0 || other == hv {
                    continue;
                }
                if let Some(x) = assign[other] {
                    let adj = ws.atlas.is_adjacent(x, u);
                    let adj_in_region = adj; // edges inside region: approximate with atlas adjacency plus region edge set
                    if h.adjacent(hv, other) {
                        let key = (x.min(u), x.max(u));
                        if !ws.nooses()[0].region.inner_edges.contains(&key) && false {
                            continue 'cand;
                        }
                        if !adj_in_region {
                            continue 'cand;
                        }
                    } else if mode == Mode::Induced && adj {
                        continue 'cand;
                    }
                }
            }
            assign[hv] = Some(u);
            if rec(ws, h, mode, mask, inner, curve, free, idx + 1, assign) {
                return true;
            }
            assign[hv] = None;
        }
        false
    }
    rec(ws, h, mode, t.mask, inner, &curve, &free, 0, &mut assign.clone())
}

fn main() {
    let mut ws = Workspace::new(5, 4, 5).unwrap();
    let h = PatternGraph::cycle(5);
    let k = 3usize;
    let triplets = enumerate_valid_triplets(&mut ws, &h, Mode::Plain, k).unwrap();
    println!("{} triplets at k<={k}", triplets.len());
    // evaluate DP-style manually: use potential_children? Instead run the DP internals via solve path...
    // here: just compare leaf strata and report truth counts per size
    let mut truth_counts = std::collections::BTreeMap::new();
    let mut true_samples: Vec<&Triplet> = Vec::new();
    for t in &triplets {
        if t.size() > 3 { continue; }
        let tv = triplet_truth(&ws, &h, Mode::Plain, t);
        *truth_counts.entry((t.size(), tv)).or_insert(0usize) += 1;
        if tv && t.size() == 3 && true_samples.len() < 6 {
            true_samples.push(t);
        }
    }
    println!("truth counts (size, true?): {truth_counts:?}");
    for t in true_samples {
        let nd = &ws.nooses()[t.noose];
        println!("sample true size-3: noose={} phi={:?} btilde={:b} mask={:b}", nd.cand, t.phi, t.btilde, t.mask);
        // try to find its children among true smaller triplets
        let mut found = false;
        for l in &triplets {
            if l.size() >= t.size() || !triplet_truth(&ws, &h, Mode::Plain, l) { continue; }
            for r in &triplets {
                if r.size() >= t.size() || !triplet_truth(&ws, &h, Mode::Plain, r) { continue; }
                if let Ok(true) = potential_children(&ws, &h, t, l, r) {
                    println!("  children: L(noose={} phi={:?} bt={:b}) R(noose={} phi={:?} bt={:b})",
                        ws.nooses()[l.noose].cand, l.phi, l.btilde,
                        ws.nooses()[r.noose].cand, r.phi, r.btilde);
                    found = true;
                    break;
                }
            }
            if found { break; }
        }
        if !found {
            println!("  NO potential children found among true smaller triplets!");
        }
    }
}
