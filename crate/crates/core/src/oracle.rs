//! Independent brute-force embedder and witness verifier. Slow and plainly
//! written on purpose: this is the ground truth every solver is checked
//! against.

use crate::atlas::{TilingAtlas, VertexId};
use crate::error::{Error, Result};
use crate::pattern::PatternGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Plain,
    Induced,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Plain => "subgraph",
            Mode::Induced => "induced",
        }
    }
}

/// An injective map V(H) -> atlas vertex ids certifying a YES answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddingWitness {
    pub map: Vec<VertexId>,
    pub mode: Mode,
}

/// True iff `witness` is injective, maps every H-edge to an atlas edge and,
/// in induced mode, every H-non-edge to an atlas non-edge.
pub fn verify_witness(
    h: &PatternGraph,
    witness: &EmbeddingWitness,
    atlas: &TilingAtlas,
    mode: Mode,
) -> bool {
    if witness.map.len() != h.n() {
        return false;
    }
    let mut sorted = witness.map.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != h.n() {
        return false;
    }
    for u in 0..h.n() {
        for v in u + 1..h.n() {
            let adj = atlas.is_adjacent(witness.map[u], witness.map[v]);
            if h.adjacent(u, v) && !adj {
                return false;
            }
            if mode == Mode::Induced && !h.adjacent(u, v) && adj {
                return false;
            }
        }
    }
    true
}

/// Exhaustive pruned DFS. The first component's root is pinned to the origin
/// and its first tree edge to direction 0 (vertex transitivity plus the
/// rotation around the origin make this lossless); everything else is
/// searched exhaustively, so within the explored radius the answer is exact.
pub fn brute_force_embed(
    h: &PatternGraph,
    atlas: &TilingAtlas,
    mode: Mode,
    radius: u32,
) -> Result<(bool, Option<EmbeddingWitness>)> {
    let n = h.n();
    if n == 0 {
        return Ok((
            true,
            Some(EmbeddingWitness {
                map: Vec::new(),
                mode,
            }),
        ));
    }
    let needed = n as u32 + atlas.params.p as u32;
    if atlas.explored_radius() < radius {
        return Err(Error::RadiusInsufficient {
            needed: radius.max(needed),
            have: atlas.explored_radius(),
        });
    }

    // Vertex order: BFS per component, components in order of their minima.
    // order[i] = (h vertex, parent index in order or usize::MAX for roots).
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(n);
    let mut root_flags: Vec<bool> = Vec::new();
    for comp in h.components() {
        let base = order.len();
        for (i, (v, par)) in h.bfs_order(comp[0]).into_iter().enumerate() {
            if i == 0 {
                order.push((v, usize::MAX));
                root_flags.push(true);
            } else {
                order.push((v, base + par));
                root_flags.push(false);
            }
        }
    }

    let in_ball: Vec<VertexId> = (0..atlas.vertex_count() as VertexId)
        .filter(|&v| atlas.is_complete(v) && atlas.dist(v) <= radius)
        .collect();

    let mut assign: Vec<VertexId> = vec![u32::MAX; n];
    let mut used: Vec<VertexId> = Vec::with_capacity(n);
    let ok = place(
        h, atlas, mode, &order, &root_flags, &in_ball, 0, &mut assign, &mut used,
    )?;
    if ok {
        let witness = EmbeddingWitness {
            map: assign.clone(),
            mode,
        };
        debug_assert!(verify_witness(h, &witness, atlas, mode));
        Ok((true, Some(witness)))
    } else {
        Ok((false, None))
    }
}

#[allow(clippy::too_many_arguments)]
fn place(
    h: &PatternGraph,
    atlas: &TilingAtlas,
    mode: Mode,
    order: &[(usize, usize)],
    root_flags: &[bool],
    in_ball: &[VertexId],
    idx: usize,
    assign: &mut Vec<VertexId>,
    used: &mut Vec<VertexId>,
) -> Result<bool> {
    if idx == order.len() {
        return Ok(true);
    }
    let (hv, par) = order[idx];
    let candidates: Vec<VertexId> = if idx == 0 {
        vec![atlas.origin()]
    } else if idx == 1 && !root_flags[1] {
        // First tree edge pinned to direction 0 at the origin.
        vec![atlas.neighbors(atlas.origin())?[0]]
    } else if root_flags[idx] {
        in_ball.to_vec()
    } else {
        let pv = assign[order[par].0];
        atlas.neighbors(pv)?.to_vec()
    };

    'cand: for cand in candidates {
        if !atlas.is_complete(cand) || used.contains(&cand) {
            continue;
        }
        for earlier in order[..idx].iter().map(|&(v, _)| v) {
            let adj = atlas.is_adjacent(assign[earlier], cand);
            if h.adjacent(earlier, hv) && !adj {
                continue 'cand;
            }
            if mode == Mode::Induced && !h.adjacent(earlier, hv) && adj {
                continue 'cand;
            }
        }
        assign[hv] = cand;
        used.push(cand);
        if place(h, atlas, mode, order, root_flags, in_ball, idx + 1, assign, used)? {
            return Ok(true);
        }
        used.pop();
        assign[hv] = u32::MAX;
    }
    Ok(false)
}
