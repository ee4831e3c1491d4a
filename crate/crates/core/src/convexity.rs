//! Intervals, convex hulls and outer boundaries of subgraphs embedded in the
//! atlas. Hulls are computed by the naive pairwise-interval fixed point:
//! this code is a structural oracle for the solvers and is kept as plain as
//! possible.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::atlas::{TileId, TilingAtlas, VertexId};
use crate::error::{Error, Result};
use crate::ray::{bisector_trace, RayElement};

/// A subgraph of the atlas given by a vertex set; the edge set is always the
/// full set of atlas edges inside it.
#[derive(Clone, Debug)]
pub struct EmbeddedSubgraph {
    pub verts: Vec<VertexId>,
}

impl EmbeddedSubgraph {
    pub fn new(mut verts: Vec<VertexId>) -> EmbeddedSubgraph {
        verts.sort_unstable();
        verts.dedup();
        EmbeddedSubgraph { verts }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.verts.binary_search(&v).is_ok()
    }

    pub fn edges(&self, atlas: &TilingAtlas) -> Vec<(VertexId, VertexId)> {
        let mut out = Vec::new();
        for &v in &self.verts {
            if !atlas.is_complete(v) {
                continue;
            }
            for &u in atlas.neighbors(v).unwrap_or(&[]) {
                if v < u && self.contains(u) {
                    out.push((v, u));
                }
            }
        }
        out
    }

    /// Connected as an induced subgraph of the atlas.
    pub fn is_connected(&self, atlas: &TilingAtlas) -> bool {
        if self.verts.len() <= 1 {
            return true;
        }
        let mut seen = HashSet::from([self.verts[0]]);
        let mut queue = VecDeque::from([self.verts[0]]);
        while let Some(v) = queue.pop_front() {
            if let Ok(nbrs) = atlas.neighbors(v) {
                for &u in nbrs {
                    if self.contains(u) && seen.insert(u) {
                        queue.push_back(u);
                    }
                }
            }
        }
        seen.len() == self.verts.len()
    }
}

#[derive(Clone, Debug)]
pub struct ConvexHullResult {
    pub hull: EmbeddedSubgraph,
    /// Closed walk of the unbounded face (dart tails in order). A singleton
    /// hull yields the trivial walk `[v]`.
    pub boundary_cycle: Vec<VertexId>,
}

/// BFS distances from `src` out to `limit`; errs if an incomplete vertex
/// would need expanding strictly inside the limit.
fn bfs_dists(atlas: &TilingAtlas, src: VertexId, limit: u32) -> Result<HashMap<VertexId, u32>> {
    let mut dist = HashMap::from([(src, 0u32)]);
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d >= limit {
            continue;
        }
        if !atlas.is_complete(v) {
            return Err(Error::Unexplored(v));
        }
        for &u in atlas.neighbors(v)? {
            if !dist.contains_key(&u) {
                dist.insert(u, d + 1);
                queue.push_back(u);
            }
        }
    }
    Ok(dist)
}

fn graph_dist(atlas: &TilingAtlas, u: VertexId, v: VertexId) -> Result<u32> {
    let mut dist = HashMap::from([(u, 0u32)]);
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        let d = dist[&x];
        if x == v {
            return Ok(d);
        }
        if !atlas.is_complete(x) {
            return Err(Error::Unexplored(x));
        }
        for &y in atlas.neighbors(x)? {
            if !dist.contains_key(&y) {
                dist.insert(y, d + 1);
                queue.push_back(y);
            }
        }
    }
    Err(Error::Unexplored(v))
}

/// Exactly the vertices lying on some shortest u-v path.
pub fn interval(atlas: &TilingAtlas, u: VertexId, v: VertexId) -> Result<Vec<VertexId>> {
    if u == v {
        return Ok(vec![u]);
    }
    let d = graph_dist(atlas, u, v)?;
    let du = bfs_dists(atlas, u, d)?;
    let dv = bfs_dists(atlas, v, d)?;
    let mut out: Vec<VertexId> = du
        .iter()
        .filter_map(|(&w, &a)| match dv.get(&w) {
            Some(&b) if a + b == d => Some(w),
            _ => None,
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Least fixed point of adding all pairwise intervals, starting from a
/// connected seed.
pub fn convex_hull(atlas: &TilingAtlas, seed: &[VertexId]) -> Result<ConvexHullResult> {
    let seed_sub = EmbeddedSubgraph::new(seed.to_vec());
    if seed_sub.verts.is_empty() {
        return Err(Error::DisconnectedSeed);
    }
    // Every seed vertex must reach the others inside the explored region;
    // the interval closure then connects them.
    for &v in seed_sub.verts.iter().skip(1) {
        if graph_dist(atlas, seed_sub.verts[0], v).is_err() {
            return Err(Error::DisconnectedSeed);
        }
    }
    let mut set: BTreeSet<VertexId> = seed_sub.verts.iter().copied().collect();
    loop {
        let cur: Vec<VertexId> = set.iter().copied().collect();
        let mut grew = false;
        for (i, &a) in cur.iter().enumerate() {
            for &b in cur.iter().skip(i + 1) {
                for w in interval(atlas, a, b)? {
                    grew |= set.insert(w);
                }
            }
        }
        if !grew {
            break;
        }
    }
    let hull = EmbeddedSubgraph::new(set.into_iter().collect());
    let boundary_cycle = outer_boundary(atlas, &hull)?;
    Ok(ConvexHullResult {
        hull,
        boundary_cycle,
    })
}

/// Faces of the subgraph under the rotation system inherited from the atlas.
/// Each face is returned as its closed dart walk (sequence of dart tails).
fn subgraph_faces(atlas: &TilingAtlas, sub: &EmbeddedSubgraph) -> Result<Vec<Vec<(VertexId, VertexId)>>> {
    let q = atlas.params.q as u16;
    let mut darts: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
    for (a, b) in sub.edges(atlas) {
        darts.insert((a, b));
        darts.insert((b, a));
    }
    let mut faces = Vec::new();
    let mut used: HashSet<(VertexId, VertexId)> = HashSet::new();
    for &start in &darts {
        if used.contains(&start) {
            continue;
        }
        let mut walk = Vec::new();
        let mut cur = start;
        loop {
            walk.push(cur);
            used.insert(cur);
            // next dart within the subgraph: rotate clockwise from the
            // reversal of cur at its head until a subgraph edge appears.
            let (u, v) = cur;
            if !atlas.is_complete(v) {
                return Err(Error::Unexplored(v));
            }
            let back = atlas.dir_of(v, u).expect("edge exists");
            let mut slot = (back + q - 1) % q;
            let next = loop {
                let w = atlas.neighbor_at(v, slot);
                if w != crate::atlas::NONE && sub.contains(w) {
                    break (v, w);
                }
                slot = (slot + q - 1) % q;
            };
            if next == start {
                break;
            }
            cur = next;
        }
        faces.push(walk);
    }
    Ok(faces)
}

/// True iff the face walk is the boundary of a single tile.
fn is_tile_face(atlas: &TilingAtlas, walk: &[(VertexId, VertexId)]) -> bool {
    if walk.len() != atlas.params.p as usize {
        return false;
    }
    let (u0, v0) = walk[0];
    let s = match atlas.dir_of(u0, v0) {
        Some(s) => s,
        None => return false,
    };
    let t: TileId = atlas.tile_at(u0, s);
    if t == crate::atlas::NONE {
        return false;
    }
    walk.iter().all(|&(u, v)| {
        atlas
            .dir_of(u, v)
            .is_some_and(|s| atlas.tile_at(u, s) == t)
    })
}

/// The closed walk of the unbounded face of a convex connected subgraph.
pub fn outer_boundary(atlas: &TilingAtlas, hull: &EmbeddedSubgraph) -> Result<Vec<VertexId>> {
    if hull.verts.is_empty() {
        return Err(Error::NonConvexInput);
    }
    if hull.verts.len() == 1 {
        return Ok(vec![hull.verts[0]]);
    }
    if !hull.is_connected(atlas) {
        return Err(Error::NonConvexInput);
    }
    let faces = subgraph_faces(atlas, hull)?;
    let mut outer: Option<Vec<VertexId>> = None;
    for walk in &faces {
        if is_tile_face(atlas, walk) {
            continue;
        }
        if outer.is_some() {
            // Two non-tile faces: some bounded face is not a tile.
            return Err(Error::NonConvexInput);
        }
        outer = Some(walk.iter().map(|&(u, _)| u).collect());
    }
    outer.ok_or(Error::NonConvexInput)
}

/// True iff the combinatorial trace of the angle-bisector ray of `tau` at
/// `v` meets no hull vertex other than v within `depth` vertex steps.
pub fn bisector_ray_clear(
    atlas: &TilingAtlas,
    hull: &EmbeddedSubgraph,
    v: VertexId,
    tau: TileId,
    depth: usize,
) -> Result<bool> {
    if atlas.corner_of(v, tau).is_none() {
        return Err(Error::InvalidTriplet("tile not incident to vertex"));
    }
    let trace = bisector_trace(atlas, v, tau, depth, |_| false)?;
    for e in &trace.elements {
        let hit = match *e {
            RayElement::Vertex(w) => hull.contains(w) && w != v,
            RayElement::CoveredEdge(a, b) => {
                (hull.contains(a) && a != v) || (hull.contains(b) && b != v)
            }
            _ => false,
        };
        if hit {
            return Ok(false);
        }
    }
    Ok(true)
}
