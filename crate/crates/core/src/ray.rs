//! Combinatorial trace of an angle-bisector ray.
//!
//! The bisector ray of a tile's angle at one of its vertices is a geodesic.
//! Inside each tile it traverses, the ray passes through the tile center and
//! leaves through the opposite vertex (p even) or the midpoint of the
//! opposite edge (p odd); at a vertex it continues into the opposite wedge
//! (q even) or along the opposite edge (q odd). The trace below records that
//! element sequence exactly, with no floating point involved.

use crate::atlas::{TileId, TilingAtlas, VertexId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RayElement {
    /// Ray passes through a tiling vertex.
    Vertex(VertexId),
    /// Ray passes through a tile center.
    Center(TileId),
    /// Ray crosses an edge at its midpoint (endpoints sorted).
    EdgeMid(VertexId, VertexId),
    /// Ray runs along a full edge (endpoints sorted).
    CoveredEdge(VertexId, VertexId),
}

#[derive(Clone, Debug)]
pub struct RayTrace {
    pub base: VertexId,
    pub tile: TileId,
    /// Elements after the base vertex, in order along the ray.
    pub elements: Vec<RayElement>,
}

impl RayTrace {
    /// Tiling vertices on the ray (excluding the base), in order.
    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.elements.iter().filter_map(|e| match e {
            RayElement::Vertex(v) => Some(*v),
            _ => None,
        })
    }
}

fn sorted(a: VertexId, b: VertexId) -> (VertexId, VertexId) {
    (a.min(b), a.max(b))
}

/// Position of v in the boundary cycle of t.
fn cycle_pos(atlas: &TilingAtlas, t: TileId, v: VertexId) -> Result<usize> {
    atlas
        .tile_vertices(t)?
        .iter()
        .position(|&x| x == v)
        .ok_or(Error::Unexplored(v))
}

/// The tile on the other side of edge (a, b) from t.
fn tile_across(atlas: &TilingAtlas, t: TileId, a: VertexId, b: VertexId) -> Result<TileId> {
    if !atlas.is_complete(a) {
        return Err(Error::Unexplored(a));
    }
    let q = atlas.params.q as u16;
    let s = atlas.dir_of(a, b).ok_or(Error::Unexplored(a))?;
    // The two tiles flanking edge a-b sit at corners s and s-1 of a.
    let left = atlas.tile_at(a, s);
    let right = atlas.tile_at(a, (s + q - 1) % q);
    if left == t {
        Ok(right)
    } else if right == t {
        Ok(left)
    } else {
        Err(Error::Unexplored(a))
    }
}

/// Trace the bisector ray of tile `tile`'s angle at `v`, recording elements
/// until at least `max_elements` have been collected or `stop` returns true
/// for the most recent vertex element.
pub fn bisector_trace(
    atlas: &TilingAtlas,
    v: VertexId,
    tile: TileId,
    max_elements: usize,
    mut stop: impl FnMut(VertexId) -> bool,
) -> Result<RayTrace> {
    let p = atlas.params.p as usize;
    let q = atlas.params.q as u16;
    let mut elements = Vec::new();

    // State A: entering `cur_tile` through vertex `cur_v`, along the
    // bisector of the tile's angle there.
    let mut cur_v = v;
    let mut cur_tile = tile;
    loop {
        if elements.len() >= max_elements {
            break;
        }
        elements.push(RayElement::Center(cur_tile));
        // Exit element of the current tile.
        let pos = cycle_pos(atlas, cur_tile, cur_v)?;
        let (exit_v, via_tile) = if p % 2 == 0 {
            let w = atlas.tile_vertices(cur_tile)?[(pos + p / 2) % p];
            (w, cur_tile)
        } else {
            let cyc = atlas.tile_vertices(cur_tile)?;
            let a = cyc[(pos + (p - 1) / 2) % p];
            let b = cyc[(pos + (p + 1) / 2) % p];
            elements.push(RayElement::EdgeMid(sorted(a, b).0, sorted(a, b).1));
            let t2 = tile_across(atlas, cur_tile, a, b)?;
            elements.push(RayElement::Center(t2));
            // Vertex of t2 opposite the crossed edge.
            let cyc2 = atlas.tile_vertices(t2)?;
            let ia = cyc2.iter().position(|&x| x == a).unwrap();
            let ib = cyc2.iter().position(|&x| x == b).unwrap();
            let base = if (ia + 1) % p == ib { ia } else { ib };
            let w = cyc2[(base + (p + 1) / 2) % p];
            (w, t2)
        };
        elements.push(RayElement::Vertex(exit_v));
        if elements.len() >= max_elements || stop(exit_v) {
            break;
        }

        // State B: continue through vertex exit_v, arriving along the
        // bisector of via_tile's wedge there.
        if !atlas.is_complete(exit_v) {
            return Err(Error::Unexplored(exit_v));
        }
        let j = atlas
            .corner_of(exit_v, via_tile)
            .ok_or(Error::Unexplored(exit_v))?;
        if q % 2 == 0 {
            cur_tile = atlas.tile_at(exit_v, (j + q / 2) % q);
            cur_v = exit_v;
        } else {
            // Continuation runs along the opposite edge.
            let k = (j + (q + 1) / 2) % q;
            let u = atlas.neighbor_at(exit_v, k);
            let (sa, sb) = sorted(exit_v, u);
            elements.push(RayElement::CoveredEdge(sa, sb));
            elements.push(RayElement::Vertex(u));
            if elements.len() >= max_elements || stop(u) {
                break;
            }
            if !atlas.is_complete(u) {
                return Err(Error::Unexplored(u));
            }
            let s = atlas.dir_of(u, exit_v).ok_or(Error::Unexplored(u))?;
            let jp = (s + (q - 1) / 2) % q;
            cur_tile = atlas.tile_at(u, jp);
            cur_v = u;
        }
    }
    Ok(RayTrace {
        base: v,
        tile,
        elements,
    })
}
