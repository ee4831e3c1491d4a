//! Lazily grown combinatorial model of the regular {p,q} tiling graph.
//!
//! The atlas stores an oriented rotation system: every vertex keeps its q
//! neighbors in counterclockwise order, every tile keeps its p boundary
//! vertices in counterclockwise order (interior on the left of each directed
//! boundary edge). All decision procedures work on this combinatorial data;
//! the floating-point render coordinates exist purely for SVG output.
//!
//! Orientation conventions used throughout the crate:
//!  - `neigh[v][i]` is the i-th neighbor in ccw order,
//!  - `tile_at[v][i]` is the tile in the wedge between edges i and i+1 (ccw),
//!    equivalently the tile on the left of the dart `v -> neigh[v][i]`,
//!  - tracing the face left of a dart `u -> v` continues with the dart
//!    `v -> neigh[v][(dir_v(u) - 1) mod q]`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type VertexId = u32;
pub type TileId = u32;

pub const NONE: u32 = u32::MAX;

/// Geometry class of the {p,q} tiling, decided by the sign of 1/p + 1/q - 1/2
/// in exact integer arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Geometry {
    Spherical,
    Euclidean,
    Hyperbolic,
}

impl Geometry {
    pub fn classify(p: u16, q: u16) -> Geometry {
        // 1/p + 1/q vs 1/2  <=>  2(p+q) vs pq
        let lhs = 2 * (p as u64 + q as u64);
        let rhs = p as u64 * q as u64;
        match lhs.cmp(&rhs) {
            std::cmp::Ordering::Greater => Geometry::Spherical,
            std::cmp::Ordering::Equal => Geometry::Euclidean,
            std::cmp::Ordering::Less => Geometry::Hyperbolic,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Geometry::Spherical => "spherical",
            Geometry::Euclidean => "euclidean",
            Geometry::Hyperbolic => "hyperbolic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TilingParams {
    pub p: u16,
    pub q: u16,
    pub geometry: Geometry,
}

impl TilingParams {
    pub fn new(p: u16, q: u16) -> TilingParams {
        assert!(p >= 2 && q >= 2, "tiling parameters must be at least 2");
        TilingParams {
            p,
            q,
            geometry: Geometry::classify(p, q),
        }
    }
}

#[derive(Clone, Debug)]
struct VertexRec {
    /// ccw neighbor list, `NONE` for unexplored slots.
    neigh: Box<[VertexId]>,
    /// `tiles[i]` sits in the wedge between edges i and i+1 (ccw).
    tiles: Box<[TileId]>,
    complete: bool,
    dist: u32,
    /// Render position (Poincare disk / plane / stereographic projection).
    pos: (f64, f64),
    /// Exact lattice coordinates, Euclidean geometries only.
    lat: (i32, i32),
}

#[derive(Clone, Debug)]
struct TileRec {
    /// ccw boundary cycle, complete from creation.
    verts: Box<[VertexId]>,
}

#[derive(Clone, Copy, Debug)]
pub struct AtlasConfig {
    pub max_vertices: usize,
}

impl Default for AtlasConfig {
    fn default() -> Self {
        AtlasConfig {
            max_vertices: 5_000_000,
        }
    }
}

/// Outcome of simulating a direction word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkOutcome {
    pub endpoint: VertexId,
    pub closed: bool,
    pub self_intersecting: bool,
}

#[derive(Clone, Debug)]
pub struct TilingAtlas {
    pub params: TilingParams,
    pub config: AtlasConfig,
    verts: Vec<VertexRec>,
    tiles: Vec<TileRec>,
    /// Largest r such that every vertex at distance <= r is complete.
    explored_radius: u32,
    /// Degenerate p=2 / q=2 skeletons skip the rotation-system machinery.
    degenerate: bool,
    /// Lattice coordinate -> vertex id, Euclidean geometries only.
    lat_index: HashMap<(i32, i32), VertexId>,
    /// Model step length (tanh(L/2), tan(L/2) or 1.0).
    step_radius: f64,
    /// Frontier of incomplete vertices keyed by provisional distance.
    frontier: BinaryHeap<Reverse<(u32, VertexId)>>,
    /// Set when out-of-order lazy expansion may have left distance labels
    /// above their true values.
    dists_dirty: bool,
}

impl TilingAtlas {
    /// Build the atlas with the origin vertex fully explored (its q incident
    /// tiles instantiated). Degenerate p=2 and q=2 inputs produce the simple
    /// graph skeletons directly: a single edge and the cycle C_p.
    pub fn new(p: u16, q: u16) -> Result<TilingAtlas> {
        TilingAtlas::with_config(p, q, AtlasConfig::default())
    }

    pub fn with_config(p: u16, q: u16, config: AtlasConfig) -> Result<TilingAtlas> {
        let params = TilingParams::new(p, q);
        if p == 2 || q == 2 {
            return Ok(TilingAtlas::degenerate_skeleton(params, config));
        }
        let step_radius = match params.geometry {
            Geometry::Euclidean => 1.0,
            Geometry::Hyperbolic => {
                let c = (std::f64::consts::PI / p as f64).cos()
                    / (std::f64::consts::PI / q as f64).sin();
                c.acosh().tanh()
            }
            Geometry::Spherical => {
                let c = (std::f64::consts::PI / p as f64).cos()
                    / (std::f64::consts::PI / q as f64).sin();
                c.acos().tan()
            }
        };
        let mut atlas = TilingAtlas {
            params,
            config,
            verts: Vec::new(),
            tiles: Vec::new(),
            explored_radius: 0,
            degenerate: false,
            lat_index: HashMap::new(),
            step_radius,
            frontier: BinaryHeap::new(),
            dists_dirty: false,
        };
        let origin = atlas.push_vertex(0, (0.0, 0.0), (0, 0))?;
        debug_assert_eq!(origin, 0);
        atlas.complete_vertex(origin)?;
        Ok(atlas)
    }

    fn degenerate_skeleton(params: TilingParams, config: AtlasConfig) -> TilingAtlas {
        let mut verts = Vec::new();
        if params.p == 2 {
            // q parallel digon edges collapse to one simple edge.
            verts.push(VertexRec {
                neigh: vec![1].into_boxed_slice(),
                tiles: Box::new([]),
                complete: true,
                dist: 0,
                pos: (0.0, 0.0),
                lat: (0, 0),
            });
            verts.push(VertexRec {
                neigh: vec![0].into_boxed_slice(),
                tiles: Box::new([]),
                complete: true,
                dist: 1,
                pos: (1.0, 0.0),
                lat: (1, 0),
            });
        } else {
            // q = 2: the cycle C_p with two p-gonal faces.
            let p = params.p as u32;
            for i in 0..p {
                let ang = 2.0 * std::f64::consts::PI * i as f64 / p as f64;
                verts.push(VertexRec {
                    neigh: vec![(i + p - 1) % p, (i + 1) % p].into_boxed_slice(),
                    tiles: Box::new([]),
                    complete: true,
                    dist: i.min(p - i),
                    pos: (ang.cos(), ang.sin()),
                    lat: (0, 0),
                });
            }
        }
        TilingAtlas {
            params,
            config,
            verts,
            tiles: Vec::new(),
            explored_radius: u32::MAX,
            degenerate: true,
            lat_index: HashMap::new(),
            step_radius: 1.0,
            frontier: BinaryHeap::new(),
            dists_dirty: false,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn origin(&self) -> VertexId {
        0
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn edge_count(&self) -> usize {
        let total: usize = self
            .verts
            .iter()
            .map(|v| v.neigh.iter().filter(|&&n| n != NONE).count())
            .sum();
        total / 2
    }

    pub fn complete_vertex_count(&self) -> usize {
        self.verts.iter().filter(|v| v.complete).count()
    }

    pub fn is_complete(&self, v: VertexId) -> bool {
        self.verts[v as usize].complete
    }

    /// Graph distance from the origin (exact for vertices inside the
    /// explored radius).
    pub fn dist(&self, v: VertexId) -> u32 {
        self.verts[v as usize].dist
    }

    pub fn explored_radius(&self) -> u32 {
        self.explored_radius
    }

    fn check_degenerate(&self) -> Result<()> {
        if self.degenerate {
            Err(Error::Degenerate {
                p: self.params.p,
                q: self.params.q,
            })
        } else {
            Ok(())
        }
    }

    fn push_vertex(&mut self, dist: u32, pos: (f64, f64), lat: (i32, i32)) -> Result<VertexId> {
        if self.verts.len() >= self.config.max_vertices {
            return Err(Error::ResourceLimit(self.verts.len()));
        }
        let q = self.params.q as usize;
        let id = self.verts.len() as VertexId;
        self.verts.push(VertexRec {
            neigh: vec![NONE; q].into_boxed_slice(),
            tiles: vec![NONE; q].into_boxed_slice(),
            complete: false,
            dist,
            pos,
            lat,
        });
        self.frontier.push(Reverse((dist, id)));
        if self.params.geometry == Geometry::Euclidean {
            self.lat_index.insert(lat, id);
        }
        Ok(id)
    }

    /// Lower v's provisional distance label and propagate the improvement
    /// through already-recorded edges.
    fn relax_dist(&mut self, v: VertexId, d: u32) {
        if d >= self.verts[v as usize].dist {
            return;
        }
        let mut queue = VecDeque::from([(v, d)]);
        while let Some((u, du)) = queue.pop_front() {
            if du >= self.verts[u as usize].dist {
                continue;
            }
            self.verts[u as usize].dist = du;
            if !self.verts[u as usize].complete {
                self.frontier.push(Reverse((du, u)));
            }
            for i in 0..self.verts[u as usize].neigh.len() {
                let w = self.verts[u as usize].neigh[i];
                if w != NONE && self.verts[w as usize].dist > du + 1 {
                    queue.push_back((w, du + 1));
                }
            }
        }
    }

    /// Slot of the edge v -> u in v's ccw neighbor list.
    pub fn dir_of(&self, v: VertexId, u: VertexId) -> Option<u16> {
        self.verts[v as usize]
            .neigh
            .iter()
            .position(|&n| n == u)
            .map(|i| i as u16)
    }

    pub fn is_adjacent(&self, v: VertexId, u: VertexId) -> bool {
        self.verts[v as usize].neigh.iter().any(|&n| n == u)
    }

    pub fn neighbor_at(&self, v: VertexId, slot: u16) -> VertexId {
        self.verts[v as usize].neigh[slot as usize]
    }

    pub fn tile_at(&self, v: VertexId, corner: u16) -> TileId {
        self.verts[v as usize].tiles[corner as usize]
    }

    /// Ordered ccw neighbor list of a fully explored vertex.
    pub fn neighbors(&self, v: VertexId) -> Result<&[VertexId]> {
        let rec = &self.verts[v as usize];
        if !rec.complete {
            return Err(Error::Unexplored(v));
        }
        Ok(&rec.neigh)
    }

    /// Ordered ccw tile list of a fully explored vertex.
    pub fn incident_tiles(&self, v: VertexId) -> Result<&[TileId]> {
        self.check_degenerate()?;
        let rec = &self.verts[v as usize];
        if !rec.complete {
            return Err(Error::Unexplored(v));
        }
        Ok(&rec.tiles)
    }

    /// Ordered ccw boundary cycle of a tile (always complete once created).
    pub fn tile_vertices(&self, t: TileId) -> Result<&[VertexId]> {
        self.check_degenerate()?;
        self.tiles
            .get(t as usize)
            .map(|t| &*t.verts)
            .ok_or(Error::Unexplored(t))
    }

    /// Corner index of tile t at vertex v.
    pub fn corner_of(&self, v: VertexId, t: TileId) -> Option<u16> {
        self.verts[v as usize]
            .tiles
            .iter()
            .position(|&x| x == t)
            .map(|i| i as u16)
    }

    /// Render-only position. Never consulted by any decision procedure.
    pub fn render_coords(&self, v: VertexId) -> (f64, f64) {
        self.verts[v as usize].pos
    }

    /// Exact lattice coordinates (Euclidean geometries only).
    pub fn lattice_coords(&self, v: VertexId) -> (i32, i32) {
        self.verts[v as usize].lat
    }

    pub fn vertex_at_lattice(&self, lat: (i32, i32)) -> Option<VertexId> {
        self.lat_index.get(&lat).copied()
    }

    // ------------------------------------------------------------------
    // Lazy expansion
    // ------------------------------------------------------------------

    /// Explore every vertex at graph distance <= r from the origin.
    /// Idempotent; previously assigned ids never change.
    pub fn ensure_radius(&mut self, r: u32) -> Result<()> {
        if self.degenerate || self.explored_radius >= r {
            return Ok(());
        }
        if self.dists_dirty {
            self.recompute_dists();
        }
        // Dijkstra order: the minimum-distance incomplete vertex carries a
        // final label, so completing in that order keeps labels exact.
        loop {
            match self.frontier.peek().copied() {
                None => {
                    // Spherical closure: the whole tiling is explored.
                    self.explored_radius = u32::MAX;
                    return Ok(());
                }
                Some(Reverse((d, v))) => {
                    let rec = &self.verts[v as usize];
                    if rec.complete || rec.dist != d {
                        self.frontier.pop(); // stale entry
                        continue;
                    }
                    if d > r {
                        self.explored_radius = d - 1;
                        return Ok(());
                    }
                    self.frontier.pop();
                    self.complete_vertex(v)?;
                }
            }
        }
    }

    /// Explore until the (finite, spherical) tiling closes.
    pub fn ensure_full(&mut self) -> Result<()> {
        assert_eq!(self.params.geometry, Geometry::Spherical);
        self.ensure_radius(u32::MAX - 1)
    }

    fn recompute_dists(&mut self) {
        let mut queue = VecDeque::new();
        for rec in self.verts.iter_mut() {
            rec.dist = u32::MAX;
        }
        self.verts[0].dist = 0;
        queue.push_back(0u32);
        while let Some(v) = queue.pop_front() {
            let d = self.verts[v as usize].dist;
            let nbrs: Vec<VertexId> = self.verts[v as usize]
                .neigh
                .iter()
                .copied()
                .filter(|&n| n != NONE)
                .collect();
            for n in nbrs {
                if self.verts[n as usize].dist > d + 1 {
                    self.verts[n as usize].dist = d + 1;
                    queue.push_back(n);
                }
            }
        }
        self.frontier.clear();
        for (i, rec) in self.verts.iter().enumerate() {
            if !rec.complete {
                self.frontier.push(Reverse((rec.dist, i as VertexId)));
            }
        }
        self.dists_dirty = false;
    }

    /// Make all q edges and q tiles around v present.
    fn complete_vertex(&mut self, v: VertexId) -> Result<()> {
        self.check_degenerate()?;
        if self.verts[v as usize].complete {
            return Ok(());
        }
        let q = self.params.q as usize;
        if self.verts[v as usize].neigh.iter().all(|&n| n == NONE) {
            // Bootstrap: only ever needed for the origin.
            let u = self.push_vertex(
                self.verts[v as usize].dist + 1,
                (self.step_radius, 0.0),
                (1, 0),
            )?;
            self.verts[v as usize].neigh[0] = u;
            self.verts[u as usize].neigh[0] = v;
        }
        // A tile materialized at wedge i creates edge i+1, so repeated sweeps
        // fill the whole star.
        loop {
            let mut progressed = false;
            let mut done = true;
            for i in 0..q {
                let rec = &self.verts[v as usize];
                if rec.tiles[i] != NONE {
                    continue;
                }
                done = false;
                if rec.neigh[i] != NONE {
                    self.materialize_tile(v, i as u16)?;
                    progressed = true;
                }
            }
            if done {
                break;
            }
            assert!(progressed, "vertex star of {v} cannot make progress");
        }
        let rec = &mut self.verts[v as usize];
        rec.complete = true;
        debug_assert!(rec.neigh.iter().all(|&n| n != NONE));
        Ok(())
    }

    /// Dart following the face on the left of u -> v, or None if the needed
    /// edge slot is still unexplored.
    fn next_dart(&self, u: VertexId, v: VertexId) -> Option<(VertexId, VertexId)> {
        let q = self.params.q as u16;
        let back = self.dir_of(v, u).expect("edge must exist");
        let slot = (back + q - 1) % q;
        let w = self.verts[v as usize].neigh[slot as usize];
        if w == NONE {
            None
        } else {
            Some((v, w))
        }
    }

    /// Dart preceding u -> v on the boundary of the face on its left.
    fn prev_dart(&self, u: VertexId, v: VertexId) -> Option<(VertexId, VertexId)> {
        let q = self.params.q as u16;
        let fwd = self.dir_of(u, v).expect("edge must exist");
        let slot = (fwd + 1) % q;
        let w = self.verts[u as usize].neigh[slot as usize];
        if w == NONE {
            None
        } else {
            Some((w, u))
        }
    }

    /// Create the tile on the left of the dart v -> neigh[v][edge_slot],
    /// reusing every boundary vertex and edge that already exists.
    fn materialize_tile(&mut self, v: VertexId, edge_slot: u16) -> Result<()> {
        let p = self.params.p as usize;
        let q = self.params.q as u16;
        let b = self.verts[v as usize].neigh[edge_slot as usize];
        debug_assert_ne!(b, NONE);
        debug_assert_eq!(self.verts[v as usize].tiles[edge_slot as usize], NONE);

        // Maximal existing dart path of the tile boundary through the seed
        // dart; path of k+1 vertices = k darts.
        let mut path = vec![v, b];
        while path.len() < p + 1 {
            let m = path.len();
            match self.next_dart(path[m - 2], path[m - 1]) {
                Some((_, y)) => path.push(y),
                None => break,
            }
        }
        while path.len() < p + 1 {
            match self.prev_dart(path[0], path[1]) {
                Some((x, _)) => path.insert(0, x),
                None => break,
            }
        }

        let cycle: Vec<VertexId> = if path.len() == p + 1 {
            // Tile closes over existing vertices.
            assert_eq!(path[0], path[p], "tile trace must close after p darts");
            path.truncate(p);
            path
        } else {
            // Close the remaining boundary with fresh vertices, then hook the
            // final edge back into the path start.
            let new_count = p - path.len();
            let mut cycle = path;
            for _ in 0..new_count {
                let m = cycle.len();
                let (prev, cur) = (cycle[m - 2], cycle[m - 1]);
                let pos = self.extend_position(prev, cur);
                let lat = self.extend_lattice(prev, cur);
                let dist = self.verts[cur as usize].dist.saturating_add(1);
                let w = self.push_vertex(dist, pos, lat)?;
                // New vertices attach their tile-cycle predecessor at slot 0
                // and (eventually) their successor at slot q-1.
                self.verts[w as usize].neigh[0] = cur;
                let end_slot = {
                    let back = self.dir_of(cur, prev).expect("edge exists");
                    ((back + q - 1) % q) as usize
                };
                assert_eq!(
                    self.verts[cur as usize].neigh[end_slot],
                    NONE,
                    "slot for new tile edge already occupied"
                );
                self.verts[cur as usize].neigh[end_slot] = w;
                cycle.push(w);
            }
            // Closing edge from the last cycle vertex back to cycle[0].
            let m = cycle.len();
            let (last, first, second) = (cycle[m - 1], cycle[0], cycle[1]);
            let last_slot = {
                let back = self.dir_of(last, cycle[m - 2]).expect("edge exists");
                ((back + q - 1) % q) as usize
            };
            let first_slot = {
                let fwd = self.dir_of(first, second).expect("edge exists");
                ((fwd + 1) % q) as usize
            };
            assert_eq!(
                self.verts[last as usize].neigh[last_slot],
                NONE,
                "closing edge slot occupied at path end"
            );
            assert_eq!(
                self.verts[first as usize].neigh[first_slot],
                NONE,
                "closing edge slot occupied at path start"
            );
            self.verts[last as usize].neigh[last_slot] = first;
            self.verts[first as usize].neigh[first_slot] = last;
            let dl = self.verts[last as usize].dist;
            let df = self.verts[first as usize].dist;
            self.relax_dist(last, df.saturating_add(1));
            self.relax_dist(first, dl.saturating_add(1));
            cycle
        };

        debug_assert_eq!(cycle.len(), p);
        let tid = self.tiles.len() as TileId;
        for j in 0..p {
            let w = cycle[j];
            let w2 = cycle[(j + 1) % p];
            let slot = self.dir_of(w, w2).expect("cycle edge exists") as usize;
            let cur = self.verts[w as usize].tiles[slot];
            assert_eq!(cur, NONE, "tile corner already filled at vertex {w}");
            self.verts[w as usize].tiles[slot] = tid;
        }
        self.tiles.push(TileRec {
            verts: cycle.into_boxed_slice(),
        });
        Ok(())
    }

    /// Place the vertex after `cur` on a ccw tile boundary: rotate the
    /// direction towards `prev` clockwise by the interior angle 2*pi/q and
    /// step one edge length in the ambient model.
    fn extend_position(&self, prev: VertexId, cur: VertexId) -> (f64, f64) {
        let c = self.verts[cur as usize].pos;
        let pv = self.verts[prev as usize].pos;
        let turn = 2.0 * std::f64::consts::PI / self.params.q as f64;
        match self.params.geometry {
            Geometry::Euclidean => {
                let (dx, dy) = (pv.0 - c.0, pv.1 - c.1);
                let (rx, ry) = rotate_cw(dx, dy, turn);
                (c.0 + rx, c.1 + ry)
            }
            Geometry::Hyperbolic => {
                let pt = mobius_to_origin(c, pv, 1.0);
                let theta = pt.1.atan2(pt.0) - turn;
                let np = (self.step_radius * theta.cos(), self.step_radius * theta.sin());
                mobius_from_origin(c, np, 1.0)
            }
            Geometry::Spherical => {
                let pt = mobius_to_origin(c, pv, -1.0);
                let theta = pt.1.atan2(pt.0) - turn;
                let np = (self.step_radius * theta.cos(), self.step_radius * theta.sin());
                let out = mobius_from_origin(c, np, -1.0);
                if !out.0.is_finite() || !out.1.is_finite() || out.0.hypot(out.1) > 1e6 {
                    // Stereographic pole: clamp, render-only data.
                    (1e3, 1e3)
                } else {
                    out
                }
            }
        }
    }

    fn extend_lattice(&self, prev: VertexId, cur: VertexId) -> (i32, i32) {
        if self.params.geometry != Geometry::Euclidean {
            return (0, 0);
        }
        let c = self.verts[cur as usize].lat;
        let pv = self.verts[prev as usize].lat;
        let d = (pv.0 - c.0, pv.1 - c.1);
        // Rotation by -2*pi/q in the lattice basis of the tiling.
        let r = match self.params.q {
            4 => (d.1, -d.0),
            6 => (d.0 + d.1, -d.0),
            3 => (d.1, -d.0 - d.1),
            _ => unreachable!("Euclidean tilings are {{4,4}}, {{3,6}}, {{6,3}}"),
        };
        (c.0 + r.0, c.1 + r.1)
    }

    // ------------------------------------------------------------------
    // Direction-word walks
    // ------------------------------------------------------------------

    /// Simulate a direction word from an anchored start, lazily expanding the
    /// atlas. Labels follow the first-visit rule: at each vertex label 0 is
    /// the direction of arrival (the given `start_edge` at the start vertex)
    /// and labels increase ccw.
    pub fn walk(&mut self, start: VertexId, start_edge: u16, word: &[u16]) -> Result<WalkOutcome> {
        self.check_degenerate()?;
        let q = self.params.q;
        assert!(start_edge < q);
        let mut base: HashMap<VertexId, u16> = HashMap::new();
        base.insert(start, start_edge);
        let mut seen: HashSet<VertexId> = HashSet::new();
        seen.insert(start);
        let mut cur = start;
        let mut self_intersecting = false;
        for (idx, &d) in word.iter().enumerate() {
            assert!(d < q, "direction label out of range");
            if !self.verts[cur as usize].complete {
                self.complete_vertex(cur)?;
                self.dists_dirty = true;
            }
            let slot = (base[&cur] + d) % q;
            let next = self.verts[cur as usize].neigh[slot as usize];
            debug_assert_ne!(next, NONE);
            let back = self.dir_of(next, cur).expect("edge exists");
            base.entry(next).or_insert(back);
            let last = idx + 1 == word.len();
            if seen.contains(&next) && !(last && next == start) {
                self_intersecting = true;
            }
            seen.insert(next);
            cur = next;
        }
        Ok(WalkOutcome {
            endpoint: cur,
            closed: cur == start,
            self_intersecting,
        })
    }

    /// Like `walk`, but read-only: errs with `Unexplored` instead of lazily
    /// expanding the atlas. Safe to run concurrently.
    pub fn walk_ref(&self, start: VertexId, start_edge: u16, word: &[u16]) -> Result<WalkOutcome> {
        self.check_degenerate()?;
        let q = self.params.q;
        let mut base: HashMap<VertexId, u16> = HashMap::new();
        base.insert(start, start_edge);
        let mut seen: HashSet<VertexId> = HashSet::new();
        seen.insert(start);
        let mut cur = start;
        let mut self_intersecting = false;
        for (idx, &d) in word.iter().enumerate() {
            if !self.verts[cur as usize].complete {
                return Err(Error::Unexplored(cur));
            }
            let slot = (base[&cur] + d) % q;
            let next = self.verts[cur as usize].neigh[slot as usize];
            let back = self.dir_of(next, cur).expect("edge exists");
            base.entry(next).or_insert(back);
            let last = idx + 1 == word.len();
            if seen.contains(&next) && !(last && next == start) {
                self_intersecting = true;
            }
            seen.insert(next);
            cur = next;
        }
        Ok(WalkOutcome {
            endpoint: cur,
            closed: cur == start,
            self_intersecting,
        })
    }

    /// Image of `v` under the orientation-preserving automorphism taking
    /// (origin, slot 0) to `anchor`, computed by direction-word replay.
    pub fn automorphism_image(&mut self, v: VertexId, anchor: (VertexId, u16)) -> Result<VertexId> {
        let word = self.word_from_origin(v)?;
        let out = self.walk(anchor.0, anchor.1, &word)?;
        Ok(out.endpoint)
    }

    /// Read-only variant of `automorphism_image`.
    pub fn automorphism_image_ref(
        &self,
        v: VertexId,
        anchor: (VertexId, u16),
    ) -> Result<VertexId> {
        let word = self.word_from_origin(v)?;
        let out = self.walk_ref(anchor.0, anchor.1, &word)?;
        Ok(out.endpoint)
    }

    /// A direction word (first-visit labeling, anchored at (origin, slot 0))
    /// reaching v from the origin along one shortest path.
    pub fn word_from_origin(&self, v: VertexId) -> Result<Vec<u16>> {
        self.check_degenerate()?;
        let q = self.params.q;
        let mut path = vec![v];
        let mut cur = v;
        while cur != 0 {
            let d = self.verts[cur as usize].dist;
            let mut found = None;
            for &u in self.verts[cur as usize].neigh.iter() {
                if u != NONE && self.verts[u as usize].dist + 1 == d {
                    found = Some(u);
                    break;
                }
            }
            let u = found.ok_or(Error::Unexplored(cur))?;
            path.push(u);
            cur = u;
        }
        path.reverse();
        let mut word = Vec::with_capacity(path.len().saturating_sub(1));
        let mut basis = 0u16; // slot of label 0 at the current vertex
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            let slot = self.dir_of(a, b).expect("path edge exists");
            word.push((slot + q - basis) % q);
            basis = self.dir_of(b, a).expect("path edge exists");
        }
        Ok(word)
    }

    /// Text dump `v: n0 n1 ... n{q-1}` per explored vertex.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, rec) in self.verts.iter().enumerate() {
            if !rec.complete {
                continue;
            }
            let _ = write!(s, "{i}:");
            for &n in rec.neigh.iter() {
                let _ = write!(s, " {n}");
            }
            s.push('\n');
        }
        s
    }
}

fn rotate_cw(x: f64, y: f64, a: f64) -> (f64, f64) {
    let (s, c) = (-a).sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Translate `z` by the model motion taking `c` to the origin.
/// sign = +1: hyperbolic Poincare disk; sign = -1: stereographic sphere.
fn mobius_to_origin(c: (f64, f64), z: (f64, f64), sign: f64) -> (f64, f64) {
    let num = (z.0 - c.0, z.1 - c.1);
    let cz = (c.0 * z.0 + c.1 * z.1, c.0 * z.1 - c.1 * z.0); // conj(c)*z
    let den = (1.0 - sign * cz.0, -sign * cz.1);
    complex_div(num, den)
}

fn mobius_from_origin(c: (f64, f64), w: (f64, f64), sign: f64) -> (f64, f64) {
    let num = (w.0 + c.0, w.1 + c.1);
    let cw = (c.0 * w.0 + c.1 * w.1, c.0 * w.1 - c.1 * w.0);
    let den = (1.0 + sign * cw.0, sign * cw.1);
    complex_div(num, den)
}

fn complex_div(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let d = b.0 * b.0 + b.1 * b.1;
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_classification_is_exact() {
        assert_eq!(Geometry::classify(4, 4), Geometry::Euclidean);
        assert_eq!(Geometry::classify(3, 6), Geometry::Euclidean);
        assert_eq!(Geometry::classify(6, 3), Geometry::Euclidean);
        assert_eq!(Geometry::classify(5, 4), Geometry::Hyperbolic);
        assert_eq!(Geometry::classify(3, 7), Geometry::Hyperbolic);
        assert_eq!(Geometry::classify(7, 3), Geometry::Hyperbolic);
        assert_eq!(Geometry::classify(3, 5), Geometry::Spherical);
        assert_eq!(Geometry::classify(3, 3), Geometry::Spherical);
        assert_eq!(Geometry::classify(2, 9), Geometry::Spherical);
        assert_eq!(Geometry::classify(9, 2), Geometry::Spherical);
    }

    #[test]
    fn origin_star_is_complete_on_creation() {
        for &(p, q) in &[(4u16, 4u16), (5, 4), (3, 7), (7, 3), (6, 3), (3, 6)] {
            let atlas = TilingAtlas::new(p, q).unwrap();
            let n = atlas.neighbors(0).unwrap();
            assert_eq!(n.len(), q as usize, "{{{p},{q}}} origin degree");
            let mut uniq: Vec<_> = n.to_vec();
            uniq.sort_unstable();
            uniq.dedup();
            assert_eq!(uniq.len(), q as usize, "{{{p},{q}}} distinct neighbors");
            let t = atlas.incident_tiles(0).unwrap();
            assert_eq!(t.len(), q as usize);
            for &tid in t {
                assert_eq!(atlas.tile_vertices(tid).unwrap().len(), p as usize);
            }
        }
    }

    #[test]
    fn ensure_radius_examples() {
        let mut atlas = TilingAtlas::new(4, 4).unwrap();
        atlas.ensure_radius(1).unwrap();
        assert_eq!(atlas.complete_vertex_count(), 5);
        assert_eq!(atlas.neighbors(0).unwrap().len(), 4);

        let mut atlas = TilingAtlas::new(3, 7).unwrap();
        atlas.ensure_radius(1).unwrap();
        assert_eq!(atlas.neighbors(0).unwrap().len(), 7);
        for &n in &atlas.neighbors(0).unwrap().to_vec() {
            assert!(atlas.is_complete(n));
        }
    }

    #[test]
    fn face_closure_via_rotation_system() {
        for &(p, q) in &[(4u16, 4u16), (5, 4), (3, 7), (7, 3)] {
            let mut atlas = TilingAtlas::new(p, q).unwrap();
            atlas.ensure_radius(2).unwrap();
            for t in 0..atlas.tile_count() as TileId {
                let cyc = atlas.tile_vertices(t).unwrap().to_vec();
                assert_eq!(cyc.len(), p as usize);
                let (mut u, mut v) = (cyc[0], cyc[1]);
                for _ in 0..p as usize - 1 {
                    let (x, y) = atlas.next_dart(u, v).expect("explored tile boundary");
                    u = x;
                    v = y;
                }
                assert_eq!(v, cyc[0], "tile {t} boundary must close");
            }
        }
    }

    #[test]
    fn tile_incidence_roundtrip() {
        let mut atlas = TilingAtlas::new(7, 3).unwrap();
        atlas.ensure_radius(1).unwrap();
        for t in 0..atlas.tile_count() as TileId {
            let cyc = atlas.tile_vertices(t).unwrap().to_vec();
            assert_eq!(cyc.len(), 7);
            for &v in &cyc {
                if atlas.is_complete(v) {
                    assert!(
                        atlas.incident_tiles(v).unwrap().contains(&t),
                        "vertex {v} must list tile {t}"
                    );
                }
            }
        }
    }

    #[test]
    fn spherical_tilings_close_with_platonic_counts() {
        let cases = [
            (3u16, 3u16, 4usize, 6usize, 4usize),
            (3, 4, 6, 12, 8),
            (4, 3, 8, 12, 6),
            (3, 5, 12, 30, 20),
            (5, 3, 20, 30, 12),
        ];
        for (p, q, nv, ne, nf) in cases {
            let mut atlas = TilingAtlas::new(p, q).unwrap();
            atlas.ensure_full().unwrap();
            assert_eq!(atlas.vertex_count(), nv, "{{{p},{q}}} vertices");
            assert_eq!(atlas.edge_count(), ne, "{{{p},{q}}} edges");
            assert_eq!(atlas.tile_count(), nf, "{{{p},{q}}} faces");
            assert_eq!(nv as i64 - ne as i64 + nf as i64, 2);
            for v in 0..atlas.vertex_count() as VertexId {
                assert!(atlas.is_complete(v));
            }
        }
    }

    #[test]
    fn determinism_same_construction_sequence() {
        let mut a = TilingAtlas::new(5, 4).unwrap();
        let mut b = TilingAtlas::new(5, 4).unwrap();
        a.ensure_radius(3).unwrap();
        b.ensure_radius(3).unwrap();
        assert_eq!(a.vertex_count(), b.vertex_count());
        assert_eq!(a.tile_count(), b.tile_count());
        assert_eq!(a.dump(), b.dump());
    }

    #[test]
    fn hyperbolic_ball_growth_is_exponential() {
        let mut atlas = TilingAtlas::new(5, 4).unwrap();
        atlas.ensure_radius(7).unwrap();
        let ball = |r: u32| {
            (0..atlas.vertex_count() as VertexId)
                .filter(|&v| atlas.is_complete(v) && atlas.dist(v) <= r)
                .count()
        };
        for r in 2..=6 {
            let a = ball(r);
            let b = ball(r + 1);
            assert!(
                b as f64 >= a as f64 * 1.05,
                "ball({}) = {a}, ball({}) = {b}",
                r,
                r + 1
            );
        }
    }

    #[test]
    fn girth_no_short_cycle_in_ball() {
        for &(p, q) in &[(5u16, 4u16), (4, 5), (7, 3)] {
            let mut atlas = TilingAtlas::new(p, q).unwrap();
            atlas.ensure_radius(p as u32 + 1).unwrap();
            let girth = shortest_cycle_through(&atlas, 0);
            assert_eq!(girth, p as usize, "{{{p},{q}}} girth");
        }
    }

    fn shortest_cycle_through(atlas: &TilingAtlas, v0: VertexId) -> usize {
        let mut best = usize::MAX;
        let nbrs = atlas.neighbors(v0).unwrap().to_vec();
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in nbrs.iter().skip(i + 1) {
                // shortest a-b path avoiding v0 closes a cycle through v0
                let mut dist: HashMap<VertexId, usize> = HashMap::new();
                dist.insert(a, 0);
                let mut queue = VecDeque::new();
                queue.push_back(a);
                while let Some(x) = queue.pop_front() {
                    if x == b {
                        break;
                    }
                    if !atlas.is_complete(x) {
                        continue;
                    }
                    for &y in atlas.neighbors(x).unwrap() {
                        if y == v0 || dist.contains_key(&y) {
                            continue;
                        }
                        dist.insert(y, dist[&x] + 1);
                        queue.push_back(y);
                    }
                }
                if let Some(&d) = dist.get(&b) {
                    best = best.min(d + 2);
                }
            }
        }
        best
    }

    #[test]
    fn walk_empty_word_stays_put() {
        let mut atlas = TilingAtlas::new(5, 4).unwrap();
        let out = atlas.walk(0, 0, &[]).unwrap();
        assert_eq!(out, WalkOutcome {
            endpoint: 0,
            closed: true,
            self_intersecting: false
        });
    }

    #[test]
    fn walk_tile_boundary_words_close_in_t44() {
        // Oracle: enumerate all 4-step words; exactly the constant-turn
        // patterns [*,1,1,1] and [*,3,3,3] close without self-intersection.
        let mut atlas = TilingAtlas::new(4, 4).unwrap();
        atlas.ensure_radius(6).unwrap();
        let mut closing = Vec::new();
        for w0 in 0..4u16 {
            for w1 in 0..4u16 {
                for w2 in 0..4u16 {
                    for w3 in 0..4u16 {
                        let word = [w0, w1, w2, w3];
                        let out = atlas.walk(0, 0, &word).unwrap();
                        if out.closed && !out.self_intersecting {
                            closing.push(word);
                        }
                    }
                }
            }
        }
        let expected: Vec<[u16; 4]> = (0..4).flat_map(|t| [[t, 1, 1, 1], [t, 3, 3, 3]]).collect();
        assert_eq!(closing, expected);
    }

    #[test]
    fn walk_nonbacktracking_short_words_do_not_close() {
        // Every cycle in T_{p,q} has length at least p.
        for &(p, q) in &[(5u16, 4u16), (7, 3), (4, 5)] {
            let mut atlas = TilingAtlas::new(p, q).unwrap();
            atlas.ensure_radius(p as u32 + 2).unwrap();
            let mut words: Vec<Vec<u16>> = vec![vec![]];
            while let Some(w) = words.pop() {
                for d in 0..q {
                    if d == 0 && !w.is_empty() {
                        continue; // backtracking step
                    }
                    let mut w2 = w.clone();
                    w2.push(d);
                    let out = atlas.walk(0, 0, &w2).unwrap();
                    assert!(
                        !out.closed,
                        "{{{p},{q}}}: word {w2:?} of length {} closed",
                        w2.len()
                    );
                    if w2.len() + 1 < p as usize {
                        words.push(w2);
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_skeletons() {
        let a = TilingAtlas::new(2, 5).unwrap();
        assert!(a.is_degenerate());
        assert_eq!(a.vertex_count(), 2);
        assert_eq!(a.edge_count(), 1);
        assert_eq!(a.params.geometry, Geometry::Spherical);

        let c = TilingAtlas::new(6, 2).unwrap();
        assert!(c.is_degenerate());
        assert_eq!(c.vertex_count(), 6);
        assert_eq!(c.edge_count(), 6);
        assert_eq!(c.params.geometry, Geometry::Spherical);
    }

    #[test]
    fn render_coords_examples() {
        let mut h = TilingAtlas::new(5, 4).unwrap();
        h.ensure_radius(3).unwrap();
        assert_eq!(h.render_coords(0), (0.0, 0.0));
        for v in 0..h.vertex_count() as VertexId {
            let (x, y) = h.render_coords(v);
            assert!(x * x + y * y < 1.0, "hyperbolic render inside unit disk");
        }

        let mut e = TilingAtlas::new(4, 4).unwrap();
        e.ensure_radius(3).unwrap();
        for v in 0..e.vertex_count() as VertexId {
            let (x, y) = e.lattice_coords(v);
            let (fx, fy) = e.render_coords(v);
            assert!((fx - x as f64).abs() < 1e-9 && (fy - y as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn euclidean_lattice_index_roundtrip() {
        let mut e = TilingAtlas::new(4, 4).unwrap();
        e.ensure_radius(4).unwrap();
        for v in 0..e.vertex_count() as VertexId {
            assert_eq!(e.vertex_at_lattice(e.lattice_coords(v)), Some(v));
        }
        // {6,3} honeycomb: lattice points with (x - y) % 3 == 2 are absent.
        let mut h = TilingAtlas::new(6, 3).unwrap();
        h.ensure_radius(4).unwrap();
        for v in 0..h.vertex_count() as VertexId {
            let (x, y) = h.lattice_coords(v);
            assert_ne!(
                (x - y).rem_euclid(3),
                2,
                "honeycomb vertex on a deleted lattice class"
            );
        }
    }

    #[test]
    fn word_from_origin_roundtrip() {
        let mut atlas = TilingAtlas::new(5, 4).unwrap();
        atlas.ensure_radius(4).unwrap();
        for v in (0..atlas.vertex_count() as VertexId).step_by(7) {
            if !atlas.is_complete(v) {
                continue;
            }
            let w = atlas.word_from_origin(v).unwrap();
            let out = atlas.walk(0, 0, &w).unwrap();
            assert_eq!(out.endpoint, v);
            assert_eq!(w.len() as u32, atlas.dist(v));
        }
    }
}
