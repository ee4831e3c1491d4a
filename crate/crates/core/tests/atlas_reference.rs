//! Cross-check the combinatorial atlas against an independently built
//! floating-point model of the same tiling: tiles are generated by BFS over
//! Mobius transforms in the Poincare disk and vertices deduplicated by
//! position, with no shared code or conventions with the atlas proper.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use tilingrec::atlas::TilingAtlas;

#[derive(Clone, Copy, Debug)]
struct C {
    re: f64,
    im: f64,
}

impl C {
    const ZERO: C = C { re: 0.0, im: 0.0 };
    const ONE: C = C { re: 1.0, im: 0.0 };
    fn new(re: f64, im: f64) -> C {
        C { re, im }
    }
    fn polar(r: f64, t: f64) -> C {
        C::new(r * t.cos(), r * t.sin())
    }
    fn conj(self) -> C {
        C::new(self.re, -self.im)
    }
    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
    fn add(self, o: C) -> C {
        C::new(self.re + o.re, self.im + o.im)
    }
    fn mul(self, o: C) -> C {
        C::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
    fn div(self, o: C) -> C {
        let d = o.re * o.re + o.im * o.im;
        C::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
}

/// Mobius transform z -> (a z + b) / (conj(b) z + conj(a)).
#[derive(Clone, Copy, Debug)]
struct Mobius {
    a: C,
    b: C,
}

impl Mobius {
    fn identity() -> Mobius {
        Mobius {
            a: C::ONE,
            b: C::ZERO,
        }
    }
    fn apply(&self, z: C) -> C {
        self.a.mul(z).add(self.b).div(self.b.conj().mul(z).add(self.a.conj()))
    }
    fn compose(&self, o: &Mobius) -> Mobius {
        let a = self.a.mul(o.a).add(self.b.mul(o.b.conj()));
        let b = self.a.mul(o.b).add(self.b.mul(o.a.conj()));
        let det = (a.re * a.re + a.im * a.im - b.re * b.re - b.im * b.im).abs();
        let s = 1.0 / det.sqrt();
        Mobius {
            a: C::new(a.re * s, a.im * s),
            b: C::new(b.re * s, b.im * s),
        }
    }
}

fn key(z: C) -> (i64, i64) {
    ((z.re * 1e4).round() as i64, (z.im * 1e4).round() as i64)
}

/// Build the vertex graph of the hyperbolic {p,q} tiling by tile BFS to the
/// given depth; returns adjacency lists and positions.
fn reference_graph(p: u32, q: u32, depth: usize) -> (Vec<Vec<usize>>, Vec<C>) {
    let cosh_chi = 1.0 / (PI / p as f64).tan() / (PI / q as f64).tan();
    let r_disk = (cosh_chi.acosh() / 2.0).tanh();
    let corners: Vec<C> = (0..p)
        .map(|k| C::polar(r_disk, PI / p as f64 + k as f64 * 2.0 * PI / p as f64))
        .collect();

    // Center-to-center motion across edge k: translate along the edge-k
    // direction; odd p also needs a fixed pi/p rotation so the child polygon
    // lands exactly on the neighbor tile.
    let cosh_psi = (PI / q as f64).cos() / (PI / p as f64).sin();
    let cosh_d = 2.0 * cosh_psi * cosh_psi - 1.0;
    let d = cosh_d.acosh();
    let (ch, sh) = ((d / 2.0).cosh(), (d / 2.0).sinh());
    let step = 2.0 * PI / p as f64;
    let rot = if p % 2 == 0 {
        Mobius::identity()
    } else {
        Mobius {
            a: C::polar(1.0, PI / p as f64 / 2.0),
            b: C::ZERO,
        }
    };
    let xforms: Vec<Mobius> = (0..p)
        .map(|k| {
            let t = Mobius {
                a: C::new(ch, 0.0),
                b: C::polar(sh, k as f64 * step),
            };
            t.compose(&rot)
        })
        .collect();

    let mut tiles: Vec<(Mobius, usize)> = vec![(Mobius::identity(), 0)];
    let mut seen: HashMap<(i64, i64), ()> = HashMap::new();
    seen.insert(key(C::ZERO), ());
    let mut head = 0;
    while head < tiles.len() {
        let (m, lvl) = tiles[head];
        head += 1;
        if lvl >= depth {
            continue;
        }
        for k in 0..p as usize {
            let child = m.compose(&xforms[k]);
            let c = child.apply(C::ZERO);
            let kk = key(c);
            if seen.contains_key(&kk) {
                continue;
            }
            seen.insert(kk, ());
            tiles.push((child, lvl + 1));
        }
    }

    // Vertices: dedup transformed polygon corners by position.
    let mut vid: HashMap<(i64, i64), usize> = HashMap::new();
    let mut pos: Vec<C> = Vec::new();
    let mut adj: Vec<Vec<usize>> = Vec::new();
    for (m, _) in &tiles {
        let ids: Vec<usize> = corners
            .iter()
            .map(|&c| {
                let z = m.apply(c);
                let k = key(z);
                *vid.entry(k).or_insert_with(|| {
                    pos.push(z);
                    adj.push(Vec::new());
                    pos.len() - 1
                })
            })
            .collect();
        for i in 0..p as usize {
            let (a, b) = (ids[i], ids[(i + 1) % p as usize]);
            if !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    (adj, pos)
}

/// Vertex counts per BFS ring around `root`, up to radius r.
fn ring_counts(adj: &[Vec<usize>], root: usize, r: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    (0..=r)
        .map(|d| dist.iter().filter(|&&x| x == d).count())
        .collect()
}

fn atlas_ring_counts(p: u16, q: u16, r: u32) -> Vec<usize> {
    let mut atlas = TilingAtlas::new(p, q).unwrap();
    atlas.ensure_radius(r).unwrap();
    (0..=r)
        .map(|d| {
            (0..atlas.vertex_count() as u32)
                .filter(|&v| atlas.is_complete(v) && atlas.dist(v) == d)
                .count()
        })
        .collect()
}

fn check(p: u16, q: u16, r: u32, tile_depth: usize) {
    let (adj, pos) = reference_graph(p as u32, q as u32, tile_depth);
    // Root at a vertex as close to the disk center as possible so the whole
    // radius-r ball is interior to the generated patch.
    let root = (0..pos.len())
        .min_by(|&a, &b| pos[a].abs().partial_cmp(&pos[b].abs()).unwrap())
        .unwrap();
    assert_eq!(adj[root].len(), q as usize, "reference root degree");
    let reference = ring_counts(&adj, root, r as usize);
    let ours = atlas_ring_counts(p, q, r);
    assert_eq!(
        ours, reference,
        "{{{p},{q}}} ring counts up to radius {r} disagree with the reference model"
    );
}

#[test]
fn atlas_matches_reference_model_5_4() {
    check(5, 4, 3, 8);
}

#[test]
fn atlas_matches_reference_model_4_5() {
    check(4, 5, 3, 8);
}

#[test]
fn atlas_matches_reference_model_3_7() {
    check(3, 7, 3, 9);
}

#[test]
fn atlas_matches_reference_model_7_3() {
    check(7, 3, 2, 6);
}
