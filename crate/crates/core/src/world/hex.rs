//! Pointy-top hexagonal cell grid in axial coordinates.
//!
//! Every provider deploys an identical grid at the same positions, so the
//! geometry is built once as a list of *sites* and each provider gets one
//! cell per site. CR nodes sit on the hexagon vertices, deduplicated where
//! neighbouring hexagons share a corner.

use std::collections::BTreeMap;

use super::{CellId, CrNodeId, ProviderId};
use crate::error::{Error, Result};

/// Axial hex coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hex {
    pub q: i32,
    pub r: i32,
}

const AXIAL_DIRECTIONS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

// Vertex offsets from a hex center on the integer lattice where
// x is counted in units of sqrt(3)/2 * radius and y in units of radius/2.
// Angles 30, 90, 150, 210, 270, 330 degrees.
const VERTEX_OFFSETS: [(i64, i64); 6] = [(1, 1), (0, 2), (-1, 1), (-1, -1), (0, -2), (1, -1)];

impl Hex {
    pub const ORIGIN: Hex = Hex { q: 0, r: 0 };

    pub fn new(q: i32, r: i32) -> Self {
        Hex { q, r }
    }

    pub fn neighbors(self) -> [Hex; 6] {
        AXIAL_DIRECTIONS.map(|(dq, dr)| Hex::new(self.q + dq, self.r + dr))
    }

    pub fn distance(self, other: Hex) -> i32 {
        let dq = self.q - other.q;
        let dr = self.r - other.r;
        (dq.abs() + dr.abs() + (dq + dr).abs()) / 2
    }

    /// Center in meters for a grid of the given circumradius.
    pub fn center(self, radius: f64) -> Point {
        let sqrt3 = 3f64.sqrt();
        Point {
            x: radius * sqrt3 * (self.q as f64 + self.r as f64 / 2.0),
            y: radius * 1.5 * self.r as f64,
        }
    }

    fn lattice_center(self) -> (i64, i64) {
        (2 * self.q as i64 + self.r as i64, 3 * self.r as i64)
    }

    fn lattice_vertices(self) -> [(i64, i64); 6] {
        let (cx, cy) = self.lattice_center();
        VERTEX_OFFSETS.map(|(dx, dy)| (cx + dx, cy + dy))
    }
}

/// First `n` hexes of the spiral around the origin: center, then ring 1,
/// ring 2, and so on.
pub fn spiral(n: usize) -> Vec<Hex> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(Hex::ORIGIN);
    let mut radius = 1;
    while out.len() < n {
        // start at direction 4 scaled by radius, walk each side
        let (sq, sr) = AXIAL_DIRECTIONS[4];
        let mut h = Hex::new(sq * radius, sr * radius);
        for &(dq, dr) in AXIAL_DIRECTIONS.iter() {
            for _ in 0..radius {
                if out.len() == n {
                    return out;
                }
                out.push(h);
                h = Hex::new(h.q + dq, h.r + dr);
            }
        }
        radius += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A geographic cell position shared by all providers' co-located cells.
#[derive(Debug, Clone)]
pub struct Site {
    pub index: usize,
    pub hex: Hex,
    pub center: Point,
    /// Sites sharing an edge with this one, ascending.
    pub adjacent: Vec<usize>,
    /// CR nodes on the six corners, counter-clockwise from 30 degrees.
    pub vertex_nodes: [CrNodeId; 6],
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub id: CellId,
    pub provider: ProviderId,
    pub site: usize,
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct CrNode {
    pub id: CrNodeId,
    pub position: Point,
    pub sensing_range: f64,
    /// Vertex-adjacent CR nodes (shared hexagon edge), ascending.
    pub neighbors: Vec<CrNodeId>,
    /// Sites whose center lies within `sensing_range`, ascending.
    pub covered_sites: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub n_providers: usize,
    pub cells_per_provider: usize,
    pub cell_radius: f64,
    pub sites: Vec<Site>,
    pub cells: Vec<Cell>,
    pub cr_nodes: Vec<CrNode>,
}

/// Builds the co-located hexagonal grids of all providers.
///
/// Cell ids are `provider * cells_per_provider + site`. CR node sensing
/// range defaults to the cell radius, which covers the (up to three) cells
/// meeting at the node's vertex.
pub fn build_topology(
    n_providers: usize,
    cells_per_provider: usize,
    cell_radius: f64,
) -> Result<Topology> {
    if n_providers == 0 {
        return Err(Error::config("n_providers must be >= 1"));
    }
    if cells_per_provider == 0 {
        return Err(Error::config("cells_per_provider must be >= 1"));
    }
    if !(cell_radius.is_finite() && cell_radius > 0.0) {
        return Err(Error::config(format!("cell radius must be > 0, got {cell_radius}")));
    }

    let hexes = spiral(cells_per_provider);
    let index_of: BTreeMap<Hex, usize> = hexes.iter().enumerate().map(|(i, h)| (*h, i)).collect();

    // deduplicate vertices in site order so ids are deterministic
    let mut vertex_ids: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut vertex_lattice: Vec<(i64, i64)> = Vec::new();
    let mut site_vertices = Vec::with_capacity(hexes.len());
    for hex in &hexes {
        let ids = hex.lattice_vertices().map(|v| {
            *vertex_ids.entry(v).or_insert_with(|| {
                vertex_lattice.push(v);
                vertex_lattice.len() - 1
            })
        });
        site_vertices.push(ids);
    }

    let mut node_neighbors = vec![Vec::new(); vertex_lattice.len()];
    for ids in &site_vertices {
        for k in 0..6 {
            let (a, b) = (ids[k], ids[(k + 1) % 6]);
            node_neighbors[a].push(CrNodeId(b));
            node_neighbors[b].push(CrNodeId(a));
        }
    }
    for n in node_neighbors.iter_mut() {
        n.sort();
        n.dedup();
    }

    let sites: Vec<Site> = hexes
        .iter()
        .enumerate()
        .map(|(i, hex)| {
            let mut adjacent: Vec<usize> =
                hex.neighbors().iter().filter_map(|n| index_of.get(n).copied()).collect();
            adjacent.sort_unstable();
            Site {
                index: i,
                hex: *hex,
                center: hex.center(cell_radius),
                adjacent,
                vertex_nodes: site_vertices[i].map(CrNodeId),
            }
        })
        .collect();

    let x_unit = cell_radius * 3f64.sqrt() / 2.0;
    let y_unit = cell_radius / 2.0;
    let cr_nodes = vertex_lattice
        .iter()
        .zip(node_neighbors)
        .enumerate()
        .map(|(i, (&(lx, ly), neighbors))| CrNode {
            id: CrNodeId(i),
            position: Point { x: lx as f64 * x_unit, y: ly as f64 * y_unit },
            sensing_range: cell_radius,
            neighbors,
            covered_sites: Vec::new(),
        })
        .collect();

    let cells = (0..n_providers)
        .flat_map(|p| {
            sites.iter().map(move |s| Cell {
                id: CellId(p * cells_per_provider + s.index),
                provider: ProviderId(p),
                site: s.index,
                center: s.center,
                radius: cell_radius,
            })
        })
        .collect();

    let mut topo = Topology { n_providers, cells_per_provider, cell_radius, sites, cells, cr_nodes };
    topo.set_sensing_range(cell_radius)?;
    Ok(topo)
}

impl Topology {
    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.0]
    }

    pub fn cell_id(&self, provider: ProviderId, site: usize) -> CellId {
        CellId(provider.0 * self.cells_per_provider + site)
    }

    pub fn cells_of(&self, provider: ProviderId) -> impl Iterator<Item = &Cell> + '_ {
        let start = provider.0 * self.cells_per_provider;
        self.cells[start..start + self.cells_per_provider].iter()
    }

    /// Adjacent cells of the same provider grid.
    pub fn adjacent_cells(&self, id: CellId) -> Vec<CellId> {
        let cell = self.cell(id);
        self.sites[cell.site].adjacent.iter().map(|&s| self.cell_id(cell.provider, s)).collect()
    }

    /// Sets every CR node's sensing range and recomputes which sites each
    /// node covers.
    pub fn set_sensing_range(&mut self, range: f64) -> Result<()> {
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::config(format!("sensing range must be > 0, got {range}")));
        }
        let tol = 1e-9 * self.cell_radius;
        for node in self.cr_nodes.iter_mut() {
            node.sensing_range = range;
            node.covered_sites = self
                .sites
                .iter()
                .filter(|s| s.center.distance(node.position) <= range + tol)
                .map(|s| s.index)
                .collect();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn single_cell_has_six_ring_nodes() {
        let t = build_topology(1, 1, 500.0).unwrap();
        assert_eq!(t.cells.len(), 1);
        assert_eq!(t.cr_nodes.len(), 6);
        for n in &t.cr_nodes {
            assert_eq!(n.neighbors.len(), 2);
            assert!((n.position.distance(t.sites[0].center) - 500.0).abs() < 1e-9);
        }
    }

    #[test]
    fn flower_center_has_six_neighbors() {
        let t = build_topology(1, 7, 500.0).unwrap();
        assert_eq!(t.adjacent_cells(CellId(0)).len(), 6);
        // ring cells touch the center plus two ring neighbours
        for c in 1..7 {
            assert_eq!(t.adjacent_cells(CellId(c)).len(), 3);
        }
    }

    // brute-force vertex enumeration in floating point
    fn unique_vertices(n: usize, radius: f64) -> usize {
        let mut seen: Vec<Point> = Vec::new();
        for hex in spiral(n) {
            let c = hex.center(radius);
            for k in 0..6 {
                let a = (30.0 + 60.0 * k as f64).to_radians();
                let v = Point { x: c.x + radius * a.cos(), y: c.y + radius * a.sin() };
                if !seen.iter().any(|s| s.distance(v) < 1e-6 * radius) {
                    seen.push(v);
                }
            }
        }
        seen.len()
    }

    #[test]
    fn providers_share_vertex_set() {
        let t = build_topology(5, 7, 500.0).unwrap();
        assert_eq!(t.cells.len(), 35);
        assert_eq!(unique_vertices(7, 500.0), 24);
        assert_eq!(t.cr_nodes.len(), 24);
        assert_eq!(build_topology(1, 7, 500.0).unwrap().cr_nodes.len(), 24);
    }

    #[test]
    fn vertex_count_matches_brute_force() {
        for n in 1..=19 {
            let t = build_topology(2, n, 100.0).unwrap();
            assert_eq!(t.cr_nodes.len(), unique_vertices(n, 100.0), "n = {n}");
        }
    }

    #[test]
    fn node_positions_match_float_geometry() {
        let t = build_topology(1, 7, 500.0).unwrap();
        for site in &t.sites {
            for (k, node) in site.vertex_nodes.iter().enumerate() {
                let a = (30.0 + 60.0 * k as f64).to_radians();
                let expect = Point { x: site.center.x + 500.0 * a.cos(), y: site.center.y + 500.0 * a.sin() };
                assert!(t.cr_nodes[node.0].position.distance(expect) < 1e-6);
            }
        }
    }

    #[test]
    fn relations_symmetric_and_irreflexive() {
        let t = build_topology(3, 19, 250.0).unwrap();
        for s in &t.sites {
            assert!(!s.adjacent.contains(&s.index));
            for &a in &s.adjacent {
                assert!(t.sites[a].adjacent.contains(&s.index));
                assert_eq!(s.hex.distance(t.sites[a].hex), 1);
            }
        }
        for n in &t.cr_nodes {
            assert!(!n.neighbors.contains(&n.id));
            for m in &n.neighbors {
                assert!(t.cr_nodes[m.0].neighbors.contains(&n.id));
                let d = n.position.distance(t.cr_nodes[m.0].position);
                assert!((d - 250.0).abs() < 1e-6, "neighbors one edge apart");
            }
        }
    }

    #[test]
    fn spiral_is_distinct_and_compact() {
        let s = spiral(37);
        let set: HashSet<_> = s.iter().collect();
        assert_eq!(set.len(), 37);
        assert!(s.iter().all(|h| h.distance(Hex::ORIGIN) <= 3));
        assert!(spiral(7)[1..].iter().all(|h| h.distance(Hex::ORIGIN) == 1));
    }

    #[test]
    fn deterministic() {
        let a = build_topology(2, 12, 300.0).unwrap();
        let b = build_topology(2, 12, 300.0).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn default_range_covers_meeting_cells() {
        let t = build_topology(1, 7, 500.0).unwrap();
        // node between center and two ring cells
        let inner = t.cr_nodes.iter().filter(|n| n.covered_sites.len() == 3).count();
        assert_eq!(inner, 6);
        assert!(t.cr_nodes.iter().all(|n| !n.covered_sites.is_empty()));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(build_topology(0, 1, 1.0).is_err());
        assert!(build_topology(1, 0, 1.0).is_err());
        assert!(build_topology(1, 1, 0.0).is_err());
        assert!(build_topology(1, 1, f64::NAN).is_err());
    }
}
