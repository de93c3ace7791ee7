//! Shortest paths on [`SurfaceMesh`] graphs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::mesh::SurfaceMesh;
use crate::par;

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra; vertices farther than `cutoff` stay at `+∞`.
pub fn dijkstra(mesh: &SurfaceMesh, sources: &[usize], cutoff: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; mesh.len()];
    let mut heap = BinaryHeap::with_capacity(sources.len());
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Entry {
            dist: 0.0,
            node: s as u32,
        });
    }
    while let Some(Entry { dist: d, node }) = heap.pop() {
        let v = node as usize;
        if d > dist[v] {
            continue;
        }
        for &(w, len) in mesh.neighbors(v) {
            let nd = d + len;
            if nd < dist[w as usize] && nd <= cutoff {
                dist[w as usize] = nd;
                heap.push(Entry { dist: nd, node: w });
            }
        }
    }
    dist
}

/// Distances from the mesh's own source set.
pub fn mesh_distance_from_sources(mesh: &SurfaceMesh) -> Vec<f64> {
    dijkstra(mesh, &mesh.sources, f64::INFINITY)
}

/// Single-source distance fields for several sources, in input order.
pub fn distances_from_each(mesh: &SurfaceMesh, sources: &[usize], cutoff: f64) -> Vec<Vec<f64>> {
    par::map(sources, |&s| dijkstra(mesh, &[s], cutoff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::HeintzeGroup;
    use crate::mesh::build_mesh;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;

    #[test]
    fn sources_are_zero_and_curve_length_in_dimension_one() {
        let g = HeintzeGroup::new(vec![1.0]).unwrap();
        let m = build_mesh(&g, 6.0, 0.05).unwrap();
        let dist = mesh_distance_from_sources(&m);
        for &s in &m.sources {
            assert_eq!(dist[s], 0.0);
        }
        // the side faces are curves; mesh distance is their arclength from y = 0
        for v in 0..m.len() {
            if m.chart[v] != 0 {
                let y = m.y[v];
                let exact = integrate(|s| (1.0 + 0.25 * (-s).exp()).sqrt(), y, 0.0, 1e-12, 1e-12).0;
                assert_relative_eq!(dist[v], exact, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn removing_edges_never_shortens() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let mut m = build_mesh(&g, 3.0, 0.4).unwrap();
        let full = mesh_distance_from_sources(&m);
        let mut parts_edges = m.edges.clone();
        parts_edges.retain(|e| (e.0 + e.1) % 7 != 0);
        m = crate::mesh::SurfaceMesh::from_parts(crate::mesh::MeshParts {
            dim: m.dim,
            chart: m.chart.clone(),
            params: m.params.clone(),
            y: m.y.clone(),
            x: m.x.clone(),
            area: m.area.clone(),
            edges: parts_edges,
            sources: m.sources.clone(),
            resolution: m.resolution,
            layout_id: m.layout_id.clone(),
        })
        .unwrap();
        let pruned = mesh_distance_from_sources(&m);
        assert!(full.iter().zip(&pruned).all(|(a, b)| b >= a));
    }
}
