use std::collections::HashMap;

use super::MeshError;

/// The far side of a shared edge: neighbor triangle and its local edge index.
///
/// Local edge `e` of triangle `t` runs from vertex `t[e]` to `t[(e + 1) % 3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeLink {
    pub triangle: usize,
    pub edge: u8,
}

/// Symmetric map `(triangle, local edge) -> neighbor`, `None` on boundary edges.
#[derive(Debug, Clone, Default)]
pub struct EdgeAdjacency {
    links: Vec<[Option<EdgeLink>; 3]>,
}

impl EdgeAdjacency {
    pub fn neighbor(&self, triangle: usize, edge: usize) -> Option<EdgeLink> {
        self.links[triangle][edge]
    }

    pub fn triangle_count(&self) -> usize {
        self.links.len()
    }

    /// Number of undirected edges shared by two triangles.
    pub fn interior_edge_count(&self) -> usize {
        self.links.iter().flatten().filter(|l| l.is_some()).count() / 2
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.links.iter().flatten().filter(|l| l.is_none()).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Option<EdgeLink>)> + '_ {
        self.links
            .iter()
            .enumerate()
            .flat_map(|(t, l)| l.iter().enumerate().map(move |(e, n)| (t, e, *n)))
    }
}

/// Pairs up triangle edges that share the same two vertices.
pub fn build_adjacency(triangles: &[[usize; 3]]) -> Result<EdgeAdjacency, MeshError> {
    let mut by_edge: HashMap<(usize, usize), Vec<(usize, u8)>> = HashMap::with_capacity(triangles.len() * 2);
    for (t, tri) in triangles.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            by_edge.entry((a.min(b), a.max(b))).or_default().push((t, e as u8));
        }
    }

    let mut links = vec![[None; 3]; triangles.len()];
    let mut keys: Vec<_> = by_edge.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let sides = &by_edge[&key];
        match sides.as_slice() {
            [_] => {}
            [(p, e), (q, f)] => {
                links[*p][*e as usize] = Some(EdgeLink {
                    triangle: *q,
                    edge: *f,
                });
                links[*q][*f as usize] = Some(EdgeLink {
                    triangle: *p,
                    edge: *e,
                });
            }
            _ => {
                return Err(MeshError::NonManifoldEdge {
                    a: key.0,
                    b: key.1,
                    count: sides.len(),
                })
            }
        }
    }
    Ok(EdgeAdjacency { links })
}
