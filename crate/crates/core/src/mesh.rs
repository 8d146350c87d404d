//! Uniform triangulation of an axis-aligned rectangle.
//!
//! Nodes are numbered row-major with `x1` varying fastest. Every grid cell
//! is split by the diagonal running from its lower-left to its upper-right
//! corner, which keeps the triangulation invariant under the point
//! reflection through the domain center.

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Rect {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.xmin + self.xmax),
            0.5 * (self.ymin + self.ymax),
        ]
    }
}

/// One of the four sides of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        }
    }
}

/// Constant P1 data of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    /// Gradients of the three barycentric basis functions.
    pub grads: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct StructuredTriMesh {
    bounds: Rect,
    segments: usize,
    h: f64,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    geometry: Vec<ElementGeometry>,
    sides: [Vec<usize>; 4],
    /// `normal_constrained[c][i]` is true when velocity component `c` is
    /// pinned to zero at node `i` by the impermeability condition.
    normal_constrained: [Vec<bool>; 2],
}

impl StructuredTriMesh {
    /// Triangulate `bounds` with `segments` cells per direction.
    pub fn new(bounds: Rect, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::InvalidMesh("segment count must be at least 1".into()));
        }
        let finite = [bounds.xmin, bounds.xmax, bounds.ymin, bounds.ymax]
            .iter()
            .all(|v| v.is_finite());
        if !finite || bounds.xmax <= bounds.xmin || bounds.ymax <= bounds.ymin {
            return Err(Error::InvalidMesh(format!("degenerate rectangle {bounds:?}")));
        }
        let hx = bounds.width() / segments as f64;
        let hy = bounds.height() / segments as f64;
        if ((hx - hy) / hx).abs() > 1e-12 {
            return Err(Error::InvalidMesh(format!(
                "cells must be square (hx = {hx}, hy = {hy})"
            )));
        }

        let m = segments;
        let n1 = m + 1;
        let [cx, cy] = bounds.center();
        let (hwx, hwy) = (0.5 * bounds.width(), 0.5 * bounds.height());
        // Coordinates are measured from the center so that mirrored nodes
        // carry exactly negated offsets.
        let coord = |k: usize, center: f64, half: f64| {
            center + half * ((2 * k) as f64 - m as f64) / m as f64
        };
        let mut nodes = Vec::with_capacity(n1 * n1);
        for iy in 0..n1 {
            for ix in 0..n1 {
                nodes.push([coord(ix, cx, hwx), coord(iy, cy, hwy)]);
            }
        }

        let mut elements = Vec::with_capacity(2 * m * m);
        for iy in 0..m {
            for ix in 0..m {
                let n00 = iy * n1 + ix;
                let n10 = n00 + 1;
                let n01 = n00 + n1;
                let n11 = n01 + 1;
                elements.push([n00, n10, n11]);
                elements.push([n00, n11, n01]);
            }
        }

        let geometry = elements
            .iter()
            .map(|tri| triangle_geometry(tri.map(|i| nodes[i])))
            .collect::<Vec<_>>();
        if let Some((e, g)) = geometry.iter().enumerate().find(|(_, g)| g.area <= 0.0) {
            return Err(Error::InvalidMesh(format!(
                "element {e} has non-positive area {}",
                g.area
            )));
        }

        let left: Vec<usize> = (0..n1).map(|iy| iy * n1).collect();
        let right: Vec<usize> = (0..n1).map(|iy| iy * n1 + m).collect();
        let bottom: Vec<usize> = (0..n1).collect();
        let top: Vec<usize> = (0..n1).map(|ix| m * n1 + ix).collect();

        let mut constrained_x = vec![false; n1 * n1];
        let mut constrained_y = vec![false; n1 * n1];
        for &i in left.iter().chain(&right) {
            constrained_x[i] = true;
        }
        for &i in bottom.iter().chain(&top) {
            constrained_y[i] = true;
        }

        Ok(StructuredTriMesh {
            bounds,
            segments,
            h: hx,
            nodes,
            elements,
            geometry,
            sides: [left, right, bottom, top],
            normal_constrained: [constrained_x, constrained_y],
        })
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Cell edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    pub fn element_geometry(&self, e: usize) -> Result<ElementGeometry> {
        self.geometry.get(e).copied().ok_or(Error::ElementOutOfRange {
            index: e,
            count: self.elements.len(),
        })
    }

    /// Geometry of every element, indexed like [`Self::elements`].
    pub fn geometries(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    /// Nodes on one side, ordered along the side; corners belong to both
    /// adjacent sides.
    pub fn side_nodes(&self, side: Side) -> &[usize] {
        &self.sides[side.index()]
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.normal_constrained[0][i] || self.normal_constrained[1][i]
    }

    /// Mask of nodes where velocity component `component` is the wall-normal
    /// component and is held at zero.
    pub fn normal_velocity_mask(&self, component: usize) -> &[bool] {
        &self.normal_constrained[component]
    }

    /// Index of the node obtained by reflecting node `i` through the center.
    pub fn mirror_node(&self, i: usize) -> usize {
        self.nodes.len() - 1 - i
    }

    /// Element containing `point` and the barycentric coordinates of the
    /// point in it. Points on shared edges resolve to one of the neighbours.
    pub fn locate(&self, point: [f64; 2]) -> Result<(usize, [f64; 3])> {
        let b = self.bounds;
        let [x, y] = point;
        let tol = 1e-12 * b.width().max(b.height());
        if !(x >= b.xmin - tol && x <= b.xmax + tol && y >= b.ymin - tol && y <= b.ymax + tol) {
            return Err(Error::OutsideDomain { x, y });
        }
        let m = self.segments;
        let sx = ((x - b.xmin) / self.h).clamp(0.0, m as f64);
        let sy = ((y - b.ymin) / self.h).clamp(0.0, m as f64);
        let ix = (sx.floor() as usize).min(m - 1);
        let iy = (sy.floor() as usize).min(m - 1);
        let (fx, fy) = (sx - ix as f64, sy - iy as f64);
        let cell = iy * m + ix;
        // Lower triangle (n00, n10, n11) holds fx >= fy.
        if fx >= fy {
            Ok((2 * cell, [1.0 - fx, fx - fy, fy]))
        } else {
            Ok((2 * cell + 1, [1.0 - fy, fx, fy - fx]))
        }
    }

    /// P1 interpolation of a nodal field at an arbitrary point.
    pub fn interpolate(&self, values: &[f64], point: [f64; 2]) -> Result<f64> {
        let (e, lambda) = self.locate(point)?;
        let tri = self.elements[e];
        Ok((0..3).map(|a| lambda[a] * values[tri[a]]).sum())
    }

    /// Boundary edges as `(side, first node, second node)` in side order.
    pub fn boundary_edges(&self) -> impl Iterator<Item = (Side, usize, usize)> + '_ {
        Side::ALL.into_iter().flat_map(move |side| {
            self.side_nodes(side)
                .windows(2)
                .map(move |w| (side, w[0], w[1]))
        })
    }
}

/// Area and barycentric gradients of the triangle with the given vertices.
pub fn triangle_geometry(p: [[f64; 2]; 3]) -> ElementGeometry {
    let [[x0, y0], [x1, y1], [x2, y2]] = p;
    let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    let inv = 1.0 / det;
    ElementGeometry {
        area: 0.5 * det,
        grads: [
            [(y1 - y2) * inv, (x2 - x1) * inv],
            [(y2 - y0) * inv, (x0 - x2) * inv],
            [(y0 - y1) * inv, (x1 - x0) * inv],
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(m: usize) -> StructuredTriMesh {
        StructuredTriMesh::new(Rect::new(-5.0, 5.0, -5.0, 5.0), m).unwrap()
    }

    fn boundary_count(mesh: &StructuredTriMesh) -> usize {
        (0..mesh.num_nodes()).filter(|&i| mesh.is_boundary_node(i)).count()
    }

    #[test]
    fn smallest_mesh() {
        let mesh = square(1);
        assert_eq!(mesh.num_nodes(), 4);
        assert_eq!(mesh.num_elements(), 2);
        assert_eq!(boundary_count(&mesh), 4);
    }

    #[test]
    fn two_by_two_counts() {
        let mesh = square(2);
        assert_eq!(mesh.num_nodes(), 9);
        assert_eq!(mesh.num_elements(), 8);
        assert_eq!(boundary_count(&mesh), 8);
        assert!(!mesh.is_boundary_node(4));
    }

    #[test]
    fn reference_run_counts() {
        let mesh = square(200);
        assert_eq!(mesh.num_nodes(), 40401);
        assert_eq!(mesh.num_elements(), 80000);
        for g in mesh.geometries() {
            assert!((g.area - 0.00125).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let r = Rect::new(-5.0, 5.0, -5.0, 5.0);
        assert!(StructuredTriMesh::new(r, 0).is_err());
        assert!(StructuredTriMesh::new(Rect::new(1.0, 1.0, 0.0, 1.0), 3).is_err());
        assert!(StructuredTriMesh::new(Rect::new(0.0, 2.0, 0.0, 1.0), 3).is_err());
        assert!(matches!(
            square(2).element_geometry(8),
            Err(Error::ElementOutOfRange { index: 8, count: 8 })
        ));
    }

    #[test]
    fn reference_element_gradients() {
        let g = triangle_geometry([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(g.area, 0.5);
        assert_eq!(g.grads, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn gradients_sum_to_zero_and_areas_cover_domain() {
        let mesh = StructuredTriMesh::new(Rect::new(-1.3, 2.1, 0.2, 3.6), 7).unwrap();
        let mut total = 0.0;
        for g in mesh.geometries() {
            let sx: f64 = g.grads.iter().map(|v| v[0]).sum();
            let sy: f64 = g.grads.iter().map(|v| v[1]).sum();
            assert!(sx.abs() < 1e-13 && sy.abs() < 1e-13);
            assert!((g.area - 0.5 * mesh.h() * mesh.h()).abs() < 1e-14);
            total += g.area;
        }
        assert!((total - mesh.bounds().area()).abs() / mesh.bounds().area() < 1e-14);
    }

    #[test]
    fn mesh_is_conforming() {
        use std::collections::HashMap;
        let mesh = square(6);
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in mesh.elements() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for (&(a, b), &count) in &edges {
            let on_boundary = Side::ALL.iter().any(|&s| {
                let nodes = mesh.side_nodes(s);
                nodes.contains(&a) && nodes.contains(&b)
            });
            assert_eq!(count, if on_boundary { 1 } else { 2 }, "edge {a}-{b}");
        }
    }

    #[test]
    fn boundary_sides_match_coordinates() {
        let mesh = square(5);
        let b = mesh.bounds();
        for (i, p) in mesh.nodes().iter().enumerate() {
            let on_edge = p[0] == b.xmin || p[0] == b.xmax || p[1] == b.ymin || p[1] == b.ymax;
            assert_eq!(mesh.is_boundary_node(i), on_edge);
        }
        let corner = 0;
        assert!(mesh.side_nodes(Side::Left).contains(&corner));
        assert!(mesh.side_nodes(Side::Bottom).contains(&corner));
        assert!(mesh.normal_velocity_mask(0)[corner] && mesh.normal_velocity_mask(1)[corner]);
    }

    #[test]
    fn point_reflection_maps_mesh_to_itself() {
        for m in [1, 4, 7] {
            let mesh = square(m);
            for i in 0..mesh.num_nodes() {
                let p = mesh.node(i);
                let q = mesh.node(mesh.mirror_node(i));
                assert_eq!(p, [-q[0], -q[1]]);
            }
            let mut tris: Vec<[usize; 3]> = mesh
                .elements()
                .iter()
                .map(|t| {
                    let mut s = *t;
                    s.sort();
                    s
                })
                .collect();
            tris.sort();
            let mut mirrored: Vec<[usize; 3]> = mesh
                .elements()
                .iter()
                .map(|t| {
                    let mut s = t.map(|i| mesh.mirror_node(i));
                    s.sort();
                    s
                })
                .collect();
            mirrored.sort();
            assert_eq!(tris, mirrored);
        }
    }

    #[test]
    fn locate_and_interpolate() {
        let mesh = square(3);
        let linear: Vec<f64> = mesh.nodes().iter().map(|p| 2.0 * p[0] - p[1] + 0.5).collect();
        for p in [[0.0, 0.0], [-5.0, -5.0], [5.0, 5.0], [1.234, -4.2], [4.999, 0.3]] {
            let v = mesh.interpolate(&linear, p).unwrap();
            assert!((v - (2.0 * p[0] - p[1] + 0.5)).abs() < 1e-13);
        }
        assert!(mesh.locate([5.5, 0.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn reflection_negates_coordinates(m in 1usize..40, half in 0.5f64..8.0) {
            let mesh = StructuredTriMesh::new(Rect::new(-half, half, -half, half), m).unwrap();
            for i in 0..mesh.num_nodes() {
                let (p, q) = (mesh.node(i), mesh.node(mesh.mirror_node(i)));
                proptest::prop_assert_eq!(p[0], -q[0]);
                proptest::prop_assert_eq!(p[1], -q[1]);
            }
        }
    }
}
