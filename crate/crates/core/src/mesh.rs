//! Conforming triangulations with boundary markers.
//!
//! A [`TriMesh`] is validated once at construction and immutable afterwards.
//! Besides the user-facing connectivity it stores the derived edge list, which
//! the P2 velocity space uses to place its edge nodes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Tolerance used when matching periodic partner coordinates.
const PERIODIC_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invariant violated ({check}): {detail}")]
    Invalid { check: &'static str, detail: String },
}

impl MeshError {
    fn invalid(check: &'static str, detail: impl Into<String>) -> Self {
        MeshError::Invalid {
            check,
            detail: detail.into(),
        }
    }
}

/// Boundary edge label. Parsed from the lower-case names used in mesh files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryMarker {
    Wall,
    Inlet,
    Outlet,
    Cylinder,
    PeriodicLeft,
    PeriodicRight,
    SlipBottom,
    SlipTop,
}

impl BoundaryMarker {
    pub const ALL: [BoundaryMarker; 8] = [
        BoundaryMarker::Wall,
        BoundaryMarker::Inlet,
        BoundaryMarker::Outlet,
        BoundaryMarker::Cylinder,
        BoundaryMarker::PeriodicLeft,
        BoundaryMarker::PeriodicRight,
        BoundaryMarker::SlipBottom,
        BoundaryMarker::SlipTop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMarker::Wall => "wall",
            BoundaryMarker::Inlet => "inlet",
            BoundaryMarker::Outlet => "outlet",
            BoundaryMarker::Cylinder => "cylinder",
            BoundaryMarker::PeriodicLeft => "periodic_left",
            BoundaryMarker::PeriodicRight => "periodic_right",
            BoundaryMarker::SlipBottom => "slip_bottom",
            BoundaryMarker::SlipTop => "slip_top",
        }
    }
}

impl fmt::Display for BoundaryMarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryMarker {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundaryMarker::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown boundary marker '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub marker: BoundaryMarker,
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    periodic_pairs: Vec<(usize, usize)>,
    // derived
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    boundary_edge_ids: Vec<usize>,
}

/// Sorted vertex pair, used as an edge key.
fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    /// Builds and validates a mesh. Fails with [`MeshError::Invalid`] naming
    /// the first violated check.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        periodic_pairs: Vec<(usize, usize)>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(MeshError::invalid("non-empty", "mesh has no triangles"));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(MeshError::invalid(
                    "vertex index",
                    format!("triangle {t} references a vertex outside 0..{nv}"),
                ));
            }
            let area = signed_area(&vertices, tri);
            if area <= 0.0 {
                return Err(MeshError::invalid(
                    "negative area",
                    format!("triangle {t} {tri:?} has signed area {area:e}"),
                ));
            }
        }

        // Edge numbering in order of first appearance; local edge k of a
        // triangle joins local vertices (k, k+1).
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut incidence: Vec<u32> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut te = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = edge_key(a, b);
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    incidence.push(0);
                    edges.len() - 1
                });
                incidence[id] += 1;
                te[k] = id;
            }
            triangle_edges.push(te);
        }
        if let Some(id) = incidence.iter().position(|&c| c > 2) {
            return Err(MeshError::invalid(
                "edge manifold",
                format!("edge {:?} is shared by more than two triangles", edges[id]),
            ));
        }

        let mut boundary_edge_ids = Vec::with_capacity(boundary_edges.len());
        let mut listed = vec![false; edges.len()];
        for be in &boundary_edges {
            let [a, b] = be.vertices;
            if a >= nv || b >= nv {
                return Err(MeshError::invalid(
                    "vertex index",
                    format!("boundary edge {a}-{b} references a missing vertex"),
                ));
            }
            let id = *index.get(&edge_key(a, b)).ok_or_else(|| {
                MeshError::invalid(
                    "boundary edge",
                    format!("boundary edge {a}-{b} is not an edge of any triangle"),
                )
            })?;
            if incidence[id] != 1 {
                return Err(MeshError::invalid(
                    "boundary edge",
                    format!("boundary edge {a}-{b} belongs to {} triangles", incidence[id]),
                ));
            }
            if listed[id] {
                return Err(MeshError::invalid(
                    "boundary edge",
                    format!("boundary edge {a}-{b} listed twice"),
                ));
            }
            listed[id] = true;
            boundary_edge_ids.push(id);
        }
        if let Some(id) = (0..edges.len()).find(|&e| incidence[e] == 1 && !listed[e]) {
            return Err(MeshError::invalid(
                "boundary edge",
                format!("edge {:?} lies on the boundary but carries no marker", edges[id]),
            ));
        }

        // Euler characteristic of a planar domain with `loops - 1` holes.
        let loops = count_boundary_loops(nv, &boundary_edges);
        let chi = nv as i64 - edges.len() as i64 + triangles.len() as i64;
        if chi != 2 - loops as i64 {
            return Err(MeshError::invalid(
                "euler relation",
                format!(
                    "V - E + T = {chi}, expected {} for {loops} boundary loop(s)",
                    2 - loops as i64
                ),
            ));
        }

        if !periodic_pairs.is_empty() {
            let xmin = vertices.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let xmax = vertices.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            let period = xmax - xmin;
            let mut seen = vec![false; nv];
            for &(l, r) in &periodic_pairs {
                if l >= nv || r >= nv {
                    return Err(MeshError::invalid(
                        "periodic pair",
                        format!("pair ({l}, {r}) references a missing vertex"),
                    ));
                }
                let (pl, pr) = (vertices[l], vertices[r]);
                if (pl[1] - pr[1]).abs() > PERIODIC_TOL
                    || ((pr[0] - pl[0]) - period).abs() > PERIODIC_TOL
                {
                    return Err(MeshError::invalid(
                        "periodic pair",
                        format!("vertices {l} {pl:?} and {r} {pr:?} are not periodic partners"),
                    ));
                }
                if seen[r] || seen[l] {
                    return Err(MeshError::invalid(
                        "periodic pair",
                        format!("vertex in pair ({l}, {r}) appears in another pair"),
                    ));
                }
                seen[l] = true;
                seen[r] = true;
            }
        }

        Ok(TriMesh {
            vertices,
            triangles,
            boundary_edges,
            periodic_pairs,
            edges,
            triangle_edges,
            boundary_edge_ids,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn periodic_pairs(&self) -> &[(usize, usize)] {
        &self.periodic_pairs
    }

    /// Unique edges as sorted vertex pairs.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge ids of each triangle; local edge `k` joins local vertices
    /// `k` and `k + 1`.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    /// Global edge id of each entry of [`TriMesh::boundary_edges`].
    pub fn boundary_edge_ids(&self) -> &[usize] {
        &self.boundary_edge_ids
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_marker(&self, marker: BoundaryMarker) -> bool {
        self.boundary_edges.iter().any(|e| e.marker == marker)
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Returns a copy with every boundary edge re-labelled by `relabel`, which
    /// receives the edge midpoint and its current marker.
    pub fn remarked<F>(&self, relabel: F) -> Result<TriMesh, MeshError>
    where
        F: Fn([f64; 2], BoundaryMarker) -> BoundaryMarker,
    {
        let boundary_edges = self
            .boundary_edges
            .iter()
            .map(|e| {
                let [a, b] = e.vertices;
                let mid = midpoint(self.vertices[a], self.vertices[b]);
                BoundaryEdge {
                    vertices: e.vertices,
                    marker: relabel(mid, e.marker),
                }
            })
            .collect();
        TriMesh::new(
            self.vertices.clone(),
            self.triangles.clone(),
            boundary_edges,
            self.periodic_pairs.clone(),
        )
    }
}

pub(crate) fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|i| vertices[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn count_boundary_loops(nv: usize, edges: &[BoundaryEdge]) -> usize {
    // Union-find over boundary vertices.
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut on_boundary = vec![false; nv];
    for e in edges {
        let [a, b] = e.vertices;
        on_boundary[a] = true;
        on_boundary[b] = true;
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    (0..nv)
        .filter(|&v| on_boundary[v] && find(&mut parent, v) == v)
        .count()
}

/// Longest edge over all triangles.
pub fn mesh_size(mesh: &TriMesh) -> f64 {
    mesh.edges
        .iter()
        .map(|&[a, b]| {
            let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
            (p[0] - q[0]).hypot(p[1] - q[1])
        })
        .fold(0.0, f64::max)
}

fn structured_square(n: usize) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let stride = n + 1;
    let mut vertices = Vec::with_capacity(stride * stride);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * stride + i;
            let v10 = v00 + 1;
            let v01 = v00 + stride;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    (vertices, triangles)
}

/// Counterclockwise boundary walk of the structured square, tagged by side:
/// 0 bottom, 1 right, 2 top, 3 left.
fn square_boundary(n: usize) -> Vec<([usize; 2], u8)> {
    let stride = n + 1;
    let at = |i: usize, j: usize| j * stride + i;
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..n {
        out.push(([at(i, 0), at(i + 1, 0)], 0));
    }
    for j in 0..n {
        out.push(([at(n, j), at(n, j + 1)], 1));
    }
    for i in (0..n).rev() {
        out.push(([at(i + 1, n), at(i, n)], 2));
    }
    for j in (0..n).rev() {
        out.push(([at(0, j + 1), at(0, j)], 3));
    }
    out
}

/// Uniform `n x n` grid on the unit square, each cell split along its
/// lower-left to upper-right diagonal. All boundary edges are `wall`.
pub fn generate_unit_square(n: usize) -> TriMesh {
    assert!(n >= 1, "unit square needs n >= 1");
    let (vertices, triangles) = structured_square(n);
    let boundary = square_boundary(n)
        .into_iter()
        .map(|(vertices, _)| BoundaryEdge {
            vertices,
            marker: BoundaryMarker::Wall,
        })
        .collect();
    TriMesh::new(vertices, triangles, boundary, Vec::new())
        .expect("structured unit square is valid")
}

/// Unit square with the vertical sides paired for x-periodicity and the
/// horizontal sides marked `slip_bottom` / `slip_top`.
pub fn generate_periodic_strip(n: usize) -> TriMesh {
    assert!(n >= 2, "periodic strip needs n >= 2");
    let (vertices, triangles) = structured_square(n);
    let boundary = square_boundary(n)
        .into_iter()
        .map(|(vertices, side)| BoundaryEdge {
            vertices,
            marker: match side {
                0 => BoundaryMarker::SlipBottom,
                1 => BoundaryMarker::PeriodicRight,
                2 => BoundaryMarker::SlipTop,
                _ => BoundaryMarker::PeriodicLeft,
            },
        })
        .collect();
    let stride = n + 1;
    let pairs = (0..=n).map(|j| (j * stride, j * stride + n)).collect();
    TriMesh::new(vertices, triangles, boundary, pairs).expect("structured strip is valid")
}

const MESH_MAGIC: &str = "emaclab-mesh 1";

/// Parses the line-oriented ASCII mesh format and validates the result.
pub fn read_mesh(text: &str) -> Result<TriMesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut next = |what: &str| {
        lines.next().ok_or_else(|| MeshError::Parse {
            line: text.lines().count(),
            message: format!("unexpected end of file, expected {what}"),
        })
    };

    let (line, magic) = next("header")?;
    if magic != MESH_MAGIC {
        return Err(MeshError::Parse {
            line,
            message: format!("expected '{MESH_MAGIC}', found '{magic}'"),
        });
    }
    let (line, counts) = next("counts")?;
    let counts: Vec<usize> = parse_fields(line, counts, 3)?;
    let (nv, nt, nb) = (counts[0], counts[1], counts[2]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = next("vertex")?;
        let xy: Vec<f64> = parse_fields(line, l, 2)?;
        vertices.push([xy[0], xy[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, l) = next("triangle")?;
        let t: Vec<usize> = parse_fields(line, l, 3)?;
        triangles.push([t[0], t[1], t[2]]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, l) = next("boundary edge")?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(MeshError::Parse {
                line,
                message: format!("expected '<i0> <i1> <marker>', found '{l}'"),
            });
        }
        let idx: Vec<usize> = parse_fields(line, &parts[..2].join(" "), 2)?;
        let marker = parts[2]
            .parse()
            .map_err(|message| MeshError::Parse { line, message })?;
        boundary.push(BoundaryEdge {
            vertices: [idx[0], idx[1]],
            marker,
        });
    }
    let mut pairs = Vec::new();
    if let Some((line, l)) = lines.next() {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 2 || parts[0] != "periodic" {
            return Err(MeshError::Parse {
                line,
                message: format!("expected 'periodic <P>' or end of file, found '{l}'"),
            });
        }
        let np: usize = parts[1].parse().map_err(|e| MeshError::Parse {
            line,
            message: format!("bad pair count: {e}"),
        })?;
        for _ in 0..np {
            let (line, l) = lines.next().ok_or_else(|| MeshError::Parse {
                line,
                message: "unexpected end of file in periodic section".into(),
            })?;
            let p: Vec<usize> = parse_fields(line, l, 2)?;
            pairs.push((p[0], p[1]));
        }
        if let Some((line, l)) = lines.next() {
            return Err(MeshError::Parse {
                line,
                message: format!("trailing content '{l}'"),
            });
        }
    }
    TriMesh::new(vertices, triangles, boundary, pairs)
}

fn parse_fields<T: FromStr>(line: usize, text: &str, count: usize) -> Result<Vec<T>, MeshError>
where
    T::Err: fmt::Display,
{
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != count {
        return Err(MeshError::Parse {
            line,
            message: format!("expected {count} fields, found {}", parts.len()),
        });
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<T>().map_err(|e| MeshError::Parse {
                line,
                message: format!("cannot parse '{p}': {e}"),
            })
        })
        .collect()
}

/// Serializes in the format accepted by [`read_mesh`]. Coordinates use the
/// shortest round-trip representation, so reading back is bit-exact.
pub fn write_mesh(mesh: &TriMesh) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "{MESH_MAGIC}");
    let _ = writeln!(
        s,
        "{} {} {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.boundary_edges.len()
    );
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for e in &mesh.boundary_edges {
        let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.marker);
    }
    if !mesh.periodic_pairs.is_empty() {
        let _ = writeln!(s, "periodic {}", mesh.periodic_pairs.len());
        for (l, r) in &mesh.periodic_pairs {
            let _ = writeln!(s, "{l} {r}");
        }
    }
    s
}
