//! Finite boxes of `Z^2`, their outer boundary, bond sets, the dual grid,
//! the `eta^{k,eps}` boundary family and the region masks used by events.
//!
//! Conventions:
//! * sites are ordered row-major (by `y`, then `x`);
//! * a node ordinal addresses `Λ ∪ ∂Λ`: `0..n_sites` are sites of `Λ`,
//!   `n_sites..n_sites + n_boundary` are boundary sites (also row-major);
//! * bonds of `B̄(Λ)` are ordered horizontal-before-vertical, each group
//!   row-major over its left/lower endpoint;
//! * the dual site `(a + ½, b + ½)` is stored as [`DualSite`] `{a, b}`;
//! * planar containment works on [`HalfPoint`], i.e. doubled coordinates,
//!   so half-integer parameters stay exact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

impl Site {
    pub const fn new(x: i32, y: i32) -> Self {
        Site { x, y }
    }

    pub fn half_point(self) -> HalfPoint {
        HalfPoint::new(2 * self.x as i64, 2 * self.y as i64)
    }

    /// Rotation by a quarter turn taking side 1 (bottom) to side 2 (left).
    pub fn rotate(self) -> Site {
        Site::new(self.y, -self.x)
    }

    pub fn rotate_n(self, quarter_turns: u8) -> Site {
        (0..quarter_turns % 4).fold(self, |s, _| s.rotate())
    }

    pub fn neighbors(self) -> [Site; 4] {
        [
            Site::new(self.x + 1, self.y),
            Site::new(self.x - 1, self.y),
            Site::new(self.x, self.y + 1),
            Site::new(self.x, self.y - 1),
        ]
    }
}

/// Dual site `(x + ½, y + ½)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualSite {
    pub x: i32,
    pub y: i32,
}

impl DualSite {
    pub const fn new(x: i32, y: i32) -> Self {
        DualSite { x, y }
    }

    /// Dual site at the planar point `(x2 / 2, y2 / 2)`; both coordinates must be odd.
    pub fn from_half_point(p: HalfPoint) -> Option<Self> {
        if p.x.rem_euclid(2) == 1 && p.y.rem_euclid(2) == 1 {
            Some(DualSite::new(((p.x - 1) / 2) as i32, ((p.y - 1) / 2) as i32))
        } else {
            None
        }
    }

    pub fn half_point(self) -> HalfPoint {
        HalfPoint::new(2 * self.x as i64 + 1, 2 * self.y as i64 + 1)
    }

    pub fn rotate_n(self, quarter_turns: u8) -> DualSite {
        DualSite::from_half_point(self.half_point().rotate_n(quarter_turns))
            .expect("rotation keeps dual sites dual")
    }
}

/// A planar point in doubled coordinates: `(x / 2, y / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HalfPoint {
    pub x: i64,
    pub y: i64,
}

impl HalfPoint {
    pub const fn new(x: i64, y: i64) -> Self {
        HalfPoint { x, y }
    }

    pub fn rotate(self) -> HalfPoint {
        HalfPoint::new(self.y, -self.x)
    }

    pub fn rotate_n(self, quarter_turns: u8) -> HalfPoint {
        (0..quarter_turns % 4).fold(self, |p, _| p.rotate())
    }

    /// Inverse of [`HalfPoint::rotate_n`].
    pub fn unrotate_n(self, quarter_turns: u8) -> HalfPoint {
        self.rotate_n((4 - quarter_turns % 4) % 4)
    }

    pub fn to_f64(self) -> (f64, f64) {
        (self.x as f64 / 2.0, self.y as f64 / 2.0)
    }
}

/// A value in `½Z`, stored doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const fn int(n: i64) -> Self {
        HalfInt(2 * n)
    }

    /// `n + ½`.
    pub const fn plus_half(n: i64) -> Self {
        HalfInt(2 * n + 1)
    }

    pub const fn doubled(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

/// The segment of a bond (or dual bond) in doubled coordinates.
pub type Segment = [HalfPoint; 2];

/// Perpendicular bisector of a unit segment: maps a bond `e` to `e*` and a
/// dual bond back to its primal bond.
pub fn perpendicular_bisector(seg: Segment) -> Segment {
    let mx = (seg[0].x + seg[1].x) / 2;
    let my = (seg[0].y + seg[1].y) / 2;
    let dx = seg[1].x - mx;
    let dy = seg[1].y - my;
    let mut out = [HalfPoint::new(mx + dy, my - dx), HalfPoint::new(mx - dy, my + dx)];
    out.sort();
    out
}

/// A nearest-neighbour bond of `B̄(Λ)` between two node ordinals. `a` is the
/// left (horizontal) or lower (vertical) endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub horizontal: bool,
}

/// An edge of the dual lattice, endpoints sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualEdge {
    pub a: DualSite,
    pub b: DualSite,
}

impl DualEdge {
    pub fn new(a: DualSite, b: DualSite) -> Self {
        if a <= b {
            DualEdge { a, b }
        } else {
            DualEdge { a: b, b: a }
        }
    }
}

/// Immutable description of a rectangular box `Λ`.
#[derive(Debug, Clone)]
pub struct Geometry {
    half_width: Option<i32>,
    x_min: i32,
    x_max: i32,
    y_min: i32,
    y_max: i32,
    sites: Vec<Site>,
    boundary: Vec<Site>,
    boundary_index: HashMap<Site, usize>,
    bonds: Vec<Bond>,
    interior_bonds: usize,
    horizontal_bonds: usize,
    neighbors: Vec<[usize; 4]>,
    site_bonds: Vec<[usize; 4]>,
}

impl Geometry {
    /// `Λ_N = [-N, N]^2 ∩ Z^2`.
    pub fn build_box(n: i64) -> Result<Self> {
        if n < 1 || n > i32::MAX as i64 / 4 {
            return Err(Error::InvalidBoxSize(n));
        }
        let n = n as i32;
        let mut g = Self::from_ranges(-n, n, -n, n);
        g.half_width = Some(n);
        Ok(g)
    }

    /// `[0, width) x [0, height)`; used for small exhaustive checks
    /// (single site, 2x2, 2x3 boxes).
    pub fn rectangle(width: i64, height: i64) -> Result<Self> {
        if width < 1 || height < 1 || width > 1 << 16 || height > 1 << 16 {
            return Err(Error::InvalidRectangle { width, height });
        }
        Ok(Self::from_ranges(0, width as i32 - 1, 0, height as i32 - 1))
    }

    fn from_ranges(x_min: i32, x_max: i32, y_min: i32, y_max: i32) -> Self {
        let width = (x_max - x_min + 1) as usize;
        let height = (y_max - y_min + 1) as usize;
        let n_sites = width * height;

        let sites: Vec<Site> = (y_min..=y_max)
            .flat_map(|y| (x_min..=x_max).map(move |x| Site::new(x, y)))
            .collect();

        let in_box = |s: Site| s.x >= x_min && s.x <= x_max && s.y >= y_min && s.y <= y_max;
        let mut boundary: Vec<Site> = sites
            .iter()
            .flat_map(|s| s.neighbors())
            .filter(|&t| !in_box(t))
            .collect();
        boundary.sort_by_key(|s| (s.y, s.x));
        boundary.dedup();
        let boundary_index: HashMap<Site, usize> =
            boundary.iter().enumerate().map(|(i, &s)| (s, i)).collect();

        let node = |s: Site| -> usize {
            if in_box(s) {
                (s.y - y_min) as usize * width + (s.x - x_min) as usize
            } else {
                n_sites + boundary_index[&s]
            }
        };

        let mut bonds = Vec::with_capacity(height * (width + 1) + (height + 1) * width);
        for y in y_min..=y_max {
            for x in (x_min - 1)..=x_max {
                bonds.push(Bond {
                    a: node(Site::new(x, y)),
                    b: node(Site::new(x + 1, y)),
                    horizontal: true,
                });
            }
        }
        let horizontal_bonds = bonds.len();
        for y in (y_min - 1)..=y_max {
            for x in x_min..=x_max {
                bonds.push(Bond {
                    a: node(Site::new(x, y)),
                    b: node(Site::new(x, y + 1)),
                    horizontal: false,
                });
            }
        }
        let interior_bonds = bonds
            .iter()
            .filter(|b| b.a < n_sites && b.b < n_sites)
            .count();

        let mut neighbors = vec![[0usize; 4]; n_sites];
        let mut site_bonds = vec![[0usize; 4]; n_sites];
        for (i, s) in sites.iter().enumerate() {
            for (d, t) in s.neighbors().into_iter().enumerate() {
                neighbors[i][d] = node(t);
            }
            let (lx, ly) = ((s.x - x_min) as usize, (s.y - y_min) as usize);
            // horizontal bond with left endpoint (x, y) has ordinal ly*(w+1) + (lx+1)
            let h = |ly: usize, lx1: usize| ly * (width + 1) + lx1;
            let v = |ly1: usize, lx: usize| horizontal_bonds + ly1 * width + lx;
            site_bonds[i] = [h(ly, lx + 1), h(ly, lx), v(ly + 1, lx), v(ly, lx)];
        }

        Geometry {
            half_width: None,
            x_min,
            x_max,
            y_min,
            y_max,
            sites,
            boundary,
            boundary_index,
            bonds,
            interior_bonds,
            horizontal_bonds,
            neighbors,
            site_bonds,
        }
    }

    pub fn half_width(&self) -> Option<i32> {
        self.half_width
    }

    pub(crate) fn require_half_width(&self) -> Result<i32> {
        self.half_width.ok_or(Error::NotASquareBox)
    }

    pub fn width(&self) -> usize {
        (self.x_max - self.x_min + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.y_max - self.y_min + 1) as usize
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// `|Λ| + |∂Λ|`.
    pub fn n_nodes(&self) -> usize {
        self.sites.len() + self.boundary.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn boundary(&self) -> &[Site] {
        &self.boundary
    }

    /// Bonds of `B̄(Λ)` in ordinal order.
    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    /// `|B(Λ)|`: bonds with both endpoints in `Λ`.
    pub fn n_interior_bonds(&self) -> usize {
        self.interior_bonds
    }

    pub fn contains(&self, s: Site) -> bool {
        s.x >= self.x_min && s.x <= self.x_max && s.y >= self.y_min && s.y <= self.y_max
    }

    pub fn site_ordinal(&self, s: Site) -> Option<usize> {
        if self.contains(s) {
            Some((s.y - self.y_min) as usize * self.width() + (s.x - self.x_min) as usize)
        } else {
            None
        }
    }

    pub fn boundary_ordinal(&self, s: Site) -> Option<usize> {
        self.boundary_index.get(&s).copied()
    }

    /// Node ordinal of a site of `Λ ∪ ∂Λ`.
    pub fn node_of(&self, s: Site) -> Option<usize> {
        self.site_ordinal(s)
            .or_else(|| self.boundary_ordinal(s).map(|b| self.n_sites() + b))
    }

    pub fn node_site(&self, node: usize) -> Site {
        if node < self.n_sites() {
            self.sites[node]
        } else {
            self.boundary[node - self.n_sites()]
        }
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        node >= self.n_sites()
    }

    /// Node ordinals of the four neighbours of site `i`, ordered `+x, -x, +y, -y`.
    pub fn neighbors(&self, i: usize) -> &[usize; 4] {
        &self.neighbors[i]
    }

    /// Bond ordinals to the four neighbours of site `i`, same order as [`Geometry::neighbors`].
    pub fn site_bonds(&self, i: usize) -> &[usize; 4] {
        &self.site_bonds[i]
    }

    pub fn bond_segment(&self, e: usize) -> Segment {
        let b = self.bonds[e];
        [self.node_site(b.a).half_point(), self.node_site(b.b).half_point()]
    }

    /// Ordinal of the bond joining two adjacent sites, if it belongs to `B̄(Λ)`.
    pub fn bond_between(&self, s: Site, t: Site) -> Option<usize> {
        let (a, b) = if (s.y, s.x) <= (t.y, t.x) { (s, t) } else { (t, s) };
        let w = self.width();
        if a.y == b.y && b.x == a.x + 1 {
            if a.y < self.y_min || a.y > self.y_max || a.x < self.x_min - 1 || a.x > self.x_max {
                return None;
            }
            Some((a.y - self.y_min) as usize * (w + 1) + (a.x - self.x_min + 1) as usize)
        } else if a.x == b.x && b.y == a.y + 1 {
            if a.x < self.x_min || a.x > self.x_max || a.y < self.y_min - 1 || a.y > self.y_max {
                return None;
            }
            Some(self.horizontal_bonds + (a.y - self.y_min + 1) as usize * w + (a.x - self.x_min) as usize)
        } else {
            None
        }
    }

    // ---- dual grid -------------------------------------------------------

    /// Dual sites spanned by the duals of `B̄(Λ)`: `(w + 1) x (h + 1)` of them.
    pub fn n_dual_sites(&self) -> usize {
        (self.width() + 1) * (self.height() + 1)
    }

    pub fn dual_site_ordinal(&self, d: DualSite) -> Option<usize> {
        let (lx, ly) = (d.x - (self.x_min - 1), d.y - (self.y_min - 1));
        if lx < 0 || ly < 0 || lx > self.width() as i32 || ly > self.height() as i32 {
            return None;
        }
        Some(ly as usize * (self.width() + 1) + lx as usize)
    }

    pub fn dual_site(&self, ordinal: usize) -> DualSite {
        let w1 = self.width() + 1;
        DualSite::new(
            (ordinal % w1) as i32 + self.x_min - 1,
            (ordinal / w1) as i32 + self.y_min - 1,
        )
    }

    pub fn dual_sites(&self) -> impl Iterator<Item = DualSite> + '_ {
        (0..self.n_dual_sites()).map(|i| self.dual_site(i))
    }

    /// Endpoints (dual-site ordinals) of `e*` for the bond with ordinal `e`.
    pub fn dual_bond(&self, e: usize) -> (usize, usize) {
        let w1 = self.width() + 1;
        if e < self.horizontal_bonds {
            // (x, y)-(x+1, y) -> (x+½, y-½)-(x+½, y+½)
            let ly = e / w1;
            let lxa = e % w1; // left endpoint x - (x_min - 1)
            let lower = ly * w1 + lxa;
            (lower, lower + w1)
        } else {
            // (x, y)-(x, y+1) -> (x-½, y+½)-(x+½, y+½)
            let r = e - self.horizontal_bonds;
            let w = self.width();
            let ly1 = r / w; // lower endpoint y - (y_min - 1)
            let lx = r % w; // x - x_min
            let left = ly1 * w1 + lx;
            (left, left + 1)
        }
    }

    pub fn dual_bond_sites(&self, e: usize) -> (DualSite, DualSite) {
        let (a, b) = self.dual_bond(e);
        (self.dual_site(a), self.dual_site(b))
    }
}

/// Boundary values `η ∈ {-1, 0, +1}^{∂Λ}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySpec {
    values: Vec<i8>,
    tag: Option<EtaTag>,
}

/// Provenance of a boundary built by [`eta`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaTag {
    pub k: i32,
    pub eps: i8,
}

impl BoundarySpec {
    pub fn uniform(geom: &Geometry, value: i8) -> Result<Self> {
        Self::from_fn(geom, |_| value)
    }

    pub fn from_fn(geom: &Geometry, mut f: impl FnMut(Site) -> i8) -> Result<Self> {
        let values: Vec<i8> = geom.boundary().iter().map(|&s| f(s)).collect();
        Self::from_values(geom, values)
    }

    pub fn from_values(geom: &Geometry, values: Vec<i8>) -> Result<Self> {
        if values.len() != geom.n_boundary() {
            return Err(Error::GeometryMismatch {
                expected: geom.n_boundary(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::InvalidParameter(format!("boundary value {v} not in {{-1,0,1}}")));
        }
        Ok(BoundarySpec { values, tag: None })
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, boundary_ordinal: usize) -> i8 {
        self.values[boundary_ordinal]
    }

    pub fn tag(&self) -> Option<EtaTag> {
        self.tag
    }

    pub fn count(&self, value: i8) -> usize {
        self.values.iter().filter(|&&v| v == value).count()
    }

    pub(crate) fn check(&self, geom: &Geometry) -> Result<()> {
        if self.values.len() != geom.n_boundary() {
            return Err(Error::GeometryMismatch {
                expected: geom.n_boundary(),
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

/// `η^{k,ε}`: `+1` on boundary sites within distance `k` of either axis, `ε` elsewhere.
pub fn eta(geom: &Geometry, k: i64, eps: i8) -> Result<BoundarySpec> {
    let n = geom.require_half_width()?;
    if k < 1 || k > n as i64 {
        return Err(Error::InvalidStripParameter { k, n: n as i64 });
    }
    if eps != 0 && eps != -1 {
        return Err(Error::InvalidParameter(format!("eps must be 0 or -1, got {eps}")));
    }
    let k = k as i32;
    let mut spec = BoundarySpec::from_fn(geom, |s| {
        if s.x.abs() <= k || s.y.abs() <= k {
            1
        } else {
            eps
        }
    })?;
    spec.tag = Some(EtaTag { k, eps });
    Ok(spec)
}

/// Shapes resolved by [`region`]; side-1 versions are described, other sides
/// are quarter-turn images (side 1 bottom, 2 left, 3 top, 4 right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `Γ_1 = [-k, k] x {-N-1}`.
    Strip { k: i32 },
    /// `Γ_{1,2}`: boundary sites between `Γ_1` and `Γ_2`, plus the corner `(-N-1, -N-1)`.
    CornerStrip { k: i32 },
    /// `Γ*_{1,2}`: dual sites on `∂[-N-½, N+½]^2` that are corners of `Q(y)`, `y ∈ Γ_{1,2}`.
    DualCornerStrip { k: i32 },
    /// Closed triangle `T^1_{h,b}` with vertices `(-b,-h), (b,-h), (0, -(h-b))`, over sites of `Λ`.
    Triangle { height: HalfInt, half_base: HalfInt },
    /// The same triangle over dual sites.
    DualTriangle { height: HalfInt, half_base: HalfInt },
    /// `S^{1,2}_{N,m} = [m, N+1] x [-N-1, -m]` over sites of `Λ`.
    Square { m: i32 },
    /// The same square over dual sites.
    DualSquare { m: i32 },
}

/// A region on side `i`, with its resolved member points.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub region: Region,
    pub side: u8,
    pub half_width: i32,
    points: Vec<HalfPoint>,
}

impl RegionMask {
    pub fn points(&self) -> &[HalfPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lattice members (strips, corner strips, triangles, squares).
    pub fn sites(&self) -> Vec<Site> {
        self.points
            .iter()
            .filter(|p| p.x % 2 == 0 && p.y % 2 == 0)
            .map(|p| Site::new((p.x / 2) as i32, (p.y / 2) as i32))
            .collect()
    }

    /// Dual members (dual corner strips, dual triangles, dual squares).
    pub fn dual_sites(&self) -> Vec<DualSite> {
        self.points.iter().filter_map(|&p| DualSite::from_half_point(p)).collect()
    }

    /// Planar containment for triangles and squares; set membership otherwise.
    pub fn contains(&self, p: HalfPoint) -> bool {
        let q = p.unrotate_n(self.side - 1);
        let n2 = 2 * self.half_width as i64;
        match self.region {
            Region::Triangle { height, half_base } | Region::DualTriangle { height, half_base } => {
                triangle_contains(height, half_base, q)
            }
            Region::Square { m } | Region::DualSquare { m } => {
                let m2 = 2 * m as i64;
                q.x >= m2 && q.x <= n2 + 2 && q.y >= -n2 - 2 && q.y <= -m2
            }
            _ => self.points.contains(&p),
        }
    }
}

pub(crate) fn triangle_contains(height: HalfInt, half_base: HalfInt, q: HalfPoint) -> bool {
    let (h, b) = (height.doubled(), half_base.doubled());
    q.y >= -h && q.x.abs() + q.y <= b - h
}

fn check_side(i: u8) -> Result<()> {
    if (1..=4).contains(&i) {
        Ok(())
    } else {
        Err(Error::InvalidSide(i))
    }
}

fn check_k(k: i32, n: i32) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::InvalidStripParameter { k: k as i64, n: n as i64 });
    }
    Ok(())
}

fn corner_strip_side1(n: i32, k: i32) -> Vec<Site> {
    let mut v: Vec<Site> = (-n..-k).map(|x| Site::new(x, -n - 1)).collect();
    v.extend((-n..-k).map(|y| Site::new(-n - 1, y)));
    v.push(Site::new(-n - 1, -n - 1));
    v
}

/// Resolve a region on side `i` of the square box `geom`.
pub fn region(geom: &Geometry, kind: Region, i: u8) -> Result<RegionMask> {
    check_side(i)?;
    let n = geom.require_half_width()?;
    let turns = i - 1;
    let points: Vec<HalfPoint> = match kind {
        Region::Strip { k } => {
            check_k(k, n)?;
            (-k..=k)
                .map(|x| Site::new(x, -n - 1).rotate_n(turns).half_point())
                .collect()
        }
        Region::CornerStrip { k } => {
            check_k(k, n)?;
            corner_strip_side1(n, k)
                .into_iter()
                .map(|s| s.rotate_n(turns).half_point())
                .collect()
        }
        Region::DualCornerStrip { k } => {
            check_k(k, n)?;
            let rim = 2 * n as i64 + 1;
            let mut pts: Vec<HalfPoint> = corner_strip_side1(n, k)
                .into_iter()
                .map(|s| s.rotate_n(turns).half_point())
                .flat_map(|c| {
                    [(-1, -1), (1, -1), (-1, 1), (1, 1)]
                        .into_iter()
                        .map(move |(dx, dy)| HalfPoint::new(c.x + dx, c.y + dy))
                })
                .filter(|p| p.x.abs().max(p.y.abs()) == rim)
                .collect();
            pts.sort();
            pts.dedup();
            pts
        }
        Region::Triangle { height, half_base } | Region::DualTriangle { height, half_base } => {
            if half_base.doubled() <= 0 || height.doubled() <= 0 {
                return Err(Error::DegenerateRegion(format!(
                    "triangle with height {} and half-base {}",
                    height.to_f64(),
                    half_base.to_f64()
                )));
            }
            if half_base > height {
                return Err(Error::DegenerateRegion(format!(
                    "triangle apex beyond the box centre (half-base {} > height {})",
                    half_base.to_f64(),
                    height.to_f64()
                )));
            }
            let candidates: Vec<HalfPoint> = if matches!(kind, Region::Triangle { .. }) {
                geom.sites().iter().map(|s| s.half_point()).collect()
            } else {
                geom.dual_sites().map(|d| d.half_point()).collect()
            };
            candidates
                .into_iter()
                .filter(|p| triangle_contains(height, half_base, p.unrotate_n(turns)))
                .collect()
        }
        Region::Square { m } | Region::DualSquare { m } => {
            if m < 0 || m > n + 1 {
                return Err(Error::DegenerateRegion(format!("square offset m={m} outside [0, N+1]")));
            }
            let (m2, n2) = (2 * m as i64, 2 * n as i64);
            let inside = |q: HalfPoint| q.x >= m2 && q.x <= n2 + 2 && q.y >= -n2 - 2 && q.y <= -m2;
            let candidates: Vec<HalfPoint> = if matches!(kind, Region::Square { .. }) {
                geom.sites().iter().map(|s| s.half_point()).collect()
            } else {
                geom.dual_sites().map(|d| d.half_point()).collect()
            };
            candidates
                .into_iter()
                .filter(|p| inside(p.unrotate_n(turns)))
                .collect()
        }
    };
    Ok(RegionMask {
        region: kind,
        side: i,
        half_width: n,
        points,
    })
}

/// Edges of the topological boundary of `Q(Φ) = ∪ (x + [-½, ½]^2)`.
pub fn q_boundary(phi: &[Site]) -> Result<Vec<DualEdge>> {
    if phi.is_empty() {
        return Err(Error::EmptySiteSet);
    }
    let set: std::collections::HashSet<Site> = phi.iter().copied().collect();
    let mut edges = Vec::new();
    for &s in &set {
        let (x, y) = (s.x, s.y);
        let sides = [
            (Site::new(x + 1, y), DualSite::new(x, y - 1), DualSite::new(x, y)),
            (Site::new(x - 1, y), DualSite::new(x - 1, y - 1), DualSite::new(x - 1, y)),
            (Site::new(x, y + 1), DualSite::new(x - 1, y), DualSite::new(x, y)),
            (Site::new(x, y - 1), DualSite::new(x - 1, y - 1), DualSite::new(x, y - 1)),
        ];
        for (t, a, b) in sides {
            if !set.contains(&t) {
                edges.push(DualEdge::new(a, b));
            }
        }
    }
    edges.sort();
    Ok(edges)
}
