//! Lattice geometry, boundary conditions, regions and configurations.
//!
//! Sites are indexed row-major: `index = row * width + col`. "East" is
//! `col + 1` and "north" is `row + 1`. Every site carries exactly one
//! external edge to the ghost vertex, and the canonical edge order used
//! for serialization and exact enumeration is, for each site in row-major
//! order, its east edge, its north edge, then its ghost edge.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvBlock;
use crate::scalar::{beta_critical, Scalar};

/// Sentinel for a missing neighbor in [`GhostGraph::neighbors`].
pub const NO_SITE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    /// No interaction with the outside.
    Free,
    /// Wrap around in both directions.
    Periodic,
    /// Wrap around horizontally only; free at the top and bottom rows.
    Cylinder,
    /// A frozen layer of `+1` spins outside the box.
    PlusSpin,
    /// All sites of the inner boundary are wired into one FK cluster
    /// through the outside; the wiring does not touch the ghost.
    WiredFk,
}

impl Boundary {
    pub fn code(self) -> u16 {
        match self {
            Boundary::Free => 0,
            Boundary::Periodic => 1,
            Boundary::PlusSpin => 2,
            Boundary::WiredFk => 3,
            Boundary::Cylinder => 4,
        }
    }

    pub fn from_code(code: u16) -> Result<Self> {
        Ok(match code {
            0 => Boundary::Free,
            1 => Boundary::Periodic,
            2 => Boundary::PlusSpin,
            3 => Boundary::WiredFk,
            4 => Boundary::Cylinder,
            _ => return Err(Error::Decode(format!("unknown boundary code {code}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Free => "free",
            Boundary::Periodic => "periodic",
            Boundary::PlusSpin => "plus",
            Boundary::WiredFk => "wired",
            Boundary::Cylinder => "cylinder",
        }
    }

    /// Whether the lattice has a planar embedding with an outside.
    pub fn is_planar(self) -> bool {
        !matches!(self, Boundary::Periodic | Boundary::Cylinder)
    }

    /// Whether the east edge of the last column wraps to the first.
    pub fn wraps_horizontally(self) -> bool {
        matches!(self, Boundary::Periodic | Boundary::Cylinder)
    }

    pub fn wraps_vertically(self) -> bool {
        self == Boundary::Periodic
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "free" => Ok(Boundary::Free),
            "periodic" => Ok(Boundary::Periodic),
            "plus" | "plus-spin" => Ok(Boundary::PlusSpin),
            "wired" | "wired-fk" => Ok(Boundary::WiredFk),
            "cylinder" => Ok(Boundary::Cylinder),
            other => Err(Error::Config(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Finite box of `width × height` sites with lattice spacing `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(width: usize, height: usize, boundary: Boundary) -> Result<Self> {
        let spec = LatticeSpec {
            width,
            height,
            spacing: 1.0,
            boundary,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        self.spacing = spacing;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidLattice(format!(
                "dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.width > u32::MAX as usize / 2 || self.height > u32::MAX as usize / 2 {
            return Err(Error::InvalidLattice("dimensions too large".into()));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidLattice(format!(
                "spacing must be positive and finite, got {}",
                self.spacing
            )));
        }
        Ok(())
    }

    pub fn num_sites(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, site: Site) -> usize {
        site.row * self.width + site.col
    }

    pub fn site(&self, index: usize) -> Site {
        Site {
            col: index % self.width,
            row: index / self.width,
        }
    }

    pub fn check_site(&self, site: Site) -> Result<usize> {
        if site.col < self.width && site.row < self.height {
            Ok(self.index(site))
        } else {
            Err(Error::SiteOutOfRange {
                col: site.col,
                row: site.row,
            })
        }
    }

    pub fn contains(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::default();
        kv.set("width", self.width);
        kv.set("height", self.height);
        kv.set("spacing", format_real(self.spacing));
        kv.set("boundary", self.boundary);
        kv
    }

    pub fn from_kv(kv: &KvBlock) -> Result<Self> {
        let spec = LatticeSpec {
            width: kv.parse("width")?,
            height: kv.parse("height")?,
            spacing: kv.parse_or("spacing", 1.0)?,
            boundary: kv.parse_or("boundary", Boundary::Free)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Shortest text that parses back to the same `f64`.
pub(crate) fn format_real(x: f64) -> String {
    format!("{x:?}")
}

/// Inverse temperature and lattice field `H`.
///
/// The renormalized field `h = H a^{-15/8}` is derived, never stored, so
/// `h a^{15/8} = H` holds by construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldParams<T> {
    pub beta: T,
    pub big_h: T,
}

impl<T: Scalar> FieldParams<T> {
    pub fn new(beta: T, big_h: T) -> Result<Self> {
        let p = FieldParams { beta, big_h };
        p.validate()?;
        Ok(p)
    }

    /// Critical temperature with lattice field `big_h`.
    pub fn critical(big_h: T) -> Result<Self> {
        Self::new(beta_critical(), big_h)
    }

    /// Parameters realizing the renormalized field `h` at spacing `a`.
    pub fn from_renormalized(beta: T, little_h: T, spacing: T) -> Result<Self> {
        Self::new(beta, little_h * spacing.powf(T::of(15.0 / 8.0)))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero()) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.big_h >= T::zero()) || !self.big_h.is_finite() {
            return Err(Error::InvalidParams(format!(
                "field H must be non-negative, got {}",
                self.big_h
            )));
        }
        Ok(())
    }

    pub fn little_h(&self, spacing: T) -> T {
        self.big_h * spacing.powf(T::of(-15.0 / 8.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub col: usize,
    pub row: usize,
}

impl Site {
    pub fn new(col: usize, row: usize) -> Self {
        Site { col, row }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.col, self.row)
    }
}

/// One entry in the canonical edge order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRef {
    Internal(u32),
    External(u32),
}

/// The box plus the ghost vertex: internal nearest-neighbor edges and one
/// external edge per site.
#[derive(Clone, Debug, PartialEq)]
pub struct GhostGraph {
    spec: LatticeSpec,
    internal: Vec<[u32; 2]>,
    canonical: Vec<EdgeRef>,
    // east, west, north, south
    neighbors: Vec<[u32; 4]>,
    neighbor_edges: Vec<[u32; 4]>,
    outside: Vec<u8>,
    wired: Vec<u32>,
}

/// Builds the ghost graph of `spec`; a pure function of the spec.
pub fn build_graph(spec: LatticeSpec) -> Result<GhostGraph> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let n = w * h;
    let wrap_x = spec.boundary.wraps_horizontally();
    let wrap_y = spec.boundary.wraps_vertically();
    let mut internal = Vec::with_capacity(2 * n);
    let mut canonical = Vec::with_capacity(3 * n);
    let mut neighbors = vec![[NO_SITE; 4]; n];
    let mut neighbor_edges = vec![[NO_SITE; 4]; n];

    for row in 0..h {
        for col in 0..w {
            let u = row * w + col;
            let east = if col + 1 < w {
                Some(u + 1)
            } else if wrap_x && w > 1 {
                Some(row * w)
            } else {
                None
            };
            if let Some(v) = east {
                let e = internal.len() as u32;
                internal.push([u as u32, v as u32]);
                canonical.push(EdgeRef::Internal(e));
                set_slot(&mut neighbors, &mut neighbor_edges, u, 0, v, e);
                set_slot(&mut neighbors, &mut neighbor_edges, v, 1, u, e);
            }
            let north = if row + 1 < h {
                Some(u + w)
            } else if wrap_y && h > 1 {
                Some(col)
            } else {
                None
            };
            if let Some(v) = north {
                let e = internal.len() as u32;
                internal.push([u as u32, v as u32]);
                canonical.push(EdgeRef::Internal(e));
                set_slot(&mut neighbors, &mut neighbor_edges, u, 2, v, e);
                set_slot(&mut neighbors, &mut neighbor_edges, v, 3, u, e);
            }
            canonical.push(EdgeRef::External(u as u32));
        }
    }

    let mut outside = vec![0u8; n];
    for (u, out) in outside.iter_mut().enumerate() {
        let (col, row) = (u % w, u / w);
        if !wrap_x {
            *out += u8::from(col == 0) + u8::from(col + 1 == w);
        }
        if !wrap_y {
            *out += u8::from(row == 0) + u8::from(row + 1 == h);
        }
    }
    let wired = if spec.boundary == Boundary::WiredFk {
        (0..n).filter(|&u| outside[u] > 0).map(|u| u as u32).collect()
    } else {
        Vec::new()
    };

    Ok(GhostGraph {
        spec,
        internal,
        canonical,
        neighbors,
        neighbor_edges,
        outside,
        wired,
    })
}

// With periodic width 2 the east and west neighbors coincide and two
// distinct edges join the same pair; each slot keeps its own edge.
fn set_slot(nb: &mut [[u32; 4]], ne: &mut [[u32; 4]], u: usize, slot: usize, v: usize, e: u32) {
    nb[u][slot] = v as u32;
    ne[u][slot] = e;
}

impl GhostGraph {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn num_sites(&self) -> usize {
        self.spec.num_sites()
    }

    pub fn num_internal(&self) -> usize {
        self.internal.len()
    }

    pub fn num_external(&self) -> usize {
        self.num_sites()
    }

    /// Internal edges in canonical order.
    pub fn internal_edges(&self) -> &[[u32; 2]] {
        &self.internal
    }

    /// Internal and external edges interleaved in canonical order.
    pub fn canonical_edges(&self) -> &[EdgeRef] {
        &self.canonical
    }

    /// Neighbor site indices (east, west, north, south), [`NO_SITE`] if absent.
    pub fn neighbors(&self, site: usize) -> &[u32; 4] {
        &self.neighbors[site]
    }

    /// Internal edge index for each neighbor slot.
    pub fn neighbor_edges(&self, site: usize) -> &[u32; 4] {
        &self.neighbor_edges[site]
    }

    /// Number of nearest neighbors of `site` that lie outside the box.
    pub fn outside_neighbors(&self, site: usize) -> u8 {
        self.outside[site]
    }

    /// Sites wired together by a wired-FK boundary (empty otherwise).
    pub fn wired_sites(&self) -> &[u32] {
        &self.wired
    }

    /// Effective field on the external edge of `site`.
    ///
    /// For the plus-spin boundary the bonds to the frozen `+1` layer are
    /// parallel to the ghost edge (both end in a vertex forced to `+1`),
    /// so they merge into a field `H + β · #outside neighbors`.
    pub fn site_field<T: Scalar>(&self, params: &FieldParams<T>, site: usize) -> T {
        match self.spec.boundary {
            Boundary::PlusSpin => params.big_h + params.beta * T::of(f64::from(self.outside[site])),
            _ => params.big_h,
        }
    }
}

/// Axis-aligned rectangle of lattice coordinates, inclusive on both ends.
/// Coordinates may extend beyond the lattice; membership is clipped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn valid(&self) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1
    }

    fn strictly_inside(&self, outer: &Rect) -> bool {
        self.x0 > outer.x0 && self.x1 < outer.x1 && self.y0 > outer.y0 && self.y1 < outer.y1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    Box,
    Annulus,
    Rectangle,
}

/// A set of lattice sites: a square box, a rectangle, or an annulus (an
/// outer rectangle minus a strictly interior hole rectangle).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    kind: RegionKind,
    outer: Rect,
    hole: Option<Rect>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Inner,
    Outer,
}

impl Region {
    /// Sites within Chebyshev distance `half` of `center`.
    pub fn square(center: (i64, i64), half: i64) -> Result<Self> {
        if half < 0 {
            return Err(Error::InvalidRegion("half-side must be non-negative".into()));
        }
        Ok(Region {
            kind: RegionKind::Box,
            outer: Rect {
                x0: center.0 - half,
                y0: center.1 - half,
                x1: center.0 + half,
                y1: center.1 + half,
            },
            hole: None,
        })
    }

    pub fn rectangle(rect: Rect) -> Result<Self> {
        if !rect.valid() {
            return Err(Error::InvalidRegion(format!("empty rectangle {rect:?}")));
        }
        Ok(Region {
            kind: RegionKind::Rectangle,
            outer: rect,
            hole: None,
        })
    }

    /// Sites at Chebyshev distance `d` from `center` with
    /// `inner <= d <= outer`; the hole is `d < inner`.
    pub fn annulus(center: (i64, i64), inner: i64, outer: i64) -> Result<Self> {
        if !(0 < inner && inner < outer) {
            return Err(Error::InvalidRegion(format!(
                "annulus needs 0 < inner < outer, got inner={inner}, outer={outer}"
            )));
        }
        let (cx, cy) = center;
        Ok(Region {
            kind: RegionKind::Annulus,
            outer: Rect {
                x0: cx - outer,
                y0: cy - outer,
                x1: cx + outer,
                y1: cy + outer,
            },
            hole: Some(Rect {
                x0: cx - inner + 1,
                y0: cy - inner + 1,
                x1: cx + inner - 1,
                y1: cy + inner - 1,
            }),
        })
    }

    /// The block annulus `[0,3N]^2 \ [N,2N]^2` translated to `corner`.
    pub fn block_annulus(corner: (i64, i64), scale: i64) -> Result<Self> {
        if scale < 1 {
            return Err(Error::InvalidRegion("block scale must be at least 1".into()));
        }
        Self::annulus_between(
            Rect {
                x0: corner.0,
                y0: corner.1,
                x1: corner.0 + 3 * scale,
                y1: corner.1 + 3 * scale,
            },
            Rect {
                x0: corner.0 + scale,
                y0: corner.1 + scale,
                x1: corner.0 + 2 * scale,
                y1: corner.1 + 2 * scale,
            },
        )
    }

    pub fn annulus_between(outer: Rect, hole: Rect) -> Result<Self> {
        if !outer.valid() || !hole.valid() || !hole.strictly_inside(&outer) {
            return Err(Error::InvalidRegion(format!(
                "hole {hole:?} must lie strictly inside {outer:?}"
            )));
        }
        Ok(Region {
            kind: RegionKind::Annulus,
            outer,
            hole: Some(hole),
        })
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn outer_rect(&self) -> Rect {
        self.outer
    }

    pub fn hole(&self) -> Option<Rect> {
        self.hole
    }

    pub fn in_hole(&self, x: i64, y: i64) -> bool {
        self.hole.map_or(false, |h| h.contains(x, y))
    }

    /// Membership in unclipped coordinates (ignores the lattice).
    pub fn contains_point(&self, x: i64, y: i64) -> bool {
        self.outer.contains(x, y) && !self.in_hole(x, y)
    }

    pub fn contains(&self, spec: &LatticeSpec, site: Site) -> bool {
        let (x, y) = (site.col as i64, site.row as i64);
        spec.contains(x, y) && self.contains_point(x, y)
    }

    pub fn contains_index(&self, spec: &LatticeSpec, index: usize) -> bool {
        self.contains(spec, spec.site(index))
    }

    /// Sites of the region clipped to the lattice, row-major.
    pub fn sites(&self, spec: &LatticeSpec) -> Vec<Site> {
        let x0 = self.outer.x0.max(0);
        let y0 = self.outer.y0.max(0);
        let x1 = self.outer.x1.min(spec.width as i64 - 1);
        let y1 = self.outer.y1.min(spec.height as i64 - 1);
        let mut out = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !self.in_hole(x, y) {
                    out.push(Site::new(x as usize, y as usize));
                }
            }
        }
        out
    }

    /// Whole-lattice region.
    pub fn full(spec: &LatticeSpec) -> Self {
        Region {
            kind: RegionKind::Rectangle,
            outer: Rect {
                x0: 0,
                y0: 0,
                x1: spec.width as i64 - 1,
                y1: spec.height as i64 - 1,
            },
            hole: None,
        }
    }

    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::default();
        kv.set(
            "region.kind",
            match self.kind {
                RegionKind::Box => "box",
                RegionKind::Annulus => "annulus",
                RegionKind::Rectangle => "rectangle",
            },
        );
        let o = self.outer;
        kv.set("region.outer", format!("{},{},{},{}", o.x0, o.y0, o.x1, o.y1));
        if let Some(h) = self.hole {
            kv.set("region.hole", format!("{},{},{},{}", h.x0, h.y0, h.x1, h.y1));
        }
        kv
    }

    pub fn from_kv(kv: &KvBlock) -> Result<Self> {
        let kind = kv.require("region.kind")?;
        let outer = parse_rect(kv.require("region.outer")?)?;
        match kind {
            "box" => {
                if outer.x1 - outer.x0 != outer.y1 - outer.y0 || (outer.x1 - outer.x0) % 2 != 0 {
                    return Err(Error::Config("box region must be an odd square".into()));
                }
                let half = (outer.x1 - outer.x0) / 2;
                Region::square((outer.x0 + half, outer.y0 + half), half)
            }
            "rectangle" => Region::rectangle(outer),
            "annulus" => Region::annulus_between(outer, parse_rect(kv.require("region.hole")?)?),
            other => Err(Error::Config(format!("unknown region kind '{other}'"))),
        }
    }
}

fn parse_rect(s: &str) -> Result<Rect> {
    let v: Vec<i64> = s
        .split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad rectangle '{s}': {e}")))?;
    if v.len() != 4 {
        return Err(Error::Config(format!("rectangle needs 4 numbers, got '{s}'")));
    }
    Ok(Rect {
        x0: v[0],
        y0: v[1],
        x1: v[2],
        y1: v[3],
    })
}

const STEPS4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Inner-boundary sites of `region` toward `side`, row-major.
///
/// `Side::Inner` (annuli only) returns the sites adjacent to the hole;
/// `Side::Outer` returns the sites adjacent to anything that is neither in
/// the clipped region nor in the hole, which includes the lattice exterior.
pub fn boundary_sites(spec: &LatticeSpec, region: &Region, side: Side) -> Result<Vec<Site>> {
    if region.kind == RegionKind::Annulus && !spec.boundary.is_planar() {
        return Err(Error::UnsupportedBoundary(
            "annulus sides need a planar (non-periodic) lattice".into(),
        ));
    }
    if side == Side::Inner && region.hole.is_none() {
        return Err(Error::InvalidRegion("only an annulus has an inner side".into()));
    }
    let inside = |x: i64, y: i64| spec.contains(x, y) && region.contains_point(x, y);
    Ok(region
        .sites(spec)
        .into_iter()
        .filter(|s| {
            let (x, y) = (s.col as i64, s.row as i64);
            STEPS4.iter().any(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                match side {
                    Side::Inner => region.in_hole(nx, ny),
                    Side::Outer => !inside(nx, ny) && !region.in_hole(nx, ny),
                }
            })
        })
        .collect())
}

/// `±1` per site.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn all_plus(n: usize) -> Self {
        SpinConfig { spins: vec![1; n] }
    }

    pub fn from_vec(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Decode(format!("spin value {bad} is not ±1")));
        }
        Ok(SpinConfig { spins })
    }

    /// Bit `i` of `bits` set means site `i` is `+1`.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        SpinConfig {
            spins: (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn get(&self, site: usize) -> i8 {
        self.spins[site]
    }

    pub fn set(&mut self, site: usize, value: i8) {
        debug_assert!(value == 1 || value == -1);
        self.spins[site] = value;
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.spins
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [i8] {
        &mut self.spins
    }

    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| i64::from(s)).sum()
    }

    pub fn to_bytes(&self, spec: &LatticeSpec) -> Result<Vec<u8>> {
        check_len(spec.num_sites(), self.len())?;
        let mut out = header(SPIN_MAGIC, spec);
        out.extend(pack_bits(self.spins.iter().map(|&s| s > 0)));
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(LatticeSpec, Self)> {
        let (spec, body) = read_header(SPIN_MAGIC, bytes)?;
        let n = spec.num_sites();
        let bits = unpack_bits(body, n)?;
        Ok((
            spec,
            SpinConfig {
                spins: bits.into_iter().map(|b| if b { 1 } else { -1 }).collect(),
            },
        ))
    }
}

/// Open/closed state of every internal and external edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FkConfig {
    pub internal: Vec<bool>,
    pub external: Vec<bool>,
}

impl FkConfig {
    pub fn closed(graph: &GhostGraph) -> Self {
        FkConfig {
            internal: vec![false; graph.num_internal()],
            external: vec![false; graph.num_external()],
        }
    }

    pub fn open(graph: &GhostGraph) -> Self {
        FkConfig {
            internal: vec![true; graph.num_internal()],
            external: vec![true; graph.num_external()],
        }
    }

    /// Bit `k` of `bits` is the state of the `k`-th canonical edge.
    pub fn from_canonical_bits(graph: &GhostGraph, bits: u64) -> Self {
        let mut fk = Self::closed(graph);
        for (k, e) in graph.canonical_edges().iter().enumerate() {
            let open = bits >> k & 1 == 1;
            match *e {
                EdgeRef::Internal(i) => fk.internal[i as usize] = open,
                EdgeRef::External(s) => fk.external[s as usize] = open,
            }
        }
        fk
    }

    pub fn canonical_bits(&self, graph: &GhostGraph) -> Vec<bool> {
        graph
            .canonical_edges()
            .iter()
            .map(|e| match *e {
                EdgeRef::Internal(i) => self.internal[i as usize],
                EdgeRef::External(s) => self.external[s as usize],
            })
            .collect()
    }

    pub fn check(&self, graph: &GhostGraph) -> Result<()> {
        check_len(graph.num_internal(), self.internal.len())?;
        check_len(graph.num_external(), self.external.len())
    }

    pub fn to_bytes(&self, graph: &GhostGraph) -> Result<Vec<u8>> {
        self.check(graph)?;
        let mut out = header(FK_MAGIC, graph.spec());
        out.extend(pack_bits(self.canonical_bits(graph).into_iter()));
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(LatticeSpec, Self)> {
        let (spec, body) = read_header(FK_MAGIC, bytes)?;
        let graph = build_graph(spec)?;
        let bits = unpack_bits(body, graph.canonical_edges().len())?;
        let mut fk = FkConfig::closed(&graph);
        for (e, b) in graph.canonical_edges().iter().zip(bits) {
            match *e {
                EdgeRef::Internal(i) => fk.internal[i as usize] = b,
                EdgeRef::External(s) => fk.external[s as usize] = b,
            }
        }
        Ok((spec, fk))
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}

pub(crate) const SPIN_MAGIC: [u8; 4] = *b"GISP";
pub(crate) const FK_MAGIC: [u8; 4] = *b"GIFK";
pub(crate) const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

/// 16-byte header: magic, version (u16 LE), boundary code (u16 LE),
/// width (u32 LE), height (u32 LE). Spacing is not part of the header.
pub(crate) fn header(magic: [u8; 4], spec: &LatticeSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&spec.boundary.code().to_le_bytes());
    out.extend_from_slice(&(spec.width as u32).to_le_bytes());
    out.extend_from_slice(&(spec.height as u32).to_le_bytes());
    out
}

pub(crate) fn read_header(magic: [u8; 4], bytes: &[u8]) -> Result<(LatticeSpec, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Decode("truncated header".into()));
    }
    if bytes[0..4] != magic {
        return Err(Error::Decode(format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Decode(format!("unsupported version {version}")));
    }
    let boundary = Boundary::from_code(u16::from_le_bytes([bytes[6], bytes[7]]))?;
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let spec = LatticeSpec::new(width, height, boundary).map_err(|e| Error::Decode(e.to_string()))?;
    Ok((spec, &bytes[HEADER_LEN..]))
}

/// LSB-first packing.
pub(crate) fn pack_bits(bits: impl Iterator<Item = bool>) -> Vec<u8> {
    let mut out = Vec::new();
    for (i, b) in bits.enumerate() {
        if i % 8 == 0 {
            out.push(0);
        }
        if b {
            *out.last_mut().unwrap() |= 1 << (i % 8);
        }
    }
    out
}

pub(crate) fn unpack_bits(bytes: &[u8], n: usize) -> Result<Vec<bool>> {
    let need = n.div_ceil(8);
    if bytes.len() < need {
        return Err(Error::Decode(format!("need {need} payload bytes, got {}", bytes.len())));
    }
    Ok((0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}
