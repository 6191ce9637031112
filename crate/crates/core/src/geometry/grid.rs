//! Occupancy grids for compact planar sets.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::point::{cloud_diameter, DiskDomain, PlanePoint};
use crate::error::{Error, Result};
use crate::par;

/// Cells per side used when no resolution is configured.
pub const DEFAULT_CELLS: usize = 1024;

/// Axis-aligned lattice of square cells; cell `(ix, iy)` has its lower-left
/// corner at `origin + h·(ix, iy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: PlanePoint,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridGeometry {
    pub fn new(origin: PlanePoint, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || nx == 0 || ny == 0 || !origin.is_finite() {
            return Err(Error::InvalidArgument(format!("bad grid: h={h}, {nx}x{ny}")));
        }
        Ok(GridGeometry { origin, h, nx, ny })
    }

    /// Square grid on the bounding box of `disk`, `cells` per side.
    pub fn for_disk(disk: &DiskDomain, cells: usize) -> Self {
        let cells = cells.max(1);
        let r = disk.radius;
        GridGeometry { origin: disk.center - PlanePoint::new(r, r), h: 2.0 * r / cells as f64, nx: cells, ny: cells }
    }

    /// Grid covering `[min, max]` with cells of side (at most) `h`.
    pub fn for_box(min: PlanePoint, max: PlanePoint, h: f64) -> Result<Self> {
        let nx = ((max.x1 - min.x1) / h).ceil().max(1.0) as usize;
        let ny = ((max.x2 - min.x2) / h).ceil().max(1.0) as usize;
        GridGeometry::new(min, h, nx, ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, ix: usize, iy: usize) -> PlanePoint {
        PlanePoint::new(self.origin.x1 + (ix as f64 + 0.5) * self.h, self.origin.x2 + (iy as f64 + 0.5) * self.h)
    }

    pub fn max_corner(&self) -> PlanePoint {
        PlanePoint::new(self.origin.x1 + self.nx as f64 * self.h, self.origin.x2 + self.ny as f64 * self.h)
    }

    /// Cell containing `p`, if any.
    pub fn cell_of(&self, p: PlanePoint) -> Option<(usize, usize)> {
        let fx = ((p.x1 - self.origin.x1) / self.h).floor();
        let fy = ((p.x2 - self.origin.x2) / self.h).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Whether the grid's box contains `disk`.
    pub fn covers(&self, disk: &DiskDomain) -> bool {
        let hi = self.max_corner();
        let c = disk.center;
        let r = disk.radius;
        c.x1 - r >= self.origin.x1 - 1e-12
            && c.x2 - r >= self.origin.x2 - 1e-12
            && c.x1 + r <= hi.x1 + 1e-12
            && c.x2 + r <= hi.x2 + 1e-12
    }

    fn check_same(&self, other: &GridGeometry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// A compact set represented by the cells it occupies.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSet {
    geom: GridGeometry,
    bits: Vec<u64>,
}

impl GridSet {
    pub fn empty(geom: GridGeometry) -> Self {
        GridSet { geom, bits: vec![0; geom.len().div_ceil(64)] }
    }

    pub fn full(geom: GridGeometry) -> Self {
        GridSet::from_predicate(geom, |_| true)
    }

    /// Cells whose center satisfies `keep`.
    pub fn from_predicate<F>(geom: GridGeometry, keep: F) -> Self
    where
        F: Fn(PlanePoint) -> bool + Sync + Send,
    {
        let rows =
            par::map_indices(geom.ny, |iy| (0..geom.nx).filter(|&ix| keep(geom.center(ix, iy))).collect::<Vec<_>>());
        let mut set = GridSet::empty(geom);
        for (iy, row) in rows.iter().enumerate() {
            for &ix in row {
                set.insert(ix, iy);
            }
        }
        set
    }

    /// Cells whose centers lie in `disk`.
    pub fn from_disk(geom: GridGeometry, disk: &DiskDomain) -> Self {
        GridSet::from_predicate(geom, |c| disk.contains(c))
    }

    /// The cells containing each point (points outside the grid are dropped).
    pub fn from_points(geom: GridGeometry, points: &[PlanePoint]) -> Self {
        let mut set = GridSet::empty(geom);
        for p in points {
            if let Some((ix, iy)) = geom.cell_of(*p) {
                set.insert(ix, iy);
            }
        }
        set
    }

    /// Union of closed balls of `radius` around each point, rasterized as
    /// every cell whose center is within `radius`, plus the cell holding the
    /// point itself.
    pub fn from_balls(geom: GridGeometry, points: &[PlanePoint], radius: f64) -> Self {
        let words = geom.len().div_ceil(64);
        let atoms: Vec<AtomicU64> = (0..words).map(|_| AtomicU64::new(0)).collect();
        const BLOCK: usize = 2048;
        let blocks = points.len().div_ceil(BLOCK);
        par::map_indices(blocks, |b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(points.len());
            for p in &points[lo..hi] {
                stamp_ball(&geom, &atoms, *p, radius);
            }
        });
        GridSet { geom, bits: atoms.into_iter().map(AtomicU64::into_inner).collect() }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn h(&self) -> f64 {
        self.geom.h
    }

    #[inline]
    fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.geom.nx + ix
    }

    pub fn insert(&mut self, ix: usize, iy: usize) {
        let i = self.index(ix, iy);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn contains_cell(&self, ix: usize, iy: usize) -> bool {
        let i = self.index(ix, iy);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn contains_point(&self, p: PlanePoint) -> bool {
        self.geom.cell_of(p).is_some_and(|(ix, iy)| self.contains_cell(ix, iy))
    }

    fn get_linear(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Occupied cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.geom.nx;
        self.bits.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut word = w;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                let i = wi * 64 + b;
                Some((i % nx, i / nx))
            })
        })
    }

    pub fn centers(&self) -> Vec<PlanePoint> {
        self.cells().map(|(ix, iy)| self.geom.center(ix, iy)).collect()
    }

    fn zip_bits(&self, other: &GridSet, op: impl Fn(u64, u64) -> u64) -> Result<GridSet> {
        self.geom.check_same(&other.geom)?;
        Ok(GridSet { geom: self.geom, bits: self.bits.iter().zip(&other.bits).map(|(a, b)| op(*a, *b)).collect() })
    }

    pub fn union(&self, other: &GridSet) -> Result<GridSet> {
        self.zip_bits(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &GridSet) -> Result<GridSet> {
        self.zip_bits(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &GridSet) -> Result<GridSet> {
        self.zip_bits(other, |a, b| a & !b)
    }

    pub fn is_subset(&self, other: &GridSet) -> Result<bool> {
        Ok(self.difference(other)?.is_empty())
    }

    /// Cells within Euclidean distance `r` (center to center) of the set.
    pub fn dilate(&self, r: f64) -> GridSet {
        let d2 = sq_distance_to(&self.geom, |i| self.get_linear(i), false);
        let lim = (r / self.geom.h).powi(2) * (1.0 + 1e-12);
        let mut out = GridSet::empty(self.geom);
        for (i, &d) in d2.iter().enumerate() {
            if d <= lim {
                out.bits[i / 64] |= 1 << (i % 64);
            }
        }
        out
    }

    /// Diameter of the occupied cell centers.
    pub fn diameter(&self) -> f64 {
        cloud_diameter(&self.centers())
    }

    /// Fraction of `other`'s cells that are occupied here.
    pub fn coverage_of(&self, other: &GridSet) -> Result<f64> {
        let n = other.count();
        if n == 0 {
            return Ok(1.0);
        }
        Ok(self.intersection(other)?.count() as f64 / n as f64)
    }

    /// Binary PGM (P5): occupied cells 255, top image row = largest `x2`.
    /// The grid geometry is recorded in a comment so the file reads back.
    pub fn to_pgm(&self, header: Option<&str>) -> Vec<u8> {
        let g = &self.geom;
        let mut out = pgm_header(g, header);
        for iy in (0..g.ny).rev() {
            for ix in 0..g.nx {
                out.push(if self.contains_cell(ix, iy) { 255 } else { 0 });
            }
        }
        out
    }

    /// Reads a PGM written by [`GridSet::to_pgm`]; any nonzero pixel counts
    /// as occupied.
    pub fn from_pgm(data: &[u8]) -> Result<GridSet> {
        let (tokens, comments, body) = parse_pgm_header(data)?;
        let (nx, ny, maxval) = (tokens[0], tokens[1], tokens[2]);
        if maxval == 0 || maxval > 255 {
            return Err(Error::Parse(format!("unsupported maxval {maxval}")));
        }
        let grid_line = comments
            .iter()
            .find_map(|c| c.strip_prefix("grid "))
            .ok_or_else(|| Error::Parse("missing grid geometry comment".into()))?;
        let mut origin = None;
        let mut h = None;
        for field in grid_line.split_whitespace() {
            if let Some(v) = field.strip_prefix("origin=") {
                let (a, b) = v.split_once(',').ok_or_else(|| Error::Parse("bad origin".into()))?;
                origin = Some(PlanePoint::new(parse_f64(a)?, parse_f64(b)?));
            } else if let Some(v) = field.strip_prefix("h=") {
                h = Some(parse_f64(v)?);
            }
        }
        let geom = GridGeometry::new(
            origin.ok_or_else(|| Error::Parse("missing origin".into()))?,
            h.ok_or_else(|| Error::Parse("missing h".into()))?,
            nx,
            ny,
        )?;
        if body.len() < nx * ny {
            return Err(Error::Parse("truncated PGM raster".into()));
        }
        let mut set = GridSet::empty(geom);
        for row in 0..ny {
            for ix in 0..nx {
                if body[row * nx + ix] != 0 {
                    set.insert(ix, ny - 1 - row);
                }
            }
        }
        Ok(set)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// `P5` magic, comment lines and the grid geometry, up to the pixel data.
pub(crate) fn pgm_header(g: &GridGeometry, header: Option<&str>) -> Vec<u8> {
    let mut out = Vec::with_capacity(g.len() + 128);
    out.extend_from_slice(b"P5\n");
    if let Some(h) = header {
        for line in h.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(
        format!("# grid origin={},{} h={}\n{} {}\n255\n", g.origin.x1, g.origin.x2, g.h, g.nx, g.ny).as_bytes(),
    );
    out
}

/// Splits a binary PGM into `[width, height, maxval]`, its comment lines
/// and the raster bytes.
pub fn parse_pgm_header(data: &[u8]) -> Result<([usize; 3], Vec<String>, &[u8])> {
    if !data.starts_with(b"P5") {
        return Err(Error::Parse("not a binary PGM".into()));
    }
    let mut pos = 2;
    let mut tokens = Vec::new();
    let mut comments = Vec::new();
    while tokens.len() < 3 {
        match data.get(pos) {
            None => return Err(Error::Parse("truncated PGM header".into())),
            Some(b'#') => {
                let end = data[pos..].iter().position(|&c| c == b'\n').map_or(data.len(), |e| pos + e);
                comments.push(String::from_utf8_lossy(&data[pos + 1..end]).trim().to_string());
                pos = end + 1;
            }
            Some(c) if c.is_ascii_whitespace() => pos += 1,
            Some(_) => {
                let start = pos;
                while pos < data.len() && data[pos].is_ascii_digit() {
                    pos += 1;
                }
                if start == pos {
                    return Err(Error::Parse("unexpected byte in PGM header".into()));
                }
                let s = std::str::from_utf8(&data[start..pos]).map_err(|e| Error::Parse(e.to_string()))?;
                tokens.push(s.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?);
            }
        }
    }
    // exactly one whitespace byte separates maxval from the raster
    Ok(([tokens[0], tokens[1], tokens[2]], comments, &data[(pos + 1).min(data.len())..]))
}

fn stamp_ball(geom: &GridGeometry, atoms: &[AtomicU64], p: PlanePoint, radius: f64) {
    let h = geom.h;
    let set = |ix: usize, iy: usize| {
        let i = iy * geom.nx + ix;
        atoms[i / 64].fetch_or(1 << (i % 64), Ordering::Relaxed);
    };
    if let Some((ix, iy)) = geom.cell_of(p) {
        set(ix, iy);
    }
    let lo_x = ((p.x1 - radius - geom.origin.x1) / h - 0.5).floor().max(0.0);
    let hi_x = ((p.x1 + radius - geom.origin.x1) / h - 0.5).ceil().min(geom.nx as f64 - 1.0);
    let lo_y = ((p.x2 - radius - geom.origin.x2) / h - 0.5).floor().max(0.0);
    let hi_y = ((p.x2 + radius - geom.origin.x2) / h - 0.5).ceil().min(geom.ny as f64 - 1.0);
    if lo_x > hi_x || lo_y > hi_y {
        return;
    }
    let r2 = radius * radius;
    for iy in lo_y as usize..=hi_y as usize {
        for ix in lo_x as usize..=hi_x as usize {
            let c = geom.center(ix, iy);
            let dx = c.x1 - p.x1;
            let dy = c.x2 - p.x2;
            if dx * dx + dy * dy <= r2 {
                set(ix, iy);
            }
        }
    }
}

/// 1-D squared distance transform of sampled function `f` (lower envelope
/// of parabolas). Infinite entries are not sites.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for q in 0..f.len() {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    z.push(f64::INFINITY);
    let mut j = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let d = q as f64 - v[j] as f64;
        *o = d * d + f[v[j]];
    }
}

/// Squared distance, in cell units, from every cell center to the nearest
/// site. With `pad`, a one-cell ring of sites surrounds the grid (used for
/// distances to a complement, where outside the grid counts as outside the
/// set).
fn sq_distance_to<F>(geom: &GridGeometry, is_site: F, pad: bool) -> Vec<f64>
where
    F: Fn(usize) -> bool + Sync + Send,
{
    let off = usize::from(pad);
    let nx = geom.nx + 2 * off;
    let ny = geom.ny + 2 * off;
    let site = |ix: usize, iy: usize| -> bool {
        if pad && (ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1) {
            return true;
        }
        is_site((iy - off) * geom.nx + (ix - off))
    };
    let mut rows = vec![0.0f64; nx * ny];
    par::for_each_chunk_mut(&mut rows, nx, |iy, row| {
        let f: Vec<f64> = (0..nx).map(|ix| if site(ix, iy) { 0.0 } else { f64::INFINITY }).collect();
        let (mut v, mut z) = (Vec::new(), Vec::new());
        edt_1d(&f, row, &mut v, &mut z);
    });
    let cols = par::map_indices(nx, |ix| {
        let f: Vec<f64> = (0..ny).map(|iy| rows[iy * nx + ix]).collect();
        let mut out = vec![0.0; ny];
        let (mut v, mut z) = (Vec::new(), Vec::new());
        edt_1d(&f, &mut out, &mut v, &mut z);
        out
    });
    let mut d = vec![0.0f64; geom.len()];
    for iy in 0..geom.ny {
        for ix in 0..geom.nx {
            d[iy * geom.nx + ix] = cols[ix + off][iy + off];
        }
    }
    d
}

/// Symmetric Hausdorff distance between the cell-center clouds of `a` and
/// `b`. Two empty sets are at distance 0, an empty and a nonempty one at
/// infinity.
pub fn hausdorff_distance(a: &GridSet, b: &GridSet) -> Result<f64> {
    a.geom.check_same(&b.geom)?;
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(f64::INFINITY),
        _ => {}
    }
    Ok(directed(a, b).max(directed(b, a)))
}

/// `max_{x ∈ a} d(x, b)` over cell centers.
fn directed(a: &GridSet, b: &GridSet) -> f64 {
    let d2 = sq_distance_to(&b.geom, |i| b.get_linear(i), false);
    let worst = a.cells().map(|(ix, iy)| d2[a.index(ix, iy)]).fold(0.0f64, f64::max);
    worst.sqrt() * a.geom.h
}

/// Signed clearance of `a` inside `b`.
///
/// If every occupied cell of `a` is in `b`, returns
/// `min_{x ∈ a} d(x, bᶜ) − h/2 ≥ 0` (cells outside the grid count as `bᶜ`):
/// the radius by which each cell of `a` can be dilated and stay in `b`, up to
/// one cell. Otherwise returns `−(max_{x ∈ a∖b} d(x, b) + h/2) < 0`.
pub fn inclusion_margin(a: &GridSet, b: &GridSet) -> Result<f64> {
    a.geom.check_same(&b.geom)?;
    let h = a.geom.h;
    if a.is_empty() {
        return Ok(f64::INFINITY);
    }
    let outside = a.difference(b)?;
    if !outside.is_empty() {
        if b.is_empty() {
            return Ok(f64::NEG_INFINITY);
        }
        return Ok(-(directed(&outside, b) + 0.5 * h));
    }
    let d2 = sq_distance_to(&a.geom, |i| !b.get_linear(i), true);
    let nearest = a.cells().map(|(ix, iy)| d2[a.index(ix, iy)]).fold(f64::INFINITY, f64::min);
    Ok(nearest.sqrt() * h - 0.5 * h)
}
