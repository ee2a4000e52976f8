//! Discrete disk geometry around an input cell.
//!
//! The output plane is tiled by unit cells indexed by their centers. Around
//! an input cell at the origin, the circle of integer radius `b_hat` splits
//! cells into three classes:
//!
//! - pure high: the cell center lies in or on the circle;
//! - pure low: the closed cell square neither intersects the circle nor lies
//!   inside it;
//! - mixed: the square intersects the circle but its center is strictly
//!   outside.
//!
//! Classification is done with exact integer arithmetic on doubled
//! coordinates, so there are no tolerance knobs; the brute-force classifier
//! defined here is authoritative. Closed-form counterparts (mixed-cell index
//! formulas, pure-cell counts, the pure-low area) are provided as
//! cross-checks; where the printed closed forms disagree with enumeration at
//! degenerate radii, enumeration wins and the discrepancy is reported.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{Error, Result};

/// Fractions of mixed cells are kept strictly positive; far mixed cells whose
/// shrunken rectangle degenerates are clamped to this floor.
const MIN_SHRUNK_FRACTION: f64 = 1e-12;

/// The discretization of a square spatial domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    domain_side: f64,
    cell_side: f64,
    cells_per_side: usize,
}

impl GridSpec {
    /// Builds a grid from the domain side length `l` and cell side `g`.
    /// The number of cells per side is `floor(l / g)`.
    pub fn new(domain_side: f64, cell_side: f64) -> Result<Self> {
        crate::error::ensure_positive(domain_side, "domain_side")?;
        crate::error::ensure_positive(cell_side, "cell_side")?;
        let d = (domain_side / cell_side).floor() as usize;
        if d < 1 {
            return Err(Error::TooSmall {
                name: "cells_per_side",
                min: 1,
                value: d as i64,
            });
        }
        Ok(GridSpec {
            domain_side,
            cell_side,
            cells_per_side: d,
        })
    }

    /// Builds a grid with exactly `d` cells per side, `g = l / d`.
    pub fn with_cells(domain_side: f64, d: usize) -> Result<Self> {
        crate::error::ensure_positive(domain_side, "domain_side")?;
        if d < 1 {
            return Err(Error::TooSmall {
                name: "cells_per_side",
                min: 1,
                value: d as i64,
            });
        }
        Ok(GridSpec {
            domain_side,
            cell_side: domain_side / d as f64,
            cells_per_side: d,
        })
    }

    pub fn domain_side(&self) -> f64 {
        self.domain_side
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    /// Number of input cells, `d * d`.
    pub fn cell_count(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        let d = self.cells_per_side as i32;
        c.x >= 0 && c.x < d && c.y >= 0 && c.y < d
    }

    /// Center of a cell in length units, relative to the domain origin.
    /// Valid for relative offsets as well.
    pub fn cell_center(&self, c: CellIndex) -> (f64, f64) {
        (
            (c.x as f64 + 0.5) * self.cell_side,
            (c.y as f64 + 0.5) * self.cell_side,
        )
    }

    /// Flat row-major index of an input cell.
    pub fn flat_index(&self, c: CellIndex) -> Option<usize> {
        if self.contains(c) {
            Some(c.y as usize * self.cells_per_side + c.x as usize)
        } else {
            None
        }
    }

    pub fn cell_at(&self, flat: usize) -> CellIndex {
        CellIndex::new(
            (flat % self.cells_per_side) as i32,
            (flat / self.cells_per_side) as i32,
        )
    }

    /// All input cells in row-major order.
    pub fn input_cells(&self) -> Vec<CellIndex> {
        (0..self.cell_count()).map(|i| self.cell_at(i)).collect()
    }
}

/// A cell index in cell units. May be negative when used as a relative
/// offset from an input cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub x: i32,
    pub y: i32,
}

impl CellIndex {
    pub const fn new(x: i32, y: i32) -> Self {
        CellIndex { x, y }
    }

    /// Squared distance between cell centers, in cell units.
    pub fn dist2(&self, other: CellIndex) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        dx * dx + dy * dy
    }
}

impl std::ops::Sub for CellIndex {
    type Output = CellIndex;
    fn sub(self, rhs: CellIndex) -> CellIndex {
        CellIndex::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Add for CellIndex {
    type Output = CellIndex;
    fn add(self, rhs: CellIndex) -> CellIndex {
        CellIndex::new(self.x + rhs.x, self.y + rhs.y)
    }
}

/// Classification of an output cell relative to the disk around an input
/// cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    PureHigh,
    PureLow,
    Mixed,
}

/// Classifies the cell at `offset` against the circle of radius `b_hat`
/// centered on the origin cell. Exact: all comparisons are between integers
/// (doubled coordinates keep the half-unit square corners integral).
pub fn classify_cell(offset: CellIndex, b_hat: u32) -> CellClass {
    let x = offset.x.unsigned_abs() as i64;
    let y = offset.y.unsigned_abs() as i64;
    let b = b_hat as i64;
    if x * x + y * y <= b * b {
        return CellClass::PureHigh;
    }
    // Closest point of the closed square [x-1/2, x+1/2] x [y-1/2, y+1/2] to
    // the origin, in doubled coordinates.
    let cx = (2 * x - 1).max(0);
    let cy = (2 * y - 1).max(0);
    if cx * cx + cy * cy <= 4 * b * b {
        CellClass::Mixed
    } else {
        CellClass::PureLow
    }
}

/// Shrunken-rectangle fraction for `offset` against radius `b_hat`, without
/// the mixed-cell precondition. Returns 1 when the center is on or inside
/// the circle. Used internally where classification is already known.
pub(crate) fn shrink_fraction(offset: CellIndex, b_hat: u32) -> f64 {
    let ax = offset.x.unsigned_abs() as f64;
    let ay = offset.y.unsigned_abs() as f64;
    let r = ax.hypot(ay);
    if r <= b_hat as f64 {
        return 1.0;
    }
    let delta = b_hat as f64 / r - 1.0;
    let fx = (delta * ax + 0.5).max(0.0);
    let fy = (delta * ay + 0.5).max(0.0);
    (4.0 * fx * fy).clamp(MIN_SHRUNK_FRACTION, 1.0)
}

/// Area fraction of the high-probability part of a mixed cell: the shrunken
/// rectangle `4 (dx + 1/2)(dy + 1/2)` with `d = b_hat / |offset| - 1`,
/// clamped to (0, 1]. Rejects cells that are not mixed.
pub fn shrunken_area(offset: CellIndex, b_hat: u32) -> Result<f64> {
    if classify_cell(offset, b_hat) != CellClass::Mixed {
        return Err(Error::NotMixed(offset));
    }
    Ok(shrink_fraction(offset, b_hat))
}

/// High-probability fraction of the first diagonal cell beyond the pure-high
/// diagonal run: `4 (b' - floor(b'))^2` when the fractional part of
/// `b' = b_hat / sqrt(2) - 1/2` is below one half, else the whole cell.
pub fn diagonal_mixed_area(b_hat: u32) -> f64 {
    let b_prime = b_hat as f64 / SQRT_2 - 0.5;
    let frac = b_prime - b_prime.floor();
    if frac < 0.5 {
        4.0 * frac * frac
    } else {
        1.0
    }
}

/// Index of the last pure-high diagonal cell, `floor(b_hat / sqrt(2) - 1/2)`.
pub fn diagonal_pure_run(b_hat: u32) -> u32 {
    (b_hat as f64 / SQRT_2 - 0.5).floor() as u32
}

/// Mixed cells strictly between directions 0 and pi/4 (`x > y >= 1`),
/// enumerated with the authoritative classifier, in row order.
pub fn strict_quarter_mixed(b_hat: u32) -> Vec<CellIndex> {
    let b = b_hat as i32;
    let mut cells = Vec::new();
    for y in 1..=b {
        for x in (y + 1)..=b {
            let c = CellIndex::new(x, y);
            if classify_cell(c, b_hat) == CellClass::Mixed {
                cells.push(c);
            }
        }
    }
    cells.sort_by_key(|c| (c.y, c.x));
    cells
}

/// Strict-quarter mixed cells from the closed-form index formula
/// `(ceil(sqrt(b^2 - (i - 1/2)^2) - 1/2), i)`. Listed cells whose center
/// falls on or inside the circle are pure high, not mixed, and are dropped;
/// the printed formula does not handle lattice points on the circle (3-4-5
/// and 6-8-10 triples within radius 12).
pub fn strict_quarter_mixed_formula(b_hat: u32) -> Vec<CellIndex> {
    let (raw, _) = strict_quarter_formula_raw(b_hat);
    raw.into_iter()
        .filter(|c| classify_cell(*c, b_hat) != CellClass::PureHigh)
        .collect()
}

/// Raw closed-form strict-quarter mixed list and its printed count, before
/// the center-on-circle correction.
fn strict_quarter_formula_raw(b_hat: u32) -> (Vec<CellIndex>, i64) {
    let b = b_hat as f64;
    let b_prime = b / SQRT_2 - 0.5;
    let h = b_prime.ceil();
    let r1 = b_prime.floor() * SQRT_2 + FRAC_1_SQRT_2;
    let r = (r1 * r1 + 1.0 + SQRT_2 * r1).sqrt();
    let count = h as i64 - (r / b).floor() as i64;
    let mut cells = Vec::new();
    for i in 1..=count.max(0) {
        let yi = i as f64 - 0.5;
        let x = ((b * b - yi * yi).sqrt() - 0.5).ceil() as i32;
        cells.push(CellIndex::new(x, i as i32));
    }
    (cells, count)
}

/// Number of pure-high cells strictly between directions 0 and pi/4
/// (`x > y >= 1`), by enumeration.
pub fn strict_quarter_pure_count(b_hat: u32) -> usize {
    let b = b_hat as i64;
    let mut count = 0usize;
    for y in 1..=b {
        for x in (y + 1)..=b {
            if x * x + y * y <= b * b {
                count += 1;
            }
        }
    }
    count
}

/// Enumerated strict-quarter pure-high count next to the printed closed
/// form, with a disagreement flag. The closed form overcounts at some radii
/// (17 against 13 at radius 7); enumeration defines behavior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PureCountCheck {
    pub enumerated: usize,
    pub closed_form: i64,
}

impl PureCountCheck {
    pub fn agrees(&self) -> bool {
        self.closed_form >= 0 && self.enumerated == self.closed_form as usize
    }
}

/// Evaluates the printed pure-count closed form alongside enumeration.
pub fn strict_quarter_pure_check(b_hat: u32) -> PureCountCheck {
    let (raw_cells, raw_count) = strict_quarter_formula_raw(b_hat);
    let h = (b_hat as f64 / SQRT_2 - 0.5).ceil() as i64;
    let sum_x: i64 = raw_cells.iter().map(|c| c.x as i64).sum();
    let closed_form = h * (h - 2 * raw_count - 1) / 2 + sum_x;
    PureCountCheck {
        enumerated: strict_quarter_pure_count(b_hat),
        closed_form,
    }
}

/// Area of the pure-low region: `d^2 + 4 b d - 4 b - 1` cells, each of unit
/// area. The count is the same for every input cell because the output
/// domain contains the dilated disk of every input cell.
pub fn pure_low_area(d: usize, b_hat: u32) -> f64 {
    let d = d as i64;
    let b = b_hat as i64;
    (d * d + 4 * b * d - 4 * b - 1) as f64
}

/// All non-pure-low offsets around an input cell: the full pure-high list
/// and the mixed list with shrunken fractions.
pub(crate) fn high_mixed_offsets(b_hat: u32) -> (Vec<CellIndex>, Vec<(CellIndex, f64)>) {
    let r = b_hat as i32 + 1;
    let mut high = Vec::new();
    let mut mixed = Vec::new();
    for y in -r..=r {
        for x in -r..=r {
            let c = CellIndex::new(x, y);
            match classify_cell(c, b_hat) {
                CellClass::PureHigh => high.push(c),
                CellClass::Mixed => mixed.push((c, shrink_fraction(c, b_hat))),
                CellClass::PureLow => {}
            }
        }
    }
    (high, mixed)
}

/// The enumerated output domain for a `d x d` input grid and radius
/// `b_hat`: every cell some input cell can report, i.e. the input grid
/// dilated by the disk's cell footprint (a square ring with rounded
/// corners). Row-major order.
pub fn output_domain(d: usize, b_hat: u32) -> Vec<CellIndex> {
    let di = d as i32;
    let b = b_hat as i32;
    let mut cells = Vec::new();
    for y in -b..(di + b) {
        for x in -b..(di + b) {
            let ox = x - x.clamp(0, di - 1);
            let oy = y - y.clamp(0, di - 1);
            if classify_cell(CellIndex::new(ox, oy), b_hat) != CellClass::PureLow {
                cells.push(CellIndex::new(x, y));
            }
        }
    }
    cells
}

/// The per-mechanism geometric decomposition of the output plane around an
/// input cell: cell lists, high/low areas and the discrete reporting
/// densities.
#[derive(Clone, Debug)]
pub struct DiskPartition {
    b_hat: u32,
    epsilon: f64,
    d: usize,
    pure_high_cells: Vec<CellIndex>,
    mixed_cells: Vec<(CellIndex, f64)>,
    s_h: f64,
    s_l: f64,
    p_hat: f64,
    q_hat: f64,
    a_q_area: f64,
}

impl DiskPartition {
    pub fn b_hat(&self) -> u32 {
        self.b_hat
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Pure-high offsets relative to the input cell, whole cells.
    pub fn pure_high_cells(&self) -> &[CellIndex] {
        &self.pure_high_cells
    }

    /// Mixed offsets with their high-probability (shrunken) fractions.
    pub fn mixed_cells(&self) -> &[(CellIndex, f64)] {
        &self.mixed_cells
    }

    /// Total high-probability area in cell^2 units.
    pub fn s_h(&self) -> f64 {
        self.s_h
    }

    /// Total low-probability area in cell^2 units.
    pub fn s_l(&self) -> f64 {
        self.s_l
    }

    /// High reporting density per unit cell area.
    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    /// Low reporting density per unit cell area.
    pub fn q_hat(&self) -> f64 {
        self.q_hat
    }

    /// Area of the pure-low region.
    pub fn a_q_area(&self) -> f64 {
        self.a_q_area
    }
}

/// Assembles the disk partition for radius `b_hat`, privacy budget
/// `epsilon`, and grid side `d`.
///
/// The high area combines the origin cell, the axis runs, the diagonal runs
/// with their border fraction, and the eightfold-symmetric strict-quarter
/// pure cells and mixed fractions; the low area is the pure-low region plus
/// the mixed remainders. Densities follow from row normalization with the
/// high/low ratio pinned to `e^epsilon`.
pub fn build_disk_partition(b_hat: u32, epsilon: f64, d: usize) -> Result<DiskPartition> {
    if b_hat < 1 {
        return Err(Error::TooSmall {
            name: "b_hat",
            min: 1,
            value: b_hat as i64,
        });
    }
    if d < 1 {
        return Err(Error::TooSmall {
            name: "d",
            min: 1,
            value: d as i64,
        });
    }
    crate::error::ensure_positive(epsilon, "epsilon")?;

    let s_pi4 = diagonal_mixed_area(b_hat);
    let b_pi4 = diagonal_pure_run(b_hat) as f64;
    let quarter_mixed = strict_quarter_mixed(b_hat);
    let quarter_pure = strict_quarter_pure_count(b_hat) as f64;
    let shrunk_sum: f64 = quarter_mixed
        .iter()
        .map(|c| shrink_fraction(*c, b_hat))
        .sum();
    let remainder_sum: f64 = quarter_mixed
        .iter()
        .map(|c| 1.0 - shrink_fraction(*c, b_hat))
        .sum();
    let a_q = pure_low_area(d, b_hat);

    let s_h = 1.0 + 4.0 * (b_hat as f64 + b_pi4 + s_pi4) + 8.0 * (quarter_pure + shrunk_sum);
    let s_l = a_q + 4.0 * (1.0 - s_pi4) + 8.0 * remainder_sum;

    let e_eps = epsilon.exp();
    let z = s_h * e_eps + s_l;
    let p_hat = e_eps / z;
    let q_hat = 1.0 / z;

    let (pure_high_cells, mixed_cells) = high_mixed_offsets(b_hat);

    Ok(DiskPartition {
        b_hat,
        epsilon,
        d,
        pure_high_cells,
        mixed_cells,
        s_h,
        s_l,
        p_hat,
        q_hat,
        a_q_area: a_q,
    })
}
