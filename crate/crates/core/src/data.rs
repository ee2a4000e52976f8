//! Synthetic dataset generators, CSV point ingestion, and bucketizing.
//!
//! Generation is chunked with one derived RNG stream per fixed-size block,
//! so output is deterministic for a given seed regardless of thread count.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimate::Histogram;
use crate::exec::map_range;
use crate::grid::{CellIndex, GridSpec};

const GEN_BLOCK: usize = 8192;

/// An axis-aligned square region of the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    min_x: f64,
    min_y: f64,
    side: f64,
}

impl BoundingBox {
    pub fn new(min_x: f64, min_y: f64, side: f64) -> Result<Self> {
        crate::error::ensure_positive(side, "bounding box side")?;
        if !min_x.is_finite() || !min_y.is_finite() {
            return Err(Error::NonPositive {
                name: "bounding box origin",
                value: f64::NAN,
            });
        }
        Ok(BoundingBox { min_x, min_y, side })
    }

    pub fn min_x(&self) -> f64 {
        self.min_x
    }

    pub fn min_y(&self) -> f64 {
        self.min_y
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Closed on all edges; points on the maximum edge belong to the box.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x
            && x <= self.min_x + self.side
            && y >= self.min_y
            && y <= self.min_y + self.side
    }
}

/// Where the three blocks of the multi-center normal dataset sit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultiCenterMode {
    /// Blocks at (0,0), (2.5,2.5), (-2,1.5).
    Translated,
    /// All blocks at the origin.
    Origin,
}

/// A dataset recipe.
#[derive(Clone, Debug)]
pub enum DatasetSpec {
    /// Bivariate normal with the given means, variances and correlation,
    /// resampled until inside `range`.
    Gaussian {
        mean: (f64, f64),
        variance: (f64, f64),
        rho: f64,
        n: usize,
        range: BoundingBox,
    },
    /// Each coordinate drawn with density `1 / ((x+1) ln 2)` on `[0, 1)`,
    /// i.e. CDF `log2(1 + x)`, via the inverse transform `x = 2^u - 1`.
    SZipf { n: usize },
    /// Three equal normal blocks with correlations 0.5, 0 and -0.2.
    MultiNormal { n: usize, mode: MultiCenterMode },
    /// Points read from a CSV file, filtered to `bbox`.
    Csv { path: PathBuf, bbox: BoundingBox },
}

impl DatasetSpec {
    /// The standard normal recipe: 2-D N(0, 0, 1, 1, 0.5) on (-5, 5)^2.
    pub fn normal(n: usize) -> Result<Self> {
        Ok(DatasetSpec::Gaussian {
            mean: (0.0, 0.0),
            variance: (1.0, 1.0),
            rho: 0.5,
            n,
            range: BoundingBox::new(-5.0, -5.0, 10.0)?,
        })
    }

    /// The bounding box the dataset naturally lives in.
    pub fn bbox(&self) -> BoundingBox {
        match self {
            DatasetSpec::Gaussian { range, .. } => *range,
            DatasetSpec::SZipf { .. } => BoundingBox {
                min_x: 0.0,
                min_y: 0.0,
                side: 1.0,
            },
            DatasetSpec::MultiNormal { .. } => BoundingBox {
                min_x: -5.5,
                min_y: -5.5,
                side: 12.5,
            },
            DatasetSpec::Csv { bbox, .. } => *bbox,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DatasetSpec::Gaussian { variance, rho, n, .. } => {
                if *n == 0 {
                    return Err(Error::EmptyInput("n must be at least 1".into()));
                }
                crate::error::ensure_positive(variance.0, "variance")?;
                crate::error::ensure_positive(variance.1, "variance")?;
                crate::error::ensure_positive(1.0 - rho.abs(), "1 - |rho|")?;
                Ok(())
            }
            DatasetSpec::SZipf { n } | DatasetSpec::MultiNormal { n, .. } => {
                if *n == 0 {
                    Err(Error::EmptyInput("n must be at least 1".into()))
                } else {
                    Ok(())
                }
            }
            DatasetSpec::Csv { .. } => Ok(()),
        }
    }
}

/// Generates (or loads) the dataset. Deterministic for a fixed seed.
pub fn generate(spec: &DatasetSpec, seed: u64) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    match spec {
        DatasetSpec::Gaussian {
            mean,
            variance,
            rho,
            n,
            range,
        } => Ok(generate_blocks(*n, seed, |rng| {
            gaussian_point(*mean, *variance, *rho, *range, rng)
        })),
        DatasetSpec::SZipf { n } => Ok(generate_blocks(*n, seed, |rng| {
            let x = 2.0f64.powf(rng.random::<f64>()) - 1.0;
            let y = 2.0f64.powf(rng.random::<f64>()) - 1.0;
            (x, y)
        })),
        DatasetSpec::MultiNormal { n, mode } => {
            let centers = match mode {
                MultiCenterMode::Translated => [(0.0, 0.0), (2.5, 2.5), (-2.0, 1.5)],
                MultiCenterMode::Origin => [(0.0, 0.0); 3],
            };
            let rhos = [0.5, 0.0, -0.2];
            let bbox = spec.bbox();
            let mut points = Vec::with_capacity(*n);
            for (block, (center, rho)) in centers.iter().zip(rhos).enumerate() {
                // First block absorbs the remainder.
                let count = n / 3 + if block == 0 { n % 3 } else { 0 };
                points.extend(generate_blocks(
                    count,
                    seed ^ (block as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                    |rng| gaussian_point(*center, (1.0, 1.0), rho, bbox, rng),
                ));
            }
            Ok(points)
        }
        DatasetSpec::Csv { path, bbox } => Ok(load_points_csv(path, bbox)?.0),
    }
}

fn gaussian_point<R: Rng>(
    mean: (f64, f64),
    variance: (f64, f64),
    rho: f64,
    range: BoundingBox,
    rng: &mut R,
) -> (f64, f64) {
    let (sx, sy) = (variance.0.sqrt(), variance.1.sqrt());
    let t = (1.0 - rho * rho).sqrt();
    // Clip by resampling rather than projecting, keeping the density smooth
    // near the edges.
    loop {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let x = mean.0 + sx * z1;
        let y = mean.1 + sy * (rho * z1 + t * z2);
        if range.contains(x, y) {
            return (x, y);
        }
    }
}

/// Runs `draw` n times, one derived RNG stream per fixed-size block, blocks
/// concatenated in order.
fn generate_blocks<F>(n: usize, seed: u64, draw: F) -> Vec<(f64, f64)>
where
    F: Fn(&mut ChaCha8Rng) -> (f64, f64) + Sync + Send,
{
    let blocks = n.div_ceil(GEN_BLOCK);
    map_range(blocks, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64 + 1);
        let count = GEN_BLOCK.min(n - b * GEN_BLOCK);
        (0..count).map(|_| draw(&mut rng)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Reads "x,y" rows (optional single header row, detected by a non-numeric
/// first line), drops points outside `bbox`, and returns the kept points
/// with the dropped-row count.
pub fn load_points_csv(path: &Path, bbox: &BoundingBox) -> Result<(Vec<(f64, f64)>, usize)> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    let mut dropped = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let (fx, fy) = (fields.next().unwrap_or(""), fields.next().unwrap_or(""));
        match (fx.trim().parse::<f64>(), fy.trim().parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                if bbox.contains(x, y) {
                    points.push((x, y));
                } else {
                    dropped += 1;
                }
            }
            _ if idx == 0 => continue, // header row
            _ => {
                return Err(Error::Csv {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: format!("expected two numeric fields, got '{trimmed}'"),
                })
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{}: no points inside the bounding box ({dropped} dropped)",
            path.display()
        )));
    }
    Ok((points, dropped))
}

/// Writes points as "x,y" rows with a header. Byte-identical output for
/// identical input.
pub fn write_points_csv(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "x,y")?;
    for (x, y) in points {
        writeln!(out, "{x},{y}")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a histogram as "x_index,y_index,mass" rows.
pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "x_index,y_index,mass")?;
    let grid = hist.grid();
    for (i, &m) in hist.mass().iter().enumerate() {
        let c = grid.cell_at(i);
        writeln!(out, "{},{},{m}", c.x, c.y)?;
    }
    out.flush()?;
    Ok(())
}

/// Maps each point to its input cell, `floor((x - min) / g)` clamped to the
/// last cell so the maximum edge belongs to the grid, and returns the
/// normalized truth histogram with the per-point indices.
pub fn bucketize(
    points: &[(f64, f64)],
    grid: GridSpec,
    bbox: &BoundingBox,
) -> Result<(Histogram, Vec<CellIndex>)> {
    if points.is_empty() {
        return Err(Error::EmptyInput("no points to bucketize".into()));
    }
    let d = grid.cells_per_side() as i32;
    let g = grid.cell_side();
    let mut counts = vec![0u64; grid.cell_count()];
    let mut cells = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !bbox.contains(x, y) {
            return Err(Error::PointOutOfBounds(x, y));
        }
        let cx = (((x - bbox.min_x) / g).floor() as i32).clamp(0, d - 1);
        let cy = (((y - bbox.min_y) / g).floor() as i32).clamp(0, d - 1);
        let c = CellIndex::new(cx, cy);
        counts[grid.flat_index(c).expect("clamped index in range")] += 1;
        cells.push(c);
    }
    Ok((Histogram::from_counts(grid, &counts)?, cells))
}
