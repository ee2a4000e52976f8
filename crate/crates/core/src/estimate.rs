//! Collection of noisy reports and expectation-maximization reconstruction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{bucketize, BoundingBox};
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::grid::{CellIndex, GridSpec};
use crate::mechanism::{Kernel, ReportingMechanism};

const COLLECT_CHUNK: usize = 8192;

/// A probability distribution over grid cells, row-major.
#[derive(Clone, Debug)]
pub struct Histogram {
    grid: GridSpec,
    mass: Vec<f64>,
}

impl Histogram {
    pub fn new(grid: GridSpec, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.cell_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} masses for {} cells",
                mass.len(),
                grid.cell_count()
            )));
        }
        if mass.iter().any(|&m| m < 0.0 || !m.is_finite()) {
            return Err(Error::ShapeMismatch("negative mass".into()));
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Histogram { grid, mass })
    }

    pub fn from_counts(grid: GridSpec, counts: &[u64]) -> Result<Self> {
        if counts.len() != grid.cell_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} counts for {} cells",
                counts.len(),
                grid.cell_count()
            )));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput("all counts are zero".into()));
        }
        let mass = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Histogram { grid, mass })
    }

    pub fn uniform(grid: GridSpec) -> Self {
        let n = grid.cell_count();
        Histogram {
            grid,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_at(&self, c: CellIndex) -> Option<f64> {
        self.grid.flat_index(c).map(|i| self.mass[i])
    }

    /// Cells with strictly positive mass, with their centers in length
    /// units.
    pub fn support(&self) -> Vec<(CellIndex, f64)> {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| (self.grid.cell_at(i), m))
            .collect()
    }

    pub fn total_variation(&self, other: &Histogram) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0)
    }
}

/// Aggregated noisy reports over the output domain.
#[derive(Clone, Debug)]
pub struct NoisyCounts {
    output_cells: Vec<CellIndex>,
    counts: Vec<u64>,
    total: u64,
}

impl NoisyCounts {
    pub fn new(output_cells: Vec<CellIndex>, counts: Vec<u64>) -> Result<Self> {
        if output_cells.len() != counts.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} cells, {} counts",
                output_cells.len(),
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(NoisyCounts {
            output_cells,
            counts,
            total,
        })
    }

    pub fn output_cells(&self) -> &[CellIndex] {
        &self.output_cells
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Post-M-step smoothing of the iterate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Smoothing {
    #[default]
    None,
    /// Separable [1,2,1]/4 kernel per axis, zero-padded, renormalized.
    Binomial3x3,
}

/// EM stopping rule and options.
#[derive(Clone, Copy, Debug)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Relative log-likelihood change below which iteration stops.
    pub tolerance: f64,
    pub smoothing: Smoothing,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 10_000,
            tolerance: 1e-6,
            smoothing: Smoothing::None,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::TooSmall {
                name: "max_iterations",
                min: 1,
                value: self.max_iterations as i64,
            });
        }
        crate::error::ensure_positive(self.tolerance, "tolerance")?;
        Ok(())
    }
}

/// What happened inside one EM run.
#[derive(Clone, Copy, Debug)]
pub struct EmDiagnostics {
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub converged: bool,
    /// Whether the log-likelihood never decreased (beyond relative float
    /// slack) across iterations. Guaranteed with smoothing off.
    pub monotone: bool,
}

/// Bucketizes each point and randomizes it independently; returns counts
/// over the mechanism's output cells.
pub fn collect(
    points: &[(f64, f64)],
    bbox: &BoundingBox,
    mechanism: &ReportingMechanism,
    seed: u64,
) -> Result<NoisyCounts> {
    if points.is_empty() {
        return Err(Error::EmptyInput("no points to collect".into()));
    }
    let (_, cells) = bucketize(points, mechanism.grid(), bbox)?;
    collect_cells(&cells, mechanism, seed)
}

/// Randomizes already-bucketized input cells. Chunked with one RNG stream
/// per fixed-size block: deterministic for a given seed in both the
/// parallel and sequential builds.
pub fn collect_cells(
    cells: &[CellIndex],
    mechanism: &ReportingMechanism,
    seed: u64,
) -> Result<NoisyCounts> {
    if cells.is_empty() {
        return Err(Error::EmptyInput("no cells to collect".into()));
    }
    let kernel = mechanism.kernel();
    let m = kernel.n_outputs();
    let chunks = cells.len().div_ceil(COLLECT_CHUNK);
    let partials = map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64 + 1);
        let lo = c * COLLECT_CHUNK;
        let hi = (lo + COLLECT_CHUNK).min(cells.len());
        let mut counts = vec![0u64; m];
        for &cell in &cells[lo..hi] {
            let reported = mechanism.respond(cell, &mut rng)?;
            let idx = kernel
                .output_index(reported)
                .expect("reported cell inside the output domain");
            counts[idx] += 1;
        }
        Ok::<Vec<u64>, Error>(counts)
    });
    let mut counts = vec![0u64; m];
    for partial in partials {
        for (acc, c) in counts.iter_mut().zip(partial?) {
            *acc += c;
        }
    }
    NoisyCounts::new(kernel.output_cells().to_vec(), counts)
}

/// Maximum-likelihood inversion of the reporting kernel from noisy counts.
///
/// E-step responsibilities are proportional to `K[i->o] theta_i`; the
/// M-step sets `theta_i` to its expected share of the counts. Starts from
/// the uniform histogram and stops on relative log-likelihood change or the
/// iteration cap. With smoothing off the log-likelihood is non-decreasing.
pub fn em_estimate(
    counts: &NoisyCounts,
    kernel: &Kernel,
    config: &EmConfig,
) -> Result<(Histogram, EmDiagnostics)> {
    config.validate()?;
    if counts.output_cells() != kernel.output_cells() {
        return Err(Error::ShapeMismatch(
            "counts and kernel cover different output cells".into(),
        ));
    }
    if counts.total() == 0 {
        return Err(Error::EmptyInput("all counts are zero".into()));
    }
    let n_in = kernel.n_inputs();
    let m = kernel.n_outputs();
    let total = counts.total() as f64;

    // Column-major copy for the denominator pass.
    let cols: Vec<f64> = map_range(m, |o| (0..n_in).map(|i| kernel.row(i)[o]).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect();
    // Output cells that actually received reports.
    let hit: Vec<(usize, f64)> = counts
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(o, &c)| (o, c as f64))
        .collect();

    let d = kernel.grid().cells_per_side();
    let mut theta = vec![1.0 / n_in as f64; n_in];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut converged = false;
    let mut iterations = 0;
    let mut final_ll = f64::NEG_INFINITY;

    for iter in 0..config.max_iterations {
        iterations = iter + 1;
        // Denominators D_o = sum_i K[i->o] theta_i over hit outputs, and the
        // count/denominator ratios.
        let ratios: Vec<(usize, f64)> = {
            let theta_ref = &theta;
            map_range(hit.len(), |h| {
                let (o, c) = hit[h];
                let col = &cols[o * n_in..(o + 1) * n_in];
                let denom: f64 = col.iter().zip(theta_ref).map(|(k, t)| k * t).sum();
                (o, c / denom)
            })
        };
        let ll: f64 = hit
            .iter()
            .zip(&ratios)
            .map(|(&(_, c), &(_, r))| c * (c / r).ln())
            .sum();

        if ll + 1e-9 * ll.abs() < prev_ll {
            monotone = false;
        }
        let rel_change = (ll - prev_ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        final_ll = ll;
        if iter > 0 && rel_change < config.tolerance {
            converged = true;
            break;
        }
        prev_ll = ll;

        // M-step.
        let mut next: Vec<f64> = {
            let theta_ref = &theta;
            let ratios_ref = &ratios;
            map_range(n_in, |i| {
                let row = kernel.row(i);
                let s: f64 = ratios_ref.iter().map(|&(o, r)| row[o] * r).sum();
                theta_ref[i] * s / total
            })
        };
        if config.smoothing == Smoothing::Binomial3x3 {
            smooth_binomial_3x3(&mut next, d);
        }
        let sum: f64 = next.iter().sum();
        for t in &mut next {
            *t /= sum;
        }
        theta = next;
    }

    let sum: f64 = theta.iter().sum();
    for t in &mut theta {
        *t /= sum;
    }
    let hist = Histogram {
        grid: kernel.grid(),
        mass: theta,
    };
    Ok((
        hist,
        EmDiagnostics {
            iterations,
            final_log_likelihood: final_ll,
            converged,
            monotone,
        },
    ))
}

/// Separable [1,2,1]/4 blur over the d x d iterate, zero-padded at the
/// boundary; caller renormalizes.
fn smooth_binomial_3x3(theta: &mut [f64], d: usize) {
    let at = |x: usize, y: usize| y * d + x;
    let mut pass = vec![0.0; theta.len()];
    for y in 0..d {
        for x in 0..d {
            let mut v = 0.5 * theta[at(x, y)];
            if x > 0 {
                v += 0.25 * theta[at(x - 1, y)];
            }
            if x + 1 < d {
                v += 0.25 * theta[at(x + 1, y)];
            }
            pass[at(x, y)] = v;
        }
    }
    for y in 0..d {
        for x in 0..d {
            let mut v = 0.5 * pass[at(x, y)];
            if y > 0 {
                v += 0.25 * pass[at(x, y - 1)];
            }
            if y + 1 < d {
                v += 0.25 * pass[at(x, y + 1)];
            }
            theta[at(x, y)] = v;
        }
    }
}

/// End-to-end result of one collection-and-reconstruction run.
#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub estimate: Histogram,
    pub truth: Histogram,
    pub diagnostics: EmDiagnostics,
}

/// Wires bucketize -> randomize -> EM and also returns the true bucketized
/// histogram for metric computation.
pub fn run_pipeline(
    points: &[(f64, f64)],
    bbox: &BoundingBox,
    mechanism: &ReportingMechanism,
    em: &EmConfig,
    seed: u64,
) -> Result<PipelineResult> {
    let (truth, cells) = bucketize(points, mechanism.grid(), bbox)?;
    let counts = collect_cells(&cells, mechanism, seed)?;
    let (estimate, diagnostics) = em_estimate(&counts, mechanism.kernel(), em)?;
    Ok(PipelineResult {
        estimate,
        truth,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{build_kernel, Epsilon, MechanismKind};
    use approx::assert_relative_eq;

    fn eps(v: f64) -> Epsilon {
        Epsilon::new(v).unwrap()
    }

    /// A 2-cell system embedded in a d=2 grid: the two extra cells are
    /// isolated (identity rows, zero counts) so EM zeroes them out.
    fn two_cell_kernel(rows: [[f64; 2]; 2]) -> Kernel {
        let grid = GridSpec::with_cells(2.0, 2).unwrap();
        let probs = vec![
            rows[0][0], rows[0][1], 0.0, 0.0,
            rows[1][0], rows[1][1], 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        Kernel::from_rows(MechanismKind::Grr, 1.0, grid, grid.input_cells(), probs).unwrap()
    }

    #[test]
    fn identity_kernel_recovers_empirical_counts() {
        let grid = GridSpec::with_cells(2.0, 2).unwrap();
        let k = build_kernel(MechanismKind::Grr, grid, 1, eps(40.0)).unwrap();
        let counts = NoisyCounts::new(k.output_cells().to_vec(), vec![10, 20, 30, 40]).unwrap();
        let (hist, diag) = em_estimate(&counts, &k, &EmConfig::default()).unwrap();
        for (m, expect) in hist.mass().iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert_relative_eq!(m, &expect, epsilon = 1e-6);
        }
        assert!(diag.monotone);
        assert!(diag.converged);
    }

    #[test]
    fn two_cell_system_inverts_towards_closed_form() {
        let k = two_cell_kernel([[0.75, 0.25], [0.25, 0.75]]);
        let counts = NoisyCounts::new(k.output_cells().to_vec(), vec![75, 25, 0, 0]).unwrap();
        let config = EmConfig {
            max_iterations: 30_000,
            tolerance: 1e-300,
            smoothing: Smoothing::None,
        };
        let (hist, diag) = em_estimate(&counts, &k, &config).unwrap();
        // The MLE sits on the boundary [1, 0]; EM approaches it sublinearly.
        assert!(hist.mass()[0] > 0.9999, "theta = {:?}", hist.mass());
        assert!(diag.monotone);
    }

    #[test]
    fn uniform_kernel_is_a_fixed_point() {
        let grid = GridSpec::with_cells(2.0, 2).unwrap();
        let probs = vec![0.25; 16];
        let k = Kernel::from_rows(MechanismKind::Grr, 1.0, grid, grid.input_cells(), probs)
            .unwrap();
        let counts = NoisyCounts::new(k.output_cells().to_vec(), vec![70, 30, 40, 10]).unwrap();
        let (hist, _) = em_estimate(&counts, &k, &EmConfig::default()).unwrap();
        for &m in hist.mass() {
            assert_relative_eq!(m, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn em_rejects_bad_shapes() {
        let k = two_cell_kernel([[0.75, 0.25], [0.25, 0.75]]);
        let wrong = NoisyCounts::new(
            vec![
                CellIndex::new(5, 5),
                CellIndex::new(6, 6),
                CellIndex::new(7, 7),
                CellIndex::new(8, 8),
            ],
            vec![1, 1, 1, 1],
        )
        .unwrap();
        assert!(em_estimate(&wrong, &k, &EmConfig::default()).is_err());
        let zero = NoisyCounts::new(k.output_cells().to_vec(), vec![0, 0, 0, 0]).unwrap();
        assert!(em_estimate(&zero, &k, &EmConfig::default()).is_err());
        let cfg = EmConfig {
            tolerance: 0.0,
            ..EmConfig::default()
        };
        let counts = NoisyCounts::new(k.output_cells().to_vec(), vec![75, 25, 0, 0]).unwrap();
        assert!(em_estimate(&counts, &k, &cfg).is_err());
    }

    #[test]
    fn smoothing_spreads_a_point_mass() {
        let mut theta = vec![0.0; 25];
        theta[12] = 1.0;
        smooth_binomial_3x3(&mut theta, 5);
        assert_relative_eq!(theta[12], 0.25, epsilon = 1e-12);
        assert_relative_eq!(theta[11], 0.125, epsilon = 1e-12);
        assert_relative_eq!(theta[6], 0.0625, epsilon = 1e-12);
        let sum: f64 = theta.iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12); // interior mass kept
    }

    #[test]
    fn collect_counts_every_point_once() {
        let grid = GridSpec::with_cells(1.0, 3).unwrap();
        let bbox = BoundingBox::new(0.0, 0.0, 1.0).unwrap();
        let mech = ReportingMechanism::new(MechanismKind::Dam, grid, 1, eps(1.0)).unwrap();
        let counts = collect(&[(0.5, 0.5)], &bbox, &mech, 1).unwrap();
        assert_eq!(counts.total(), 1);
        assert_eq!(counts.counts().iter().sum::<u64>(), 1);
        assert_eq!(counts.counts().iter().filter(|&&c| c > 0).count(), 1);

        assert!(collect(&[], &bbox, &mech, 1).is_err());
    }

    #[test]
    fn collect_truthful_limit_matches_bucketized_counts() {
        let grid = GridSpec::with_cells(1.0, 2).unwrap();
        let bbox = BoundingBox::new(0.0, 0.0, 1.0).unwrap();
        // Enormous budget: GRR reports the true cell essentially always.
        let mech = ReportingMechanism::new(MechanismKind::Grr, grid, 1, eps(40.0)).unwrap();
        let pts: Vec<(f64, f64)> = (0..500)
            .map(|i| (0.1 + 0.8 * ((i % 7) as f64 / 7.0), 0.2 + 0.6 * ((i % 5) as f64 / 5.0)))
            .collect();
        let (truth, cells) = bucketize(&pts, grid, &bbox).unwrap();
        let counts = collect_cells(&cells, &mech, 3).unwrap();
        for (i, &c) in counts.counts().iter().enumerate() {
            let expected = truth.mass()[i] * pts.len() as f64;
            assert_relative_eq!(c as f64, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn collect_is_deterministic_per_seed() {
        let grid = GridSpec::with_cells(1.0, 3).unwrap();
        let bbox = BoundingBox::new(0.0, 0.0, 1.0).unwrap();
        let mech = ReportingMechanism::new(MechanismKind::Dam, grid, 2, eps(2.0)).unwrap();
        let pts: Vec<(f64, f64)> = (0..20_000)
            .map(|i| ((i % 100) as f64 / 100.0, (i % 97) as f64 / 97.0))
            .collect();
        let a = collect(&pts, &bbox, &mech, 42).unwrap();
        let b = collect(&pts, &bbox, &mech, 42).unwrap();
        assert_eq!(a.counts(), b.counts());
        let c = collect(&pts, &bbox, &mech, 43).unwrap();
        assert_ne!(a.counts(), c.counts());
    }

    #[test]
    fn pipeline_truthful_limit_recovers_truth() {
        let grid = GridSpec::with_cells(1.0, 3).unwrap();
        let bbox = BoundingBox::new(0.0, 0.0, 1.0).unwrap();
        let mech = ReportingMechanism::new(MechanismKind::Grr, grid, 1, eps(40.0)).unwrap();
        let pts: Vec<(f64, f64)> = (0..2000)
            .map(|i| {
                let t = i as f64 / 2000.0;
                (t, (t * 7.3).fract())
            })
            .collect();
        let result = run_pipeline(&pts, &bbox, &mech, &EmConfig::default(), 5).unwrap();
        let tv = result.estimate.total_variation(&result.truth).unwrap();
        assert!(tv < 1e-3, "tv = {tv}");
        assert!(result.diagnostics.monotone);
    }
}
