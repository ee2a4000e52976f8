//! Randomized reporting mechanisms.
//!
//! Two spatial mechanisms share one structure: the reporting density is a
//! wave function of the offset between the reported and true value, bounded
//! between a low density `q` and `e^eps * q`, uniform `q` outside the
//! high-probability radius `b`. The disk-area mechanism (DAM) is constant
//! inside the disk; the hybrid uniform-exponential mechanism (HUEM) decays
//! exponentially with distance inside it. A categorical generalized
//! randomized response (GRR) over the flat cell domain serves as the
//! baseline comparator.
//!
//! Discrete kernel rows are exact translates of one another (the output
//! domain is never clipped), so every row sums to one with the same
//! densities.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::grid::{
    self, build_disk_partition, classify_cell, output_domain, CellClass, CellIndex, DiskPartition,
    GridSpec,
};

/// A validated privacy budget, `epsilon > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        crate::error::ensure_positive(value, "epsilon")?;
        Ok(Epsilon(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn exp(self) -> f64 {
        self.0.exp()
    }
}

/// Which reporting mechanism to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MechanismKind {
    Dam,
    Huem,
    Grr,
}

impl std::str::FromStr for MechanismKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dam" => Ok(MechanismKind::Dam),
            "huem" => Ok(MechanismKind::Huem),
            "grr" => Ok(MechanismKind::Grr),
            other => Err(format!(
                "unknown mechanism '{other}' (expected dam, huem, grr)"
            )),
        }
    }
}

impl std::fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MechanismKind::Dam => "dam",
            MechanismKind::Huem => "huem",
            MechanismKind::Grr => "grr",
        })
    }
}

/// Continuous disk-area densities for a square domain of side `l`:
/// `p = e^eps / (pi b^2 e^eps + 4 l b + l^2)` and `q = p e^-eps`.
pub fn dam_params(b: f64, epsilon: Epsilon, l: f64) -> Result<(f64, f64)> {
    crate::error::ensure_positive(b, "b")?;
    crate::error::ensure_positive(l, "l")?;
    let e_eps = epsilon.exp();
    let q = 1.0 / (PI * b * b * e_eps + 4.0 * l * b + l * l);
    Ok((e_eps * q, q))
}

/// Low density of the hybrid uniform-exponential mechanism on the unit
/// square: `q = eps^2 / (2 pi (e^eps - 1 - eps) b^2 + 4 eps^2 b + eps^2)`.
pub fn huem_q(b: f64, epsilon: Epsilon) -> Result<f64> {
    huem_q_general(b, epsilon, 1.0)
}

/// HUEM low density for a square domain of side `l`; the uniform part of
/// the normalization scales the same way as for the disk mechanism.
pub fn huem_q_general(b: f64, epsilon: Epsilon, l: f64) -> Result<f64> {
    crate::error::ensure_positive(b, "b")?;
    crate::error::ensure_positive(l, "l")?;
    let eps = epsilon.value();
    // m1 = e^eps - 1 - eps, kept accurate near zero via expm1.
    let m1 = eps.exp_m1() - eps;
    let e2 = eps * eps;
    Ok(e2 / (2.0 * PI * m1 * b * b + e2 * (4.0 * l * b + l * l)))
}

/// Radius maximizing the mutual-information upper bound between input and
/// output, exactly linear in the domain side `l`. Below `eps = 1e-6` the
/// analytic zero-budget limit `(2 + sqrt(4 + pi)) / pi` is returned to
/// avoid 0/0.
pub fn optimal_b(epsilon: Epsilon, l: f64) -> Result<f64> {
    crate::error::ensure_positive(l, "l")?;
    Ok(l * optimal_b_unit(epsilon.value()))
}

/// Integer cell radius for a grid: `floor(multiplier * b_opt / g)`, clamped
/// to at least one cell. `multiplier = 1` gives the default operating
/// point.
pub fn b_hat_for(epsilon: Epsilon, grid: GridSpec, multiplier: f64) -> Result<u32> {
    crate::error::ensure_positive(multiplier, "multiplier")?;
    let b = multiplier * optimal_b(epsilon, grid.domain_side())?;
    Ok(((b / grid.cell_side()).floor() as u32).max(1))
}

fn optimal_b_unit(eps: f64) -> f64 {
    if eps < 1e-6 {
        return (2.0 + (4.0 + PI).sqrt()) / PI;
    }
    if eps > 300.0 {
        // Asymptotic form; the squared terms would overflow.
        let k = eps - 1.0;
        return (2.0 * k + (4.0 * k * k + PI * k).sqrt()) * (-eps).exp() / PI;
    }
    let em1 = eps.exp_m1();
    let m1 = em1 - eps;
    let m2 = eps + (eps - 1.0) * em1;
    let e_eps = em1 + 1.0;
    (2.0 * m2 + (4.0 * m2 * m2 + PI * e_eps * m1 * m2).sqrt()) / (PI * e_eps * m1)
}

/// Row-stochastic conditional-probability matrix from input cells to output
/// cells.
#[derive(Clone, Debug)]
pub struct Kernel {
    kind: MechanismKind,
    epsilon: f64,
    grid: GridSpec,
    input_cells: Vec<CellIndex>,
    output_cells: Vec<CellIndex>,
    probs: Vec<f64>,
    lookup: OutputLookup,
}

/// Dense cell-index-to-column map over the output bounding box.
#[derive(Clone, Debug)]
struct OutputLookup {
    min_x: i32,
    min_y: i32,
    width: i32,
    height: i32,
    slots: Vec<u32>,
}

impl OutputLookup {
    fn build(cells: &[CellIndex]) -> Self {
        let min_x = cells.iter().map(|c| c.x).min().unwrap_or(0);
        let min_y = cells.iter().map(|c| c.y).min().unwrap_or(0);
        let max_x = cells.iter().map(|c| c.x).max().unwrap_or(0);
        let max_y = cells.iter().map(|c| c.y).max().unwrap_or(0);
        let width = max_x - min_x + 1;
        let height = max_y - min_y + 1;
        let mut slots = vec![u32::MAX; (width * height) as usize];
        for (i, c) in cells.iter().enumerate() {
            slots[((c.y - min_y) * width + (c.x - min_x)) as usize] = i as u32;
        }
        OutputLookup {
            min_x,
            min_y,
            width,
            height,
            slots,
        }
    }

    fn get(&self, c: CellIndex) -> Option<usize> {
        let dx = c.x - self.min_x;
        let dy = c.y - self.min_y;
        if dx < 0 || dy < 0 || dx >= self.width || dy >= self.height {
            return None;
        }
        match self.slots[(dy * self.width + dx) as usize] {
            u32::MAX => None,
            s => Some(s as usize),
        }
    }
}

impl Kernel {
    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The input grid this kernel randomizes.
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn n_inputs(&self) -> usize {
        self.input_cells.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_cells.len()
    }

    pub fn input_cells(&self) -> &[CellIndex] {
        &self.input_cells
    }

    pub fn output_cells(&self) -> &[CellIndex] {
        &self.output_cells
    }

    /// Reporting probabilities of one input cell over all output cells.
    pub fn row(&self, input: usize) -> &[f64] {
        let m = self.n_outputs();
        &self.probs[input * m..(input + 1) * m]
    }

    pub fn output_index(&self, c: CellIndex) -> Option<usize> {
        self.lookup.get(c)
    }

    /// Builds a kernel directly from rows over the grid's input cells;
    /// every row must be a probability vector. Also used for hand-made
    /// kernels in tests.
    pub fn from_rows(
        kind: MechanismKind,
        epsilon: f64,
        grid: GridSpec,
        output_cells: Vec<CellIndex>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let input_cells = grid.input_cells();
        if probs.len() != input_cells.len() * output_cells.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} probabilities for {} x {} cells",
                probs.len(),
                input_cells.len(),
                output_cells.len()
            )));
        }
        let m = output_cells.len();
        for (i, row) in probs.chunks(m).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} is not a probability vector (sum {sum})"
                )));
            }
        }
        let lookup = OutputLookup::build(&output_cells);
        Ok(Kernel {
            kind,
            epsilon,
            grid,
            input_cells,
            output_cells,
            probs,
            lookup,
        })
    }
}

/// Builds the discrete reporting kernel for the given mechanism.
///
/// DAM rows put the high density on every cell whose center falls in the
/// disk, the low density on pure-low cells, and the fraction-weighted blend
/// on mixed cells. HUEM rows stack fan-ring densities
/// `p_j = q e^((1-(j-1)/b) eps)` with ring-border cells blended by their
/// per-ring fractions; `q` solves row normalization. GRR reports the true
/// cell with probability `e^eps c` and any other with `c`,
/// `c = 1 / (e^eps + d^2 - 1)`, over the input domain itself. `b_hat` is
/// ignored for GRR.
pub fn build_kernel(
    kind: MechanismKind,
    grid: GridSpec,
    b_hat: u32,
    epsilon: Epsilon,
) -> Result<Kernel> {
    let d = grid.cells_per_side();
    match kind {
        MechanismKind::Grr => {
            let inputs = grid.input_cells();
            let n = inputs.len();
            let c = 1.0 / (epsilon.exp() + n as f64 - 1.0);
            let diag = epsilon.exp() * c;
            let probs = map_range(n, |i| {
                let mut row = vec![c; n];
                row[i] = diag;
                row
            })
            .into_iter()
            .flatten()
            .collect();
            Kernel::from_rows(kind, epsilon.value(), grid, inputs, probs)
        }
        MechanismKind::Dam => {
            let partition = build_disk_partition(b_hat, epsilon.value(), d)?;
            let outputs = output_domain(d, b_hat);
            let wave = WaveTable::dam(&partition);
            build_translated(kind, epsilon.value(), grid, outputs, &wave)
        }
        MechanismKind::Huem => {
            if b_hat < 1 {
                return Err(Error::TooSmall {
                    name: "b_hat",
                    min: 1,
                    value: b_hat as i64,
                });
            }
            let outputs = output_domain(d, b_hat);
            let wave = WaveTable::huem(b_hat, epsilon, outputs.len());
            build_translated(kind, epsilon.value(), grid, outputs, &wave)
        }
    }
}

/// Density of one row as a function of the output-minus-input offset,
/// tabulated over the non-uniform zone.
struct WaveTable {
    radius: i32,
    low: f64,
    densities: Vec<f64>,
}

impl WaveTable {
    fn dam(partition: &DiskPartition) -> WaveTable {
        let radius = partition.b_hat() as i32 + 1;
        let side = (2 * radius + 1) as usize;
        let p = partition.p_hat();
        let q = partition.q_hat();
        let mut densities = vec![q; side * side];
        let at = |c: &CellIndex| ((c.y + radius) * (2 * radius + 1) + (c.x + radius)) as usize;
        for c in partition.pure_high_cells() {
            densities[at(c)] = p;
        }
        for (c, s) in partition.mixed_cells() {
            densities[at(c)] = q + s * (p - q);
        }
        WaveTable {
            radius,
            low: q,
            densities,
        }
    }

    /// HUEM fan rings. Ring `j` spans radii `(j-1, j]` with density
    /// `q u_j`, `u_j = e^((1-(j-1)/b) eps)`. A cell's multiplier is
    /// `1 + sum_j (u_j - u_{j+1}) s_j` where `s_j` is its fraction inside
    /// circle `j`; a cell can straddle two ring borders (its diagonal
    /// exceeds the ring width), which the running sum handles.
    fn huem(b_hat: u32, epsilon: Epsilon, n_out: usize) -> WaveTable {
        let radius = b_hat as i32 + 1;
        let side = (2 * radius + 1) as usize;
        let eps = epsilon.value();
        let u: Vec<f64> = (1..=b_hat)
            .map(|j| ((1.0 - (j as f64 - 1.0) / b_hat as f64) * eps).exp())
            .collect();

        let mut multipliers = vec![1.0f64; side * side];
        let mut extra_mass = 0.0f64;
        for y in -radius..=radius {
            for x in -radius..=radius {
                let c = CellIndex::new(x, y);
                let mut w = 1.0;
                for kappa in 1..=b_hat {
                    let frac = match classify_cell(c, kappa) {
                        CellClass::PureHigh => 1.0,
                        CellClass::Mixed => grid::shrink_fraction(c, kappa),
                        CellClass::PureLow => 0.0,
                    };
                    let u_next = if kappa == b_hat {
                        1.0
                    } else {
                        u[kappa as usize]
                    };
                    w += (u[kappa as usize - 1] - u_next) * frac;
                }
                multipliers[((y + radius) * (2 * radius + 1) + (x + radius)) as usize] = w;
                extra_mass += w - 1.0;
            }
        }
        // Row normalization: q (n_out + extra multiplier mass) = 1. The
        // high zone never touches the output boundary, so one q fits every
        // row.
        let q = 1.0 / (n_out as f64 + extra_mass);
        let densities = multipliers.iter().map(|w| w * q).collect();
        WaveTable {
            radius,
            low: q,
            densities,
        }
    }

    fn density(&self, offset: CellIndex) -> f64 {
        if offset.x.abs() > self.radius || offset.y.abs() > self.radius {
            return self.low;
        }
        let side = 2 * self.radius + 1;
        self.densities[((offset.y + self.radius) * side + (offset.x + self.radius)) as usize]
    }
}

fn build_translated(
    kind: MechanismKind,
    epsilon: f64,
    grid: GridSpec,
    outputs: Vec<CellIndex>,
    wave: &WaveTable,
) -> Result<Kernel> {
    let inputs = grid.input_cells();
    let probs: Vec<f64> = map_range(inputs.len(), |i| {
        let v = inputs[i];
        outputs
            .iter()
            .map(|&u| wave.density(u - v))
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();
    Kernel::from_rows(kind, epsilon, grid, outputs, probs)
}

/// Samples noisy cells for one disk partition via the four-way region
/// split: pure low, mixed remainder, mixed shrunken, pure high, weighted
/// `<1, 1, e^eps, e^eps>` by area, then a uniform (pure regions) or
/// area-weighted (mixed) choice within the region. The resulting
/// distribution equals the corresponding kernel row exactly.
#[derive(Clone, Debug)]
pub struct GridSampler {
    grid: GridSpec,
    b_hat: u32,
    pure_high: Vec<CellIndex>,
    mixed: Vec<CellIndex>,
    mixed_cum: Vec<f64>,
    region_cum: [f64; 4],
    outputs: Vec<CellIndex>,
}

impl GridSampler {
    pub fn new(partition: &DiskPartition, grid: GridSpec) -> Result<Self> {
        if grid.cells_per_side() != partition.d() {
            return Err(Error::ShapeMismatch(format!(
                "partition built for d={}, grid has d={}",
                partition.d(),
                grid.cells_per_side()
            )));
        }
        let e_eps = partition.epsilon().exp();
        let pure_high = partition.pure_high_cells().to_vec();
        let mut mixed = Vec::with_capacity(partition.mixed_cells().len());
        let mut mixed_cum = Vec::with_capacity(partition.mixed_cells().len());
        let mut acc = 0.0;
        let mut shrunk_area = 0.0;
        let mut remainder_area = 0.0;
        for (c, s) in partition.mixed_cells() {
            mixed.push(*c);
            shrunk_area += s;
            remainder_area += 1.0 - s;
            acc += (1.0 - s) + s * e_eps;
            mixed_cum.push(acc);
        }
        let w1 = partition.a_q_area();
        let w2 = remainder_area;
        let w3 = shrunk_area * e_eps;
        let w4 = pure_high.len() as f64 * e_eps;
        let region_cum = [w1, w1 + w2, w1 + w2 + w3, w1 + w2 + w3 + w4];
        Ok(GridSampler {
            grid,
            b_hat: partition.b_hat(),
            pure_high,
            mixed,
            mixed_cum,
            region_cum,
            outputs: output_domain(partition.d(), partition.b_hat()),
        })
    }

    pub fn output_cells(&self) -> &[CellIndex] {
        &self.outputs
    }

    /// Randomizes one input cell into an output cell.
    pub fn grid_area_response<R: Rng>(&self, cell: CellIndex, rng: &mut R) -> Result<CellIndex> {
        if !self.grid.contains(cell) {
            return Err(Error::InvalidCell(cell));
        }
        let draw = rng.random::<f64>() * self.region_cum[3];
        let region = self.region_cum.iter().position(|&c| draw < c).unwrap_or(3);
        match region {
            0 => {
                // Uniform over pure-low cells, by rejection against the
                // high/mixed footprint around this input.
                loop {
                    let u = self.outputs[rng.random_range(0..self.outputs.len())];
                    if classify_cell(u - cell, self.b_hat) == CellClass::PureLow {
                        return Ok(u);
                    }
                }
            }
            1 | 2 => {
                let total = *self.mixed_cum.last().expect("mixed region sampled");
                let draw = rng.random::<f64>() * total;
                let j = self.mixed_cum.partition_point(|&c| c <= draw);
                Ok(cell + self.mixed[j.min(self.mixed.len() - 1)])
            }
            _ => Ok(cell + self.pure_high[rng.random_range(0..self.pure_high.len())]),
        }
    }
}

/// A ready-to-sample mechanism: the kernel plus the sampler matching its
/// rows.
#[derive(Clone, Debug)]
pub struct ReportingMechanism {
    kind: MechanismKind,
    grid: GridSpec,
    b_hat: u32,
    epsilon: f64,
    kernel: Kernel,
    dam_sampler: Option<GridSampler>,
    row_cum: Option<Vec<f64>>,
}

impl ReportingMechanism {
    pub fn new(kind: MechanismKind, grid: GridSpec, b_hat: u32, epsilon: Epsilon) -> Result<Self> {
        let kernel = build_kernel(kind, grid, b_hat, epsilon)?;
        // DAM samples through the four-way region split; the others invert
        // their row CDFs.
        let dam_sampler = match kind {
            MechanismKind::Dam => {
                let partition =
                    build_disk_partition(b_hat, epsilon.value(), grid.cells_per_side())?;
                Some(GridSampler::new(&partition, grid)?)
            }
            _ => None,
        };
        let row_cum = match kind {
            MechanismKind::Dam => None,
            _ => {
                let m = kernel.n_outputs();
                let cum: Vec<f64> = map_range(kernel.n_inputs(), |i| {
                    let mut acc = 0.0;
                    let mut row = Vec::with_capacity(m);
                    for &p in kernel.row(i) {
                        acc += p;
                        row.push(acc);
                    }
                    row
                })
                .into_iter()
                .flatten()
                .collect();
                Some(cum)
            }
        };
        Ok(ReportingMechanism {
            kind,
            grid,
            b_hat,
            epsilon: epsilon.value(),
            kernel,
            dam_sampler,
            row_cum,
        })
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn b_hat(&self) -> u32 {
        self.b_hat
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Randomizes one input cell.
    pub fn respond<R: Rng>(&self, cell: CellIndex, rng: &mut R) -> Result<CellIndex> {
        if let Some(sampler) = &self.dam_sampler {
            return sampler.grid_area_response(cell, rng);
        }
        let i = self.grid.flat_index(cell).ok_or(Error::InvalidCell(cell))?;
        let m = self.kernel.n_outputs();
        let cum = &self.row_cum.as_ref().expect("row tables built")[i * m..(i + 1) * m];
        let draw = rng.random::<f64>();
        let j = cum.partition_point(|&c| c <= draw);
        Ok(self.kernel.output_cells()[j.min(m - 1)])
    }
}

/// Continuous one-shot randomization of a point in `[0, l]^2`. The output
/// domain is the square dilated by `b` with rounded corners.
pub fn sample_continuous<R: Rng>(
    kind: MechanismKind,
    point: (f64, f64),
    b: f64,
    epsilon: Epsilon,
    l: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    crate::error::ensure_positive(b, "b")?;
    let (x, y) = point;
    if !(0.0..=l).contains(&x) || !(0.0..=l).contains(&y) {
        return Err(Error::PointOutOfBounds(x, y));
    }
    let q = match kind {
        MechanismKind::Dam => dam_params(b, epsilon, l)?.1,
        MechanismKind::Huem => huem_q_general(b, epsilon, l)?,
        MechanismKind::Grr => {
            return Err(Error::ShapeMismatch(
                "continuous sampling is defined for the spatial mechanisms only".into(),
            ))
        }
    };
    let disk_mass = 1.0 - (4.0 * l * b + l * l) * q;
    if rng.random::<f64>() < disk_mass {
        let theta = rng.random::<f64>() * 2.0 * PI;
        let r = match kind {
            MechanismKind::Dam => b * rng.random::<f64>().sqrt(),
            _ => sample_huem_radius(b, epsilon.value(), rng),
        };
        Ok((x + r * theta.cos(), y + r * theta.sin()))
    } else {
        // Uniform over the rounded square minus the disk, by rejection from
        // the bounding box.
        loop {
            let px = rng.random::<f64>() * (l + 2.0 * b) - b;
            let py = rng.random::<f64>() * (l + 2.0 * b) - b;
            let dx = px - px.clamp(0.0, l);
            let dy = py - py.clamp(0.0, l);
            if dx * dx + dy * dy > b * b {
                continue; // outside the rounded square
            }
            let ox = px - x;
            let oy = py - y;
            if ox * ox + oy * oy <= b * b {
                continue; // inside the high disk
            }
            return Ok((px, py));
        }
    }
}

/// Radius with density proportional to `r e^(-eps r / b)` on `[0, b]`, by
/// bisection on the inverse CDF.
fn sample_huem_radius<R: Rng>(b: f64, eps: f64, rng: &mut R) -> f64 {
    let a = eps / b;
    let cdf = |r: f64| -> f64 { 1.0 - (-a * r).exp() * (1.0 + a * r) };
    let target = rng.random::<f64>() * cdf(b);
    let (mut lo, mut hi) = (0.0f64, b);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eps(v: f64) -> Epsilon {
        Epsilon::new(v).unwrap()
    }

    #[test]
    fn dam_params_example() {
        let (p, q) = dam_params(1.0, eps(2.0f64.ln()), 1.0).unwrap();
        assert_relative_eq!(q, 1.0 / (2.0 * PI + 5.0), epsilon = 1e-15);
        assert_relative_eq!(p, 2.0 * q, epsilon = 1e-15);
        // Self-checking normalization: pi b^2 p + (4b+1) q = 1.
        assert_relative_eq!(PI * p + 5.0 * q, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dam_params_ratio_and_limits() {
        for (b, e, l) in [(0.5, 0.7, 1.0), (2.0, 3.5, 15.0), (0.1, 9.0, 10.0)] {
            let (p, q) = dam_params(b, eps(e), l).unwrap();
            assert_relative_eq!(p / q, e.exp(), max_relative = 1e-12);
            assert_relative_eq!(
                PI * b * b * p + (4.0 * l * b + l * l) * q,
                1.0,
                epsilon = 1e-12
            );
        }
        let (_, q) = dam_params(1.0, eps(60.0), 1.0).unwrap();
        assert!(q < 1e-25, "q must vanish as eps grows, got {q}");
        assert!(dam_params(0.0, eps(1.0), 1.0).is_err());
        assert!(dam_params(1.0, eps(1.0), -1.0).is_err());
    }

    #[test]
    fn huem_q_examples() {
        let q = huem_q(1.0, eps(1.0)).unwrap();
        assert_relative_eq!(
            q,
            1.0 / (2.0 * PI * (1.0f64.exp() - 2.0) + 5.0),
            max_relative = 1e-12
        );
        assert_relative_eq!(q, 0.105118, max_relative = 1e-4);

        // eps -> 0 degenerates into the uniform mechanism.
        let q0 = huem_q(1.0, eps(1e-7)).unwrap();
        assert_relative_eq!(q0, 1.0 / (PI + 5.0), max_relative = 1e-6);

        // eps -> inf reports truthfully.
        assert!(huem_q(1.0, eps(80.0)).unwrap() < 1e-30);
    }

    #[test]
    fn dam_q_never_exceeds_huem_q() {
        for bi in 1..=20 {
            for ei in 1..=20 {
                let b = bi as f64 * 0.25;
                let e = ei as f64 * 0.45;
                let (_, qd) = dam_params(b, eps(e), 1.0).unwrap();
                let qh = huem_q(b, eps(e)).unwrap();
                assert!(qd <= qh * (1.0 + 1e-12), "b={b} eps={e}: {qd} > {qh}");
            }
        }
    }

    #[test]
    fn optimal_b_zero_budget_limit() {
        let b = optimal_b(eps(1e-9), 1.0).unwrap();
        assert_relative_eq!(b, (2.0 + (4.0 + PI).sqrt()) / PI, epsilon = 1e-12);
        assert_relative_eq!(b, 1.4873, epsilon = 1e-3);
        // Continuity across the analytic-limit switch.
        let just_above = optimal_b(eps(2e-6), 1.0).unwrap();
        assert_relative_eq!(b, just_above, max_relative = 1e-5);
    }

    #[test]
    fn optimal_b_decreasing_and_linear() {
        let mut prev = optimal_b(eps(0.05), 1.0).unwrap();
        for i in 1..=180 {
            let e = 0.05 + i as f64 * 0.05;
            let b = optimal_b(eps(e), 1.0).unwrap();
            assert!(b < prev, "not strictly decreasing at eps={e}");
            prev = b;
        }
        let unit = optimal_b(eps(3.5), 1.0).unwrap();
        assert_eq!(optimal_b(eps(3.5), 15.0).unwrap(), 15.0 * unit);
        assert_eq!(optimal_b(eps(3.5), 0.25).unwrap(), 0.25 * unit);
    }

    #[test]
    fn optimal_b_matches_reported_operating_point() {
        // At eps = 3.5 on a 15-cell domain the best radius floors to 3.
        let b = optimal_b(eps(3.5), 15.0).unwrap();
        assert!((3.4..3.6).contains(&b), "b = {b}");
        assert_eq!(b.floor() as u32, 3);
        // And vanishes for large budgets.
        assert!(optimal_b(eps(400.0), 15.0).unwrap() < 1e-100);
    }

    #[test]
    fn grr_kernel_closed_form() {
        let grid = GridSpec::with_cells(1.0, 2).unwrap();
        let k = build_kernel(MechanismKind::Grr, grid, 1, eps(3.0f64.ln())).unwrap();
        assert_eq!(k.n_inputs(), 4);
        assert_eq!(k.n_outputs(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 0.5 } else { 1.0 / 6.0 };
                assert_relative_eq!(k.row(i)[j], expected, epsilon = 1e-12);
            }
        }
    }

    fn column_ratio(k: &Kernel) -> f64 {
        let mut worst: f64 = 1.0;
        for o in 0..k.n_outputs() {
            let col: Vec<f64> = (0..k.n_inputs()).map(|i| k.row(i)[o]).collect();
            let max = col.iter().cloned().fold(f64::MIN, f64::max);
            let min = col.iter().cloned().fold(f64::MAX, f64::min);
            worst = worst.max(max / min);
        }
        worst
    }

    #[test]
    fn kernels_row_stochastic_and_private() {
        for kind in [MechanismKind::Dam, MechanismKind::Huem, MechanismKind::Grr] {
            for (d, b, e) in [(3usize, 1u32, 0.7), (5, 2, 3.5), (4, 3, 1.2)] {
                let grid = GridSpec::with_cells(1.0, d).unwrap();
                let k = build_kernel(kind, grid, b, eps(e)).unwrap();
                for i in 0..k.n_inputs() {
                    let sum: f64 = k.row(i).iter().sum();
                    assert_relative_eq!(sum, 1.0, epsilon = 1e-9);
                    assert!(k.row(i).iter().all(|&p| p > 0.0));
                }
                let ratio = column_ratio(&k);
                assert!(
                    ratio <= e.exp() * (1.0 + 1e-9),
                    "{kind} d={d} b={b} eps={e}: ratio {ratio} > {}",
                    e.exp()
                );
            }
        }
    }

    #[test]
    fn dam_kernel_attains_the_ratio_exactly() {
        let grid = GridSpec::with_cells(1.0, 3).unwrap();
        let k = build_kernel(MechanismKind::Dam, grid, 1, eps(2.0)).unwrap();
        assert_relative_eq!(column_ratio(&k), 2.0f64.exp(), max_relative = 1e-12);
    }

    #[test]
    fn huem_center_density_is_peak() {
        let grid = GridSpec::with_cells(1.0, 5).unwrap();
        let k = build_kernel(MechanismKind::Huem, grid, 3, eps(2.0)).unwrap();
        let center_in = grid.flat_index(CellIndex::new(2, 2)).unwrap();
        let center_out = k.output_index(CellIndex::new(2, 2)).unwrap();
        let row = k.row(center_in);
        let peak = row.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(row[center_out], peak);
        // Peak over low equals e^eps.
        let low = row.iter().cloned().fold(f64::MAX, f64::min);
        assert_relative_eq!(peak / low, 2.0f64.exp(), max_relative = 1e-9);
    }

    #[test]
    fn sampler_matches_kernel_support_and_is_deterministic() {
        let grid = GridSpec::with_cells(1.0, 3).unwrap();
        let partition = build_disk_partition(1, 2.0f64.ln(), 3).unwrap();
        let sampler = GridSampler::new(&partition, grid).unwrap();
        let k = build_kernel(MechanismKind::Dam, grid, 1, eps(2.0f64.ln())).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cell = CellIndex::new(1, 1);
        let draws: Vec<CellIndex> = (0..200)
            .map(|_| sampler.grid_area_response(cell, &mut rng).unwrap())
            .collect();
        for u in &draws {
            assert!(k.output_index(*u).is_some(), "{u:?} outside output domain");
        }
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let again: Vec<CellIndex> = (0..200)
            .map(|_| sampler.grid_area_response(cell, &mut rng2).unwrap())
            .collect();
        assert_eq!(draws, again);

        assert!(sampler
            .grid_area_response(CellIndex::new(5, 0), &mut rng)
            .is_err());
    }

    #[test]
    fn respond_covers_all_mechanisms() {
        let grid = GridSpec::with_cells(1.0, 3).unwrap();
        for kind in [MechanismKind::Dam, MechanismKind::Huem, MechanismKind::Grr] {
            let mech = ReportingMechanism::new(kind, grid, 1, eps(1.5)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..100 {
                let u = mech.respond(CellIndex::new(0, 2), &mut rng).unwrap();
                assert!(mech.kernel().output_index(u).is_some());
            }
        }
    }

    #[test]
    fn continuous_samples_stay_in_the_rounded_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (b, l) = (0.4, 1.0);
        for kind in [MechanismKind::Dam, MechanismKind::Huem] {
            for _ in 0..2000 {
                let (x, y) =
                    sample_continuous(kind, (0.9, 0.1), b, eps(1.0), l, &mut rng).unwrap();
                let dx = x - x.clamp(0.0, l);
                let dy = y - y.clamp(0.0, l);
                assert!(dx * dx + dy * dy <= b * b + 1e-12);
            }
        }
        assert!(
            sample_continuous(MechanismKind::Dam, (1.5, 0.0), b, eps(1.0), l, &mut rng).is_err()
        );
    }

    #[test]
    fn mechanism_kind_parses() {
        assert_eq!("DAM".parse::<MechanismKind>().unwrap(), MechanismKind::Dam);
        assert_eq!(
            "huem".parse::<MechanismKind>().unwrap(),
            MechanismKind::Huem
        );
        assert_eq!("grr".parse::<MechanismKind>().unwrap(), MechanismKind::Grr);
        assert!("mdsw".parse::<MechanismKind>().is_err());
    }
}
