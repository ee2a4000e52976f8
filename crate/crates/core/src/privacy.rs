//! Privacy accounting: ratio certification of kernels and the
//! expected-inference-error local privacy metric.

use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::grid::GridSpec;
use crate::mechanism::Kernel;

/// Certified privacy properties of one kernel.
#[derive(Clone, Copy, Debug)]
pub struct PrivacyReport {
    /// Worst-case log probability ratio over output columns.
    pub max_log_ratio: f64,
    /// The epsilon the kernel actually certifies (equals `max_log_ratio`).
    pub certified_epsilon: f64,
    /// Expected adversarial inference distance in length units.
    pub local_privacy: f64,
}

/// Worst-case log ratio `ln(max_i K[i->o] / min_i K[i->o])` over output
/// columns. The kernel satisfies eps-LDP iff this is at most eps. A column
/// holding both a zero and a positive entry has an infinite ratio and is
/// reported as non-private.
pub fn certify_ldp(kernel: &Kernel) -> Result<f64> {
    let n = kernel.n_inputs();
    let m = kernel.n_outputs();
    let ratios = map_range(m, |o| {
        let mut max = f64::MIN;
        let mut min = f64::MAX;
        for i in 0..n {
            let p = kernel.row(i)[o];
            max = max.max(p);
            min = min.min(p);
        }
        (max, min)
    });
    let mut worst = 0.0f64;
    for (o, (max, min)) in ratios.into_iter().enumerate() {
        if min <= 0.0 && max > 0.0 {
            return Err(Error::NonPrivateColumn {
                output: kernel.output_cells()[o],
            });
        }
        if max > 0.0 {
            worst = worst.max((max / min).ln());
        }
    }
    Ok(worst)
}

/// Expected inference error of the posterior-matching adversary under a
/// uniform prior:
/// `LP = sum_o (1 / (n sum_j K[j->o])) sum_{i,i'} K[i->o] K[i'->o] d(i,i')`
/// with `d` the Euclidean distance between input-cell centers in length
/// units.
pub fn local_privacy(kernel: &Kernel, grid: GridSpec) -> Result<f64> {
    let n = kernel.n_inputs();
    if grid.cell_count() != n {
        return Err(Error::ShapeMismatch(format!(
            "grid has {} cells, kernel has {n} inputs",
            grid.cell_count()
        )));
    }
    let positions: Vec<(f64, f64)> = (0..n).map(|i| grid.cell_center(grid.cell_at(i))).collect();
    let rows: Vec<&[f64]> = (0..n).map(|i| kernel.row(i)).collect();
    let m = kernel.n_outputs();
    let per_output = {
        let positions = &positions;
        let rows = &rows;
        map_range(m, |o| {
            let col: Vec<f64> = rows.iter().map(|r| r[o]).collect();
            let col_sum: f64 = col.iter().sum();
            if col_sum <= 0.0 {
                return 0.0;
            }
            let mut inner = 0.0;
            for i in 0..n {
                if col[i] == 0.0 {
                    continue;
                }
                let (xi, yi) = positions[i];
                for i2 in 0..n {
                    if col[i2] == 0.0 || i2 == i {
                        continue;
                    }
                    let (x2, y2) = positions[i2];
                    inner += col[i] * col[i2] * (xi - x2).hypot(yi - y2);
                }
            }
            inner / (n as f64 * col_sum)
        })
    };
    Ok(per_output.iter().sum())
}

/// Matrix-level evaluation of the local privacy sum for hand-made kernels:
/// `rows` is row-major `n x m`, `positions` the input locations.
pub fn local_privacy_matrix(rows: &[f64], n: usize, m: usize, positions: &[(f64, f64)]) -> f64 {
    assert_eq!(rows.len(), n * m, "rows must be n x m");
    assert_eq!(positions.len(), n, "one position per input");
    let mut total = 0.0;
    for o in 0..m {
        let col: Vec<f64> = (0..n).map(|i| rows[i * m + o]).collect();
        let col_sum: f64 = col.iter().sum();
        if col_sum <= 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for i in 0..n {
            let (xi, yi) = positions[i];
            for i2 in 0..n {
                if i2 == i {
                    continue;
                }
                let (x2, y2) = positions[i2];
                inner += col[i] * col[i2] * (xi - x2).hypot(yi - y2);
            }
        }
        total += inner / (n as f64 * col_sum);
    }
    total
}

/// Certification plus the local privacy metric in one report.
pub fn privacy_report(kernel: &Kernel, grid: GridSpec) -> Result<PrivacyReport> {
    let max_log_ratio = certify_ldp(kernel)?;
    let local = local_privacy(kernel, grid)?;
    Ok(PrivacyReport {
        max_log_ratio,
        certified_epsilon: max_log_ratio,
        local_privacy: local,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{build_kernel, Epsilon, Kernel, MechanismKind};
    use approx::assert_relative_eq;

    fn eps(v: f64) -> Epsilon {
        Epsilon::new(v).unwrap()
    }

    #[test]
    fn grr_certifies_its_budget() {
        let grid = GridSpec::with_cells(1.0, 2).unwrap();
        let k = build_kernel(MechanismKind::Grr, grid, 1, eps(3.0f64.ln())).unwrap();
        assert_relative_eq!(certify_ldp(&k).unwrap(), 3.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn dam_certifies_exactly_epsilon() {
        let grid = GridSpec::with_cells(1.0, 3).unwrap();
        let k = build_kernel(MechanismKind::Dam, grid, 1, eps(1.7)).unwrap();
        assert_relative_eq!(certify_ldp(&k).unwrap(), 1.7, max_relative = 1e-12);
    }

    #[test]
    fn uniform_kernel_certifies_zero() {
        let grid = GridSpec::with_cells(1.0, 2).unwrap();
        let k = Kernel::from_rows(
            MechanismKind::Grr,
            1.0,
            grid,
            grid.input_cells(),
            vec![0.25; 16],
        )
        .unwrap();
        assert_eq!(certify_ldp(&k).unwrap(), 0.0);
    }

    #[test]
    fn zero_against_positive_entry_is_non_private() {
        let grid = GridSpec::with_cells(1.0, 2).unwrap();
        let probs = vec![
            1.0, 0.0, 0.0, 0.0,
            0.25, 0.25, 0.25, 0.25,
            0.25, 0.25, 0.25, 0.25,
            0.25, 0.25, 0.25, 0.25,
        ];
        let k = Kernel::from_rows(MechanismKind::Grr, 1.0, grid, grid.input_cells(), probs)
            .unwrap();
        assert!(matches!(
            certify_ldp(&k),
            Err(Error::NonPrivateColumn { .. })
        ));
    }

    #[test]
    fn identity_kernel_has_zero_local_privacy() {
        // Adversary inverts exactly; inference distance zero.
        let rows = [1.0, 0.0, 0.0, 1.0];
        let lp = local_privacy_matrix(&rows, 2, 2, &[(0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(lp, 0.0);
    }

    #[test]
    fn two_cell_closed_forms() {
        // Uniform kernel on two cells at unit distance: LP = 1/2.
        let rows = [0.5, 0.5, 0.5, 0.5];
        let positions = [(0.0, 0.0), (1.0, 0.0)];
        assert_relative_eq!(
            local_privacy_matrix(&rows, 2, 2, &positions),
            0.5,
            epsilon = 1e-12
        );
        // Rows [[p, q], [q, p]]: LP = 2 p q.
        for p in [0.1, 0.25, 0.5, 0.8, 0.95] {
            let q = 1.0 - p;
            let rows = [p, q, q, p];
            assert_relative_eq!(
                local_privacy_matrix(&rows, 2, 2, &positions),
                2.0 * p * q,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn two_cell_privacy_peaks_at_maximal_noise() {
        let positions = [(0.0, 0.0), (1.0, 0.0)];
        let lp_at = |p: f64| {
            let q = 1.0 - p;
            local_privacy_matrix(&[p, q, q, p], 2, 2, &positions)
        };
        let peak = lp_at(0.5);
        let mut prev = lp_at(0.999);
        let mut p = 0.999;
        while p > 0.5 {
            p -= 0.01;
            let lp = lp_at(p);
            assert!(lp >= prev - 1e-12, "LP not increasing towards 1/2 at {p}");
            assert!(lp <= peak + 1e-12);
            prev = lp;
        }
        assert!(lp_at(1.0) == 0.0 && lp_at(0.0) == 0.0);
    }

    #[test]
    fn local_privacy_scales_with_cell_side() {
        let grid = GridSpec::with_cells(1.0, 3).unwrap();
        let k = build_kernel(MechanismKind::Dam, grid, 1, eps(1.0)).unwrap();
        let lp1 = local_privacy(&k, grid).unwrap();
        let doubled = GridSpec::with_cells(2.0, 3).unwrap();
        let lp2 = local_privacy(&k, doubled).unwrap();
        assert_relative_eq!(lp2, 2.0 * lp1, max_relative = 1e-12);
        assert!(lp1 > 0.0);
    }

    #[test]
    fn report_combines_both_metrics() {
        let grid = GridSpec::with_cells(1.0, 3).unwrap();
        let k = build_kernel(MechanismKind::Dam, grid, 1, eps(0.7)).unwrap();
        let report = privacy_report(&k, grid).unwrap();
        assert_relative_eq!(report.certified_epsilon, 0.7, max_relative = 1e-12);
        assert!(report.local_privacy > 0.0);
    }
}
