//! Central finite-difference gradient checking.

use super::params::ParamSet;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Denominator floor for the relative error, so entries whose true
    /// gradient is ~0 are judged by absolute error.
    pub abs_floor: f64,
    /// Check at most this many entries per array (evenly strided); `None`
    /// checks every entry.
    pub max_per_block: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-4,
            tolerance: 1e-4,
            abs_floor: 1e-6,
            max_per_block: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Index of the worst entry with (analytic, numeric) values.
    pub worst: Option<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn failures(&self) -> Vec<&BlockReport> {
        self.blocks
            .iter()
            .filter(|b| b.max_rel_error.is_nan() || b.max_rel_error >= self.tolerance)
            .collect()
    }

    pub fn block(&self, name: &str) -> Option<&BlockReport> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.blocks {
            let flag = if b.max_rel_error < self.tolerance {
                "ok"
            } else {
                "FAIL"
            };
            write!(
                f,
                "{:<28} n={:<5} max_rel={:.3e} {}",
                b.name, b.checked, b.max_rel_error, flag
            )?;
            if let Some((i, a, n)) = b.worst {
                write!(f, " (at {i}: analytic={a:.6e} numeric={n:.6e})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against central differences of `loss` around
/// `params`. `loss` must be deterministic. `params` is perturbed in place and
/// restored before returning.
pub fn grad_check<P, F>(
    params: &mut P,
    analytic: &P,
    mut loss: F,
    options: &GradCheckOptions,
) -> GradCheckReport
where
    P: ParamSet + ?Sized,
    F: FnMut(&P) -> f64,
{
    let analytic = analytic.tensors();
    let layout: Vec<(String, usize)> = params
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.data.len()))
        .collect();

    let mut blocks = Vec::with_capacity(layout.len());
    for (block, (name, len)) in layout.iter().enumerate() {
        let stride = match options.max_per_block {
            Some(cap) if cap > 0 && *len > cap => len.div_ceil(cap),
            _ => 1,
        };
        let mut report = BlockReport {
            name: name.clone(),
            checked: 0,
            max_rel_error: 0.0,
            worst: None,
        };
        for i in (0..*len).step_by(stride) {
            let original = params.tensors()[block].data[i];
            set_entry(params, block, i, original + options.step);
            let plus = loss(params);
            set_entry(params, block, i, original - options.step);
            let minus = loss(params);
            set_entry(params, block, i, original);

            let numeric = (plus - minus) / (2.0 * options.step);
            let a = analytic[block].data[i];
            let err = relative_error(a, numeric, options.abs_floor);
            report.checked += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
                report.worst = Some((i, a, numeric));
            }
        }
        blocks.push(report);
    }
    GradCheckReport {
        tolerance: options.tolerance,
        blocks,
    }
}

fn set_entry<P: ParamSet + ?Sized>(params: &mut P, block: usize, index: usize, value: f64) {
    params.tensors_mut()[block].data[index] = value;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::activation::log_sum_exp;
    use crate::nn::params::TensorList;

    // 0.5 * ||A w - y||^2 with gradient A^T (A w - y).
    fn least_squares(w: &TensorList) -> (f64, TensorList) {
        let a = [
            [1.0, 2.0, -1.0],
            [0.5, -0.3, 2.0],
            [3.0, 0.1, 0.2],
            [-1.0, 1.0, 1.0],
        ];
        let y = [1.0, -2.0, 0.5, 3.0];
        let w = &w.entries[0].data;
        let mut loss = 0.0;
        let mut g = vec![0.0; 3];
        for (row, &yi) in a.iter().zip(&y) {
            let r: f64 = row.iter().zip(w).map(|(a, w)| a * w).sum::<f64>() - yi;
            loss += 0.5 * r * r;
            for j in 0..3 {
                g[j] += row[j] * r;
            }
        }
        (loss, TensorList::new().with("w", vec![3], g))
    }

    #[test]
    fn least_squares_gradient_is_exact() {
        let mut w = TensorList::new().with("w", vec![3], vec![0.3, -0.7, 1.1]);
        let (_, g) = least_squares(&w);
        let opts = GradCheckOptions {
            tolerance: 1e-6,
            ..Default::default()
        };
        let report = grad_check(&mut w, &g, |w| least_squares(w).0, &opts);
        assert!(report.passed(), "{report}");
        assert!(report.max_rel_error() < 1e-6);
    }

    fn softmax_ce(p: &TensorList) -> (f64, TensorList) {
        let logits = &p.entries[0].data;
        let target = 2;
        let lse = log_sum_exp(logits);
        let loss = lse - logits[target];
        let g: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(i, &u)| (u - lse).exp() - if i == target { 1.0 } else { 0.0 })
            .collect();
        (loss, TensorList::new().with("logits", vec![4], g))
    }

    #[test]
    fn softmax_cross_entropy_gradient() {
        let mut p = TensorList::new().with("logits", vec![4], vec![0.2, -1.0, 0.7, 2.0]);
        let (_, g) = softmax_ce(&p);
        let opts = GradCheckOptions {
            tolerance: 1e-5,
            ..Default::default()
        };
        let report = grad_check(&mut p, &g, |p| softmax_ce(p).0, &opts);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        let mut p = TensorList::new().with("logits", vec![4], vec![0.2, -1.0, 0.7, 2.0]);
        let (_, mut g) = softmax_ce(&p);
        g.entries[0].data[1] += 0.05;
        let report = grad_check(
            &mut p,
            &g,
            |p| softmax_ce(p).0,
            &GradCheckOptions::default(),
        );
        assert!(!report.passed());
        assert_eq!(report.failures()[0].name, "logits");
        assert_eq!(report.failures()[0].worst.unwrap().0, 1);
    }

    #[test]
    fn params_restored_after_check() {
        let mut w = TensorList::new().with("w", vec![3], vec![0.3, -0.7, 1.1]);
        let before = w.clone();
        let (_, g) = least_squares(&w);
        grad_check(
            &mut w,
            &g,
            |w| least_squares(w).0,
            &GradCheckOptions::default(),
        );
        assert_eq!(w, before);
    }
}
