use rayon::prelude::*;
use tracing::warn;

use super::css::{fit_arma, ArmaFit};
use crate::error::{Error, ErrorClass, Result};

/// Outcome of a BIC grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderSelection {
    pub p: usize,
    pub q: usize,
    pub best: ArmaFit,
    /// Every cell that fitted, in (p, q) row-major order.
    pub fits: Vec<ArmaFit>,
    /// Cells skipped because of a numerical failure.
    pub skipped: Vec<(usize, usize)>,
}

/// Minimizes BIC over `0..=p_max x 0..=q_max`. Ties go to the smaller
/// `p + q`, then the smaller `q`.
pub fn bic_select(y: &[f64], p_max: usize, q_max: usize) -> Result<OrderSelection> {
    let cells: Vec<(usize, usize)> = (0..=p_max)
        .flat_map(|p| (0..=q_max).map(move |q| (p, q)))
        .collect();
    let results: Vec<Result<ArmaFit>> = cells
        .par_iter()
        .map(|&(p, q)| fit_arma(y, p, q))
        .collect();

    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for (&(p, q), res) in cells.iter().zip(results) {
        match res {
            Ok(fit) => fits.push(fit),
            Err(e) if e.class() == ErrorClass::Numerical => {
                warn!(p, q, error = %e, "skipping ARMA cell");
                skipped.push((p, q));
            }
            Err(e) => return Err(e),
        }
    }
    let best = fits
        .iter()
        .min_by(|a, b| {
            a.bic
                .total_cmp(&b.bic)
                .then((a.p + a.q).cmp(&(b.p + b.q)))
                .then(a.q.cmp(&b.q))
        })
        .cloned()
        .ok_or(Error::AllCandidatesFailed { p_max, q_max })?;
    Ok(OrderSelection {
        p: best.p,
        q: best.q,
        best,
        fits,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_zero_series_fails_everywhere() {
        let y = [0.0; 30];
        assert!(matches!(
            bic_select(&y, 1, 1),
            Err(Error::AllCandidatesFailed { p_max: 1, q_max: 1 })
        ));
    }

    #[test]
    fn too_short_propagates() {
        let y = [0.3, -0.2, 0.5, 0.1];
        assert!(matches!(
            bic_select(&y, 2, 2),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn grid_is_reported_in_order() {
        let y: Vec<f64> = (0..60).map(|i| ((i * 7919 % 13) as f64 - 6.0) / 3.0).collect();
        let sel = bic_select(&y, 2, 1).unwrap();
        let orders: Vec<(usize, usize)> = sel
            .fits
            .iter()
            .map(|f| (f.p, f.q))
            .chain(sel.skipped.iter().copied())
            .collect();
        assert_eq!(orders.len(), 6);
        assert!(sel.fits.iter().all(|f| f.bic >= sel.best.bic));
    }
}
