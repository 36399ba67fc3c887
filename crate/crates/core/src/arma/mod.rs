//! Null-model estimation: OLS AR(1) and CSS ARMA(p, q) with BIC selection.

mod ar1;
mod css;
mod select;
mod simplex;

pub use ar1::{fit_ar1, standardized_residuals, Ar1Fit};
pub use css::{css_residuals, fit_arma, ArmaFit};
pub use select::{bic_select, OrderSelection};
