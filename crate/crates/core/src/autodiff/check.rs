use super::{Graph, ParamStore, Var};
use crate::Result;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter name, flat index, analytic and numeric value at the worst element.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Finite-difference formula used for the numeric derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(θ+ε) − f(θ−ε)) / 2ε`; error O(ε²).
    Central,
    /// `(−f(θ+2ε) + 8f(θ+ε) − 8f(θ−ε) + f(θ−2ε)) / 12ε`; error O(ε⁴).
    ///
    /// Rounding in `f` contributes roughly `u·|f| / ε` to any difference
    /// quotient, which at ε = 1e-5 already exceeds 1e-4 of a gradient smaller
    /// than about 1e-6. Deep recurrent losses have such entries, so they are
    /// checked with this stencil at a larger step instead.
    FivePoint,
}

/// Step that balances truncation and rounding for [`Stencil::FivePoint`].
pub const FIVE_POINT_EPS: f64 = 4e-3;

/// Compares reverse-mode gradients of the scalar built by `build` against
/// central differences `(f(θ+ε) − f(θ−ε)) / 2ε`, element by element over every
/// parameter in `store`. `build` must be deterministic in the parameter values.
pub fn grad_check<F>(store: &ParamStore, eps: f64, build: F) -> Result<GradCheck>
where
    F: for<'a> Fn(&mut Graph<'a>, &'a ParamStore) -> Result<Var>,
{
    grad_check_with(store, Stencil::Central, eps, build)
}

/// [`grad_check`] with an explicit difference stencil.
pub fn grad_check_with<F>(store: &ParamStore, stencil: Stencil, eps: f64, build: F) -> Result<GradCheck>
where
    F: for<'a> Fn(&mut Graph<'a>, &'a ParamStore) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new();
        let loss = build(&mut g, store)?;
        g.backward(loss, store)?
    };

    let eval = |params: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let loss = build(&mut g, params)?;
        Ok(g.value(loss).data()[0])
    };

    let mut work = store.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for id in store.ids() {
        for i in 0..store.get(id).len() {
            let orig = store.get(id).data()[i];
            let mut at = |delta: f64| -> Result<f64> {
                work.get_mut(id).data_mut()[i] = orig + delta;
                let v = eval(&work);
                work.get_mut(id).data_mut()[i] = orig;
                v
            };
            let numeric = match stencil {
                Stencil::Central => (at(eps)? - at(-eps)?) / (2.0 * eps),
                Stencil::FivePoint => {
                    (-at(2.0 * eps)? + 8.0 * at(eps)? - 8.0 * at(-eps)? + at(-2.0 * eps)?) / (12.0 * eps)
                }
            };
            let a = analytic.get(id).data()[i];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((store.name(id).to_string(), i, a, numeric));
            }
        }
    }
    Ok(report)
}
