//! Central-difference gradient verification.

use super::{Graph, NdError, Tensor, Var};

/// Outcome of comparing tape gradients against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
}

/// Single-input form of [`grad_check_many`]; returns the max relative error.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64, NdError>
where
    F: Fn(&mut Graph, Var) -> Result<Var, NdError>,
{
    let report = grad_check_many(|g, vars| f(g, vars[0]), std::slice::from_ref(x), eps)?;
    Ok(report.max_rel_error)
}

/// Compares the tape gradient of the scalar `f` w.r.t. every input against
/// `(f(x + eps) - f(x - eps)) / 2 eps`, coordinate by coordinate.
///
/// The per-coordinate error is `|a - n| / max(1e-8, |a| + |n|)`.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<GradCheckReport, NdError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, NdError>,
{
    if !(eps > 0.0) {
        return Err(NdError::Domain(format!("grad_check eps must be > 0, got {eps}")));
    }
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    check_finite("grad_check loss", g.value(loss))?;
    g.backward(loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .map(|&v| g.grad(v).cloned().expect("tracked leaf has a gradient"))
        .collect();

    let eval = |xs: &[Tensor]| -> Result<f64, NdError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|t| g.constant(t.clone())).collect();
        let loss = f(&mut g, &vars)?;
        let v = g.value(loss);
        check_finite("grad_check loss", v)?;
        Ok(v.data()[0])
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut xs = inputs.to_vec();
    for (which, grad) in analytic.iter().enumerate() {
        check_finite("analytic gradient", grad)?;
        for j in 0..xs[which].len() {
            let orig = xs[which].data()[j];
            xs[which].data_mut()[j] = orig + eps;
            let up = eval(&xs)?;
            xs[which].data_mut()[j] = orig - eps;
            let down = eval(&xs)?;
            xs[which].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = grad.data()[j];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            if report.worst.is_none() || err > report.max_rel_error {
                report = GradCheckReport {
                    max_rel_error: err,
                    worst: Some((which, j)),
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(report)
}

fn check_finite(what: &str, t: &Tensor) -> Result<(), NdError> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(NdError::NonFinite(what.to_string()))
    }
}
