use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Max over coordinates of `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_rel_error: f64,
    /// `(tensor index, flat coordinate)` where the max was attained.
    pub worst: (usize, usize),
    pub coordinates: usize,
}

/// Relative error with the `1e-8` floor on the denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central difference formula used for the numeric gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`, truncation error `O(h^2)`.
    #[default]
    ThreePoint,
    /// `(f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h`, truncation error
    /// `O(h^4)`. Allows a larger step, which keeps cancellation error small
    /// next to gradients near the `1e-8` floor.
    FivePoint,
}

/// Checks the gradient of the scalar function built by `build` at `point`
/// against three-point central differences.
///
/// `build` receives one trainable leaf per tensor in `point` and returns the
/// loss node. The numeric side re-evaluates the recorded graph through
/// [`Graph::forward`] with one coordinate perturbed at a time.
pub fn check_gradients<F>(build: F, point: &[Tensor], step: f64) -> Result<GradCheck>
where
    F: FnOnce(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    check_gradients_with(build, point, step, Stencil::ThreePoint)
}

/// [`check_gradients`] with a choice of difference formula.
pub fn check_gradients_with<F>(build: F, point: &[Tensor], step: f64, stencil: Stencil) -> Result<GradCheck>
where
    F: FnOnce(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut graph = Graph::new();
    let names: Vec<String> = (0..point.len()).map(|k| format!("p{k}")).collect();
    let leaves: Vec<NodeId> = names
        .iter()
        .zip(point)
        .map(|(name, t)| graph.param(name, t.clone()))
        .collect();
    let loss = build(&mut graph, &leaves)?;
    if let Some(bad) = graph.first_non_finite() {
        return Err(Error::NonFinite(format!("node {} at the check point", bad.index())));
    }
    let grads = graph.backward(loss)?;

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    for (k, base) in point.iter().enumerate() {
        let analytic = grads.get(leaves[k]).expect("every leaf gets a gradient");
        let mut values = base.to_vec();
        for c in 0..values.len() {
            let original = values[c];
            let mut at = |offset: f64| {
                values[c] = original + offset;
                let v = eval_at(&mut graph, &names[k], base.shape(), &values, loss);
                values[c] = original;
                v
            };
            let numeric = match stencil {
                Stencil::ThreePoint => (at(step)? - at(-step)?) / (2.0 * step),
                Stencil::FivePoint => {
                    (at(-2.0 * step)? - 8.0 * at(-step)? + 8.0 * at(step)? - at(2.0 * step)?) / (12.0 * step)
                }
            };
            let err = relative_error(analytic.data()[c], numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (k, c);
            }
            report.coordinates += 1;
        }
        // restore the leaf before moving to the next tensor
        graph.forward([(names[k].as_str(), base.clone())])?;
    }
    Ok(report)
}

fn eval_at(graph: &mut Graph, name: &str, shape: &[usize], values: &[f64], loss: NodeId) -> Result<f64> {
    let tensor = Tensor::new(shape.to_vec(), values.to_vec())?;
    graph.forward([(name, tensor)])?;
    let value = graph.value(loss).data()[0];
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("loss while perturbing `{name}`")));
    }
    Ok(value)
}
