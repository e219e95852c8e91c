//! Uniform access to the trainable tensors of a model.

use crate::neural::layers::LayerStack;

/// A named, row-major view of one parameter tensor.
#[derive(Debug)]
pub struct TensorRef<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

#[derive(Debug)]
pub struct TensorMut<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a mut [f64],
}

/// Models expose their parameters as an ordered list of tensors. Gradients
/// use the model type itself, so the two lists always line up.
pub trait Parameterized {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// `self += scale · other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.data.iter_mut().zip(src.data) {
                *d += scale * s;
            }
        }
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.data.fill(value);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

/// Prefixes every tensor name, for composing models from parts.
pub(crate) fn prefixed<'a>(prefix: &str, ts: Vec<TensorRef<'a>>) -> impl Iterator<Item = TensorRef<'a>> + 'a {
    let prefix = prefix.to_string();
    ts.into_iter().map(move |mut t| {
        t.name = format!("{prefix}.{}", t.name);
        t
    })
}

pub(crate) fn prefixed_mut<'a>(prefix: &str, ts: Vec<TensorMut<'a>>) -> impl Iterator<Item = TensorMut<'a>> + 'a {
    let prefix = prefix.to_string();
    ts.into_iter().map(move |mut t| {
        t.name = format!("{prefix}.{}", t.name);
        t
    })
}

impl Parameterized for LayerStack {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            out.push(TensorRef {
                name: format!("{i}.weight"),
                rows: layer.weight.nrows(),
                cols: layer.weight.ncols(),
                data: layer.weight.as_slice().expect("standard layout"),
            });
            out.push(TensorRef {
                name: format!("{i}.bias"),
                rows: 1,
                cols: layer.bias.len(),
                data: layer.bias.as_slice().expect("standard layout"),
            });
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let (rows, cols) = layer.weight.dim();
            out.push(TensorMut {
                name: format!("{i}.weight"),
                rows,
                cols,
                data: layer.weight.as_slice_mut().expect("standard layout"),
            });
            let cols = layer.bias.len();
            out.push(TensorMut {
                name: format!("{i}.bias"),
                rows: 1,
                cols,
                data: layer.bias.as_slice_mut().expect("standard layout"),
            });
        }
        out
    }
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    pub checked: usize,
    pub failures: Vec<String>,
    pub worst_relative: f64,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares `grads` with central differences of `loss` around `params`,
/// element by element. At most `max_checks` evenly spaced entries are probed
/// (all of them when the model is small enough). An entry passes when
/// `|analytic - numeric| ≤ rel · max(|analytic|, |numeric|) + abs`.
pub fn gradient_check<P, F>(params: &P, grads: &P, loss: F, rel: f64, abs: f64, max_checks: usize) -> GradientReport
where
    P: Parameterized + Clone,
    F: Fn(&P) -> f64,
{
    let total = params.param_count();
    let stride = total.div_ceil(max_checks.max(1)).max(1);
    let analytic = grads.flat();
    let mut probe = params.clone();
    let mut report = GradientReport {
        checked: 0,
        failures: Vec::new(),
        worst_relative: 0.0,
    };
    let names: Vec<(String, usize)> = params
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.data.len()))
        .collect();
    let mut index = 0;
    while index < total {
        let (mut tensor, mut offset) = (0, index);
        while offset >= names[tensor].1 {
            offset -= names[tensor].1;
            tensor += 1;
        }
        let original = params.tensors()[tensor].data[offset];
        let h = 1e-6 * original.abs().max(1.0);
        let set = |p: &mut P, v: f64| p.tensors_mut()[tensor].data[offset] = v;
        set(&mut probe, original + h);
        let up = loss(&probe);
        set(&mut probe, original - h);
        let down = loss(&probe);
        set(&mut probe, original);
        let numeric = (up - down) / (2.0 * h);
        let exact = analytic[index];
        let err = (exact - numeric).abs();
        let scale = exact.abs().max(numeric.abs());
        if scale > 0.0 {
            report.worst_relative = report.worst_relative.max(err / scale);
        }
        if err > rel * scale + abs {
            report.failures.push(format!(
                "{}[{offset}]: analytic {exact:e}, numeric {numeric:e}",
                names[tensor].0
            ));
        }
        report.checked += 1;
        index += stride;
    }
    report
}

#[cfg(test)]
pub(crate) fn assert_gradients<P, F>(params: &P, grads: &P, loss: F, rel: f64, abs: f64)
where
    P: Parameterized + Clone,
    F: Fn(&P) -> f64,
{
    let report = gradient_check(params, grads, loss, rel, abs, usize::MAX);
    assert!(report.passed(), "{:#?}", report.failures);
}
