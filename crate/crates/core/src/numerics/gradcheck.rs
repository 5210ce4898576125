use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ParamStore, Result, Tape, Var};
use crate::par::{self, Exec};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Coordinates sampled per parameter; smaller tensors are checked in full.
    pub samples_per_param: usize,
    pub seed: u64,
    /// Denominator floor so near-zero gradient pairs compare absolutely.
    pub abs_floor: f64,
    pub exec: Exec,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-5,
            samples_per_param: 200,
            seed: 0,
            abs_floor: 1e-6,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoordinateError {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<CoordinateError>,
    pub coordinates_checked: usize,
    pub parameters_checked: usize,
    pub loss: f64,
}

/// Compares analytic gradients of `loss_fn` against central differences
/// `(f(θ+eps) − f(θ−eps)) / 2eps` on sampled coordinates of every parameter.
///
/// `loss_fn` must be deterministic: build it on an evaluation tape.
pub fn finite_diff_check<F>(store: &ParamStore, loss_fn: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var> + Sync + Send,
{
    let mut tape = Tape::new(store);
    let loss_var = loss_fn(&mut tape)?;
    let loss = tape.value(loss_var).item();
    let grads = tape.backward(loss_var)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut coords = Vec::new();
    for id in store.ids() {
        let n = store.value(id).len();
        let mut picked: Vec<usize> = if n <= opts.samples_per_param {
            (0..n).collect()
        } else {
            sample(&mut rng, n, opts.samples_per_param).into_vec()
        };
        picked.sort_unstable();
        coords.extend(picked.into_iter().map(|i| (id, i)));
    }

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new(s);
        let v = loss_fn(&mut t)?;
        Ok(t.value(v).item())
    };
    let numeric = par::map_init(
        opts.exec,
        &coords,
        || store.clone(),
        |s, &(id, i)| -> Result<f64> {
            let orig = s.value(id).data()[i];
            s.value_mut(id).data_mut()[i] = orig + opts.eps;
            let plus = eval(s);
            s.value_mut(id).data_mut()[i] = orig - opts.eps;
            let minus = eval(s);
            s.value_mut(id).data_mut()[i] = orig;
            Ok((plus? - minus?) / (2.0 * opts.eps))
        },
    );

    let mut worst: Option<CoordinateError> = None;
    for (&(id, i), num) in coords.iter().zip(numeric) {
        let num = num?;
        let ana = grads.get(id).map_or(0.0, |g| g[i]);
        let denom = ana.abs().max(num.abs()).max(opts.abs_floor);
        let rel = (ana - num).abs() / denom;
        if worst.as_ref().is_none_or(|w| rel > w.rel_error) {
            worst = Some(CoordinateError {
                param: store.get(id).name.clone(),
                index: i,
                analytic: ana,
                numeric: num,
                rel_error: rel,
            });
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.as_ref().map_or(0.0, |w| w.rel_error),
        worst,
        coordinates_checked: coords.len(),
        parameters_checked: store.len(),
        loss,
    })
}
