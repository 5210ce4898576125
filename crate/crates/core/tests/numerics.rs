use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regimen::numerics::{
    finite_diff_check, AdamConfig, GradCheckOptions, LrSchedule, ParamId, ParamStore, Tape, Tensor, Var,
};

const OP_TOLERANCE: f64 = 1e-6;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Values bounded away from zero so kinks are never straddled.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let mut t = random(rng, shape);
    for v in t.data_mut() {
        *v = v.signum() * (0.2 + v.abs());
    }
    t
}

/// Reduces `y` to a scalar through a fixed random projection so every
/// output coordinate contributes a distinct weight.
fn project(tape: &mut Tape<'_>, y: Var, seed: u64) -> regimen::numerics::Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = random(&mut rng, tape.shape(y));
    let r = tape.constant(r);
    let p = tape.mul(y, r)?;
    tape.sum(p)
}

fn check<F>(name: &str, store: &ParamStore, f: F)
where
    F: Fn(&mut Tape<'_>) -> regimen::numerics::Result<Var> + Sync + Send,
{
    let opts = GradCheckOptions {
        samples_per_param: 10_000,
        ..GradCheckOptions::default()
    };
    let report = finite_diff_check(store, f, &opts).unwrap();
    assert!(report.coordinates_checked > 0, "{name}");
    assert!(
        report.max_rel_error < OP_TOLERANCE,
        "{name}: {} at {:?}",
        report.max_rel_error,
        report.worst
    );
}

fn store_of(params: &[(&str, Tensor)]) -> (ParamStore, Vec<ParamId>) {
    let mut s = ParamStore::new();
    let ids = params.iter().map(|(n, t)| s.add(*n, t.clone()).unwrap()).collect();
    (s, ids)
}

#[test]
fn matmul_in_every_transpose_combination() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
        let a = if ta { random(&mut rng, &[4, 3]) } else { random(&mut rng, &[3, 4]) };
        let b = if tb { random(&mut rng, &[5, 4]) } else { random(&mut rng, &[4, 5]) };
        let (store, ids) = store_of(&[("a", a), ("b", b)]);
        check(&format!("matmul {ta} {tb}"), &store, |t| {
            let (a, b) = (t.param(ids[0]), t.param(ids[1]));
            let y = t.matmul_t(a, b, ta, tb)?;
            project(t, y, 10)
        });
    }
}

#[test]
fn elementwise_and_broadcast_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (store, ids) = store_of(&[
        ("x", random(&mut rng, &[3, 4])),
        ("y", random(&mut rng, &[3, 4])),
        ("bias", random(&mut rng, &[4])),
    ]);
    check("add", &store, |t| {
        let (x, y) = (t.param(ids[0]), t.param(ids[1]));
        let y = t.add(x, y)?;
        project(t, y, 11)
    });
    check("add row", &store, |t| {
        let (x, b) = (t.param(ids[0]), t.param(ids[2]));
        let y = t.add(x, b)?;
        project(t, y, 12)
    });
    check("mul", &store, |t| {
        let (x, y) = (t.param(ids[0]), t.param(ids[1]));
        let y = t.mul(x, y)?;
        project(t, y, 13)
    });
    check("scale and sum", &store, |t| {
        let x = t.param(ids[0]);
        let y = t.scale(x, -2.5)?;
        let s = t.sum(y)?;
        let sq = t.mul(s, s)?;
        Ok(sq)
    });
}

#[test]
fn shape_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (store, ids) = store_of(&[
        ("a", random(&mut rng, &[3, 2])),
        ("b", random(&mut rng, &[3, 5])),
        ("c", random(&mut rng, &[2, 5])),
        ("table", random(&mut rng, &[6, 3])),
    ]);
    check("concat cols", &store, |t| {
        let parts = [t.param(ids[0]), t.param(ids[1])];
        let y = t.concat_cols(&parts)?;
        project(t, y, 14)
    });
    check("concat rows", &store, |t| {
        let parts = [t.param(ids[1]), t.param(ids[2])];
        let y = t.concat_rows(&parts)?;
        project(t, y, 15)
    });
    check("slice cols", &store, |t| {
        let x = t.param(ids[1]);
        let y = t.slice_cols(x, 1, 3)?;
        project(t, y, 16)
    });
    check("gather with repeats", &store, |t| {
        let x = t.param(ids[3]);
        let y = t.gather_rows(x, &[5, 0, 5, 2, 2, 2])?;
        project(t, y, 17)
    });
    check("embedding", &store, |t| {
        let y = t.embedding(ids[3], &[1, 4, 1])?;
        project(t, y, 18)
    });
}

#[test]
fn nonlinearities() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (store, ids) = store_of(&[
        ("x", away_from_zero(&mut rng, &[4, 5])),
        ("gamma", random(&mut rng, &[5])),
        ("beta", random(&mut rng, &[5])),
    ]);
    check("softmax", &store, |t| {
        let x = t.param(ids[0]);
        let y = t.row_softmax(x)?;
        project(t, y, 19)
    });
    check("gelu", &store, |t| {
        let x = t.param(ids[0]);
        let y = t.gelu(x)?;
        project(t, y, 20)
    });
    check("relu", &store, |t| {
        let x = t.param(ids[0]);
        let y = t.relu(x)?;
        project(t, y, 21)
    });
    check("layer norm", &store, |t| {
        let (x, g, b) = (t.param(ids[0]), t.param(ids[1]), t.param(ids[2]));
        let y = t.layer_norm(x, g, b)?;
        project(t, y, 22)
    });
    check("dropout on an evaluation tape", &store, |t| {
        let x = t.param(ids[0]);
        let y = t.dropout(x, 0.5)?;
        project(t, y, 23)
    });
}

#[test]
fn cross_entropy_plain_and_weighted() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (store, ids) = store_of(&[("logits", random(&mut rng, &[6, 4]))]);
    let targets = [0, 3, 1, 1, 2, 0];
    check("cross entropy", &store, |t| {
        let x = t.param(ids[0]);
        t.cross_entropy(x, &targets, None)
    });
    let w = [1.0, 0.2, 3.0, 1.0, 0.5, 2.0];
    check("weighted cross entropy", &store, |t| {
        let x = t.param(ids[0]);
        t.cross_entropy(x, &targets, Some(&w))
    });
}

#[test]
fn composed_graph_reuses_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (store, ids) = store_of(&[("w", random(&mut rng, &[4, 4])), ("x", random(&mut rng, &[3, 4]))]);
    check("x w w^T with shared w", &store, |t| {
        let (w, x) = (t.param(ids[0]), t.param(ids[1]));
        let h = t.matmul(x, w)?;
        let h = t.gelu(h)?;
        let y = t.matmul_t(h, w, false, true)?;
        let y = t.add(y, x)?;
        project(t, y, 24)
    });
}

/// Reference Adam written from the update rule.
fn reference_adam(w: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], step: i32, lr: f64, c: &AdamConfig) {
    for i in 0..w.len() {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        let mhat = m[i] / (1.0 - c.beta1.powi(step));
        let vhat = v[i] / (1.0 - c.beta2.powi(step));
        w[i] -= lr * mhat / (vhat.sqrt() + c.eps);
    }
}

#[test]
fn adam_minimizes_a_convex_quadratic_and_matches_the_reference() {
    let curvature = [1.0, 4.0, 0.25, 9.0];
    let centre = [0.5, -1.0, 2.0, 0.0];
    let start = vec![3.0, 3.0, -3.0, 1.0];
    let loss_of = |w: &[f64]| -> f64 { (0..4).map(|i| curvature[i] * (w[i] - centre[i]).powi(2)).sum() };
    let mut store = ParamStore::new();
    let id = store.add("w", Tensor::new(vec![4], start.clone()).unwrap()).unwrap();
    let cfg = AdamConfig::default();
    let steps = 400;
    let schedule = LrSchedule::with_warmup_fraction(0.1, steps, 0.1).unwrap();
    let (mut w, mut m, mut v) = (start, vec![0.0; 4], vec![0.0; 4]);
    let mut losses = Vec::new();
    for step in 0..steps {
        let lr = schedule.lr_at(step + 1).unwrap();
        let grads = {
            let mut tape = Tape::new(&store);
            let p = tape.param(id);
            let c = tape.constant(Tensor::new(vec![4], centre.to_vec()).unwrap());
            let k = tape.constant(Tensor::new(vec![4], curvature.to_vec()).unwrap());
            let neg = tape.scale(c, -1.0).unwrap();
            let d = tape.add(p, neg).unwrap();
            let sq = tape.mul(d, d).unwrap();
            let weighted = tape.mul(sq, k).unwrap();
            let loss = tape.sum(weighted).unwrap();
            losses.push(tape.value(loss).item());
            tape.backward(loss).unwrap()
        };
        let g: Vec<f64> = (0..4).map(|i| 2.0 * curvature[i] * (w[i] - centre[i])).collect();
        reference_adam(&mut w, &mut m, &mut v, &g, step as i32 + 1, lr, &cfg);
        store.accumulate(&grads);
        store.adam_step(lr, &cfg).unwrap();
        for (a, b) in store.value(id).data().iter().zip(&w) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "step {step}: {a} vs {b}");
        }
    }
    let last = loss_of(store.value(id).data());
    assert!(last < 1e-3 * losses[0], "{last} vs {}", losses[0]);
    // once the schedule decays, steps shrink and the loss settles monotonically
    let tail = &losses[steps * 9 / 10..];
    assert!(tail.windows(2).all(|p| p[1] <= p[0] + 1e-12), "{tail:?}");
}

proptest! {
    #[test]
    fn schedule_is_a_triangle(peak in 1e-6f64..1.0, total in 1usize..500, frac in 0.0f64..1.0) {
        let s = LrSchedule::with_warmup_fraction(peak, total, frac).unwrap();
        let lrs: Vec<f64> = (0..=total).map(|k| s.lr_at(k).unwrap()).collect();
        prop_assert!(lrs.iter().all(|&l| (0.0..=peak * (1.0 + 1e-12)).contains(&l)));
        prop_assert_eq!(lrs[total], if s.warmup_steps == total { peak } else { 0.0 });
        let w = s.warmup_steps;
        prop_assert!(lrs[..=w.min(total)].windows(2).all(|p| p[1] >= p[0]));
        prop_assert!(lrs[w..].windows(2).all(|p| p[1] <= p[0]));
        prop_assert!(s.lr_at(total + 1).is_err());
    }
}

#[test]
fn adam_loss_strictly_decreases_after_warmup() {
    let curvature = Tensor::new(vec![4], vec![1.0, 4.0, 0.25, 9.0]).unwrap();
    let mut store = ParamStore::new();
    // far enough from the minimum that no coordinate overshoots in 100 steps
    let id = store.add("w", Tensor::new(vec![4], vec![3.0, -4.0, 5.0, 3.5]).unwrap()).unwrap();
    let schedule = LrSchedule::with_warmup_fraction(0.05, 100, 0.1).unwrap();
    let mut losses = Vec::new();
    for step in 1..=100 {
        let grads = {
            let mut tape = Tape::new(&store);
            let w = tape.param(id);
            let k = tape.constant(curvature.clone());
            let sq = tape.mul(w, w).unwrap();
            let weighted = tape.mul(sq, k).unwrap();
            let loss = tape.sum(weighted).unwrap();
            losses.push(tape.value(loss).item());
            tape.backward(loss).unwrap()
        };
        store.accumulate(&grads);
        store.adam_step(schedule.lr_at(step).unwrap(), &AdamConfig::default()).unwrap();
    }
    let warm = schedule.warmup_steps;
    assert!(losses[warm..].windows(2).all(|p| p[1] < p[0]), "{losses:?}");
}
