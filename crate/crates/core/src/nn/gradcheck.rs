//! Central finite-difference verification of analytic gradients.
//!
//! The checks here are the independent oracle for every backward pass in
//! the crate: they re-evaluate the forward map at perturbed parameters and
//! never touch the reverse-mode code. Run them on f64 models — f32 forward
//! noise swamps the difference quotient.

use super::{Mode, Model, Tensor4};

/// Worst observed relative error, with enough context to debug it.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

/// Relative error with a floor so near-zero gradient pairs compare sanely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central-difference check of `analytic` against perturbations of `values`
/// through `eval`. `eval` must be a pure function of the passed values
/// (rebuild any stateful layer inside it). Returns the max relative error.
pub fn central_diff_check(
    values: &mut [f64],
    analytic: &[f64],
    indices: &[usize],
    eval: &mut dyn FnMut(&[f64]) -> f64,
    h: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for &i in indices {
        let orig = values[i];
        values[i] = orig + h;
        let up = eval(values);
        values[i] = orig - h;
        let down = eval(values);
        values[i] = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max(rel_err(analytic[i], fd));
    }
    worst
}

/// Evenly spaced sample of `count` indices in `0..len`.
pub fn sample_indices(len: usize, count: usize) -> Vec<usize> {
    if len <= count {
        return (0..len).collect();
    }
    (0..count).map(|i| i * len / count).collect()
}

/// Finite-difference check of every trainable parameter tensor of a model
/// against its reverse-mode gradients, through an arbitrary scalar loss.
///
/// `loss` maps the network output to a scalar and its cotangent. Each
/// evaluation clones the pristine model so batch-norm statistics and caches
/// start identically.
pub fn check_model_gradients<F>(
    model: &Model<f64>,
    x: &Tensor4<f64>,
    loss: F,
    per_tensor: usize,
    h: f64,
) -> CheckReport
where
    F: Fn(&Tensor4<f64>) -> (f64, Tensor4<f64>),
{
    // Analytic pass.
    let mut work = model.clone();
    let y = work.forward(x, Mode::Train).expect("forward");
    let (_, dy) = loss(&y);
    work.zero_grads();
    work.backward(&dy).expect("backward");
    let mut grads: Vec<(String, Vec<f64>)> = Vec::new();
    work.visit_params(&mut |p| {
        if p.trainable {
            grads.push((p.name.clone(), p.grads.clone()));
        }
    });

    let eval_at = |tensor_idx: usize, value_idx: usize, delta: f64| -> f64 {
        let mut m = model.clone();
        let mut seen = 0usize;
        m.visit_params(&mut |p| {
            if p.trainable {
                if seen == tensor_idx {
                    p.values[value_idx] += delta;
                }
                seen += 1;
            }
        });
        let y = m.forward(x, Mode::Train).expect("forward");
        loss(&y).0
    };

    let mut report = CheckReport { checked: 0, max_rel_err: 0.0, worst: String::new() };
    for (t, (name, g)) in grads.iter().enumerate() {
        for i in sample_indices(g.len(), per_tensor) {
            let up = eval_at(t, i, h);
            let down = eval_at(t, i, -h);
            let fd = (up - down) / (2.0 * h);
            let err = rel_err(g[i], fd);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = format!("{name}[{i}]: analytic {} vs fd {fd}", g[i]);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Arch, ModelConfig};

    // Mean of squares keeps the loss O(1), which keeps the finite-difference
    // rounding floor far below the gradients being checked.
    fn mean_squares_loss(y: &Tensor4<f64>) -> (f64, Tensor4<f64>) {
        let n = y.len() as f64;
        let v = y.data().iter().map(|&a| a * a).sum::<f64>() / n;
        let mut dy = y.clone();
        for d in dy.data_mut() {
            *d *= 2.0 / n;
        }
        (v, dy)
    }

    fn rand_input(dims: [usize; 4], salt: u64) -> Tensor4<f64> {
        use rand::Rng;
        let mut rng = crate::rng::stream(7, crate::rng::Purpose::Init, 99, salt);
        let n: usize = dims.iter().product();
        Tensor4::from_vec(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn composed_fd_unet_gradients_match_finite_differences() {
        let cfg = ModelConfig { arch: Arch::FdUnet, depth_levels: 3, base_filters: 4, ..Default::default() };
        let model = Model::<f64>::build(&cfg, 13).unwrap();
        let x = rand_input([1, 16, 16, 1], 1);
        let report = check_model_gradients(&model, &x, mean_squares_loss, 3, 1e-5);
        assert!(report.checked > 100, "only {} values checked", report.checked);
        assert!(
            report.max_rel_err < 1e-3,
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst
        );
    }

    #[test]
    fn sample_indices_cover_bounds() {
        assert_eq!(sample_indices(3, 8), vec![0, 1, 2]);
        let s = sample_indices(1000, 4);
        assert_eq!(s, vec![0, 250, 500, 750]);
    }
}
