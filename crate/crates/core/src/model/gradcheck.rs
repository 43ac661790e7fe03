use super::batch::Batch;
use super::layers::Dropper;
use super::net::EditorModel;
use crate::error::Result;

/// Agreement between analytic and central-difference gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    /// Worst per-tensor relative error `|a - n| / max(|a|, |n|)` in L2 norm.
    pub max_rel_err: f64,
    pub worst: String,
    /// Perturbations that flipped a ReLU input sign. Finite differences are
    /// not a valid oracle across a kink, so a sound check needs zero.
    pub kink_crossings: usize,
    /// `(parameter, relative error)` for every tensor.
    pub per_param: Vec<(String, f64)>,
}

/// Gradient norms below this are indistinguishable from finite-difference
/// round-off (about `f64::EPSILON * |L| / h`), e.g. attention key biases,
/// whose exact gradient is zero by softmax shift invariance.
pub const NOISE_FLOOR: f64 = 1e-8;

/// Relative error with a floor that keeps exact zeros comparable.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Compares every parameter tensor's gradient with `(L(p+h) - L(p-h)) / 2h`
/// taken element by element. Dropout must be disabled in the model config.
pub fn check_gradients(model: &EditorModel<f64>, batch: &Batch, step: f64) -> Result<GradCheck> {
    let (_, grads) = model.loss_and_grads(batch, &mut Dropper::eval())?;
    let eps = model.config.label_smoothing;
    let (_, base_signs) = model.loss_with_relu_signs(batch, eps)?;
    let mut m = model.clone();
    let mut out = GradCheck {
        checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
        kink_crossings: 0,
        per_param: Vec::new(),
    };
    for (pid, name) in model.params().names().iter().enumerate() {
        let n = model.params().get(pid).len();
        let (mut diff2, mut a2, mut n2) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            let orig = model.params().get(pid).as_slice().unwrap()[i];
            let mut eval = |v: f64| -> Result<f64> {
                m.params_mut().get_mut(pid).as_slice_mut().unwrap()[i] = v;
                let (s, signs) = m.loss_with_relu_signs(batch, eps)?;
                if signs != base_signs {
                    out.kink_crossings += 1;
                }
                Ok(s.loss)
            };
            let up = eval(orig + step)?;
            let down = eval(orig - step)?;
            m.params_mut().get_mut(pid).as_slice_mut().unwrap()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = grads.get(pid).as_slice().unwrap()[i];
            diff2 += (analytic - numeric).powi(2);
            a2 += analytic * analytic;
            n2 += numeric * numeric;
            out.checked += 1;
        }
        let r = diff2.sqrt() / a2.sqrt().max(n2.sqrt()).max(NOISE_FLOOR);
        if r > out.max_rel_err {
            out.max_rel_err = r;
            out.worst = format!("{name}: |g| {:e}, rel {r:e}", a2.sqrt());
        }
        out.per_param.push((name.clone(), r));
    }
    Ok(out)
}
