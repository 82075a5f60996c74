//! Optional gradient transforms applied before an optimizer step.

/// Rescales `g` in place so that `‖g‖₂ ≤ max_norm`. Returns the norm before
/// clipping.
pub fn clip_global_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|v| *v *= s);
    }
    norm
}

/// `g ← g + λ θ`
pub fn add_weight_decay(g: &mut [f64], theta: &[f64], lambda: f64) {
    for (gi, th) in g.iter_mut().zip(theta) {
        *gi += lambda * th;
    }
}
