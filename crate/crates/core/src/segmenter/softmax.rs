//! Multinomial logistic regression: scores, softmax cross-entropy and its
//! gradient. Weights are a row-major `C x (D + 1)` matrix whose last column
//! is the bias.

/// Class scores for one feature row.
#[inline]
pub fn scores_into(weights: &[f64], classes: usize, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (c, s) in out.iter_mut().enumerate().take(classes) {
        let w = &weights[c * (d + 1)..(c + 1) * (d + 1)];
        let mut acc = w[d];
        for k in 0..d {
            acc += w[k] * x[k];
        }
        *s = acc;
    }
}

/// Index of the largest score; ties go to the lowest index.
#[inline]
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// In-place softmax; returns log-sum-exp of the input.
#[inline]
pub fn softmax_in_place(v: &mut [f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    m + sum.ln()
}

/// Mean cross-entropy over the batch plus `0.5 * l2 * |W|^2` (bias column
/// excluded), and its gradient with respect to `weights`.
///
/// `x` holds `y.len()` rows of `d` features.
pub fn loss_and_grad(
    weights: &[f64],
    classes: usize,
    d: usize,
    x: &[f64],
    y: &[u16],
    l2: f64,
) -> (f64, Vec<f64>) {
    let cols = d + 1;
    let n = y.len();
    let mut grad = vec![0.0; classes * cols];
    let mut loss = 0.0;
    let mut p = vec![0.0; classes];
    for (i, &label) in y.iter().enumerate() {
        let row = &x[i * d..(i + 1) * d];
        scores_into(weights, classes, row, &mut p);
        let target_score = p[label as usize];
        let lse = softmax_in_place(&mut p);
        loss += lse - target_score;
        p[label as usize] -= 1.0;
        for c in 0..classes {
            let g = &mut grad[c * cols..(c + 1) * cols];
            let pc = p[c];
            for k in 0..d {
                g[k] += pc * row[k];
            }
            g[d] += pc;
        }
    }
    let inv = 1.0 / n.max(1) as f64;
    loss *= inv;
    for g in &mut grad {
        *g *= inv;
    }
    for c in 0..classes {
        for k in 0..d {
            let w = weights[c * cols + k];
            loss += 0.5 * l2 * w * w;
            grad[c * cols + k] += l2 * w;
        }
    }
    (loss, grad)
}
