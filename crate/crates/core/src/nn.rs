//! Dense kernels over row-major `f64` buffers, forward and backward.

pub const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[t] = bias + x[t] * w` for `rows` rows; `w` is `din x dout`.
pub fn linear(x: &[f64], rows: usize, w: &[f64], bias: &[f64], din: usize, dout: usize, out: &mut [f64]) {
    for t in 0..rows {
        let o = &mut out[t * dout..(t + 1) * dout];
        o.copy_from_slice(bias);
        let xr = &x[t * din..(t + 1) * din];
        for (i, xi) in xr.iter().enumerate() {
            axpy(*xi, &w[i * dout..(i + 1) * dout], o);
        }
    }
}

/// Accumulates gradients of [`linear`] into `dx`, `dw`, `db`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward(
    x: &[f64],
    dy: &[f64],
    rows: usize,
    w: &[f64],
    din: usize,
    dout: usize,
    dx: &mut [f64],
    dw: &mut [f64],
    db: &mut [f64],
) {
    for t in 0..rows {
        let g = &dy[t * dout..(t + 1) * dout];
        axpy(1.0, g, db);
        let xr = &x[t * din..(t + 1) * din];
        let dxr = &mut dx[t * din..(t + 1) * din];
        for i in 0..din {
            let wr = &w[i * dout..(i + 1) * dout];
            dxr[i] += dot(g, wr);
            axpy(xr[i], g, &mut dw[i * dout..(i + 1) * dout]);
        }
    }
}

/// Layer-norm over rows of width `d`. Writes normalized `xhat` and `1/std`.
#[allow(clippy::too_many_arguments)]
pub fn layer_norm(x: &[f64], rows: usize, d: usize, gain: &[f64], bias: &[f64], y: &mut [f64], xhat: &mut [f64], rstd: &mut [f64]) {
    for t in 0..rows {
        let xr = &x[t * d..(t + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / libm::sqrt(var + LN_EPS);
        rstd[t] = r;
        for i in 0..d {
            let h = (xr[i] - mean) * r;
            xhat[t * d + i] = h;
            y[t * d + i] = h * gain[i] + bias[i];
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn layer_norm_backward(
    dy: &[f64],
    xhat: &[f64],
    rstd: &[f64],
    rows: usize,
    d: usize,
    gain: &[f64],
    dx: &mut [f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) {
    for t in 0..rows {
        let g = &dy[t * d..(t + 1) * d];
        let h = &xhat[t * d..(t + 1) * d];
        let mut sum_dh = 0.0;
        let mut sum_dh_h = 0.0;
        for i in 0..d {
            dgain[i] += g[i] * h[i];
            dbias[i] += g[i];
            let dh = g[i] * gain[i];
            sum_dh += dh;
            sum_dh_h += dh * h[i];
        }
        let inv_d = 1.0 / d as f64;
        for i in 0..d {
            let dh = g[i] * gain[i];
            dx[t * d + i] += rstd[t] * (dh - inv_d * sum_dh - h[i] * inv_d * sum_dh_h);
        }
    }
}

#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::tanh(GELU_C * (x + GELU_A * x * x * x)))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let th = libm::tanh(GELU_C * (x + GELU_A * x * x * x));
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// `log(sum(exp(v)))` with max subtraction.
pub fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(v.map(|x| libm::exp(x - m)).sum::<f64>())
}
