//! Pinyin-constrained cross-entropy and its gradient.
//!
//! For a masked prediction with target `y` and class `K` the loss term is
//! `-(g[y] - log sum_{c in K} exp(g[c]))`, `g` being the LM-head logits.
//! With `K` the whole vocabulary this is the ordinary LM loss. The batch
//! loss is the mean over all masked positions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::encode::{ClassRef, EncodedInput};
use crate::error::{Error, Result};
use crate::model::{Model, Params, Trace};
use crate::nn::{self, axpy, dot, gelu_grad, layer_norm_backward, linear_backward};

/// Log-probability of `target` under a softmax restricted to `class`.
/// `logits` covers the whole vocabulary.
pub fn constrained_log_prob(logits: &[f64], class: &[u32], target: u32) -> Result<f64> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    if !class.contains(&target) {
        return Err(Error::TargetNotInClass(target));
    }
    let lse = nn::log_sum_exp(class.iter().map(|c| logits[*c as usize]));
    Ok(logits[target as usize] - lse)
}

/// Normalizes logits already restricted to a class into log-probabilities.
pub fn class_log_probs(class_logits: &[f64]) -> Vec<f64> {
    let lse = nn::log_sum_exp(class_logits.iter().copied());
    class_logits.iter().map(|g| g - lse).collect()
}

pub struct LossOutput {
    /// Mean negative log-likelihood over masked positions.
    pub loss: f64,
    pub masked: usize,
    pub grads: Params,
}

struct Scored {
    ids: Vec<u32>,
    probs: Vec<f64>,
    target_idx: usize,
    nll: f64,
}

fn score_position(model: &Model, hidden: &[f64], target: u32, class: ClassRef, pc_loss: bool) -> Result<Scored> {
    let ids: Vec<u32> = match class {
        ClassRef::Pinyin(p) if pc_loss => model.vocab.class(p).to_vec(),
        _ => (0..model.vocab.n_chars() as u32).collect(),
    };
    let target_idx = ids.iter().position(|c| *c == target).ok_or(Error::TargetNotInClass(target))?;
    let mut logits = Vec::new();
    model.class_logits(hidden, &ids, &mut logits);
    let lp = class_log_probs(&logits);
    let nll = -lp[target_idx];
    let probs = lp.iter().map(|v| libm::exp(*v)).collect();
    Ok(Scored { ids, probs, target_idx, nll })
}

/// Mean loss over the batch without gradients (dropout off).
pub fn batch_loss(model: &Model, batch: &[EncodedInput], pc_loss: bool) -> Result<f64> {
    let d = model.config.d_model;
    let mut total = 0.0;
    let mut count = 0usize;
    for input in batch {
        let trace = model.trace(input, None)?;
        for (t, target, class) in input.targets() {
            total += score_position(model, &trace.hidden[t * d..(t + 1) * d], target, class, pc_loss)?.nll;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Shape("batch has no masked positions".into()));
    }
    Ok(total / count as f64)
}

/// Mean loss and its gradient w.r.t. every parameter. `rng` enables dropout.
pub fn loss_and_grad(
    model: &Model,
    batch: &[EncodedInput],
    pc_loss: bool,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let masked: usize = batch.iter().map(EncodedInput::masked_count).sum();
    if masked == 0 {
        return Err(Error::Shape("batch has no masked positions".into()));
    }
    let scale = 1.0 / masked as f64;
    let mut grads = Params::zeros(&model.config);
    let mut total = 0.0;
    for input in batch {
        let trace = model.trace(input, rng.as_mut().map(|r| &mut **r as &mut dyn RngCore))?;
        total += backward(model, input, &trace, pc_loss, scale, &mut grads)?;
    }
    let loss = total * scale;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss}")));
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(LossOutput { loss, masked, grads })
}

/// Accumulates `scale * d(sum of nll)/d(params)` into `grads`; returns the
/// summed nll of this example.
fn backward(model: &Model, input: &EncodedInput, trace: &Trace, pc_loss: bool, scale: f64, grads: &mut Params) -> Result<f64> {
    let cfg = &model.config;
    let p = &model.params;
    let (rows, d, ff, heads, hd) = (trace.rows, cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.head_dim());

    let mut total = 0.0;
    let mut dh = vec![0.0; rows * d];
    for (t, target, class) in input.targets() {
        let hidden = &trace.hidden[t * d..(t + 1) * d];
        let s = score_position(model, hidden, target, class, pc_loss)?;
        total += s.nll;
        let dht = &mut dh[t * d..(t + 1) * d];
        for (i, (c, prob)) in s.ids.iter().zip(&s.probs).enumerate() {
            let g = scale * (prob - if i == s.target_idx { 1.0 } else { 0.0 });
            let c = *c as usize;
            axpy(g, &p.head[c * d..(c + 1) * d], dht);
            axpy(g, hidden, &mut grads.head[c * d..(c + 1) * d]);
        }
    }

    let mut dx = vec![0.0; rows * d];
    layer_norm_backward(
        &dh,
        &trace.lnf_xhat,
        &trace.lnf_rstd,
        rows,
        d,
        &p.lnf_gain,
        &mut dx,
        &mut grads.lnf_gain,
        &mut grads.lnf_bias,
    );

    let att_scale = 1.0 / libm::sqrt(hd as f64);
    for (l, (lt, lp)) in trace.layers.iter().zip(&p.layers).enumerate().rev() {
        let g = &mut grads.layers[l];

        // x_out = x_mid + dropout(mlp(ln2(x_mid)))
        let mut dmlp = dx.clone();
        if let Some(m) = &lt.drop_mlp {
            dmlp.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        let mut dact = vec![0.0; rows * ff];
        linear_backward(&lt.act, &dmlp, rows, &lp.w_proj, ff, d, &mut dact, &mut g.w_proj, &mut g.b_proj);
        for (da, f) in dact.iter_mut().zip(&lt.fc) {
            *da *= gelu_grad(*f);
        }
        let mut dln2 = vec![0.0; rows * d];
        linear_backward(&lt.ln2_out, &dact, rows, &lp.w_fc, d, ff, &mut dln2, &mut g.w_fc, &mut g.b_fc);
        layer_norm_backward(
            &dln2,
            &lt.ln2_xhat,
            &lt.ln2_rstd,
            rows,
            d,
            &lp.ln2_gain,
            &mut dx,
            &mut g.ln2_gain,
            &mut g.ln2_bias,
        );

        // x_mid = x_in + dropout(attn(ln1(x_in)))
        let mut dproj = dx.clone();
        if let Some(m) = &lt.drop_attn {
            dproj.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
        }
        let mut dattn = vec![0.0; rows * d];
        linear_backward(&lt.attn, &dproj, rows, &lp.w_out, d, d, &mut dattn, &mut g.w_out, &mut g.b_out);

        let mut dqkv = vec![0.0; rows * 3 * d];
        let mut dp = vec![0.0; rows];
        for h in 0..heads {
            for t in 0..rows {
                let probs = &lt.probs[(h * rows + t) * rows..(h * rows + t) * rows + t + 1];
                let dout = &dattn[t * d + h * hd..t * d + (h + 1) * hd];
                let mut weighted = 0.0;
                for s in 0..=t {
                    let v = &lt.qkv[s * 3 * d + 2 * d + h * hd..s * 3 * d + 2 * d + (h + 1) * hd];
                    dp[s] = dot(dout, v);
                    weighted += probs[s] * dp[s];
                    axpy(probs[s], dout, &mut dqkv[s * 3 * d + 2 * d + h * hd..s * 3 * d + 2 * d + (h + 1) * hd]);
                }
                let q_off = t * 3 * d + h * hd;
                for s in 0..=t {
                    let ds = probs[s] * (dp[s] - weighted) * att_scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let k_off = s * 3 * d + d + h * hd;
                    for i in 0..hd {
                        let (q, k) = (lt.qkv[q_off + i], lt.qkv[k_off + i]);
                        dqkv[q_off + i] += ds * k;
                        dqkv[k_off + i] += ds * q;
                    }
                }
            }
        }
        let mut dln1 = vec![0.0; rows * d];
        linear_backward(&lt.ln1_out, &dqkv, rows, &lp.w_qkv, d, 3 * d, &mut dln1, &mut g.w_qkv, &mut g.b_qkv);
        layer_norm_backward(
            &dln1,
            &lt.ln1_xhat,
            &lt.ln1_rstd,
            rows,
            d,
            &lp.ln1_gain,
            &mut dx,
            &mut g.ln1_gain,
            &mut g.ln1_bias,
        );
    }

    if let Some(m) = &trace.drop_emb {
        dx.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
    }
    for t in 0..rows {
        let row = &dx[t * d..(t + 1) * d];
        let tok = input.token_ids[t] as usize;
        let pos = input.position_ids[t] as usize;
        axpy(1.0, row, &mut grads.tok_emb[tok * d..(tok + 1) * d]);
        axpy(1.0, row, &mut grads.pos_emb[pos * d..(pos + 1) * d]);
        if let Some(pins) = &input.pinyin_ids {
            let q = pins[t] as usize;
            axpy(1.0, row, &mut grads.pin_emb[q * d..(q + 1) * d]);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_class_is_certain() {
        assert_eq!(constrained_log_prob(&[3.0, -1.0, 7.0], &[1], 1).unwrap(), 0.0);
    }

    #[test]
    fn uniform_class() {
        let lp = constrained_log_prob(&[0.5; 6], &[0, 2, 3, 5], 3).unwrap();
        assert!((libm::exp(lp) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn two_way() {
        // e / (e + e^2) = 1 / (1 + e)
        let lp = constrained_log_prob(&[1.0, 2.0], &[0, 1], 0).unwrap();
        assert!((libm::exp(lp) - 0.268_941_421_369_995_1).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(constrained_log_prob(&[1.0], &[], 0), Err(Error::EmptyClass));
        assert!(matches!(constrained_log_prob(&[1.0, 2.0], &[1], 0), Err(Error::TargetNotInClass(_))));
    }
}
