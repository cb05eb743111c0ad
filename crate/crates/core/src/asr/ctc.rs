use super::vocab::{TranscriptionTarget, BLANK};
use crate::error::{Error, Result};

/// Row-major `n_frames x n_classes` score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub n_frames: usize,
    pub n_classes: usize,
    pub data: Vec<f64>,
}

impl Logits {
    pub fn new(n_frames: usize, n_classes: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_frames * n_classes);
        Self { n_frames, n_classes, data }
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_classes..(t + 1) * self.n_classes]
    }

    pub fn log_softmax(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for t in 0..self.n_frames {
            let row = self.row(t);
            let lse = log_sum_exp(row.iter().copied());
            out.extend(row.iter().map(|v| v - lse));
        }
        out
    }

    /// Per-frame argmax ids.
    pub fn best_path(&self) -> Vec<usize> {
        (0..self.n_frames)
            .map(|t| {
                let row = self.row(t);
                let mut best = 0;
                for (k, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

pub(crate) fn log_sum_exp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + vals.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// Collapses repeats and drops blanks.
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != BLANK {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

fn check_feasible(logits: &Logits, target: &TranscriptionTarget) -> Result<()> {
    let required = target.min_frames();
    if required > logits.n_frames {
        return Err(Error::InfeasibleTarget {
            tokens: target.token_ids.len(),
            required,
            frames: logits.n_frames,
        });
    }
    if let Some(&bad) = target.token_ids.iter().find(|&&k| k == BLANK || k >= logits.n_classes) {
        return Err(Error::Config(format!("target token id {bad} outside the label set")));
    }
    Ok(())
}

/// Negative log-probability of `target` summed over all CTC alignments.
pub fn ctc_loss(logits: &Logits, target: &TranscriptionTarget) -> Result<f64> {
    Ok(ctc_loss_grad(logits, target)?.0)
}

/// Loss together with its exact gradient with respect to the logits.
pub fn ctc_loss_grad(logits: &Logits, target: &TranscriptionTarget) -> Result<(f64, Vec<f64>)> {
    check_feasible(logits, target)?;
    let t_len = logits.n_frames;
    let v = logits.n_classes;
    let lp = logits.log_softmax();

    // Extended label sequence with blanks interleaved.
    let mut ext = Vec::with_capacity(2 * target.token_ids.len() + 1);
    ext.push(BLANK);
    for &k in &target.token_ids {
        ext.push(k);
        ext.push(BLANK);
    }
    let s_len = ext.len();
    let skip = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];

    let ninf = f64::NEG_INFINITY;
    // alpha includes the emission at t; beta covers frames after t.
    let mut alpha = vec![ninf; t_len * s_len];
    let mut beta = vec![ninf; t_len * s_len];
    alpha[0] = lp[ext[0]];
    if s_len > 1 {
        alpha[1] = lp[ext[1]];
    }
    for t in 1..t_len {
        let (prev, cur) = alpha.split_at_mut(t * s_len);
        let prev = &prev[(t - 1) * s_len..];
        for s in 0..s_len {
            let mut a = prev[s];
            if s >= 1 {
                a = lse2(a, prev[s - 1]);
            }
            if skip(s) {
                a = lse2(a, prev[s - 2]);
            }
            cur[s] = a + lp[t * v + ext[s]];
        }
    }
    let last = (t_len - 1) * s_len;
    beta[last + s_len - 1] = 0.0;
    if s_len > 1 {
        beta[last + s_len - 2] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let next = (t + 1) * s_len;
            let emit = |s2: usize| beta[next + s2] + lp[(t + 1) * v + ext[s2]];
            let mut b = emit(s);
            if s + 1 < s_len {
                b = lse2(b, emit(s + 1));
            }
            if s + 2 < s_len && skip(s + 2) {
                b = lse2(b, emit(s + 2));
            }
            beta[t * s_len + s] = b;
        }
    }
    let log_p = if s_len > 1 {
        lse2(alpha[last + s_len - 1], alpha[last + s_len - 2])
    } else {
        alpha[last]
    };
    if log_p == ninf {
        return Err(Error::InfeasibleTarget {
            tokens: target.token_ids.len(),
            required: target.min_frames(),
            frames: t_len,
        });
    }

    let mut grad = vec![0.0; t_len * v];
    let mut occ = vec![ninf; v];
    for t in 0..t_len {
        occ.iter_mut().for_each(|o| *o = ninf);
        for s in 0..s_len {
            let idx = t * s_len + s;
            occ[ext[s]] = lse2(occ[ext[s]], alpha[idx] + beta[idx]);
        }
        for k in 0..v {
            grad[t * v + k] = lp[t * v + k].exp() - (occ[k] - log_p).exp();
        }
    }
    Ok((-log_p, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(ids: &[usize]) -> TranscriptionTarget {
        TranscriptionTarget { text: String::new(), token_ids: ids.to_vec() }
    }

    #[test]
    fn single_frame_uniform() {
        let l = Logits::new(1, 3, vec![0.0; 3]);
        let loss = ctc_loss(&l, &target(&[1])).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_frames_uniform() {
        // aa, a-, -a out of 9 paths.
        let l = Logits::new(2, 3, vec![0.0; 6]);
        let loss = ctc_loss(&l, &target(&[1])).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_target() {
        let l = Logits::new(3, 4, vec![0.0; 12]);
        assert!(matches!(
            ctc_loss(&l, &target(&[1, 1, 2])),
            Err(Error::InfeasibleTarget { required: 4, frames: 3, .. })
        ));
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let data: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64 * 0.3).collect();
        let l = Logits::new(5, 4, data);
        let (_, g) = ctc_loss_grad(&l, &target(&[1, 2])).unwrap();
        for t in 0..5 {
            let s: f64 = g[t * 4..(t + 1) * 4].iter().sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn collapse_rule() {
        assert_eq!(collapse(&[3, 1, 1, 0, 20]), vec![3, 1, 20]);
        assert_eq!(collapse(&[1, 0, 1]), vec![1, 1]);
        assert!(collapse(&[0, 0]).is_empty());
    }
}
