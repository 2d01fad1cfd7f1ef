//! Late-fusion classification head over precomputed sentence embeddings.
//!
//! `scores = W_c [c_nli ; P_p c_p + b_p ; P_h c_h + b_h] + b_c`

use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Label;

/// Width of each SRL projection.
pub const PROJ_DIM: usize = 40;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("{what} has dimension {found}, head expects {expected}")]
    Dimension { what: &'static str, expected: usize, found: usize },
    #[error("parameter vector has length {found}, head has {expected}")]
    ParamCount { expected: usize, found: usize },
    #[error("no training data")]
    Empty,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// One row of an embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub c_nli: Vec<f64>,
    pub c_p: Vec<f64>,
    pub c_h: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Linear { rows, cols, weight: vec![0.0; rows * cols], bias: vec![0.0; rows] }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            *o = self.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionHead {
    pub d_nli: usize,
    pub proj_p: Linear,
    pub proj_h: Linear,
    pub classifier: Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { epochs: 30, learning_rate: 0.05, seed: 0 }
    }
}

fn check(what: &'static str, expected: usize, v: &[f64]) -> Result<(), FusionError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(FusionError::Dimension { what, expected, found: v.len() })
    }
}

fn softmax(z: &[f64; 3]) -> [f64; 3] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

impl FusionHead {
    pub fn zeros(d_nli: usize, d_p: usize, d_h: usize) -> Self {
        FusionHead {
            d_nli,
            proj_p: Linear::zeros(PROJ_DIM, d_p),
            proj_h: Linear::zeros(PROJ_DIM, d_h),
            classifier: Linear::zeros(3, d_nli + 2 * PROJ_DIM),
        }
    }

    /// Uniform init in `±1/sqrt(fan_in)`.
    pub fn random(d_nli: usize, d_p: usize, d_h: usize, seed: u64) -> Self {
        let mut head = FusionHead::zeros(d_nli, d_p, d_h);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in [&mut head.proj_p, &mut head.proj_h, &mut head.classifier] {
            let a = 1.0 / (layer.cols.max(1) as f64).sqrt();
            for w in layer.weight.iter_mut() {
                *w = rng.gen_range(-a..a);
            }
        }
        head
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d_nli, self.proj_p.cols, self.proj_h.cols)
    }

    pub fn num_params(&self) -> usize {
        self.proj_p.len() + self.proj_h.len() + self.classifier.len()
    }

    /// Flat parameter vector: proj_p, proj_h, classifier; weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in [&self.proj_p, &self.proj_h, &self.classifier] {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), FusionError> {
        if params.len() != self.num_params() {
            return Err(FusionError::ParamCount { expected: self.num_params(), found: params.len() });
        }
        let mut at = 0;
        for l in [&mut self.proj_p, &mut self.proj_h, &mut self.classifier] {
            let nw = l.weight.len();
            l.weight.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    fn check_inputs(&self, c_nli: &[f64], c_p: &[f64], c_h: &[f64]) -> Result<(), FusionError> {
        check("c_nli", self.d_nli, c_nli)?;
        check("c_p", self.proj_p.cols, c_p)?;
        check("c_h", self.proj_h.cols, c_h)
    }

    fn fused(&self, c_nli: &[f64], c_p: &[f64], c_h: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.d_nli + 2 * PROJ_DIM];
        z[..self.d_nli].copy_from_slice(c_nli);
        self.proj_p.apply(c_p, &mut z[self.d_nli..self.d_nli + PROJ_DIM]);
        self.proj_h.apply(c_h, &mut z[self.d_nli + PROJ_DIM..]);
        z
    }

    /// Unnormalized label scores in `Label::ALL` order.
    pub fn forward(&self, c_nli: &[f64], c_p: &[f64], c_h: &[f64]) -> Result<[f64; 3], FusionError> {
        self.check_inputs(c_nli, c_p, c_h)?;
        let z = self.fused(c_nli, c_p, c_h);
        let mut s = [0.0; 3];
        self.classifier.apply(&z, &mut s);
        Ok(s)
    }

    pub fn predict(&self, c_nli: &[f64], c_p: &[f64], c_h: &[f64]) -> Result<Label, FusionError> {
        let s = self.forward(c_nli, c_p, c_h)?;
        let best = (0..3).fold(0, |b, c| if s[c] > s[b] { c } else { b });
        Ok(Label::from_index(best).unwrap())
    }

    /// Cross-entropy of one example.
    pub fn loss(&self, c_nli: &[f64], c_p: &[f64], c_h: &[f64], label: Label) -> Result<f64, FusionError> {
        let s = self.forward(c_nli, c_p, c_h)?;
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        Ok(lse - s[label.index()])
    }

    /// Loss and its gradient, laid out like [`FusionHead::params`].
    pub fn loss_and_grad(
        &self,
        c_nli: &[f64],
        c_p: &[f64],
        c_h: &[f64],
        label: Label,
    ) -> Result<(f64, Vec<f64>), FusionError> {
        self.check_inputs(c_nli, c_p, c_h)?;
        let z = self.fused(c_nli, c_p, c_h);
        let mut s = [0.0; 3];
        self.classifier.apply(&z, &mut s);
        let p = softmax(&s);
        let loss = -p[label.index()].ln();
        let g: Vec<f64> = (0..3).map(|c| p[c] - f64::from(u8::from(c == label.index()))).collect();

        let zc = z.len();
        let mut dz = vec![0.0; zc];
        let mut g_cls_w = vec![0.0; 3 * zc];
        for c in 0..3 {
            for i in 0..zc {
                g_cls_w[c * zc + i] = g[c] * z[i];
                dz[i] += self.classifier.weight[c * zc + i] * g[c];
            }
        }
        let proj_grad = |layer: &Linear, dout: &[f64], x: &[f64]| {
            let mut w = vec![0.0; layer.weight.len()];
            for r in 0..layer.rows {
                for k in 0..layer.cols {
                    w[r * layer.cols + k] = dout[r] * x[k];
                }
            }
            (w, dout.to_vec())
        };
        let (gpw, gpb) = proj_grad(&self.proj_p, &dz[self.d_nli..self.d_nli + PROJ_DIM], c_p);
        let (ghw, ghb) = proj_grad(&self.proj_h, &dz[self.d_nli + PROJ_DIM..], c_h);
        let mut grad = Vec::with_capacity(self.num_params());
        grad.extend(gpw);
        grad.extend(gpb);
        grad.extend(ghw);
        grad.extend(ghb);
        grad.extend(g_cls_w);
        grad.extend(g);
        Ok((loss, grad))
    }

    /// Seeded SGD over shuffled examples. Returns mean loss per epoch.
    pub fn fit(&mut self, data: &[EmbeddingRecord], config: &FitConfig) -> Result<Vec<f64>, FusionError> {
        if data.is_empty() {
            return Err(FusionError::Empty);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut params = self.params();
        let mut history = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for &i in &order {
                let r = &data[i];
                let (l, g) = self.loss_and_grad(&r.c_nli, &r.c_p, &r.c_h, r.label)?;
                total += l;
                for (p, gi) in params.iter_mut().zip(&g) {
                    *p -= config.learning_rate * gi;
                }
                self.set_params(&params)?;
            }
            history.push(total / data.len() as f64);
        }
        Ok(history)
    }

    pub fn accuracy(&self, data: &[EmbeddingRecord]) -> Result<f64, FusionError> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0;
        for r in data {
            if self.predict(&r.c_nli, &r.c_p, &r.c_h)? == r.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Relative error `|a - b| / max(|a|, |b|)` over whole vectors; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central finite-difference gradient of the loss with step `h`.
pub fn numeric_grad(head: &FusionHead, r: &EmbeddingRecord, h: f64) -> Result<Vec<f64>, FusionError> {
    let base = head.params();
    let mut probe = head.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut p = base.clone();
    for i in 0..base.len() {
        p[i] = base[i] + h;
        probe.set_params(&p)?;
        let up = probe.loss(&r.c_nli, &r.c_p, &r.c_h, r.label)?;
        p[i] = base[i] - h;
        probe.set_params(&p)?;
        let down = probe.loss(&r.c_nli, &r.c_p, &r.c_h, r.label)?;
        p[i] = base[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingRecord>, FusionError> {
    let file = std::fs::File::open(path).map_err(|e| FusionError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FusionError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FusionError::Line { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

/// Synthetic embeddings whose label is a linear function of `c_p - c_h`
/// while `c_nli` is pure noise.
pub fn synthetic_embeddings(n: usize, d_nli: usize, d_srl: usize, seed: u64) -> Vec<EmbeddingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = |rng: &mut ChaCha8Rng, d: usize| -> Vec<f64> { (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    (0..n)
        .map(|i| {
            let label = Label::ALL[rng.gen_range(0..3)];
            let c_nli = noise(&mut rng, d_nli);
            let mut c_p = noise(&mut rng, d_srl);
            let mut c_h = noise(&mut rng, d_srl);
            // class c shifts dimension c of the premise up and of the hypothesis down
            let c = label.index() % d_srl;
            c_p[c] += 2.0;
            c_h[c] -= 2.0;
            EmbeddingRecord { id: format!("syn-{i}"), c_nli, c_p, c_h, label }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projections_are_forty_wide() {
        let h = FusionHead::zeros(7, 5, 6);
        assert_eq!(h.proj_p.rows, PROJ_DIM);
        assert_eq!(h.proj_h.rows, PROJ_DIM);
        assert_eq!(h.classifier.cols, 7 + 80);
        assert_eq!(h.params().len(), h.num_params());
    }

    #[test]
    fn zero_head_scores_uniformly() {
        let h = FusionHead::zeros(3, 2, 2);
        let s = h.forward(&[1.0, -2.0, 0.5], &[3.0, 1.0], &[0.0, 9.0]).unwrap();
        assert_eq!(s, [0.0; 3]);
        let l = h.loss(&[1.0, -2.0, 0.5], &[3.0, 1.0], &[0.0, 9.0], Label::Neutral).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let h = FusionHead::zeros(3, 2, 2);
        assert_eq!(
            h.forward(&[1.0], &[0.0; 2], &[0.0; 2]).unwrap_err(),
            FusionError::Dimension { what: "c_nli", expected: 3, found: 1 }
        );
        assert!(h.forward(&[0.0; 3], &[0.0; 3], &[0.0; 2]).is_err());
        let mut h2 = h.clone();
        assert!(h2.set_params(&[0.0]).is_err());
    }

    #[test]
    fn params_round_trip() {
        let h = FusionHead::random(4, 3, 2, 7);
        let mut z = FusionHead::zeros(4, 3, 2);
        z.set_params(&h.params()).unwrap();
        assert_eq!(z, h);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let head = FusionHead::random(4, 3, 5, seed);
            let r = &synthetic_embeddings(1, 4, 3, seed + 100)[0];
            let mut r = r.clone();
            r.c_h = vec![0.3, -0.1, 0.7, 0.2, -0.9];
            let (_, g) = head.loss_and_grad(&r.c_nli, &r.c_p, &r.c_h, r.label).unwrap();
            let fd = numeric_grad(&head, &r, 1e-5).unwrap();
            assert!(relative_error(&g, &fd) <= 1e-5, "seed {seed}: {}", relative_error(&g, &fd));
        }
    }

    #[test]
    fn fusion_needs_srl_views() {
        let train = synthetic_embeddings(600, 8, 4, 1);
        let test = synthetic_embeddings(300, 8, 4, 2);
        let mut fused = FusionHead::random(8, 4, 4, 3);
        fused.fit(&train, &FitConfig::default()).unwrap();
        let acc = fused.accuracy(&test).unwrap();
        assert!(acc >= 0.95, "fused accuracy {acc}");

        let blank = |d: &[EmbeddingRecord]| -> Vec<EmbeddingRecord> {
            d.iter().map(|r| EmbeddingRecord { c_p: vec![0.0; 4], c_h: vec![0.0; 4], ..r.clone() }).collect()
        };
        let mut nli_only = FusionHead::random(8, 4, 4, 3);
        nli_only.fit(&blank(&train), &FitConfig::default()).unwrap();
        let acc = nli_only.accuracy(&blank(&test)).unwrap();
        assert!((acc - 1.0 / 3.0).abs() < 0.1, "nli-only accuracy {acc}");
    }

    #[test]
    fn fit_rejects_empty() {
        assert_eq!(FusionHead::zeros(1, 1, 1).fit(&[], &FitConfig::default()), Err(FusionError::Empty));
    }
}
