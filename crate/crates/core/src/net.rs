//! Fully-connected ReLU network with softmax cross-entropy loss.
//!
//! Parameters are laid out layer by layer: the `out × in` weight matrix
//! (row-major) followed by the `out` biases. Dropout is inverted (masks are
//! scaled by `1/(1-p)` at train time) and applies to hidden activations only.

use alloc::vec::Vec;
use rand::Rng as _;

use crate::error::{check_dim, invalid, Error, Result};
use crate::objective::{finite_difference_hessian, Dataset, HessianEstimate, Noise, Objective, EVAL_CHUNK};
use crate::param::ParamVector;
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    #[default]
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    /// Dropout probability after each hidden layer (`layer_sizes.len() - 2` entries).
    pub dropout: Vec<f64>,
    pub loss: Loss,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, dropout: Vec<f64>) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(invalid("an MLP needs at least two layers of size >= 1"));
        }
        let hidden = layer_sizes.len() - 2;
        let dropout = match dropout.len() {
            0 => alloc::vec![0.0; hidden],
            1 if hidden > 1 => alloc::vec![dropout[0]; hidden],
            k if k == hidden => dropout,
            k => return Err(invalid(alloc::format!("{k} dropout values for {hidden} hidden layers"))),
        };
        if dropout.iter().any(|&p| !(0.0..1.0).contains(&p)) {
            return Err(invalid("dropout probabilities must lie in [0, 1)"));
        }
        Ok(Self { layer_sizes, activation: Activation::Relu, dropout, loss: Loss::SoftmaxCrossEntropy })
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// `Σ (in + 1) · out` over layers.
    pub fn num_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Offset of layer `l`'s weights; its biases follow at `+ in·out`.
    fn offset(&self, l: usize) -> usize {
        self.layer_sizes[..=l].windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn init_params(&self, rng: &mut Rng) -> ParamVector {
        let mut x = Vec::with_capacity(self.num_params());
        for w in self.layer_sizes.windows(2) {
            let bound = 1.0 / libm::sqrt(w[0] as f64);
            for _ in 0..(w[0] + 1) * w[1] {
                x.push(rng.random_range(-bound..bound));
            }
        }
        ParamVector::new(x).expect("finite init")
    }

    /// Percentage of misclassified samples (inference mode, ties to the lower class).
    pub fn error_pct(&self, x: &[f64], data: &Dataset) -> Result<f64> {
        check_dim(self.num_params(), x.len())?;
        check_dim(self.input_dim(), data.dim())?;
        let c = self.num_classes();
        let mut wrong = 0usize;
        for start in (0..data.len()).step_by(EVAL_CHUNK) {
            let batch: Vec<usize> = (start..(start + EVAL_CHUNK).min(data.len())).collect();
            let pass = self.forward(x, data, &batch, Noise::Off)?;
            for (row, &i) in pass.logits().chunks(c).zip(&batch) {
                let pred = row
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                    .0;
                wrong += usize::from(pred != data.label(i));
            }
        }
        Ok(100.0 * wrong as f64 / data.len() as f64)
    }

    fn forward(&self, x: &[f64], data: &Dataset, batch: &[usize], noise: Noise) -> Result<Pass> {
        let m = batch.len();
        let d0 = self.input_dim();
        let mut input = Vec::with_capacity(m * d0);
        for &i in batch {
            input.extend_from_slice(data.input(i));
        }
        let mut mask_rng = match noise {
            Noise::Seeded(seed) if self.dropout.iter().any(|&p| p > 0.0) => Some(seeded(seed)),
            _ => None,
        };
        let layers = self.num_layers();
        let mut acts = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        let mut masks = Vec::with_capacity(layers.saturating_sub(1));
        acts.push(input);
        for l in 0..layers {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = self.offset(l);
            let (w, b) = (&x[off..off + fan_in * fan_out], &x[off + fan_in * fan_out..off + (fan_in + 1) * fan_out]);
            let mut z = alloc::vec![0.0; m * fan_out];
            for row in z.chunks_mut(fan_out) {
                row.copy_from_slice(b);
            }
            // Z = A · Wᵀ + b
            gemm(m, fan_in, fan_out, &acts[l], fan_in, 1, w, 1, fan_in, &mut z, fan_out, 1, 1.0);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation { layer: l });
            }
            if l + 1 < layers {
                let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
                let p = self.dropout[l];
                let mask = match mask_rng.as_mut() {
                    Some(rng) if p > 0.0 => {
                        let scale = 1.0 / (1.0 - p);
                        let mask: Vec<f64> =
                            (0..a.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { scale }).collect();
                        a.iter_mut().zip(&mask).for_each(|(v, s)| *v *= s);
                        Some(mask)
                    }
                    _ => None,
                };
                masks.push(mask);
                acts.push(a);
            }
            pre.push(z);
        }
        Ok(Pass { acts, pre, masks, classes: self.num_classes() })
    }
}

struct Pass {
    /// Inputs to each layer: `acts[0]` is the batch, `acts[l]` the post-dropout hidden output.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of every layer; the last one holds the logits.
    pre: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
    classes: usize,
}

impl Pass {
    fn logits(&self) -> &[f64] {
        self.pre.last().unwrap()
    }

    /// Mean cross-entropy; when `dlogits` is given it receives `(softmax − onehot)/m`.
    fn loss(&self, labels: impl Iterator<Item = usize>, m: usize, mut dlogits: Option<&mut [f64]>) -> f64 {
        let c = self.classes;
        let inv_m = 1.0 / m as f64;
        let mut total = 0.0;
        for (r, (row, y)) in self.logits().chunks(c).zip(labels).enumerate() {
            let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let sum: f64 = row.iter().map(|&v| libm::exp(v - max)).sum();
            let lse = max + libm::log(sum);
            total += lse - row[y];
            if let Some(d) = dlogits.as_deref_mut() {
                let out = &mut d[r * c..(r + 1) * c];
                for (k, (o, &v)) in out.iter_mut().zip(row).enumerate() {
                    let p = libm::exp(v - lse);
                    *o = (p - if k == y { 1.0 } else { 0.0 }) * inv_m;
                }
            }
        }
        total * inv_m
    }
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
    rsc: usize,
    csc: usize,
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs + 1;
    assert!(k == 0 || a.len() >= span(m, k, rsa, csa));
    assert!(k == 0 || b.len() >= span(k, n, rsb, csb));
    assert!(c.len() >= span(m, n, rsc, csc));
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// [`MlpSpec`] bound to a training set.
#[derive(Debug, Clone)]
pub struct MlpObjective<'a> {
    spec: MlpSpec,
    data: &'a Dataset,
}

impl<'a> MlpObjective<'a> {
    pub fn new(spec: MlpSpec, data: &'a Dataset) -> Result<Self> {
        check_dim(spec.input_dim(), data.dim())?;
        if spec.num_classes() != data.num_classes() {
            return Err(invalid(alloc::format!(
                "network has {} outputs but the dataset has {} classes",
                spec.num_classes(),
                data.num_classes()
            )));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn dataset(&self) -> &Dataset {
        self.data
    }

    pub fn forward_loss(&self, x: &[f64], batch: &[usize], noise: Noise) -> Result<f64> {
        check_dim(self.spec.num_params(), x.len())?;
        let pass = self.spec.forward(x, self.data, batch, noise)?;
        Ok(pass.loss(batch.iter().map(|&i| self.data.label(i)), batch.len(), None))
    }

    /// Loss and exact reverse-mode gradient of the same stochastic function
    /// [`forward_loss`](Self::forward_loss) evaluates (identical masks for a given seed).
    pub fn backward_grad(&self, x: &[f64], batch: &[usize], noise: Noise, grad: &mut [f64]) -> Result<f64> {
        let spec = &self.spec;
        check_dim(spec.num_params(), x.len())?;
        check_dim(spec.num_params(), grad.len())?;
        if batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        let m = batch.len();
        let pass = spec.forward(x, self.data, batch, noise)?;
        let mut dz = alloc::vec![0.0; m * spec.num_classes()];
        let loss = pass.loss(batch.iter().map(|&i| self.data.label(i)), m, Some(&mut dz));

        for l in (0..spec.num_layers()).rev() {
            let (fan_in, fan_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
            let off = spec.offset(l);
            let (gw, gb) = grad[off..off + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
            // dW = dZᵀ · A
            gemm(fan_out, m, fan_in, &dz, 1, fan_out, &pass.acts[l], fan_in, 1, gw, fan_in, 1, 0.0);
            gb.fill(0.0);
            for row in dz.chunks(fan_out) {
                gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
            }
            if l == 0 {
                break;
            }
            // dA = dZ · W, then back through dropout and ReLU of layer l-1.
            let w = &x[off..off + fan_in * fan_out];
            let mut da = alloc::vec![0.0; m * fan_in];
            gemm(m, fan_out, fan_in, &dz, fan_out, 1, w, fan_in, 1, &mut da, fan_in, 1, 0.0);
            if let Some(mask) = &pass.masks[l - 1] {
                da.iter_mut().zip(mask).for_each(|(d, s)| *d *= s);
            }
            da.iter_mut().zip(&pass.pre[l - 1]).for_each(|(d, &z)| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            dz = da;
        }
        Ok(loss)
    }

    /// Dense Hessian of the full training loss (dropout off); see
    /// [`finite_difference_hessian`].
    pub fn exact_hessian(&self, x: &[f64], cap: usize) -> Result<HessianEstimate> {
        finite_difference_hessian(self, x, cap)
    }

    pub fn fisher_diagonal(&self, x: &[f64], m: usize, passes: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        crate::objective::fisher_diagonal(self, x, m, passes, rng)
    }
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.num_params()
    }

    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn batch_loss_grad(&self, x: &[f64], batch: &[usize], noise: Noise, grad: &mut [f64]) -> Result<f64> {
        self.backward_grad(x, batch, noise, grad)
    }

    fn batch_loss(&self, x: &[f64], batch: &[usize], noise: Noise) -> Result<f64> {
        self.forward_loss(x, batch, noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy_data() -> Dataset {
        Dataset::new(vec![0.5, -1.0, 1.5, 0.25, -0.3, 0.8], vec![1, 0, 1], 2, 2).unwrap()
    }

    #[test]
    fn parameter_count() {
        let spec = MlpSpec::new(vec![784, 32, 10], vec![]).unwrap();
        assert_eq!(spec.num_params(), 785 * 32 + 33 * 10);
        assert_eq!(MlpSpec::new(vec![784, 1024, 1024, 10], vec![]).unwrap().num_params(), 1_863_690);
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(vec![3], vec![]).is_err());
        assert!(MlpSpec::new(vec![3, 0, 2], vec![]).is_err());
        assert!(MlpSpec::new(vec![3, 4, 2], vec![1.0]).is_err());
        assert!(MlpSpec::new(vec![3, 4, 2], vec![0.1, 0.2]).is_err());
        assert_eq!(MlpSpec::new(vec![3, 4, 4, 2], vec![0.5]).unwrap().dropout, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_weights_give_log_classes() {
        let data = Dataset::new(vec![0.3; 40], (0..4).map(|i| i % 10).collect(), 10, 10).unwrap();
        let obj = MlpObjective::new(MlpSpec::new(vec![10, 5, 10], vec![]).unwrap(), &data).unwrap();
        let x = vec![0.0; obj.dim()];
        let loss = obj.forward_loss(&x, &[0, 1, 2, 3], Noise::Off).unwrap();
        assert!((loss - libm::log(10.0)).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_two_two_two() {
        // W1 = [[1, -1], [0.5, 2]], b1 = [0.1, -0.2]; W2 = [[1, 0], [-1, 1]], b2 = [0, 0.3]
        let x = [1.0, -1.0, 0.5, 2.0, 0.1, -0.2, 1.0, 0.0, -1.0, 1.0, 0.0, 0.3];
        let data = Dataset::new(vec![0.5, 1.0], vec![1], 2, 2).unwrap();
        let obj = MlpObjective::new(MlpSpec::new(vec![2, 2, 2], vec![]).unwrap(), &data).unwrap();
        // z1 = [0.5 - 1 + 0.1, 0.25 + 2 - 0.2] = [-0.4, 2.05] -> h = [0, 2.05]
        // z2 = [0, -0 + 2.05 + 0.3] = [0, 2.35]; loss = log(1 + e^{2.35}) - 2.35
        let expected = libm::log(1.0 + libm::exp(2.35)) - 2.35;
        let got = obj.forward_loss(&x, &[0], Noise::Off).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn dropout_with_zero_probability_is_identity() {
        let data = toy_data();
        let spec = MlpSpec::new(vec![2, 4, 2], vec![0.0]).unwrap();
        let obj = MlpObjective::new(spec, &data).unwrap();
        let x = obj.spec().init_params(&mut seeded(1));
        let mut g1 = vec![0.0; obj.dim()];
        let mut g2 = vec![0.0; obj.dim()];
        let a = obj.backward_grad(&x, &[0, 1, 2], Noise::Off, &mut g1).unwrap();
        let b = obj.backward_grad(&x, &[0, 1, 2], Noise::Seeded(9), &mut g2).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(g1, g2);
    }

    #[test]
    fn dropout_masks_are_reproducible() {
        let data = toy_data();
        let obj = MlpObjective::new(MlpSpec::new(vec![2, 16, 2], vec![0.5]).unwrap(), &data).unwrap();
        let x = obj.spec().init_params(&mut seeded(2));
        let mut g1 = vec![0.0; obj.dim()];
        let mut g2 = vec![0.0; obj.dim()];
        let a = obj.backward_grad(&x, &[0, 1, 2], Noise::Seeded(77), &mut g1).unwrap();
        let b = obj.backward_grad(&x, &[0, 1, 2], Noise::Seeded(77), &mut g2).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(g1, g2);
        let c = obj.forward_loss(&x, &[0, 1, 2], Noise::Seeded(77)).unwrap();
        assert_eq!(a.to_bits(), c.to_bits());
    }

    #[test]
    fn non_finite_activation_reports_layer() {
        let data = toy_data();
        let obj = MlpObjective::new(MlpSpec::new(vec![2, 2, 2], vec![]).unwrap(), &data).unwrap();
        let mut x = vec![0.0; obj.dim()];
        x[6] = f64::INFINITY; // first weight of layer 1
        x[0] = 1.0;
        let err = obj.forward_loss(&x, &[0], Noise::Off).unwrap_err();
        assert_eq!(err, Error::NonFiniteActivation { layer: 1 });
    }

    #[test]
    fn error_pct_counts_mistakes() {
        let data = Dataset::new(vec![1.0, -1.0], vec![0, 1], 1, 2).unwrap();
        let spec = MlpSpec::new(vec![1, 2], vec![]).unwrap();
        // logits = [x, -x]
        assert_eq!(spec.error_pct(&[1.0, -1.0, 0.0, 0.0], &data).unwrap(), 0.0);
        assert_eq!(spec.error_pct(&[-1.0, 1.0, 0.0, 0.0], &data).unwrap(), 100.0);
    }
}
