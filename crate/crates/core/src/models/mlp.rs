use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::numerics::RandomStream;
use crate::{Error, Objective, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// First and second derivative, given the activation output `a`.
    fn derivatives(self, a: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let d1 = 1.0 - a * a;
                (d1, -2.0 * a * d1)
            }
            Activation::Identity => (1.0, 0.0),
        }
    }
}

/// Fully connected network with a linear output layer.
///
/// Parameters live in one flat vector. Layer `l` stores its weight matrix
/// (`out x in`, row-major) followed by its bias (`out`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    activation: Activation,
    pub params: Vec<f64>,
}

struct Layer {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

struct Forward {
    /// `acts[0]` is the input, `acts[l]` the output of layer `l`.
    acts: Vec<Array2<f64>>,
}

impl MlpModel {
    /// Parameters drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(layer_dims: &[usize], activation: Activation, stream: &RandomStream) -> Result<Self> {
        Self::with_init_scale(layer_dims, activation, 1.0, stream)
    }

    /// Parameters drawn uniformly from `[-s/sqrt(fan_in), s/sqrt(fan_in)]`.
    pub fn with_init_scale(layer_dims: &[usize], activation: Activation, scale: f64, stream: &RandomStream) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::spec(format!("init scale must be positive, got {scale}")));
        }
        let mut model = Self::zeros(layer_dims, activation)?;
        let mut rng = stream.rng();
        let layers = model.layers();
        for layer in &layers {
            let bound = scale / (layer.n_in as f64).sqrt();
            let end = layer.b + layer.n_out;
            for p in &mut model.params[layer.w..end] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(model)
    }

    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::spec(format!("invalid layer dims {layer_dims:?}")));
        }
        let d = layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            activation,
            params: vec![0.0; d],
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.layer_dims
            .windows(2)
            .map(|w| {
                let l = Layer {
                    w: off,
                    b: off + w[0] * w[1],
                    n_in: w[0],
                    n_out: w[1],
                };
                off += w[0] * w[1] + w[1];
                l
            })
            .collect()
    }

    fn weight<'a>(layer: &Layer, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((layer.n_out, layer.n_in), &params[layer.w..layer.b]).unwrap()
    }

    fn bias<'a>(layer: &Layer, params: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&params[layer.b..layer.b + layer.n_out])
    }

    fn check(&self, params: &[f64], inputs: &ArrayView2<f64>) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::contract(format!(
                "parameter vector has length {}, model expects {}",
                params.len(),
                self.num_params()
            )));
        }
        if inputs.ncols() != self.input_dim() {
            return Err(Error::contract(format!(
                "inputs have {} columns, model expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn forward(&self, params: &[f64], inputs: ArrayView2<f64>) -> Forward {
        let layers = self.layers();
        let last = layers.len() - 1;
        let mut acts = vec![inputs.to_owned()];
        for (l, layer) in layers.iter().enumerate() {
            let w = Self::weight(layer, params);
            let b = Self::bias(layer, params);
            let mut z = acts[l].dot(&w.t());
            z += &b;
            if l < last {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            acts.push(z);
        }
        Forward { acts }
    }

    /// Network outputs for each input row.
    pub fn predict(&self, params: &[f64], inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(params, &inputs)?;
        Ok(self.forward(params, inputs).acts.pop().unwrap())
    }

    /// `(1/2n) sum_j ||f(x_j) - y_j||^2`
    pub fn mse_loss(&self, params: &[f64], inputs: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<f64> {
        let out = self.predict(params, inputs)?;
        check_targets(&out, &targets)?;
        let n = out.nrows() as f64;
        Ok(0.5 * (&out - &targets).mapv(|v| v * v).sum() / n)
    }

    pub fn loss_and_grad(
        &self,
        params: &[f64],
        inputs: ArrayView2<f64>,
        targets: ArrayView2<f64>,
    ) -> Result<(f64, Vec<f64>)> {
        self.check(params, &inputs)?;
        let fwd = self.forward(params, inputs);
        let out = fwd.acts.last().unwrap();
        check_targets(out, &targets)?;
        let n = out.nrows() as f64;
        let resid = out - &targets;
        let loss = 0.5 * resid.mapv(|v| v * v).sum() / n;
        let layers = self.layers();
        let mut grad = vec![0.0; params.len()];
        let mut delta = resid / n;
        for l in (0..layers.len()).rev() {
            let layer = &layers[l];
            let gw = delta.t().dot(&fwd.acts[l]);
            grad[layer.w..layer.b].copy_from_slice(gw.as_slice().unwrap());
            let gb = delta.sum_axis(Axis(0));
            grad[layer.b..layer.b + layer.n_out].copy_from_slice(gb.as_slice().unwrap());
            if l > 0 {
                let w = Self::weight(layer, params);
                let mut next = delta.dot(&w);
                next.zip_mut_with(&fwd.acts[l], |d, &a| *d *= self.activation.derivatives(a).0);
                delta = next;
            }
        }
        Ok((loss, grad))
    }

    /// Exact Hessian-vector product of [`MlpModel::mse_loss`] by the
    /// R-operator (forward-mode directional derivative of the backward pass).
    pub fn hvp(
        &self,
        params: &[f64],
        inputs: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        direction: &[f64],
    ) -> Result<Vec<f64>> {
        self.check(params, &inputs)?;
        if direction.len() != params.len() {
            return Err(Error::contract("direction length differs from parameter count"));
        }
        let layers = self.layers();
        let last = layers.len() - 1;
        let fwd = self.forward(params, inputs);
        let out = fwd.acts.last().unwrap();
        check_targets(out, &targets)?;
        let n = out.nrows() as f64;

        // Forward pass of R{.}: r_acts[l] = R{a_l}, r_pre[l] = R{z_l} (1-based layers).
        let mut r_acts: Vec<Array2<f64>> = vec![Array2::zeros(fwd.acts[0].raw_dim())];
        let mut r_pre: Vec<Array2<f64>> = vec![Array2::zeros((0, 0))];
        for (l, layer) in layers.iter().enumerate() {
            let w = Self::weight(layer, params);
            let v = Self::weight(layer, direction);
            let c = Self::bias(layer, direction);
            let mut rz = r_acts[l].dot(&w.t()) + fwd.acts[l].dot(&v.t());
            rz += &c;
            let ra = if l < last {
                let mut ra = rz.clone();
                ra.zip_mut_with(&fwd.acts[l + 1], |r, &a| *r *= self.activation.derivatives(a).0);
                ra
            } else {
                rz.clone()
            };
            r_pre.push(rz);
            r_acts.push(ra);
        }

        let mut hv = vec![0.0; params.len()];
        let mut delta = (out - &targets) / n;
        let mut r_delta = &r_acts[last + 1] / n;
        for l in (0..layers.len()).rev() {
            let layer = &layers[l];
            let rgw = r_delta.t().dot(&fwd.acts[l]) + delta.t().dot(&r_acts[l]);
            hv[layer.w..layer.b].copy_from_slice(rgw.as_slice().unwrap());
            let rgb = r_delta.sum_axis(Axis(0));
            hv[layer.b..layer.b + layer.n_out].copy_from_slice(rgb.as_slice().unwrap());
            if l > 0 {
                let w = Self::weight(layer, params);
                let v = Self::weight(layer, direction);
                let back = delta.dot(&w);
                let r_back = r_delta.dot(&w) + delta.dot(&v);
                let a = &fwd.acts[l];
                let rz = &r_pre[l];
                let mut new_delta = back.clone();
                let mut new_r = r_back;
                for (((nd, nr), (&bk, &ai)), &rzi) in new_delta
                    .iter_mut()
                    .zip(new_r.iter_mut())
                    .zip(back.iter().zip(a.iter()))
                    .zip(rz.iter())
                {
                    let (d1, d2) = self.activation.derivatives(ai);
                    *nd = bk * d1;
                    *nr = *nr * d1 + bk * d2 * rzi;
                }
                delta = new_delta;
                r_delta = new_r;
            }
        }
        Ok(hv)
    }

    /// Fraction of rows whose output argmax equals the target argmax; ties go
    /// to the lower class index.
    pub fn accuracy(&self, params: &[f64], data: &Dataset) -> Result<f64> {
        let out = self.predict(params, data.inputs.view())?;
        check_targets(&out, &data.targets.view())?;
        let hits = out
            .outer_iter()
            .zip(&data.labels)
            .filter(|(row, &label)| argmax(row.view()) == label)
            .count();
        Ok(hits as f64 / data.len() as f64)
    }

    /// Objective view of the model on a fixed set of rows.
    pub fn objective<'a>(&'a self, data: &'a Dataset) -> MlpObjective<'a> {
        MlpObjective { model: self, data }
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.num_params() {
            return Err(Error::contract("parameter vector length mismatch"));
        }
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    /// Weight matrix of layer `l` (`out x in`).
    pub fn weight_matrix(&self, l: usize) -> Array2<f64> {
        let layer = &self.layers()[l];
        Self::weight(layer, &self.params).to_owned()
    }

    pub fn bias_vector(&self, l: usize) -> Array1<f64> {
        let layer = &self.layers()[l];
        Self::bias(layer, &self.params).to_owned()
    }
}

fn check_targets(out: &Array2<f64>, targets: &ArrayView2<f64>) -> Result<()> {
    if out.dim() != targets.dim() {
        return Err(Error::contract(format!(
            "targets have shape {:?}, outputs {:?}",
            targets.dim(),
            out.dim()
        )));
    }
    Ok(())
}

pub(crate) fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// The MLP loss on one dataset (or batch) as an [`Objective`]. Panics only if
/// the dataset and model disagree on shapes, which [`MlpObjective::new`]
/// rules out.
pub struct MlpObjective<'a> {
    model: &'a MlpModel,
    data: &'a Dataset,
}

impl<'a> MlpObjective<'a> {
    pub fn new(model: &'a MlpModel, data: &'a Dataset) -> Result<Self> {
        if data.input_dim() != model.input_dim() || data.classes != model.output_dim() {
            return Err(Error::contract(format!(
                "dataset ({} features, {} classes) does not fit model {:?}",
                data.input_dim(),
                data.classes,
                model.layer_dims()
            )));
        }
        Ok(Self { model, data })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.model.num_params()
    }

    fn loss(&self, params: &[f64]) -> f64 {
        self.model
            .mse_loss(params, self.data.inputs.view(), self.data.targets.view())
            .expect("shapes checked at construction")
    }

    fn gradient(&self, params: &[f64]) -> Vec<f64> {
        self.loss_and_gradient(params).1
    }

    fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        self.model
            .loss_and_grad(params, self.data.inputs.view(), self.data.targets.view())
            .expect("shapes checked at construction")
    }

    fn hvp(&self, params: &[f64], direction: &[f64]) -> Vec<f64> {
        self.model
            .hvp(params, self.data.inputs.view(), self.data.targets.view(), direction)
            .expect("shapes checked at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::synth_dataset;
    use crate::numerics::{dot, symmetric_eig};
    use ndarray::array;
    use rand::seq::index::sample;

    fn fixture(seed: u64) -> (MlpModel, Dataset) {
        let s = RandomStream::new(seed);
        let data = synth_dataset(3, 8, 5, 2.0, &s.child(0)).unwrap();
        let model = MlpModel::new(&[5, 7, 6, 3], Activation::Tanh, &s.child(1)).unwrap();
        (model, data)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn parameter_count() {
        let m = MlpModel::zeros(&[4, 3, 2], Activation::Tanh).unwrap();
        assert_eq!(m.num_params(), 4 * 3 + 3 + 3 * 2 + 2);
        assert!(MlpModel::zeros(&[4], Activation::Tanh).is_err());
    }

    #[test]
    fn loss_conventions() {
        let m = MlpModel::zeros(&[2, 1], Activation::Identity).unwrap();
        let x = array![[0.3, -1.0]];
        assert_eq!(m.mse_loss(&m.params, x.view(), array![[0.0]].view()).unwrap(), 0.0);
        let mut p = m.params.clone();
        p[2] = 2.0; // bias
        assert_eq!(m.mse_loss(&p, x.view(), array![[0.0]].view()).unwrap(), 2.0);
        let (model, data) = fixture(1);
        let twice = data.concat(&data);
        let a = model.mse_loss(&model.params, data.inputs.view(), data.targets.view()).unwrap();
        let b = model.mse_loss(&model.params, twice.inputs.view(), twice.targets.view()).unwrap();
        assert!((a - b).abs() < 1e-15 * a);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (model, data) = fixture(2);
        let obj = model.objective(&data);
        let g = obj.gradient(&model.params);
        let mut rng = RandomStream::new(3).rng();
        for i in sample(&mut rng, model.num_params(), 20).iter() {
            let h = 1e-5;
            let mut p = model.params.clone();
            p[i] += h;
            let up = obj.loss(&p);
            p[i] -= 2.0 * h;
            let down = obj.loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * g[i].abs().max(1e-3), "coord {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn gradient_vanishes_at_interpolation() {
        // Targets generated by the model itself.
        let (model, data) = fixture(4);
        let out = model.predict(&model.params, data.inputs.view()).unwrap();
        let g = model.loss_and_grad(&model.params, data.inputs.view(), out.view()).unwrap().1;
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn target_scaling_consistent_with_loss() {
        let (model, data) = fixture(5);
        let c = 3.0;
        let scaled = data.targets.mapv(|v| v * c);
        let g = model.loss_and_grad(&model.params, data.inputs.view(), scaled.view()).unwrap().1;
        let h = 1e-5;
        for i in [0, 17, 40, model.num_params() - 1] {
            let mut p = model.params.clone();
            p[i] += h;
            let up = model.mse_loss(&p, data.inputs.view(), scaled.view()).unwrap();
            p[i] -= 2.0 * h;
            let down = model.mse_loss(&p, data.inputs.view(), scaled.view()).unwrap();
            assert!(rel((up - down) / (2.0 * h), g[i]) < 1e-6);
        }
    }

    #[test]
    fn linear_model_hessian_is_gauss_newton() {
        let s = RandomStream::new(6);
        let data = synth_dataset(2, 5, 3, 1.0, &s.child(0)).unwrap();
        let model = MlpModel::new(&[3, 2], Activation::Identity, &s.child(1)).unwrap();
        let d = model.num_params();
        // Dense analytic Hessian: output k depends on W[k,:] and b[k]; with
        // features phi = (x, 1), H[(k,i),(k,j)] = (1/n) sum phi_i phi_j.
        let n = data.len() as f64;
        let mut dense = Array2::<f64>::zeros((d, d));
        let idx = |k: usize, i: usize| if i < 3 { k * 3 + i } else { 6 + k };
        for k in 0..2 {
            for i in 0..4 {
                for j in 0..4 {
                    let mut acc = 0.0;
                    for row in data.inputs.outer_iter() {
                        let fi = if i < 3 { row[i] } else { 1.0 };
                        let fj = if j < 3 { row[j] } else { 1.0 };
                        acc += fi * fj;
                    }
                    dense[[idx(k, i), idx(k, j)]] = acc / n;
                }
            }
        }
        let obj = model.objective(&data);
        for e in 0..d {
            let mut v = vec![0.0; d];
            v[e] = 1.0;
            let hv = obj.hvp(&model.params, &v);
            for r in 0..d {
                assert!((hv[r] - dense[[r, e]]).abs() < 1e-14, "({r},{e})");
            }
        }
        assert!(symmetric_eig(&dense).is_ok());
    }

    #[test]
    fn hvp_linear_symmetric_and_matches_fd() {
        let (model, data) = fixture(7);
        let obj = model.objective(&data);
        let d = model.num_params();
        let mut rng = RandomStream::new(8).rng();
        let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hu = obj.hvp(&model.params, &u);
        let hv = obj.hvp(&model.params, &v);
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let hs = obj.hvp(&model.params, &sum);
        for i in 0..d {
            assert!((hs[i] - hu[i] - hv[i]).abs() <= 1e-12 * hs[i].abs().max(1.0));
        }
        let (a, b) = (dot(&u, &hv), dot(&v, &hu));
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        let h = 1e-5;
        let plus: Vec<f64> = model.params.iter().zip(&v).map(|(p, x)| p + h * x).collect();
        let minus: Vec<f64> = model.params.iter().zip(&v).map(|(p, x)| p - h * x).collect();
        let (gp, gm) = (obj.gradient(&plus), obj.gradient(&minus));
        let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let err: f64 = fd.iter().zip(&hv).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err < 1e-5 * scale, "{err} vs {scale}");
    }

    #[test]
    fn accuracy_cases() {
        let (model, data) = fixture(9);
        // Constant output: every row predicts class 0 under the tie rule.
        let zero = MlpModel::zeros(model.layer_dims(), Activation::Tanh).unwrap();
        assert!((zero.accuracy(&zero.params, &data).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let reversed = data.subset(&(0..data.len()).rev().collect::<Vec<_>>());
        assert_eq!(
            model.accuracy(&model.params, &data).unwrap(),
            model.accuracy(&model.params, &reversed).unwrap()
        );
        // A single linear layer that copies one-hot inputs interpolates.
        let one_hot = Dataset::new(data.targets.clone(), data.labels.clone(), 3).unwrap();
        let mut copy = MlpModel::zeros(&[3, 3], Activation::Identity).unwrap();
        for k in 0..3 {
            copy.params[k * 3 + k] = 1.0;
        }
        assert_eq!(copy.accuracy(&copy.params, &one_hot).unwrap(), 1.0);
        assert_eq!(argmax(array![1.0, 1.0, 0.5].view()), 0);
    }

    #[test]
    fn initialisation_deterministic() {
        let a = MlpModel::new(&[4, 8, 2], Activation::Tanh, &RandomStream::new(1)).unwrap();
        let b = MlpModel::new(&[4, 8, 2], Activation::Tanh, &RandomStream::new(1)).unwrap();
        assert_eq!(a.params, b.params);
        assert!(a.params.iter().take(32).all(|p| p.abs() <= 0.5));
    }
}
