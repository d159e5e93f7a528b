use crate::error::{Error, Result};
use crate::numerics::{Graph, Matrix, Var};
use crate::train::{
    accuracy, init_rng, minibatch_loop, uniform_init, DivergeUnit, TrainReport, TrainingConfig,
};

/// Parameter band accepted for the three-layer variant.
pub const MLP3_PARAM_RANGE: std::ops::RangeInclusive<usize> = 1_100..=1_500;

/// Default hidden widths: 84·13+13 + 13·7+7 + 7·10+10 = 1,283.
pub const MLP3_DEFAULT_WIDTHS: (usize, usize) = (13, 7);

/// Shared by the feature classifiers so the trainer and gradient checks can
/// treat them uniformly.
pub trait FeatureClassifier {
    fn params(&self) -> &[Matrix];
    fn params_mut(&mut self) -> &mut [Matrix];
    fn input_dim(&self) -> usize;

    /// Builds the logits node for `x` over the borrowed parameters.
    fn logits_node<'p>(&'p self, g: &mut Graph<'p>, x: Var, p: &[Var]) -> Result<Var>;

    fn param_count(&self) -> usize {
        self.params().iter().map(Matrix::len).sum()
    }

    fn logits(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut g = Graph::new();
        let p: Vec<Var> = self.params().iter().map(|m| g.param(m)).collect();
        let xv = g.constant(x.clone());
        let out = self.logits_node(&mut g, xv, &p)?;
        Ok(g.value(out).clone())
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.logits(x)?.argmax_rows())
    }

    fn accuracy(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        if x.rows() != labels.len() {
            return Err(Error::shape(format!("{} rows but {} labels", x.rows(), labels.len())));
        }
        Ok(accuracy(&self.predict(x)?, labels))
    }

    /// Mean cross-entropy over `x` and its gradient for every parameter tensor.
    fn loss_and_grads(&self, x: &Matrix, labels: &[usize]) -> Result<(f64, Vec<Matrix>)>
    where
        Self: Sized,
    {
        self.check_input(x)?;
        loss_and_grads_with(self, self.params(), x, labels)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "classifier expects {} features, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        Ok(())
    }
}

/// Single bias-free softmax layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmaxModel {
    params: Vec<Matrix>,
}

impl LinearSoftmaxModel {
    pub fn new(input_dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = init_rng(seed);
        Self {
            params: vec![uniform_init(&mut rng, input_dim, classes, input_dim)],
        }
    }

    /// `input_dim × classes`.
    pub fn weights(&self) -> &Matrix {
        &self.params[0]
    }
}

impl FeatureClassifier for LinearSoftmaxModel {
    fn params(&self) -> &[Matrix] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Matrix] {
        &mut self.params
    }

    fn input_dim(&self) -> usize {
        self.params[0].rows()
    }

    fn logits_node<'p>(&'p self, g: &mut Graph<'p>, x: Var, p: &[Var]) -> Result<Var> {
        g.matmul(x, p[0])
    }
}

/// `in → h1 → h2 → classes`, affine layers with ReLU between.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp3Model {
    params: Vec<Matrix>,
}

impl Mlp3Model {
    pub fn new(input_dim: usize, widths: (usize, usize), classes: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || widths.0 == 0 || widths.1 == 0 || classes == 0 {
            return Err(Error::param(format!(
                "layer sizes must be positive: {input_dim}->{}->{}->{classes}",
                widths.0, widths.1
            )));
        }
        let mut rng = init_rng(seed);
        let dims = [input_dim, widths.0, widths.1, classes];
        let mut params = Vec::with_capacity(6);
        for w in dims.windows(2) {
            params.push(uniform_init(&mut rng, w[0], w[1], w[0]));
            params.push(Matrix::zeros(1, w[1]));
        }
        Ok(Self { params })
    }

    pub fn widths(&self) -> (usize, usize) {
        (self.params[0].cols(), self.params[2].cols())
    }

    /// Closed form `Σ (fan_in·fan_out + fan_out)` over the three layers.
    pub fn closed_form_params(input_dim: usize, widths: (usize, usize), classes: usize) -> usize {
        let dims = [input_dim, widths.0, widths.1, classes];
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

impl FeatureClassifier for Mlp3Model {
    fn params(&self) -> &[Matrix] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Matrix] {
        &mut self.params
    }

    fn input_dim(&self) -> usize {
        self.params[0].rows()
    }

    fn logits_node<'p>(&'p self, g: &mut Graph<'p>, x: Var, p: &[Var]) -> Result<Var> {
        let h = g.matmul(x, p[0])?;
        let h = g.add_bias(h, p[1])?;
        let h = g.relu(h);
        let h = g.matmul(h, p[2])?;
        let h = g.add_bias(h, p[3])?;
        let h = g.relu(h);
        let h = g.matmul(h, p[4])?;
        g.add_bias(h, p[5])
    }
}

fn check_labels(features: &Matrix, labels: &[usize], classes: usize) -> Result<()> {
    if features.rows() != labels.len() {
        return Err(Error::shape(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::param(format!("label {l} outside 0..{classes}")));
    }
    Ok(())
}

fn fit<M: FeatureClassifier>(
    mut model: M,
    features: &Matrix,
    labels: &[usize],
    cfg: &TrainingConfig,
) -> Result<(M, TrainReport)> {
    let mut params = model.params().to_vec();
    let outcome = minibatch_loop(&mut params, features.rows(), cfg, DivergeUnit::Epoch, |params, batch| {
        let x = features.select_rows(batch);
        let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
        loss_and_grads_with(&model, params, &x, &y)
    })?;
    model.params_mut().clone_from_slice(&params);
    let report = TrainReport {
        seed: cfg.seed,
        loss_curve: outcome.loss_curve,
        train_accuracy: model.accuracy(features, labels)?,
        test_accuracy: None,
        train_seconds: outcome.seconds,
        param_count: model.param_count(),
        steps: outcome.steps,
    };
    Ok((model, report))
}

/// Loss and gradients of `model`'s architecture evaluated at `params`.
fn loss_and_grads_with<M: FeatureClassifier>(
    model: &M,
    params: &[Matrix],
    x: &Matrix,
    labels: &[usize],
) -> Result<(f64, Vec<Matrix>)> {
    let mut g = Graph::new();
    let p: Vec<Var> = params.iter().map(|m| g.param(m)).collect();
    let xv = g.constant(x.clone());
    let logits = model.logits_node(&mut g, xv, &p)?;
    let targets: Vec<Option<usize>> = labels.iter().map(|&l| Some(l)).collect();
    let loss = g.cross_entropy(logits, &targets)?;
    let mut grads = g.backward(loss);
    let out = p
        .iter()
        .zip(params)
        .map(|(&v, m)| grads.take_or_zeros(v, m.shape()))
        .collect();
    Ok((g.scalar(loss), out))
}

pub fn train_linear_softmax(
    features: &Matrix,
    labels: &[usize],
    classes: usize,
    cfg: &TrainingConfig,
) -> Result<(LinearSoftmaxModel, TrainReport)> {
    check_labels(features, labels, classes)?;
    fit(LinearSoftmaxModel::new(features.cols(), classes, cfg.seed), features, labels, cfg)
}

/// As [`train_linear_softmax`]; the parameter count must lie in [`MLP3_PARAM_RANGE`].
pub fn train_mlp3(
    features: &Matrix,
    labels: &[usize],
    classes: usize,
    widths: (usize, usize),
    cfg: &TrainingConfig,
) -> Result<(Mlp3Model, TrainReport)> {
    check_labels(features, labels, classes)?;
    let model = Mlp3Model::new(features.cols(), widths, classes, cfg.seed)?;
    if !MLP3_PARAM_RANGE.contains(&model.param_count()) {
        return Err(Error::param(format!(
            "{}->{}->{}->{classes} has {} parameters, outside {MLP3_PARAM_RANGE:?}",
            features.cols(),
            widths.0,
            widths.1,
            model.param_count()
        )));
    }
    fit(model, features, labels, cfg)
}
