//! Hex2Vec: contrastive region encoder over tag-count vectors. Adjacent
//! regions are positive pairs, sampled non-adjacent regions are negatives,
//! and the dot product of encoded vectors is the pair logit.

use std::collections::HashSet;

use crate::join::NeighbourhoodGraph;
use crate::nn::{bce_logit_loss, Activation, DenseLayer, Matrix, Mlp, MlpOptimizer, Rng};

use super::{CountVectorSpace, EmbedError, EmbeddingMatrix, MinMaxStats};

#[derive(Debug, Clone, PartialEq)]
pub struct Hex2VecParams {
    /// Encoder layer sizes; the last entry is the embedding dimension.
    pub sizes: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for Hex2VecParams {
    fn default() -> Self {
        Self {
            sizes: vec![42, 13],
            epochs: 10,
            batch_size: 64,
            negatives_per_positive: 4,
            lr: 1e-3,
            seed: 42,
        }
    }
}

/// Trained Hex2Vec embedder: frozen column space, normalization statistics,
/// and the encoder network.
#[derive(Debug, Clone, PartialEq)]
pub struct Hex2VecModel {
    pub(crate) space: CountVectorSpace,
    pub(crate) stats: MinMaxStats,
    pub(crate) encoder: Mlp,
}

impl Hex2VecModel {
    pub fn columns(&self) -> &[String] {
        self.space.columns()
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub(crate) fn from_parts(space: CountVectorSpace, stats: MinMaxStats, encoder: Mlp) -> Self {
        Self { space, stats, encoder }
    }

    pub(crate) fn parts(&self) -> (&CountVectorSpace, &MinMaxStats, &Mlp) {
        (&self.space, &self.stats, &self.encoder)
    }
}

fn build_encoder(input_dim: usize, sizes: &[usize], rng: &mut Rng) -> Result<Mlp, EmbedError> {
    if sizes.is_empty() {
        return Err(EmbedError::ShapeMismatch("encoder needs at least one layer size".into()));
    }
    if sizes.contains(&0) || input_dim == 0 {
        return Err(EmbedError::ShapeMismatch("zero-width layer".into()));
    }
    let mut layers = Vec::with_capacity(sizes.len());
    let mut current = input_dim;
    for (i, &size) in sizes.iter().enumerate() {
        let activation = if i + 1 == sizes.len() { Activation::Identity } else { Activation::Relu };
        layers.push(DenseLayer::new_random(current, size, activation, rng));
        current = size;
    }
    Ok(Mlp::new(layers)?)
}

/// Fit a Hex2Vec encoder on count vectors aligned with a neighbourhood graph.
///
/// Positives are the graph edges in both orientations; negatives are
/// uniformly sampled non-adjacent ordered pairs, re-drawn each epoch. Inputs
/// are min-max normalized per column over the fit set.
pub fn hex2vec_fit(
    counts: &EmbeddingMatrix,
    graph: &NeighbourhoodGraph,
    params: &Hex2VecParams,
) -> Result<Hex2VecModel, EmbedError> {
    let region_ids = counts.region_ids();
    let n = region_ids.len();
    for id in region_ids {
        if !graph.contains_node(id) {
            return Err(EmbedError::ShapeMismatch(format!(
                "count row {id:?} has no node in the neighbourhood graph"
            )));
        }
    }
    if params.batch_size == 0 || params.epochs == 0 {
        return Err(EmbedError::ShapeMismatch("epochs and batch_size must be positive".into()));
    }

    let index_of: std::collections::BTreeMap<&str, usize> =
        region_ids.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let mut positives: Vec<(usize, usize)> = Vec::new();
    let mut adjacent: HashSet<(usize, usize)> = HashSet::new();
    for (a, b) in graph.edges() {
        let (Some(&ia), Some(&ib)) = (index_of.get(a), index_of.get(b)) else { continue };
        positives.push((ia, ib));
        positives.push((ib, ia));
        adjacent.insert((ia, ib));
        adjacent.insert((ib, ia));
    }
    if positives.is_empty() {
        return Err(EmbedError::DegenerateGraph("no edges between count rows".into()));
    }
    let negative_pool = n * n.saturating_sub(1) - adjacent.len();
    if negative_pool == 0 {
        return Err(EmbedError::DegenerateGraph("no non-adjacent pairs to sample".into()));
    }

    let stats = MinMaxStats::fit(counts.values());
    let inputs = stats.apply(counts.values());

    let mut rng = Rng::new(params.seed);
    let mut encoder = build_encoder(counts.columns().len(), &params.sizes, &mut rng)?;
    let mut optimizer = MlpOptimizer::new(&encoder, params.lr);

    let negatives_per_epoch = params.negatives_per_positive * positives.len();
    for _epoch in 0..params.epochs {
        let mut examples: Vec<(usize, usize, f64)> =
            positives.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        examples.reserve(negatives_per_epoch);
        for _ in 0..negatives_per_epoch {
            let pair = sample_negative(n, &adjacent, &mut rng)?;
            examples.push((pair.0, pair.1, 0.0));
        }
        rng.shuffle(&mut examples);

        for batch in examples.chunks(params.batch_size) {
            train_batch(&mut encoder, &mut optimizer, &inputs, batch)?;
        }
        assert!(encoder.is_finite(), "non-finite parameters during hex2vec training");
    }

    Ok(Hex2VecModel {
        space: CountVectorSpace::from_columns(counts.columns().to_vec()),
        stats,
        encoder,
    })
}

fn sample_negative(
    n: usize,
    adjacent: &HashSet<(usize, usize)>,
    rng: &mut Rng,
) -> Result<(usize, usize), EmbedError> {
    for _ in 0..100_000 {
        let i = rng.next_index(n);
        let j = rng.next_index(n);
        if i != j && !adjacent.contains(&(i, j)) {
            return Ok((i, j));
        }
    }
    Err(EmbedError::DegenerateGraph("negative sampling failed to find a non-adjacent pair".into()))
}

fn train_batch(
    encoder: &mut Mlp,
    optimizer: &mut MlpOptimizer,
    inputs: &Matrix,
    batch: &[(usize, usize, f64)],
) -> Result<(), EmbedError> {
    let dims = inputs.cols();
    let mut left = Matrix::zeros(batch.len(), dims);
    let mut right = Matrix::zeros(batch.len(), dims);
    let mut labels = Vec::with_capacity(batch.len());
    for (row, &(i, j, label)) in batch.iter().enumerate() {
        left.row_mut(row).copy_from_slice(inputs.row(i));
        right.row_mut(row).copy_from_slice(inputs.row(j));
        labels.push(label);
    }

    let cache_left = encoder.forward_cached(&left)?;
    let cache_right = encoder.forward_cached(&right)?;
    let u = cache_left.output();
    let v = cache_right.output();
    let scores: Vec<f64> = (0..batch.len())
        .map(|r| u.row(r).iter().zip(v.row(r)).map(|(a, b)| a * b).sum())
        .collect();
    let (_, score_grads) = bce_logit_loss(&scores, &labels)?;

    // d score / d u = v and vice versa.
    let out_dim = u.cols();
    let mut grad_u = Matrix::zeros(batch.len(), out_dim);
    let mut grad_v = Matrix::zeros(batch.len(), out_dim);
    for r in 0..batch.len() {
        let g = score_grads[r];
        for c in 0..out_dim {
            grad_u.set(r, c, g * v.get(r, c));
            grad_v.set(r, c, g * u.get(r, c));
        }
    }

    let (grads_left, _) = encoder.backward(&cache_left, &grad_u)?;
    let (grads_right, _) = encoder.backward(&cache_right, &grad_v)?;
    let mut combined = grads_left;
    for (acc, extra) in combined.iter_mut().zip(&grads_right) {
        for (a, b) in acc.weights.data_mut().iter_mut().zip(extra.weights.data()) {
            *a += b;
        }
        for (a, b) in acc.bias.iter_mut().zip(&extra.bias) {
            *a += b;
        }
    }
    optimizer.step(encoder, &combined)?;
    Ok(())
}

/// Encode count vectors with a fitted model.
///
/// Input columns are matched to the model's space by name: columns unknown to
/// the model are an error, model columns missing from the input are
/// zero-filled (an absent tag is exactly a zero count).
pub fn hex2vec_transform(
    model: &Hex2VecModel,
    counts: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix, EmbedError> {
    for column in counts.columns() {
        if !model.space.columns().contains(column) {
            return Err(EmbedError::ColumnMismatch(format!(
                "column {column:?} is unknown to the model"
            )));
        }
    }
    let n = counts.region_ids().len();
    let dims = model.space.len();
    let mut aligned = Matrix::zeros(n, dims);
    for (target_col, name) in model.space.columns().iter().enumerate() {
        if let Some(source_col) = counts.columns().iter().position(|c| c == name) {
            for row in 0..n {
                aligned.set(row, target_col, counts.values().get(row, source_col));
            }
        }
    }
    let normalized = model.stats.apply(&aligned);
    let encoded = model.encoder.forward(&normalized)?;
    let columns = (0..encoded.cols()).map(|i| format!("emb_{i}")).collect();
    EmbeddingMatrix::new(counts.region_ids().to_vec(), columns, encoded)
}
