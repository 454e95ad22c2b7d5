//! GTFS2Vec: autoencoder embedding of the per-region public transport offer.
//! Each region's input is the hourly trip and direction counts summed over
//! its member stops (48 values), min-max normalized.

use std::collections::BTreeMap;

use crate::io::GtfsStopFeatures;
use crate::join::JointIndex;
use crate::nn::{mse_loss, Activation, DenseLayer, Matrix, Mlp, MlpOptimizer, Rng};

use super::{EmbedError, EmbeddingMatrix, MinMaxStats};

/// 24 hourly trip counts followed by 24 hourly direction counts.
pub const GTFS_INPUT_DIM: usize = 48;

const HIDDEN_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Gtfs2VecParams {
    pub latent: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for Gtfs2VecParams {
    fn default() -> Self {
        Self { latent: 16, epochs: 20, lr: 1e-3, seed: 42 }
    }
}

/// Trained autoencoder; transform applies the encoder half.
#[derive(Debug, Clone, PartialEq)]
pub struct Gtfs2VecModel {
    pub(crate) stats: MinMaxStats,
    pub(crate) encoder: Mlp,
    pub(crate) decoder: Mlp,
}

impl Gtfs2VecModel {
    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub(crate) fn from_parts(stats: MinMaxStats, encoder: Mlp, decoder: Mlp) -> Self {
        Self { stats, encoder, decoder }
    }

    pub(crate) fn parts(&self) -> (&MinMaxStats, &Mlp, &Mlp) {
        (&self.stats, &self.encoder, &self.decoder)
    }
}

/// Loss before and after fitting, on the fit set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Per-region 48-vector: hourly trip and direction counts summed over the
/// stops joined to the region. Regions with no stops are all zeros.
pub fn region_stop_matrix(
    region_ids: &[String],
    stops: &[GtfsStopFeatures],
    joint: &JointIndex,
) -> Result<Matrix, EmbedError> {
    let row_index: BTreeMap<&str, usize> =
        region_ids.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let stop_index: BTreeMap<&str, &GtfsStopFeatures> =
        stops.iter().map(|s| (s.stop_id.as_str(), s)).collect();
    let mut values = Matrix::zeros(region_ids.len(), GTFS_INPUT_DIM);
    for (region_id, feature_id) in joint.pairs() {
        let &row = row_index
            .get(region_id.as_str())
            .ok_or_else(|| EmbedError::InconsistentJoint(region_id.clone()))?;
        let stop = stop_index
            .get(feature_id.as_str())
            .ok_or_else(|| EmbedError::InconsistentJoint(feature_id.clone()))?;
        let slots = values.row_mut(row);
        for h in 0..24 {
            slots[h] += stop.trips_at_hour[h] as f64;
            slots[24 + h] += stop.directions_at_hour[h] as f64;
        }
    }
    Ok(values)
}

fn build_autoencoder(latent: usize, rng: &mut Rng) -> (Mlp, Mlp) {
    let encoder = Mlp::new(vec![
        DenseLayer::new_random(GTFS_INPUT_DIM, HIDDEN_DIM, Activation::Relu, rng),
        DenseLayer::new_random(HIDDEN_DIM, latent, Activation::Identity, rng),
    ])
    .expect("encoder shapes chain");
    let decoder = Mlp::new(vec![
        DenseLayer::new_random(latent, HIDDEN_DIM, Activation::Relu, rng),
        DenseLayer::new_random(HIDDEN_DIM, GTFS_INPUT_DIM, Activation::Identity, rng),
    ])
    .expect("decoder shapes chain");
    (encoder, decoder)
}

fn stack(encoder: &Mlp, decoder: &Mlp) -> Mlp {
    Mlp::new(encoder.layers().iter().chain(decoder.layers()).cloned().collect())
        .expect("autoencoder shapes chain")
}

fn split(stacked: Mlp, encoder_layers: usize) -> (Mlp, Mlp) {
    let layers = stacked.layers().to_vec();
    let (enc, dec) = layers.split_at(encoder_layers);
    (Mlp::new(enc.to_vec()).expect("encoder"), Mlp::new(dec.to_vec()).expect("decoder"))
}

/// Fit the autoencoder on per-region stop vectors with full-batch adaptive
/// moment updates.
pub fn gtfs2vec_fit(
    region_ids: &[String],
    stops: &[GtfsStopFeatures],
    joint: &JointIndex,
    params: &Gtfs2VecParams,
) -> Result<(Gtfs2VecModel, FitReport), EmbedError> {
    if joint.is_empty() {
        return Err(EmbedError::EmptyJoint);
    }
    if params.latent == 0 {
        return Err(EmbedError::ShapeMismatch("latent dimension must be >= 1".into()));
    }
    let raw = region_stop_matrix(region_ids, stops, joint)?;
    let stats = MinMaxStats::fit(&raw);
    let inputs = stats.apply(&raw);

    let mut rng = Rng::new(params.seed);
    let (encoder, decoder) = build_autoencoder(params.latent, &mut rng);
    let mut auto = stack(&encoder, &decoder);
    let mut optimizer = MlpOptimizer::new(&auto, params.lr);

    let initial_loss = mse_loss(&auto.forward(&inputs)?, &inputs)?.0;
    for _epoch in 0..params.epochs {
        let cache = auto.forward_cached(&inputs)?;
        let (loss, grad) = mse_loss(cache.output(), &inputs)?;
        assert!(loss.is_finite(), "non-finite loss during gtfs2vec training");
        let (grads, _) = auto.backward(&cache, &grad)?;
        optimizer.step(&mut auto, &grads)?;
        assert!(auto.is_finite(), "non-finite parameters during gtfs2vec training");
    }
    let final_loss = mse_loss(&auto.forward(&inputs)?, &inputs)?.0;

    let (encoder, decoder) = split(auto, encoder.layers().len());
    Ok((Gtfs2VecModel { stats, encoder, decoder }, FitReport { initial_loss, final_loss }))
}

/// Encode per-region stop vectors with a fitted model.
pub fn gtfs2vec_transform(
    model: &Gtfs2VecModel,
    region_ids: &[String],
    stops: &[GtfsStopFeatures],
    joint: &JointIndex,
) -> Result<EmbeddingMatrix, EmbedError> {
    let raw = region_stop_matrix(region_ids, stops, joint)?;
    let normalized = model.stats.apply(&raw);
    let encoded = model.encoder.forward(&normalized)?;
    let columns = (0..encoded.cols()).map(|i| format!("gtfs_emb_{i}")).collect();
    EmbeddingMatrix::new(region_ids.to_vec(), columns, encoded)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Coordinate;
    use std::collections::BTreeSet;

    pub(crate) fn toy_stops() -> Vec<GtfsStopFeatures> {
        let mk = |stop_id: &str, seed: u32| {
            let mut trips = [0u32; 24];
            let mut dirs = [0u32; 24];
            for h in 0..24 {
                trips[h] = (seed + h as u32) % 5;
                dirs[h] = trips[h].min((seed + 2 * h as u32) % 3);
            }
            GtfsStopFeatures {
                stop_id: stop_id.to_string(),
                location: Coordinate::new(17.0, 51.0).unwrap(),
                trips_at_hour: trips,
                directions_at_hour: dirs,
            }
        };
        vec![mk("S1", 1), mk("S2", 2), mk("S3", 4)]
    }

    fn toy_regions_and_joint() -> (Vec<String>, JointIndex) {
        let region_ids: Vec<String> = (0..4).map(|i| format!("r{i}")).collect();
        let mut pairs = BTreeSet::new();
        pairs.insert(("r0".to_string(), "S1".to_string()));
        pairs.insert(("r0".to_string(), "S2".to_string()));
        pairs.insert(("r1".to_string(), "S3".to_string()));
        pairs.insert(("r2".to_string(), "S1".to_string()));
        // r3 has no stops.
        (region_ids, JointIndex::new(pairs))
    }

    #[test]
    fn region_without_stops_is_all_zero() {
        let (region_ids, joint) = toy_regions_and_joint();
        let m = region_stop_matrix(&region_ids, &toy_stops(), &joint).unwrap();
        assert!(m.row(3).iter().all(|&v| v == 0.0));
        // r0 sums S1 and S2.
        let stops = toy_stops();
        for h in 0..24 {
            let want = (stops[0].trips_at_hour[h] + stops[1].trips_at_hour[h]) as f64;
            assert_eq!(m.get(0, h), want);
        }
    }

    #[test]
    fn fit_reduces_reconstruction_loss() {
        let (region_ids, joint) = toy_regions_and_joint();
        let params = Gtfs2VecParams { seed: 42, ..Default::default() };
        let (_, report) = gtfs2vec_fit(&region_ids, &toy_stops(), &joint, &params).unwrap();
        assert!(report.final_loss.is_finite());
        assert!(
            report.final_loss < report.initial_loss,
            "loss did not improve: {} -> {}",
            report.initial_loss,
            report.final_loss
        );
    }

    #[test]
    fn latent_sets_embedding_dim() {
        let (region_ids, joint) = toy_regions_and_joint();
        let params = Gtfs2VecParams { latent: 16, epochs: 2, ..Default::default() };
        let (model, _) = gtfs2vec_fit(&region_ids, &toy_stops(), &joint, &params).unwrap();
        assert_eq!(model.latent_dim(), 16);
        let out = gtfs2vec_transform(&model, &region_ids, &toy_stops(), &joint).unwrap();
        assert_eq!(out.columns().len(), 16);
        assert_eq!(out.columns()[0], "gtfs_emb_0");
    }

    #[test]
    fn empty_joint_is_an_error() {
        let region_ids = vec!["r0".to_string()];
        assert!(matches!(
            gtfs2vec_fit(&region_ids, &toy_stops(), &JointIndex::default(), &Gtfs2VecParams::default()),
            Err(EmbedError::EmptyJoint)
        ));
    }

    #[test]
    fn identical_stop_profiles_embed_identically() {
        let mut region_ids: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        region_ids.sort();
        let mut pairs = BTreeSet::new();
        // a and b both contain exactly stop S1; c contains S2.
        pairs.insert(("a".to_string(), "S1".to_string()));
        pairs.insert(("b".to_string(), "S1".to_string()));
        pairs.insert(("c".to_string(), "S2".to_string()));
        let joint = JointIndex::new(pairs);
        let params = Gtfs2VecParams { epochs: 3, ..Default::default() };
        let (model, _) = gtfs2vec_fit(&region_ids, &toy_stops(), &joint, &params).unwrap();
        let out = gtfs2vec_transform(&model, &region_ids, &toy_stops(), &joint).unwrap();
        assert_eq!(out.row_of("a").unwrap(), out.row_of("b").unwrap());
        assert_ne!(out.row_of("a").unwrap(), out.row_of("c").unwrap());
    }

    #[test]
    fn transform_after_fit_matches_fit_time_embeddings() {
        let (region_ids, joint) = toy_regions_and_joint();
        let params = Gtfs2VecParams { epochs: 5, ..Default::default() };
        let (model, _) = gtfs2vec_fit(&region_ids, &toy_stops(), &joint, &params).unwrap();
        let a = gtfs2vec_transform(&model, &region_ids, &toy_stops(), &joint).unwrap();
        let b = gtfs2vec_transform(&model, &region_ids, &toy_stops(), &joint).unwrap();
        assert_eq!(a, b);
    }
}
