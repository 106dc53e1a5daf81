//! Synthetic two-class dataset on which Zero and Constant(1) perturbations
//! behave differently per class.
//!
//! Class 0 is Gaussian noise around the zero vector, class 1 the same noise
//! around the all-ones vector. A nearest-centroid model separates them. Zero
//! replacement moves class-0 series onto their own centroid and class-1
//! series towards the other one; Constant(1) swaps the roles.

use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tsape_core::attribute::OcclusionParams;
use tsape_core::perturb::{PerturbationSchedule, PerturbationStrategy};
use tsape_core::predict::{fit_centroid, Predictor};
use tsape_core::rng::DetRng;
use tsape_core::{Dataset, TimeSeries};

use crate::error::RunError;
use crate::runner::{predict_classes, Method, Plan, PredictorSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemoParams {
    pub per_class: usize,
    pub series_length: usize,
    pub noise_std: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl DemoParams {
    pub fn new(seed: u64) -> Self {
        Self {
            per_class: 200,
            series_length: 64,
            noise_std: 0.1,
            temperature: 0.05,
            seed,
        }
    }

    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Tagged<'a> {
            demo: &'static str,
            params: &'a DemoParams,
        }
        let doc = serde_json::to_value(Tagged {
            demo: "class-effect",
            params: self,
        })
        .expect("params serialize");
        hex::encode(Sha256::digest(doc.to_string().as_bytes()))
    }
}

/// Class 0 instances first, then class 1; ids are `0..2 * per_class`.
pub fn class_effect_dataset(p: &DemoParams) -> Dataset {
    let mut rng = DetRng::new(p.seed);
    let mut instances = Vec::with_capacity(2 * p.per_class);
    for class in 0..2 {
        let center = class as f64;
        for _ in 0..p.per_class {
            let values = (0..p.series_length)
                .map(|_| center + p.noise_std * rng.standard_normal())
                .collect();
            instances.push(TimeSeries::new(instances.len().to_string(), values).with_label(class));
        }
    }
    Dataset::from_instances("class-effect", 2, instances, vec!["0".into(), "1".into()])
}

/// Strategies compared by the demo.
pub fn demo_strategies() -> Vec<PerturbationStrategy> {
    vec![PerturbationStrategy::Zero, PerturbationStrategy::Constant(1.0)]
}

/// Fits the centroid model on the generated data and plans occlusion
/// attributions under Zero and Constant(1).
pub fn class_effect_plan(p: &DemoParams) -> Result<Plan, RunError> {
    let d = class_effect_dataset(p);
    let model = fit_centroid(&d, p.temperature).map_err(|e| RunError::Data(e.to_string()))?;
    let mut instances = d.instances;
    predict_classes(&model, &mut instances)?;
    let schedule = PerturbationSchedule::with_defaults(p.series_length).map_err(|e| RunError::Config(e.to_string()))?;
    Ok(Plan {
        dataset_name: d.name,
        instances,
        predictor_description: model.describe(),
        predictor: PredictorSource::Shared(Arc::new(model)),
        methods: vec![Method::Occlusion(OcclusionParams::default())],
        strategies: demo_strategies(),
        schedule,
        alphas: vec![0.0, 1.0],
        seed: p.seed,
    })
}
