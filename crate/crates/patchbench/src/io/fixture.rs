//! The bundled scene fixture: a synthetic stand-in for the paper-style
//! desk scene, stored as a directory with the scene PNG, COCO annotations,
//! a precomputed baseline evaluation, and an index file.

use super::coco::{annotations_to_coco, load_dataset, DatasetFormat};
use super::png::{load_image, save_image};
use super::IoError;
use crate::detect::DetectorAdapter;
use crate::metrics::{
    mean_average_precision, target_confidence, Annotation, EvalResult, DEFAULT_CONF_THRESH,
    DEFAULT_IOU_THRESH,
};
use crate::sweeps::SweepScene;
use crate::transforms::Image;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const FIXTURE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixtureIndex {
    schema_version: u32,
    image: String,
    annotations: String,
    baseline_eval: String,
    detector_id: String,
    /// Object name -> annotation index.
    object_ids: BTreeMap<String, usize>,
}

/// A loaded scene fixture: image, ground truth, baseline evaluation at
/// identity transform, and named objects.
#[derive(Debug, Clone)]
pub struct SceneFixture {
    pub image: Image,
    pub annotations: Vec<Annotation>,
    pub baseline_eval: EvalResult,
    pub object_ids: BTreeMap<String, usize>,
    pub detector_id: String,
}

impl SceneFixture {
    pub fn sweep_scene(&self) -> SweepScene<'_> {
        SweepScene { image: &self.image, annotations: &self.annotations, object_ids: &self.object_ids }
    }

    /// The annotation behind a named object.
    pub fn object(&self, name: &str) -> Option<&Annotation> {
        self.object_ids.get(name).and_then(|&i| self.annotations.get(i))
    }
}

/// Evaluates a scene at identity transform: mAP plus per-object
/// confidences.
pub fn evaluate_scene(
    adapter: &dyn DetectorAdapter,
    image: &Image,
    annotations: &[Annotation],
    object_ids: &BTreeMap<String, usize>,
) -> Result<EvalResult, IoError> {
    let dets = adapter
        .detect(image, DEFAULT_CONF_THRESH)
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    let mut eval = mean_average_precision(&[(dets.clone(), annotations.to_vec())], DEFAULT_IOU_THRESH)
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    for (name, &idx) in object_ids {
        if let Some(ann) = annotations.get(idx) {
            eval.per_object_confidence.insert(
                name.clone(),
                target_confidence(&dets, ann.class_id, &ann.bbox, DEFAULT_IOU_THRESH),
            );
        }
    }
    Ok(eval)
}

/// Builds a fixture directory from a rendered scene: writes the PNG, COCO
/// annotations, the baseline evaluation computed with `adapter`, and the
/// index.
pub fn build_fixture(
    dir: &Path,
    image: &Image,
    annotations: &[Annotation],
    class_names: &[String],
    adapter: &dyn DetectorAdapter,
) -> Result<SceneFixture, IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    let object_ids: BTreeMap<String, usize> = annotations
        .iter()
        .enumerate()
        .map(|(i, a)| (class_names[a.class_id as usize].clone(), i))
        .collect();
    if annotations.is_empty() {
        return Err(IoError::Invalid("fixture annotations must be non-empty".into()));
    }
    save_image(image, &dir.join("scene.png"))?;
    let coco = annotations_to_coco("scene.png", image.width() as u32, image.height() as u32, annotations, class_names);
    let ann_path = dir.join("annotations.json");
    std::fs::write(&ann_path, serde_json::to_string_pretty(&coco).unwrap())
        .map_err(|e| IoError::file(&ann_path, e))?;
    let baseline = evaluate_scene(adapter, image, annotations, &object_ids)?;
    let eval_path = dir.join("baseline_eval.json");
    std::fs::write(&eval_path, serde_json::to_string_pretty(&baseline).unwrap())
        .map_err(|e| IoError::file(&eval_path, e))?;
    let index = FixtureIndex {
        schema_version: FIXTURE_SCHEMA_VERSION,
        image: "scene.png".into(),
        annotations: "annotations.json".into(),
        baseline_eval: "baseline_eval.json".into(),
        detector_id: adapter.detector_id().to_string(),
        object_ids: object_ids.clone(),
    };
    let idx_path = dir.join("fixture.json");
    std::fs::write(&idx_path, serde_json::to_string_pretty(&index).unwrap())
        .map_err(|e| IoError::file(&idx_path, e))?;
    Ok(SceneFixture {
        image: image.clone(),
        annotations: annotations.to_vec(),
        baseline_eval: baseline,
        object_ids,
        detector_id: index.detector_id,
    })
}

/// Writes an already-assembled fixture (used when the baseline evaluation
/// was computed elsewhere).
pub fn save_fixture(dir: &Path, fixture: &SceneFixture, class_names: &[String]) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    save_image(&fixture.image, &dir.join("scene.png"))?;
    let coco = annotations_to_coco(
        "scene.png",
        fixture.image.width() as u32,
        fixture.image.height() as u32,
        &fixture.annotations,
        class_names,
    );
    std::fs::write(dir.join("annotations.json"), serde_json::to_string_pretty(&coco).unwrap())
        .map_err(|e| IoError::file(dir, e))?;
    std::fs::write(
        dir.join("baseline_eval.json"),
        serde_json::to_string_pretty(&fixture.baseline_eval).unwrap(),
    )
    .map_err(|e| IoError::file(dir, e))?;
    let index = FixtureIndex {
        schema_version: FIXTURE_SCHEMA_VERSION,
        image: "scene.png".into(),
        annotations: "annotations.json".into(),
        baseline_eval: "baseline_eval.json".into(),
        detector_id: fixture.detector_id.clone(),
        object_ids: fixture.object_ids.clone(),
    };
    std::fs::write(dir.join("fixture.json"), serde_json::to_string_pretty(&index).unwrap())
        .map_err(|e| IoError::file(dir, e))?;
    Ok(())
}

/// Loads a fixture directory. Class alignment follows the given vocabulary.
pub fn load_fixture(dir: &Path, class_names: &[String]) -> Result<SceneFixture, IoError> {
    let idx_path = dir.join("fixture.json");
    let raw = std::fs::read_to_string(&idx_path).map_err(|e| IoError::file(&idx_path, e))?;
    let index: FixtureIndex = serde_json::from_str(&raw).map_err(|e| IoError::parse(&idx_path, e))?;
    if index.schema_version != FIXTURE_SCHEMA_VERSION {
        return Err(IoError::parse(
            &idx_path,
            format!("fixture schema {} unsupported", index.schema_version),
        ));
    }
    let image = load_image(&dir.join(&index.image))?;
    let source = load_dataset(&dir.join(&index.annotations), DatasetFormat::CocoJson, class_names)?;
    let annotations = source.entries[0].1.clone();
    if annotations.is_empty() {
        return Err(IoError::Invalid("fixture annotations must be non-empty".into()));
    }
    let eval_path = dir.join(&index.baseline_eval);
    let raw = std::fs::read_to_string(&eval_path).map_err(|e| IoError::file(&eval_path, e))?;
    let baseline_eval: EvalResult =
        serde_json::from_str(&raw).map_err(|e| IoError::parse(&eval_path, e))?;
    Ok(SceneFixture {
        image,
        annotations,
        baseline_eval,
        object_ids: index.object_ids,
        detector_id: index.detector_id,
    })
}
