//! Dataset ingestion: COCO-format JSON or a folder of images with
//! annotation sidecars. Class vocabularies align to the adapter's class
//! names by exact name matching; unmatched names are reported together.

use super::{png::load_image, IoError};
use crate::metrics::{Annotation, BBox};
use crate::patchgen::Dataset;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    CocoJson,
    FolderWithSidecars,
}

#[derive(Debug, Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Deserialize, Serialize)]
pub(crate) struct CocoImage {
    pub id: u64,
    pub file_name: String,
    #[serde(default)]
    pub width: u32,
    #[serde(default)]
    pub height: u32,
}

#[derive(Debug, Deserialize, Serialize)]
pub(crate) struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    /// `[x, y, width, height]`.
    pub bbox: [f64; 4],
}

#[derive(Debug, Deserialize, Serialize)]
pub(crate) struct CocoCategory {
    pub id: u64,
    pub name: String,
}

/// Per-image sidecar format for `FolderWithSidecars`.
#[derive(Debug, Serialize, Deserialize)]
struct SidecarAnnotations {
    annotations: Vec<SidecarAnnotation>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarAnnotation {
    class_name: String,
    /// `[x1, y1, x2, y2]`.
    bbox: [f64; 4],
}

/// A dataset with lazily loadable images: annotation indexing happens at
/// parse time, pixels are read on demand.
#[derive(Debug, Clone)]
pub struct DatasetSource {
    pub entries: Vec<(PathBuf, Vec<Annotation>)>,
    pub source_id: String,
}

impl DatasetSource {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads one sample's pixels.
    pub fn load_sample(&self, index: usize) -> Result<(crate::transforms::Image, Vec<Annotation>), IoError> {
        let (path, anns) = &self.entries[index];
        Ok((load_image(path)?, anns.clone()))
    }

    /// Eagerly loads everything into a training dataset.
    pub fn to_dataset(&self) -> Result<Dataset, IoError> {
        let mut samples = Vec::with_capacity(self.entries.len());
        for i in 0..self.entries.len() {
            samples.push(self.load_sample(i)?);
        }
        Ok(Dataset { samples, source_id: self.source_id.clone() })
    }
}

/// Loads and indexes a dataset, aligning category names to `class_names`.
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    class_names: &[String],
) -> Result<DatasetSource, IoError> {
    match format {
        DatasetFormat::CocoJson => load_coco(path, class_names),
        DatasetFormat::FolderWithSidecars => load_folder(path, class_names),
    }
}

fn class_index(class_names: &[String]) -> BTreeMap<&str, u32> {
    class_names.iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect()
}

fn load_coco(path: &Path, class_names: &[String]) -> Result<DatasetSource, IoError> {
    let raw = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let coco: CocoFile = serde_json::from_str(&raw).map_err(|e| IoError::parse(path, e))?;
    let by_name = class_index(class_names);
    let mut unknown = Vec::new();
    let mut cat_to_class: BTreeMap<u64, u32> = BTreeMap::new();
    for cat in &coco.categories {
        match by_name.get(cat.name.as_str()) {
            Some(&id) => {
                cat_to_class.insert(cat.id, id);
            }
            None => unknown.push(cat.name.clone()),
        }
    }
    if !unknown.is_empty() {
        return Err(IoError::UnknownClassName(unknown));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut per_image: BTreeMap<u64, Vec<Annotation>> = BTreeMap::new();
    for ann in &coco.annotations {
        let class_id = *cat_to_class.get(&ann.category_id).ok_or_else(|| {
            IoError::parse(path, format!("annotation {} references unknown category {}", ann.id, ann.category_id))
        })?;
        let [x, y, w, h] = ann.bbox;
        let bbox = BBox::new(x, y, x + w, y + h)
            .map_err(|e| IoError::parse(path, format!("annotation {}: {e}", ann.id)))?;
        per_image.entry(ann.image_id).or_default().push(Annotation { bbox, class_id });
    }
    let entries: Vec<(PathBuf, Vec<Annotation>)> = coco
        .images
        .iter()
        .map(|img| (base.join(&img.file_name), per_image.remove(&img.id).unwrap_or_default()))
        .collect();
    if entries.is_empty() {
        return Err(IoError::parse(path, "no images listed"));
    }
    Ok(DatasetSource { entries, source_id: path.display().to_string() })
}

fn load_folder(dir: &Path, class_names: &[String]) -> Result<DatasetSource, IoError> {
    let by_name = class_index(class_names);
    let mut entries = Vec::new();
    let mut unknown = Vec::new();
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| IoError::file(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    names.sort();
    for png in names {
        let sidecar = png.with_extension("json");
        let anns = if sidecar.exists() {
            let raw = std::fs::read_to_string(&sidecar).map_err(|e| IoError::file(&sidecar, e))?;
            let parsed: SidecarAnnotations =
                serde_json::from_str(&raw).map_err(|e| IoError::parse(&sidecar, e))?;
            let mut anns = Vec::with_capacity(parsed.annotations.len());
            for a in parsed.annotations {
                match by_name.get(a.class_name.as_str()) {
                    Some(&class_id) => {
                        let [x1, y1, x2, y2] = a.bbox;
                        let bbox = BBox::new(x1, y1, x2, y2)
                            .map_err(|e| IoError::parse(&sidecar, e))?;
                        anns.push(Annotation { bbox, class_id });
                    }
                    None => unknown.push(a.class_name),
                }
            }
            anns
        } else {
            Vec::new()
        };
        entries.push((png, anns));
    }
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(IoError::UnknownClassName(unknown));
    }
    if entries.is_empty() {
        return Err(IoError::parse(dir, "no PNG images in folder"));
    }
    Ok(DatasetSource { entries, source_id: dir.display().to_string() })
}

/// Serializes annotations for one image to minimal COCO JSON.
pub(crate) fn annotations_to_coco(
    image_name: &str,
    width: u32,
    height: u32,
    annotations: &[Annotation],
    class_names: &[String],
) -> serde_json::Value {
    let categories: Vec<serde_json::Value> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| serde_json::json!({"id": i + 1, "name": n}))
        .collect();
    let anns: Vec<serde_json::Value> = annotations
        .iter()
        .enumerate()
        .map(|(i, a)| {
            serde_json::json!({
                "id": i + 1,
                "image_id": 1,
                "category_id": a.class_id + 1,
                "bbox": [a.bbox.x1, a.bbox.y1, a.bbox.width(), a.bbox.height()],
            })
        })
        .collect();
    serde_json::json!({
        "images": [{"id": 1, "file_name": image_name, "width": width, "height": height}],
        "annotations": anns,
        "categories": categories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::png::save_image;
    use crate::transforms::Image;

    fn write_scene(dir: &Path) -> PathBuf {
        let img = Image::constant(16, 16, [0.5, 0.5, 0.5]);
        let p = dir.join("scene.png");
        save_image(&img, &p).unwrap();
        p
    }

    #[test]
    fn coco_round_trip_and_alignment() {
        let dir = tempfile::tempdir().unwrap();
        write_scene(dir.path());
        let classes = vec!["person".to_string(), "cup".to_string()];
        let coco = serde_json::json!({
            "images": [{"id": 1, "file_name": "scene.png", "width": 16, "height": 16}],
            "annotations": [
                {"id": 1, "image_id": 1, "category_id": 7, "bbox": [2.0, 3.0, 5.0, 4.0]}
            ],
            "categories": [{"id": 7, "name": "cup"}],
        });
        let path = dir.path().join("anns.json");
        std::fs::write(&path, serde_json::to_string(&coco).unwrap()).unwrap();
        let src = load_dataset(&path, DatasetFormat::CocoJson, &classes).unwrap();
        assert_eq!(src.len(), 1);
        let (img, anns) = src.load_sample(0).unwrap();
        assert_eq!(img.width(), 16);
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].class_id, 1);
        assert_eq!(anns[0].bbox.x2, 7.0);
    }

    #[test]
    fn unknown_class_name_lists_offenders() {
        let dir = tempfile::tempdir().unwrap();
        write_scene(dir.path());
        let classes = vec!["tennis racket".to_string()];
        let coco = serde_json::json!({
            "images": [{"id": 1, "file_name": "scene.png"}],
            "annotations": [],
            "categories": [{"id": 1, "name": "racket"}],
        });
        let path = dir.path().join("anns.json");
        std::fs::write(&path, serde_json::to_string(&coco).unwrap()).unwrap();
        match load_dataset(&path, DatasetFormat::CocoJson, &classes) {
            Err(IoError::UnknownClassName(names)) => assert_eq!(names, vec!["racket".to_string()]),
            other => panic!("expected UnknownClassName, got {other:?}"),
        }
    }

    #[test]
    fn empty_annotation_file_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.json");
        std::fs::write(&path, "").unwrap();
        match load_dataset(&path, DatasetFormat::CocoJson, &[]) {
            Err(IoError::ParseError { .. }) => {}
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn folder_with_sidecars_loads() {
        let dir = tempfile::tempdir().unwrap();
        write_scene(dir.path());
        let sidecar = serde_json::json!({
            "annotations": [{"class_name": "cup", "bbox": [1.0, 1.0, 9.0, 9.0]}]
        });
        std::fs::write(dir.path().join("scene.json"), serde_json::to_string(&sidecar).unwrap()).unwrap();
        let classes = vec!["cup".to_string()];
        let src = load_dataset(dir.path(), DatasetFormat::FolderWithSidecars, &classes).unwrap();
        assert_eq!(src.len(), 1);
        let ds = src.to_dataset().unwrap();
        assert_eq!(ds.samples[0].1.len(), 1);
    }
}
