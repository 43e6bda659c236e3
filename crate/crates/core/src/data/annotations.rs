//! Annotation JSON document:
//! `{"videos":[{"id", "duration_snippets", "instances":[{"start","end"}]}]}`.

use super::{DataError, GroundTruthInstance};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct AnnotationFile {
    pub videos: Vec<VideoAnnotation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoAnnotation {
    pub id: String,
    pub duration_snippets: usize,
    pub instances: Vec<InstanceJson>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InstanceJson {
    pub start: f32,
    pub end: f32,
}

impl VideoAnnotation {
    pub fn instances(&self) -> Vec<GroundTruthInstance> {
        self.instances
            .iter()
            .map(|i| GroundTruthInstance::new(i.start, i.end))
            .collect()
    }
}

impl AnnotationFile {
    pub fn push(&mut self, id: &str, duration_snippets: usize, insts: &[GroundTruthInstance]) {
        self.videos.push(VideoAnnotation {
            id: id.to_string(),
            duration_snippets,
            instances: insts
                .iter()
                .map(|g| InstanceJson {
                    start: g.start,
                    end: g.end,
                })
                .collect(),
        });
    }

    /// Validate the 0 <= start < end <= duration invariant on every instance.
    pub fn validate(&self) -> Result<(), DataError> {
        for v in &self.videos {
            for i in &v.instances {
                let ok = i.start >= 0.0
                    && i.start < i.end
                    && i.end <= v.duration_snippets as f32
                    && i.start.is_finite()
                    && i.end.is_finite();
                if !ok {
                    return Err(DataError::BadInstance {
                        start: i.start,
                        end: i.end,
                        len: v.duration_snippets,
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn read_annotations(path: &Path) -> Result<AnnotationFile, DataError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::MissingFile {
                path: path.display().to_string(),
                source: e,
            }
        } else {
            DataError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })?;
    let parsed: AnnotationFile =
        serde_json::from_str(&text).map_err(|source| DataError::BadAnnotation {
            path: path.display().to_string(),
            source,
        })?;
    parsed.validate()?;
    Ok(parsed)
}

pub fn write_annotations(path: &Path, ann: &AnnotationFile) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(ann).expect("annotation types always serialize");
    fs::write(path, text).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
