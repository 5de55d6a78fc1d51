//! JSON form of a [`PathLift`].
//!
//! ```json
//! {
//!   "kind":   {"backend": "euclidean", "n": 1},
//!   "model":  {"model": "circle", "m": 512, "phase": 0.0},
//!   "tgrid":  [0.0, 0.005, ...],
//!   "nodes":  [0, 1, 2, ...],
//!   "images": [[x0, y0, x1, y1, ...], ...]
//! }
//! ```
//!
//! `nodes[k]` is the model node stored at index `k` (the identity unless the
//! lift was relabeled); `images[t]` concatenates the coordinates of every
//! node at time sample `t` in storage order. Floats are written in shortest
//! round-trip form, so reading a file back reproduces every value bit for bit.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{ModelGrid, ModelTag};
use super::mesh::{LagrangianMesh, PathLift};
use crate::error::{Error, Result};
use crate::geom::{ManifoldKind, Point};
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct LiftFile<S> {
    kind: ManifoldKind,
    model: ModelTag,
    tgrid: Vec<S>,
    nodes: Vec<usize>,
    images: Vec<Vec<S>>,
}

impl<S: Scalar> PathLift<S> {
    pub fn to_json(&self) -> Result<String> {
        let file = LiftFile {
            kind: self.kind(),
            model: self.grid().tag().clone(),
            tgrid: self.tgrid().to_vec(),
            nodes: self.grid().labels().to_vec(),
            images: self
                .meshes()
                .iter()
                .map(|m| m.images().iter().flat_map(|p| p.coords.iter().copied()).collect())
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LiftFile<S> = serde_json::from_str(text)?;
        let base = ModelGrid::from_tag(&file.model)?;
        let grid = Arc::new(base.relabeled(&file.nodes)?);
        let d = file.kind.coord_len();
        let meshes = file
            .images
            .into_iter()
            .map(|flat| {
                if flat.len() != d * grid.len() {
                    return Err(Error::DimensionMismatch {
                        expected: d * grid.len(),
                        got: flat.len(),
                    });
                }
                let images = flat
                    .chunks_exact(d)
                    .map(|c| Point { coords: c.to_vec() })
                    .collect();
                LagrangianMesh::from_parts(file.kind, grid.clone(), images)
            })
            .collect::<Result<Vec<_>>>()?;
        PathLift::new(file.tgrid, meshes)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_lift(m: usize, shift: f64, rot: usize) -> PathLift<f64> {
        let kind = ManifoldKind::Euclidean { n: 1 };
        let grid = Arc::new(ModelGrid::from_tag(&ModelTag::Circle { m, phase: 0.25 }).unwrap());
        let ts = vec![0.0, 1.0 / 3.0, 1.0];
        let meshes = ts
            .iter()
            .map(|&t| {
                LagrangianMesh::embed(kind, grid.clone(), |c| vec![c[0] + shift * t, c[1] - t / 7.0]).unwrap()
            })
            .collect();
        let lift = PathLift::new(ts, meshes).unwrap();
        let perm: Vec<usize> = (0..m).map(|k| (k + rot) % m).collect();
        lift.relabeled(&perm).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn json_round_trip_is_bit_exact(shift in -3.0f64..3.0, rot in 0usize..64) {
            let lift = sample_lift(64, shift, rot);
            let back = PathLift::<f64>::from_json(&lift.to_json().unwrap()).unwrap();
            prop_assert_eq!(back.tgrid(), lift.tgrid());
            prop_assert_eq!(back.grid().labels(), lift.grid().labels());
            prop_assert_eq!(back.grid().edges(), lift.grid().edges());
            for (a, b) in back.meshes().iter().zip(lift.meshes()) {
                prop_assert_eq!(a.images(), b.images());
            }
        }
    }

    #[test]
    fn truncated_images_rejected() {
        let lift = sample_lift(64, 0.5, 0);
        let mut v: serde_json::Value = serde_json::from_str(&lift.to_json().unwrap()).unwrap();
        v["images"][1].as_array_mut().unwrap().pop();
        assert!(PathLift::<f64>::from_json(&v.to_string()).is_err());
    }
}
