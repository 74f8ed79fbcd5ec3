use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::autodiff::io::{read_container, write_container};
use crate::autodiff::{AdamMoments, ParamStore, SgdState, Tensor};
use crate::error::{Error, Result};
use crate::model::NeuralPointsModel;

/// Model weights with everything needed to resume training.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: NeuralPointsModel,
    pub train: TrainConfig,
    pub iteration: u64,
    pub rng: ChaCha8Rng,
    pub schedule: SgdState,
    pub adam: Option<AdamMoments>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    format: String,
    train: TrainConfig,
    iteration: u64,
    rng: ChaCha8Rng,
    schedule: SgdState,
}

const FORMAT: &str = "neural-points-checkpoint";

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut train = self.train.clone();
        train.model = self.model.config.clone();
        let meta = Meta {
            format: FORMAT.into(),
            train,
            iteration: self.iteration,
            rng: self.rng.clone(),
            schedule: self.schedule.clone(),
        };
        let meta = serde_json::to_string(&meta)?;
        let mut owned: Vec<(String, Tensor)> = Vec::new();
        if let Some(m) = &self.adam {
            for (name, data) in m.tensors() {
                owned.push((name, Tensor::vector(data)));
            }
        }
        let mut tensors: Vec<(String, &Tensor)> =
            self.model.params.iter().map(|(n, t)| (n.clone(), t)).collect();
        tensors.extend(owned.iter().map(|(n, t)| (n.clone(), t)));
        write_container(w, &meta, &tensors)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let (meta, tensors) = read_container(r)?;
        let meta: Meta = serde_json::from_str(&meta)?;
        if meta.format != FORMAT {
            return Err(Error::Format(format!("unexpected checkpoint format {}", meta.format)));
        }
        let mut params = ParamStore::new();
        let mut adam = AdamMoments::new();
        let mut has_adam = false;
        for (name, t) in tensors {
            if name.starts_with("adam.") {
                has_adam |= adam.restore(&name, t.into_data());
            } else {
                params.insert(name, t);
            }
        }
        let model = NeuralPointsModel {
            config: meta.train.model.clone(),
            params,
        };
        model.check_layout()?;
        Ok(Self {
            model,
            train: meta.train,
            iteration: meta.iteration,
            rng: meta.rng,
            schedule: meta.schedule,
            adam: has_adam.then_some(adam),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            self.write_to(&mut w)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }
}
