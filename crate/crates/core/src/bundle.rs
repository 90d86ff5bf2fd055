use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{make_training_pairs, Corpus, CorpusIndex, WindowPair, DEFAULT_WINDOW_CAP};
use crate::error::{Error, Result};
use crate::nn::{Cnn, LstmNet, Mlp, TrainParams};
use crate::par::{derive_seed, Exec};

/// The three trained networks with the index tables they were trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: String,
    pub seed: u64,
    pub window_cap: usize,
    pub train: TrainParams,
    pub index: CorpusIndex,
    pub mlp: Mlp,
    pub cnn: Cnn,
    pub lstm: LstmNet,
}

/// Wall-clock seconds spent on each network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainTimes {
    pub mlp: f64,
    pub cnn: f64,
    pub lstm: f64,
}

impl ModelBundle {
    /// Trains all three networks. Each gets its own seed derived from `hp.seed`.
    pub fn train(corpus: &Corpus, hp: &TrainParams, exec: Exec) -> Result<ModelBundle> {
        let pairs = make_training_pairs(corpus, DEFAULT_WINDOW_CAP, hp.seed);
        Self::train_with_pairs(corpus, &pairs, hp, exec)
    }

    pub fn train_with_pairs(corpus: &Corpus, pairs: &[WindowPair], hp: &TrainParams, exec: Exec) -> Result<ModelBundle> {
        let with_seed = |name: &str| TrainParams {
            seed: derive_seed(hp.seed, name),
            ..*hp
        };
        let mlp = Mlp::train(corpus, &with_seed("mlp"), exec)?;
        let cnn = Cnn::train(corpus, pairs, &with_seed("cnn"), exec)?;
        let lstm = LstmNet::train(&corpus.index, pairs, &with_seed("lstm"), exec)?;
        Ok(ModelBundle {
            version: crate::VERSION.to_string(),
            seed: hp.seed,
            window_cap: DEFAULT_WINDOW_CAP,
            train: *hp,
            index: corpus.index.clone(),
            mlp,
            cnn,
            lstm,
        })
    }

    pub fn times(&self) -> TrainTimes {
        TrainTimes {
            mlp: self.mlp.log.seconds,
            cnn: self.cnn.log.seconds,
            lstm: self.lstm.log.seconds,
        }
    }

    /// Training windows the LSTM saw, regenerated from the corpus.
    pub fn training_pairs(&self, corpus: &Corpus) -> Vec<WindowPair> {
        make_training_pairs(corpus, self.window_cap, self.seed)
    }

    /// Fails with `DataMismatch` unless the bundle was trained on `corpus`'s index tables.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        let mine = &self.index;
        let theirs = &corpus.index;
        let what = if mine.roster != theirs.roster {
            "block roster"
        } else if mine.relations != theirs.relations {
            "relation labels"
        } else if mine.tokens != theirs.tokens {
            "token vocabulary"
        } else if mine.n != theirs.n {
            "sequence length"
        } else if self.cnn.arch.classes != corpus.len() {
            "example count"
        } else {
            return Ok(());
        };
        Err(Error::DataMismatch(format!("bundle and corpus disagree on the {what}")))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<ModelBundle> {
        serde_json::from_str(text).map_err(|e| Error::DataMismatch(format!("unreadable model bundle: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelBundle> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Loads and verifies against `corpus`.
    pub fn load_for(path: &Path, corpus: &Corpus) -> Result<ModelBundle> {
        let b = Self::load(path)?;
        b.check_corpus(corpus)?;
        Ok(b)
    }
}
