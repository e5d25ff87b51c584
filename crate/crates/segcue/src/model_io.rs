//! Saved n-gram models: one JSON document holding the order, the phoneme
//! inventory (id order, `<UB>` first) and every stored count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use segcue_core::corpus::{PhonemeInventory, TokenId};
use segcue_core::predictor::NGramModel;

use crate::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    segcue_ngram_version: u32,
    order: usize,
    inventory: Vec<String>,
    counts: Vec<(Vec<TokenId>, TokenId, u64)>,
}

pub fn write_model<W: Write>(out: W, model: &NGramModel, inventory: &PhonemeInventory) -> Result<()> {
    if segcue_core::predictor::Predictor::vocab_size(model) != inventory.len() {
        return Err(Error::Invalid("model vocabulary and inventory differ in size".into()));
    }
    let file = ModelFile {
        segcue_ngram_version: MODEL_VERSION,
        order: model.order(),
        inventory: inventory.symbols().to_vec(),
        counts: model.entries().map(|(ctx, t, c)| (ctx.to_vec(), t, c)).collect(),
    };
    let mut out = out;
    serde_json::to_writer(&mut out, &file).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(input: R) -> Result<(NGramModel, PhonemeInventory)> {
    let file: ModelFile =
        serde_json::from_reader(input).map_err(|e| Error::parse(e.line(), format!("bad model file: {e}")))?;
    if file.segcue_ngram_version != MODEL_VERSION {
        return Err(Error::parse(1, format!("unsupported model version {}", file.segcue_ngram_version)));
    }
    let inventory = PhonemeInventory::from_symbols(file.inventory)?;
    let model = NGramModel::from_counts(file.order, inventory.len(), file.counts)?;
    Ok((model, inventory))
}

pub fn save_model(path: &Path, model: &NGramModel, inventory: &PhonemeInventory) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), model, inventory)
}

pub fn load_model(path: &Path) -> Result<(NGramModel, PhonemeInventory)> {
    read_model(BufReader::new(File::open(path)?))
}
