//! Binary model checkpoint.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic            8 bytes  b"EMSNERCK"
//! format version   u32      currently 1
//! vocab size       u32
//! embed dim        u32
//! hidden dim       u32
//! num tags         u32
//! seed             u64
//! vocab table      vocab size entries of { len: u32, utf-8 bytes }
//! param count      u64
//! parameters       f64 * param count, in declared tensor order:
//!                  embeddings, forward LSTM (input, recurrent, bias),
//!                  backward LSTM (input, recurrent, bias), projection
//!                  (weights, bias), transitions
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use emsaudit_core::entities::Tag;
use emsaudit_core::tagger::{TaggerModel, Vocabulary};
use thiserror::Error;

const MAGIC: &[u8; 8] = b"EMSNERCK";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint is internally inconsistent: {0}")]
    Corrupt(String),
}

pub fn save(model: &TaggerModel, path: &Path) -> Result<(), CheckpointError> {
    let wrap = |source: std::io::Error| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(wrap)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        let dims = model.dims();
        w.write_all(MAGIC).map_err(wrap)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION).map_err(wrap)?;
        w.write_u32::<LittleEndian>(dims.vocab_size as u32).map_err(wrap)?;
        w.write_u32::<LittleEndian>(dims.embed_dim as u32).map_err(wrap)?;
        w.write_u32::<LittleEndian>(dims.hidden_dim as u32).map_err(wrap)?;
        w.write_u32::<LittleEndian>(dims.num_tags as u32).map_err(wrap)?;
        w.write_u64::<LittleEndian>(model.seed()).map_err(wrap)?;
        for token in model.vocab().tokens() {
            w.write_u32::<LittleEndian>(token.len() as u32).map_err(wrap)?;
            w.write_all(token.as_bytes()).map_err(wrap)?;
        }
        w.write_u64::<LittleEndian>(model.param_count() as u64).map_err(wrap)?;
        for &v in model.params() {
            w.write_f64::<LittleEndian>(v).map_err(wrap)?;
        }
        w.flush().map_err(wrap)?;
    }
    tmp.persist(path)
        .map_err(|e| wrap(e.error))
        .map(|_| ())
}

pub fn load(path: &Path) -> Result<TaggerModel, CheckpointError> {
    let wrap = |source: std::io::Error| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(wrap)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(wrap)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.read_u32::<LittleEndian>().map_err(wrap)?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let vocab_size = r.read_u32::<LittleEndian>().map_err(wrap)? as usize;
    let embed_dim = r.read_u32::<LittleEndian>().map_err(wrap)? as usize;
    let hidden_dim = r.read_u32::<LittleEndian>().map_err(wrap)? as usize;
    let num_tags = r.read_u32::<LittleEndian>().map_err(wrap)? as usize;
    let seed = r.read_u64::<LittleEndian>().map_err(wrap)?;
    if num_tags != Tag::COUNT {
        return Err(CheckpointError::Corrupt(format!(
            "tag set size {num_tags}, expected {}",
            Tag::COUNT
        )));
    }

    let mut tokens = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        let len = r.read_u32::<LittleEndian>().map_err(wrap)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(wrap)?;
        let token = String::from_utf8(buf)
            .map_err(|_| CheckpointError::Corrupt("vocab entry is not UTF-8".into()))?;
        tokens.push(token);
    }
    let vocab = Vocabulary::from_tokens(tokens)
        .ok_or_else(|| CheckpointError::Corrupt("malformed vocabulary table".into()))?;

    let count = r.read_u64::<LittleEndian>().map_err(wrap)? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        params.push(r.read_f64::<LittleEndian>().map_err(wrap)?);
    }
    TaggerModel::from_parts(vocab, embed_dim, hidden_dim, seed, params)
        .ok_or_else(|| CheckpointError::Corrupt("parameter count mismatch".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use emsaudit_core::tagger::Vocabulary;

    #[test]
    fn save_load_round_trip_is_exact() {
        let sentence: Vec<String> = ["pt", "alert", "aspirin"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let vocab = Vocabulary::build([sentence.as_slice()], 1);
        let model = TaggerModel::new(vocab, 10, 7, 99);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&model, &path).unwrap();
        let loaded = load(&path).unwrap();

        assert_eq!(loaded.dims(), model.dims());
        assert_eq!(loaded.seed(), model.seed());
        assert_eq!(loaded.vocab().tokens(), model.vocab().tokens());
        // Bit-exact, including the -inf transition entries.
        let a: Vec<u64> = model.params().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = loaded.params().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(load(&path), Err(CheckpointError::BadMagic)));
    }
}
