//! Flat binary checkpoints for the miniature LM.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "SLWC"
//! version u32      1
//! vocab   u32      number of symbols
//! context u32
//! embed   u32
//! hidden  u32
//! chars   vocab x u32    Unicode scalar values of the vocabulary, sorted
//! tensors 7 x { len: u64, data: len x f64 }   embed, w1, b1, w2, b2, w3, b3
//! masks   3 x { len: u64, bits: ceil(len/8) bytes, LSB first }  m1, m2, m3
//! ```

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use sparselaw::trainer::{TinyLm, TinyLmSpec};

const MAGIC: &[u8; 4] = b"SLWC";
const VERSION: u32 = 1;

pub fn write_checkpoint(path: &Path, model: &TinyLm) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.vocab_size() as u32).to_le_bytes());
    let spec = model.spec();
    out.extend_from_slice(&(spec.context as u32).to_le_bytes());
    out.extend_from_slice(&(spec.embed_dim as u32).to_le_bytes());
    out.extend_from_slice(&(spec.hidden_dim as u32).to_le_bytes());
    for &c in model.vocab() {
        out.extend_from_slice(&(c as u32).to_le_bytes());
    }
    let (tensors, masks) = model.raw_parts();
    for t in tensors {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for m in masks {
        out.extend_from_slice(&(m.len() as u64).to_le_bytes());
        let mut packed = vec![0u8; m.len().div_ceil(8)];
        for (i, &bit) in m.iter().enumerate() {
            if bit {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    let mut file =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<TinyLm> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        if *cursor + n > bytes.len() {
            bail!("checkpoint truncated at byte {}", *cursor);
        }
        let s = &bytes[*cursor..*cursor + n];
        *cursor += n;
        Ok(s)
    };
    let magic = take(&mut cursor, 4)?;
    if magic != MAGIC {
        bail!("not a checkpoint file (bad magic)");
    }
    let u32_at = |c: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(c, 4)?.try_into().unwrap()))
    };
    let version = u32_at(&mut cursor)?;
    if version != VERSION {
        bail!("unsupported checkpoint version {version}");
    }
    let vocab_len = u32_at(&mut cursor)? as usize;
    let context = u32_at(&mut cursor)? as usize;
    let embed_dim = u32_at(&mut cursor)? as usize;
    let hidden_dim = u32_at(&mut cursor)? as usize;
    let mut vocab = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        let cp = u32_at(&mut cursor)?;
        vocab.push(char::from_u32(cp).context("invalid character in checkpoint vocabulary")?);
    }
    let mut tensors = Vec::with_capacity(7);
    for _ in 0..7 {
        let len = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
        let raw = take(&mut cursor, len * 8)?;
        tensors.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<f64>>(),
        );
    }
    let mut masks = Vec::with_capacity(3);
    for _ in 0..3 {
        let len = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
        let raw = take(&mut cursor, len.div_ceil(8))?;
        masks.push((0..len).map(|i| raw[i / 8] >> (i % 8) & 1 == 1).collect());
    }
    Ok(TinyLm::from_raw_parts(
        TinyLmSpec {
            context,
            embed_dim,
            hidden_dim,
        },
        vocab,
        tensors,
        masks,
    )?)
}
