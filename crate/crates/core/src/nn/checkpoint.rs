//! Model checkpoints: a small versioned binary container holding the model
//! shape as text, a named manifest, and raw little-endian f64 payloads for
//! every parameter and batch-norm running statistic. Values round-trip
//! bit-exactly.
//!
//! Layout:
//!
//! ```text
//! magic "APNEACKP" | u16 version | u32 spec_len | spec text (key=value lines)
//! u32 n_entries | entries: u16 name_len, name, u8 kind, u64 count
//! payload: count f64 values per entry, manifest order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::block::ConvBlockSpec;
use super::model::{Model, ModelSpec, ModelVariant};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"APNEACKP";
const VERSION: u16 = 1;

const KIND_PARAM: u8 = 0;
const KIND_BUFFER: u8 = 1;

fn spec_to_text(spec: &ModelSpec) -> String {
    let mut s = String::new();
    s.push_str(&format!("variant={}\n", spec.variant.as_str()));
    s.push_str(&format!("lstm_hidden={}\n", spec.lstm_hidden));
    s.push_str(&format!("dense_hidden={}\n", spec.dense_hidden));
    s.push_str(&format!("output_len={}\n", spec.output_len));
    s.push_str(&format!("ecg_rate_hz={}\n", spec.ecg_rate_hz));
    s.push_str(&format!("window_s={}\n", spec.window_s));
    s.push_str(&format!("n_blocks={}\n", spec.blocks.len()));
    for (i, b) in spec.blocks.iter().enumerate() {
        s.push_str(&format!("block{i}.kernel={}\n", b.kernel));
        s.push_str(&format!("block{i}.channels={}\n", b.channels));
        let dil: Vec<String> = b.dilations.iter().map(|d| d.to_string()).collect();
        s.push_str(&format!("block{i}.dilations={}\n", dil.join(",")));
        s.push_str(&format!("block{i}.dropout_rate={}\n", b.dropout_rate));
        s.push_str(&format!("block{i}.pool={}\n", b.pool));
    }
    s
}

struct KvBlock<'p> {
    path: &'p Path,
    pairs: Vec<(String, String)>,
}

impl<'p> KvBlock<'p> {
    fn parse(text: &str, path: &'p Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(path, format!("malformed spec line {line:?}"))
            })?;
            pairs.push((k.to_string(), v.to_string()));
        }
        Ok(KvBlock { path, pairs })
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::format(self.path, format!("missing spec key {key:?}")))
    }

    fn get_usize(&self, key: &str) -> Result<usize> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::format(self.path, format!("spec key {key:?} is not an integer")))
    }

    fn get_f64(&self, key: &str) -> Result<f64> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::format(self.path, format!("spec key {key:?} is not a number")))
    }
}

fn text_to_spec(text: &str, path: &Path) -> Result<ModelSpec> {
    let kv = KvBlock::parse(text, path)?;
    let n_blocks = kv.get_usize("n_blocks")?;
    let mut blocks = Vec::with_capacity(n_blocks);
    for i in 0..n_blocks {
        let dilations = kv
            .get(&format!("block{i}.dilations"))?
            .split(',')
            .map(|d| {
                d.parse().map_err(|_| {
                    Error::format(path, format!("block{i}.dilations entry {d:?} is not an integer"))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        blocks.push(ConvBlockSpec {
            kernel: kv.get_usize(&format!("block{i}.kernel"))?,
            channels: kv.get_usize(&format!("block{i}.channels"))?,
            dilations,
            dropout_rate: kv.get_f64(&format!("block{i}.dropout_rate"))?,
            pool: kv.get_usize(&format!("block{i}.pool"))?,
        });
    }
    let spec = ModelSpec {
        variant: ModelVariant::parse(kv.get("variant")?)
            .map_err(|e| Error::format(path, e.to_string()))?,
        blocks,
        lstm_hidden: kv.get_usize("lstm_hidden")?,
        dense_hidden: kv.get_usize("dense_hidden")?,
        output_len: kv.get_usize("output_len")?,
        ecg_rate_hz: kv.get_usize("ecg_rate_hz")?,
        window_s: kv.get_usize("window_s")?,
    };
    spec.validate()?;
    Ok(spec)
}

/// Every tensor in checkpoint order: parameters first, then buffers.
fn collect_entries(model: &mut Model) -> Vec<(String, u8, Vec<f64>)> {
    let mut entries = Vec::new();
    model.for_each_param_prefixed(&mut |name, p| {
        entries.push((name.to_string(), KIND_PARAM, p.value.clone()));
    });
    model.for_each_buffer(&mut |name, buf| {
        entries.push((name.to_string(), KIND_BUFFER, buf.clone()));
    });
    entries
}

pub fn save(model: &mut Model, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_to(model, &mut w).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_to(model: &mut Model, w: &mut impl Write) -> std::result::Result<(), Error> {
    let anon = Path::new("<writer>");
    let io = |e| Error::io(anon, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;

    let spec_text = spec_to_text(&model.spec);
    w.write_all(&(spec_text.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(spec_text.as_bytes()).map_err(io)?;

    let entries = collect_entries(model);
    w.write_all(&(entries.len() as u32).to_le_bytes()).map_err(io)?;
    for (name, kind, values) in &entries {
        w.write_all(&(name.len() as u16).to_le_bytes()).map_err(io)?;
        w.write_all(name.as_bytes()).map_err(io)?;
        w.write_all(&[*kind]).map_err(io)?;
        w.write_all(&(values.len() as u64).to_le_bytes()).map_err(io)?;
    }
    for (_, _, values) in &entries {
        for v in values {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::format(path, "not a checkpoint file (bad magic)"));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v).map_err(io)?;
    let version = u16::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint version {version} (expected {VERSION})"),
        ));
    }

    let mut len4 = [0u8; 4];
    r.read_exact(&mut len4).map_err(io)?;
    let spec_len = u32::from_le_bytes(len4) as usize;
    let mut spec_bytes = vec![0u8; spec_len];
    r.read_exact(&mut spec_bytes).map_err(io)?;
    let spec_text = String::from_utf8(spec_bytes)
        .map_err(|_| Error::format(path, "spec block is not valid UTF-8"))?;
    let spec = text_to_spec(&spec_text, path)?;

    r.read_exact(&mut len4).map_err(io)?;
    let n_entries = u32::from_le_bytes(len4) as usize;
    let mut manifest = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let mut len2 = [0u8; 2];
        r.read_exact(&mut len2).map_err(io)?;
        let name_len = u16::from_le_bytes(len2) as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes).map_err(io)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::format(path, "manifest name is not valid UTF-8"))?;
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind).map_err(io)?;
        if kind[0] != KIND_PARAM && kind[0] != KIND_BUFFER {
            return Err(Error::format(path, format!("unknown entry kind {}", kind[0])));
        }
        let mut len8 = [0u8; 8];
        r.read_exact(&mut len8).map_err(io)?;
        manifest.push((name, kind[0], u64::from_le_bytes(len8) as usize));
    }

    let mut payloads = Vec::with_capacity(n_entries);
    for (name, _, count) in &manifest {
        let mut values = vec![0.0f64; *count];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut buf).map_err(|e| {
                Error::format(path, format!("payload for {name:?} truncated: {e}"))
            })?;
            *v = f64::from_le_bytes(buf);
        }
        payloads.push(values);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io)? != 0 {
        return Err(Error::format(path, "trailing bytes after payload"));
    }

    // Rebuild the model from the spec, then overwrite every tensor. The
    // manifest must match the fresh model's visit order exactly; any
    // mismatch means the file and this code disagree about the layout.
    let mut model = Model::new(spec, 0)?;
    let mut idx = 0usize;
    let mut mismatch: Option<String> = None;
    {
        let manifest = &manifest;
        let payloads = &payloads;
        let mut take = |name: &str, kind: u8, dst: &mut Vec<f64>, mismatch: &mut Option<String>| {
            if mismatch.is_some() {
                return;
            }
            match manifest.get(idx) {
                Some((m_name, m_kind, count))
                    if m_name == name && *m_kind == kind && *count == dst.len() =>
                {
                    dst.copy_from_slice(&payloads[idx]);
                    idx += 1;
                }
                Some((m_name, _, count)) => {
                    *mismatch = Some(format!(
                        "entry {idx}: file has {m_name:?} ({count} values), model expects {name:?} ({} values)",
                        dst.len()
                    ));
                }
                None => {
                    *mismatch = Some(format!("file ends at entry {idx}, model expects {name:?}"));
                }
            }
        };
        model.for_each_param_prefixed(&mut |name, p| {
            take(name, KIND_PARAM, &mut p.value, &mut mismatch)
        });
        model.for_each_buffer(&mut |name, buf| take(name, KIND_BUFFER, buf, &mut mismatch));
    }
    if let Some(m) = mismatch {
        return Err(Error::format(path, m));
    }
    if idx != manifest.len() {
        return Err(Error::format(
            path,
            format!("file has {} extra entries the model does not expect", manifest.len() - idx),
        ));
    }
    Ok(model)
}
