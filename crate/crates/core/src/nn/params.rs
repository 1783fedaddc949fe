use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glyphdata::{read_json, write_json};
use crate::tensor::{gft, Grid, Tape, Var};

/// Handle into a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named parameter tensors in registration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Grid>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    file: String,
    shape: Vec<usize>,
}

/// Parameters of one forward pass, placed on a tape.
pub struct Bound<'t> {
    vars: Vec<Var<'t>>,
}

impl<'t> Bound<'t> {
    /// Wraps vars laid out in the owning store's registration order.
    pub fn from_vars(vars: Vec<Var<'t>>) -> Self {
        Bound { vars }
    }

    pub fn get(&self, id: ParamId) -> &Var<'t> {
        &self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var<'t>] {
        &self.vars
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Grid) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.values.len());
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.values.iter().map(Grid::len).sum()
    }

    pub fn get(&self, id: ParamId) -> &Grid {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Grid {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Grid)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Leaves when `trainable`, constants otherwise.
    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> Bound<'t> {
        let vars = self
            .values
            .iter()
            .map(|v| {
                if trainable {
                    tape.leaf(v.clone())
                } else {
                    tape.constant(v.clone())
                }
            })
            .collect();
        Bound { vars }
    }

    /// Rounds every value to single precision, matching what a checkpoint stores.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.values {
            v.values_mut().iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
    }

    /// Copies every `src_prefix*` parameter of `src` onto the matching
    /// `dst_prefix*` name here. Returns how many were copied.
    pub fn copy_prefix(&mut self, src: &ParamStore, src_prefix: &str, dst_prefix: &str) -> Result<usize> {
        let mut n = 0;
        for (name, value) in src.iter() {
            let Some(rest) = name.strip_prefix(src_prefix) else { continue };
            let dst = format!("{dst_prefix}{rest}");
            let id = self
                .id(&dst)
                .ok_or_else(|| Error::Missing(format!("parameter {dst} (copy target of {name})")))?;
            self.get(id).check_same_shape(value)?;
            self.values[id.0] = value.clone();
            n += 1;
        }
        Ok(n)
    }

    /// Order-sensitive FNV-1a digest of names, shapes and f32 values.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for (name, v) in self.iter() {
            eat(name.as_bytes());
            v.shape().iter().for_each(|d| eat(&(*d as u32).to_le_bytes()));
            v.values().iter().for_each(|x| eat(&(*x as f32).to_le_bytes()));
        }
        h
    }

    /// One GFT1 file per tensor plus `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = Vec::with_capacity(self.len());
        for (i, (name, v)) in self.iter().enumerate() {
            let file = format!("{i:04}.gft");
            gft::write(&dir.join(&file), v)?;
            manifest.push(ManifestEntry {
                name: name.to_string(),
                file,
                shape: v.shape().to_vec(),
            });
        }
        write_json(&dir.join("manifest.json"), &manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join("manifest.json");
        if !mpath.exists() {
            return Err(Error::Missing(format!("checkpoint manifest {}", mpath.display())));
        }
        let manifest: Vec<ManifestEntry> = read_json(&mpath)?;
        let mut store = ParamStore::new();
        for e in manifest {
            let path = dir.join(&e.file);
            let v = gft::read(&path)?;
            if v.shape() != e.shape.as_slice() {
                return Err(Error::parse(&path, 0, format!("shape {:?} disagrees with manifest {:?}", v.shape(), e.shape)));
            }
            if store.id(&e.name).is_some() {
                return Err(Error::parse(&mpath, 0, format!("duplicate parameter {}", e.name)));
            }
            store.add(e.name, v);
        }
        Ok(store)
    }

    /// Replaces values with those of `other`, which must hold the same names and shapes.
    pub fn assign_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Shape {
                axis: "parameter count",
                expected: self.len(),
                got: other.len(),
            });
        }
        for (i, name) in self.names.iter().enumerate() {
            let j = other
                .id(name)
                .ok_or_else(|| Error::Missing(format!("parameter {name} in checkpoint")))?;
            other.values[j.0].check_same_shape(&self.values[i])?;
            self.values[i] = other.values[j.0].clone();
        }
        Ok(())
    }
}
