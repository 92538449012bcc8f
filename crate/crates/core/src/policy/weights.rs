//! Portable weights file.
//!
//! ```text
//! magic "MAPFWT1\0" | u32 version=1 | u32 R | u32 conv_channels | u32 embed_dim
//! u32 tensor count | per tensor: u16 name len, name, u8 ndim, ndim x u32, f32 data
//! ```
//!
//! Linear weights are `[out, in]`, the conv kernel is `[out, in, 3, 3]`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::WeightsError;
use crate::features::fov_size;
use crate::grid::Action;

pub const WEIGHTS_MAGIC: &[u8; 8] = b"MAPFWT1\0";
pub const WEIGHTS_VERSION: u32 = 1;
/// Number of message-passing rounds.
pub const GNN_LAYERS: usize = 3;
pub const INPUT_CHANNELS: usize = 3;
pub const KERNEL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub radius: usize,
    pub conv_channels: usize,
    pub embed_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            radius: 4,
            conv_channels: 32,
            embed_dim: 128,
        }
    }
}

impl Architecture {
    /// Side of the conv output map (no padding, stride 1).
    pub fn conv_out_size(&self) -> usize {
        fov_size(self.radius) + 1 - KERNEL
    }

    /// Width of the flattened conv output plus the greedy vector.
    pub fn encoder_width(&self) -> usize {
        self.conv_channels * self.conv_out_size().pow(2) + Action::COUNT
    }

    /// Every tensor the forward pass reads, in file order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (c, e, f) = (self.conv_channels, self.embed_dim, self.encoder_width());
        let mut shapes = vec![
            ("conv.weight".to_string(), vec![c, INPUT_CHANNELS, KERNEL, KERNEL]),
            ("conv.bias".to_string(), vec![c]),
            ("node.weight".to_string(), vec![e, f]),
            ("node.bias".to_string(), vec![e]),
            ("message.weight".to_string(), vec![e, f]),
            ("message.bias".to_string(), vec![e]),
        ];
        for l in 0..GNN_LAYERS {
            shapes.push((format!("sage{l}.self.weight"), vec![e, e]));
            shapes.push((format!("sage{l}.self.bias"), vec![e]));
            shapes.push((format!("sage{l}.neigh.weight"), vec![e, e]));
            if l + 1 < GNN_LAYERS {
                shapes.push((format!("norm{l}.weight"), vec![e]));
                shapes.push((format!("norm{l}.bias"), vec![e]));
            }
        }
        shapes.extend([
            ("head.hidden.weight".to_string(), vec![e, e]),
            ("head.hidden.bias".to_string(), vec![e]),
            ("head.out.weight".to_string(), vec![Action::COUNT, e]),
            ("head.out.bias".to_string(), vec![Action::COUNT]),
        ]);
        shapes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }
}

/// Named tensors plus the architecture they belong to. Always complete and
/// shape-checked once constructed through [`WeightsFile::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsFile {
    arch: Architecture,
    tensors: BTreeMap<String, Tensor>,
}

impl WeightsFile {
    pub fn new(arch: Architecture, tensors: BTreeMap<String, Tensor>) -> Result<Self, WeightsError> {
        for (name, expected) in arch.tensor_shapes() {
            let t = tensors.get(&name).ok_or_else(|| WeightsError::Missing(name.clone()))?;
            if t.shape != expected {
                return Err(WeightsError::Shape {
                    name,
                    expected,
                    found: t.shape.clone(),
                });
            }
            debug_assert_eq!(t.data.len(), expected.iter().product::<usize>());
        }
        Ok(Self { arch, tensors })
    }

    pub fn zeros(arch: Architecture) -> Self {
        let tensors = arch
            .tensor_shapes()
            .into_iter()
            .map(|(n, s)| (n, Tensor::zeros(s)))
            .collect();
        Self { arch, tensors }
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization; layer
    /// norm gains start at 1.
    pub fn random(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = arch
            .tensor_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let n: usize = shape.iter().product();
                let data = if name.starts_with("norm") && name.ends_with("weight") {
                    vec![1.0; n]
                } else {
                    let fan_in: usize = if shape.len() > 1 { shape[1..].iter().product() } else { shape[0] };
                    let bound = 1.0 / (fan_in as f32).sqrt();
                    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
                };
                (name, Tensor { shape, data })
            })
            .collect();
        Self { arch, tensors }
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn tensor(&self, name: &str) -> &Tensor {
        &self.tensors[name]
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), WeightsError> {
        out.write_all(WEIGHTS_MAGIC)?;
        out.write_u32::<LE>(WEIGHTS_VERSION)?;
        out.write_u32::<LE>(self.arch.radius as u32)?;
        out.write_u32::<LE>(self.arch.conv_channels as u32)?;
        out.write_u32::<LE>(self.arch.embed_dim as u32)?;
        out.write_u32::<LE>(self.tensors.len() as u32)?;
        let order = self.arch.tensor_shapes();
        let extra = self
            .tensors
            .keys()
            .filter(|k| !order.iter().any(|(n, _)| n == *k))
            .cloned();
        for name in order.iter().map(|(n, _)| n.clone()).chain(extra) {
            let t = &self.tensors[&name];
            out.write_u16::<LE>(name.len() as u16)?;
            out.write_all(name.as_bytes())?;
            out.write_u8(t.shape.len() as u8)?;
            for &d in &t.shape {
                out.write_u32::<LE>(d as u32)?;
            }
            for &v in &t.data {
                out.write_f32::<LE>(v)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), WeightsError> {
        self.write(BufWriter::new(File::create(path)?))
    }
}

pub fn read_weights<R: Read>(mut input: R) -> Result<WeightsFile, WeightsError> {
    let header_eof = |_| WeightsError::Eof("header".into());
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| WeightsError::BadMagic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(WeightsError::BadMagic);
    }
    let version = input.read_u32::<LE>().map_err(header_eof)?;
    if version != WEIGHTS_VERSION {
        return Err(WeightsError::Version(version));
    }
    let mut dims = [0u32; 4];
    input.read_u32_into::<LE>(&mut dims).map_err(header_eof)?;
    let arch = Architecture {
        radius: dims[0] as usize,
        conv_channels: dims[1] as usize,
        embed_dim: dims[2] as usize,
    };
    let mut tensors = BTreeMap::new();
    for k in 0..dims[3] {
        let name_eof = |_| WeightsError::Eof(format!("tensor #{k} name"));
        let len = input.read_u16::<LE>().map_err(name_eof)? as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name).map_err(name_eof)?;
        let name = String::from_utf8(name).map_err(|_| WeightsError::Name)?;
        let eof = |_| WeightsError::Eof(format!("tensor {name}"));
        let ndim = input.read_u8().map_err(eof)? as usize;
        let mut shape = vec![0u32; ndim];
        input.read_u32_into::<LE>(&mut shape).map_err(eof)?;
        let shape: Vec<usize> = shape.into_iter().map(|d| d as usize).collect();
        let mut data = vec![0f32; shape.iter().product()];
        input.read_f32_into::<LE>(&mut data).map_err(eof)?;
        tensors.insert(name, Tensor { shape, data });
    }
    WeightsFile::new(arch, tensors)
}

pub fn load_weights(path: &Path) -> Result<WeightsFile, WeightsError> {
    read_weights(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Architecture {
        Architecture {
            radius: 2,
            conv_channels: 4,
            embed_dim: 8,
        }
    }

    #[test]
    fn default_encoder_width() {
        // 32 channels of 7x7 plus the greedy vector.
        assert_eq!(Architecture::default().encoder_width(), 32 * 49 + 5);
    }

    #[test]
    fn round_trip() {
        let w = WeightsFile::random(small(), 3);
        let mut buf = Vec::new();
        w.write(&mut buf).unwrap();
        assert_eq!(read_weights(&buf[..]).unwrap(), w);
    }

    #[test]
    fn truncated_file_names_tensor() {
        let w = WeightsFile::zeros(small());
        let mut buf = Vec::new();
        w.write(&mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        let err = read_weights(&buf[..]).unwrap_err();
        assert_eq!(err.to_string(), "unexpected EOF in tensor head.out.bias");
    }

    #[test]
    fn wrong_conv_shape() {
        let mut tensors = WeightsFile::zeros(small()).tensors().clone();
        tensors.insert("conv.weight".into(), Tensor::zeros(vec![4, 3, 5, 5]));
        let err = WeightsFile::new(small(), tensors).unwrap_err();
        assert_eq!(
            err.to_string(),
            "tensor conv.weight: expected shape [4, 3, 3, 3], found [4, 3, 5, 5]"
        );
    }

    #[test]
    fn missing_tensor_and_bad_magic() {
        let mut tensors = WeightsFile::zeros(small()).tensors().clone();
        tensors.remove("sage1.neigh.weight");
        assert_eq!(
            WeightsFile::new(small(), tensors).unwrap_err().to_string(),
            "missing tensor sage1.neigh.weight"
        );
        assert!(matches!(read_weights(&b"MAPFDS1\0"[..]), Err(WeightsError::BadMagic)));
        let mut buf = WEIGHTS_MAGIC.to_vec();
        buf.extend(2u32.to_le_bytes());
        assert!(matches!(read_weights(&buf[..]), Err(WeightsError::Version(2))));
    }
}
