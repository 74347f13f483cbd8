//! Canonical little-endian encoding of [`RoundMessage`]s.
//!
//! A message is a header followed by its payload. Scalars travel as `f32`;
//! labels inside a feature set travel as `u16`.
//!
//! ```text
//! WeightSnapshot     header: u8 tag=1, u16 n_layers, n_layers × (u32 out, u32 in),
//!                            u8 head (0 none, 1 cosine, 2 softmax),
//!                            [u32 n_classes, u32 d]            if head != 0
//!                    payload: per layer weights (row-major) then bias,
//!                             then head weights (then softmax bias)
//! ClassMeanFeatures  header: u8 tag=2, u16 d, u16 n, n × (u16 class, u32 count)
//!                    payload: n × d f32, ascending class
//! LabeledFeatureSet  header: u8 tag=3, u16 d, u32 n
//!                    payload: n × (d f32, u16 label)
//! ```

use ndarray::{Array1, Array2};

use crate::federation::{ClassMeans, LabeledFeatures, RoundMessage, WeightSnapshot};
use crate::nn::{BackboneParams, Dense, Head, HeadParams, LinearHead, Parameters};
use crate::{Error, Result};

const TAG_WEIGHTS: u8 = 1;
const TAG_CLASS_MEANS: u8 = 2;
const TAG_FEATURES: u8 = 3;

/// Encoded size split into header and payload bytes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MessageSize {
    pub header: usize,
    pub payload: usize,
}

impl MessageSize {
    pub fn total(&self) -> usize {
        self.header + self.payload
    }
}

fn narrow<T: TryFrom<usize>>(value: usize, what: &str) -> Result<T> {
    T::try_from(value).map_err(|_| Error::Encoding(format!("{what} = {value} does not fit its header field")))
}

struct Writer {
    header: Vec<u8>,
    payload: Vec<u8>,
}

impl Writer {
    fn scalar(&mut self, v: f64) -> Result<()> {
        let x = v as f32;
        if !x.is_finite() {
            return Err(Error::Encoding(format!("{v} is not representable as a finite f32")));
        }
        self.payload.extend_from_slice(&x.to_le_bytes());
        Ok(())
    }

    fn scalars<'a>(&mut self, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
        values.into_iter().try_for_each(|&v| self.scalar(v))
    }
}

/// Encodes `msg`, returning the bytes and their header/payload split.
pub fn encode(msg: &RoundMessage) -> Result<(Vec<u8>, MessageSize)> {
    let mut w = Writer {
        header: Vec::new(),
        payload: Vec::new(),
    };
    match msg {
        RoundMessage::WeightSnapshot(snap) => {
            w.header.push(TAG_WEIGHTS);
            let layers = snap.backbone.layers();
            w.header.extend_from_slice(&narrow::<u16>(layers.len(), "layer count")?.to_le_bytes());
            for l in layers {
                w.header.extend_from_slice(&narrow::<u32>(l.out_dim(), "layer width")?.to_le_bytes());
                w.header.extend_from_slice(&narrow::<u32>(l.in_dim(), "layer width")?.to_le_bytes());
                w.scalars(l.weights.iter())?;
                w.scalars(l.bias.iter())?;
            }
            match &snap.head {
                None => w.header.push(0),
                Some(head) => {
                    let (kind, rows, cols) = match head {
                        Head::Cosine(h) => (1u8, h.n_classes(), h.dim()),
                        Head::Softmax(h) => (2u8, h.weights.nrows(), h.weights.ncols()),
                    };
                    w.header.push(kind);
                    w.header.extend_from_slice(&narrow::<u32>(rows, "head classes")?.to_le_bytes());
                    w.header.extend_from_slice(&narrow::<u32>(cols, "head dim")?.to_le_bytes());
                    w.scalars(head.to_flat().iter())?;
                }
            }
        }
        RoundMessage::ClassMeanFeatures(means) => {
            w.header.push(TAG_CLASS_MEANS);
            w.header.extend_from_slice(&narrow::<u16>(means.dim(), "feature dim")?.to_le_bytes());
            w.header.extend_from_slice(&narrow::<u16>(means.len(), "class count")?.to_le_bytes());
            for (class, entry) in means.iter() {
                w.header.extend_from_slice(&narrow::<u16>(class, "class id")?.to_le_bytes());
                w.header.extend_from_slice(&narrow::<u32>(entry.count, "sample count")?.to_le_bytes());
                w.scalars(entry.mean.iter())?;
            }
        }
        RoundMessage::LabeledFeatureSet(set) => {
            w.header.push(TAG_FEATURES);
            w.header.extend_from_slice(&narrow::<u16>(set.dim(), "feature dim")?.to_le_bytes());
            w.header.extend_from_slice(&narrow::<u32>(set.len(), "row count")?.to_le_bytes());
            for (row, &label) in set.vectors.rows().into_iter().zip(&set.labels) {
                w.scalars(row.iter())?;
                w.payload.extend_from_slice(&narrow::<u16>(label, "label")?.to_le_bytes());
            }
        }
    }
    let size = MessageSize {
        header: w.header.len(),
        payload: w.payload.len(),
    };
    let mut bytes = w.header;
    bytes.extend_from_slice(&w.payload);
    Ok((bytes, size))
}

/// Header and payload byte counts of the canonical encoding of `msg`.
pub fn measure_message(msg: &RoundMessage) -> Result<MessageSize> {
    encode(msg).map(|(_, size)| size)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Encoding(format!("truncated message at byte {}", self.pos)))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice length is N"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u16(&mut self) -> Result<usize> {
        Ok(u16::from_le_bytes(self.take()?) as usize)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| Ok(f32::from_le_bytes(self.take()?) as f64)).collect()
    }
}

/// Inverse of [`encode`]. Trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<RoundMessage> {
    let mut r = Reader { bytes, pos: 0 };
    let msg = match r.u8()? {
        TAG_WEIGHTS => {
            let n_layers = r.u16()?;
            let dims = (0..n_layers).map(|_| Ok((r.u32()?, r.u32()?))).collect::<Result<Vec<_>>>()?;
            let head_kind = r.u8()?;
            let head_dims = if head_kind == 0 { None } else { Some((r.u32()?, r.u32()?)) };
            let mut layers = Vec::with_capacity(n_layers);
            for (out, inp) in dims {
                let weights = Array2::from_shape_vec((out, inp), r.f32s(out * inp)?).expect("length matches");
                let bias = Array1::from(r.f32s(out)?);
                layers.push(Dense { weights, bias });
            }
            let backbone = BackboneParams::from_layers(layers).map_err(|e| Error::Encoding(e.to_string()))?;
            let head = match (head_kind, head_dims) {
                (0, _) => None,
                (1, Some((n, d))) => Some(Head::Cosine(HeadParams::new(
                    Array2::from_shape_vec((n, d), r.f32s(n * d)?).expect("length matches"),
                )?)),
                (2, Some((n, d))) => Some(Head::Softmax(LinearHead {
                    weights: Array2::from_shape_vec((n, d), r.f32s(n * d)?).expect("length matches"),
                    bias: Array1::from(r.f32s(n)?),
                })),
                (k, _) => return Err(Error::Encoding(format!("unknown head kind {k}"))),
            };
            RoundMessage::WeightSnapshot(WeightSnapshot { backbone, head })
        }
        TAG_CLASS_MEANS => {
            let dim = r.u16()?;
            let n = r.u16()?;
            let entries = (0..n).map(|_| Ok((r.u16()?, r.u32()?))).collect::<Result<Vec<_>>>()?;
            let mut means = ClassMeans::new(dim);
            for (class, count) in entries {
                means
                    .insert(class, Array1::from(r.f32s(dim)?), count)
                    .map_err(|e| Error::Encoding(e.to_string()))?;
            }
            RoundMessage::ClassMeanFeatures(means)
        }
        TAG_FEATURES => {
            let dim = r.u16()?;
            let n = r.u32()?;
            let mut vectors = Array2::zeros((n, dim));
            let mut labels = Vec::with_capacity(n);
            for mut row in vectors.rows_mut() {
                row.assign(&Array1::from(r.f32s(dim)?));
                labels.push(r.u16()?);
            }
            RoundMessage::LabeledFeatureSet(LabeledFeatures::new(vectors, labels)?)
        }
        tag => return Err(Error::Encoding(format!("unknown message tag {tag}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Encoding(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(msg)
}
