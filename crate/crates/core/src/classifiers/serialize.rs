//! MDL1 binary model format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! "MDL1" | u16 version | u8 kind | u8 n_classes | u32 dim | payload
//!
//! kind 0, QDA:  f64 λ (NaN = none) | 9 × f64 cost, row-major J[true][pred]
//!               per class: u8 present, then f64 prior | dim × f64 mean | dim² × f64 cov
//! kind 1, KNN:  u8 metric (0 euclidean, 1 cosine) | u32 k | u32 n
//!               n × u8 label | n·dim × f64 points
//! kind 2, NN:   u32 hidden | dim × f64 input mean | dim × f64 input scale
//!               u32 n_params | n_params × f64
//! ```
//!
//! Floats are stored bit-exactly, so a model round-trips to identical
//! predictions.

use super::{
    ClassGaussian, ClassifierError, CostMatrix, DistanceMetric, KnnModel, ModelKind, QdaModel,
    TrainedModel, WideNnModel,
};
use crate::model::ClassLabel;

pub const MDL1_MAGIC: &[u8; 4] = b"MDL1";
pub const MDL1_VERSION: u16 = 1;
const K: usize = ClassLabel::COUNT;

/// Header fields, readable without decoding the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelInfo {
    /// `Qda`, `WideNn`, or the KNN variant implied by the stored metric.
    pub kind: ModelKind,
    pub n_classes: usize,
    pub dim: usize,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ClassifierError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(ClassifierError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self, what: &'static str) -> Result<u8, ClassifierError> {
        Ok(self.take(1, what)?[0])
    }
    fn u16(&mut self, what: &'static str) -> Result<u16, ClassifierError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &'static str) -> Result<usize, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }
    fn f64(&mut self, what: &'static str) -> Result<f64, ClassifierError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, ClassifierError> {
        let raw = self.take(n.checked_mul(8).ok_or(ClassifierError::Truncated(what))?, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub(crate) fn encode(model: &TrainedModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MDL1_MAGIC);
    w.u16(MDL1_VERSION);
    w.u8(match model {
        TrainedModel::Qda(_) => 0,
        TrainedModel::Knn(_) => 1,
        TrainedModel::WideNn(_) => 2,
    });
    w.u8(K as u8);
    w.u32(model.dim());
    match model {
        TrainedModel::Qda(m) => {
            w.f64(m.regularization().unwrap_or(f64::NAN));
            for row in m.cost().values() {
                w.f64s(row);
            }
            for label in ClassLabel::ALL {
                match m.class(label) {
                    None => w.u8(0),
                    Some(g) => {
                        w.u8(1);
                        w.f64(g.prior);
                        w.f64s(&g.mean);
                        w.f64s(&g.covariance);
                    }
                }
            }
        }
        TrainedModel::Knn(m) => {
            w.u8(match m.metric() {
                DistanceMetric::Euclidean => 0,
                DistanceMetric::Cosine => 1,
            });
            w.u32(m.k());
            w.u32(m.n_points());
            for l in m.labels() {
                w.u8(l.code());
            }
            for i in 0..m.n_points() {
                w.f64s(m.point(i));
            }
        }
        TrainedModel::WideNn(m) => {
            w.u32(m.hidden());
            w.f64s(m.input_mean());
            w.f64s(m.input_scale());
            w.u32(m.parameters().len());
            w.f64s(m.parameters());
        }
    }
    w.0
}

fn read_header(r: &mut Reader<'_>) -> Result<(u8, usize), ClassifierError> {
    let n = r.bytes.len().min(4);
    if r.bytes[..n] != MDL1_MAGIC[..n] {
        return Err(ClassifierError::BadMagic { found: r.bytes[..n].to_vec() });
    }
    r.take(4, "magic")?;
    let version = r.u16("version")?;
    if version != MDL1_VERSION {
        return Err(ClassifierError::BadModelFile(format!("unsupported version {version}")));
    }
    let kind = r.u8("model kind")?;
    let classes = r.u8("class count")?;
    if classes as usize != K {
        return Err(ClassifierError::BadModelFile(format!("expected {K} classes, found {classes}")));
    }
    let dim = r.u32("dimension")?;
    if dim == 0 {
        return Err(ClassifierError::BadModelFile("zero feature dimension".into()));
    }
    Ok((kind, dim))
}

/// Reads the header and, for KNN, the metric byte.
pub fn peek_model_info(bytes: &[u8]) -> Result<ModelInfo, ClassifierError> {
    let mut r = Reader { bytes, pos: 0 };
    let (kind, dim) = read_header(&mut r)?;
    let kind = match kind {
        0 => ModelKind::Qda,
        1 => match r.u8("metric")? {
            0 => ModelKind::FineKnn,
            1 => ModelKind::CosKnn,
            m => return Err(ClassifierError::BadModelFile(format!("unknown metric {m}"))),
        },
        2 => ModelKind::WideNn,
        k => return Err(ClassifierError::BadModelFile(format!("unknown model kind {k}"))),
    };
    Ok(ModelInfo { kind, n_classes: K, dim })
}

pub(crate) fn decode(bytes: &[u8]) -> Result<TrainedModel, ClassifierError> {
    let mut r = Reader { bytes, pos: 0 };
    let (kind, dim) = read_header(&mut r)?;
    let model = match kind {
        0 => {
            let reg = r.f64("regularization")?;
            let flat = r.f64s(K * K, "cost matrix")?;
            let mut cost = [[0.0; K]; K];
            for (i, row) in cost.iter_mut().enumerate() {
                row.copy_from_slice(&flat[i * K..(i + 1) * K]);
            }
            let mut classes = Vec::with_capacity(K);
            for label in ClassLabel::ALL {
                match r.u8("class flag")? {
                    0 => classes.push(None),
                    1 => {
                        let prior = r.f64("prior")?;
                        let mean = r.f64s(dim, "class mean")?;
                        let cov = r.f64s(dim * dim, "class covariance")?;
                        classes.push(Some(ClassGaussian::new(prior, mean, cov, label)?));
                    }
                    f => return Err(ClassifierError::BadModelFile(format!("bad class flag {f}"))),
                }
            }
            let reg = if reg.is_nan() { None } else { Some(reg) };
            TrainedModel::Qda(QdaModel::from_parts(dim, classes, CostMatrix::new(cost)?, reg)?)
        }
        1 => {
            let metric = match r.u8("metric")? {
                0 => DistanceMetric::Euclidean,
                1 => DistanceMetric::Cosine,
                m => return Err(ClassifierError::BadModelFile(format!("unknown metric {m}"))),
            };
            let k = r.u32("k")?;
            let n = r.u32("point count")?;
            let labels = r
                .take(n, "labels")?
                .iter()
                .map(|&c| ClassLabel::from_code(c).ok_or_else(|| ClassifierError::BadModelFile(format!("label {c}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let points = r.f64s(n * dim, "points")?;
            TrainedModel::Knn(KnnModel::from_parts(dim, k, metric, points, labels)?)
        }
        2 => {
            let hidden = r.u32("hidden width")?;
            let mean = r.f64s(dim, "input mean")?;
            let scale = r.f64s(dim, "input scale")?;
            let n = r.u32("parameter count")?;
            let params = r.f64s(n, "parameters")?;
            TrainedModel::WideNn(WideNnModel::from_parts(dim, hidden, mean, scale, params)?)
        }
        k => return Err(ClassifierError::BadModelFile(format!("unknown model kind {k}"))),
    };
    if r.pos != bytes.len() {
        return Err(ClassifierError::BadModelFile(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ModelSpec, NnConfig};
    use crate::features::FeatureVector;

    fn data() -> Vec<FeatureVector> {
        (0..30)
            .map(|i| {
                let c = (i % 3) as f64;
                let values = vec![c + 0.1 * (i as f64).sin(), 1.0 - c + 0.05 * (i as f64).cos(), 0.3 * c + 1.0];
                FeatureVector::new(values, ClassLabel::from_index(i % 3).unwrap(), 1).unwrap()
            })
            .collect()
    }

    fn all_models() -> Vec<TrainedModel> {
        let d = data();
        let mut out: Vec<TrainedModel> = ModelKind::ALL
            .iter()
            .map(|k| ModelSpec::from(*k).fit(&d).unwrap())
            .collect();
        out.push(ModelSpec::WideNn(NnConfig { max_epochs: 5, ..NnConfig::default() }).fit(&d).unwrap());
        out
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let d = data();
        for m in all_models() {
            let back = TrainedModel::from_bytes(&m.to_bytes()).unwrap();
            assert_eq!(back, m);
            for f in &d {
                assert_eq!(back.predict(&f.values).unwrap(), m.predict(&f.values).unwrap());
            }
            let info = peek_model_info(&m.to_bytes()).unwrap();
            assert_eq!(info, ModelInfo { kind: m.kind(), n_classes: 3, dim: 3 });
        }
    }

    #[test]
    fn header_layout() {
        let bytes = all_models()[0].to_bytes();
        assert_eq!(&bytes[..4], b"MDL1");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(bytes[6], 0);
        assert_eq!(bytes[7], 3);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        // λ + cost + three present classes of (prior, mean, cov).
        assert_eq!(bytes.len(), 12 + 8 + 72 + 3 * (1 + 8 + 24 + 72));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = all_models()[1].to_bytes();
        assert!(matches!(TrainedModel::from_bytes(b"MDL2xxxxxxxx"), Err(ClassifierError::BadMagic { .. })));
        for cut in [2, 7, 13, bytes.len() - 1] {
            assert!(
                matches!(TrainedModel::from_bytes(&bytes[..cut]), Err(ClassifierError::Truncated(_))),
                "cut at {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(TrainedModel::from_bytes(&extra), Err(ClassifierError::BadModelFile(_))));
        let mut wrong_kind = bytes;
        wrong_kind[6] = 9;
        assert!(matches!(TrainedModel::from_bytes(&wrong_kind), Err(ClassifierError::BadModelFile(_))));
    }
}
