//! EPB1: a flat little-endian container for one subject's epochs.
//!
//! ```text
//! "EPB1" | u16 version | u16 subject_id | u32 n_epochs | u16 n_channels
//!        | u32 n_samples | f64 sample_rate
//!        | u16 name_count | name_count × (u16 byte_len, UTF-8 bytes)
//!        | n_epochs × u8 label
//!        | n_epochs × n_channels × n_samples × f64   (epoch-major, then channel-major)
//! ```

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;

use super::IngestError;
use crate::model::{ClassLabel, Epoch, Provenance, SubjectDataset};

pub const EPB1_MAGIC: &[u8; 4] = b"EPB1";
pub const EPB1_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochFileHeader {
    pub version: u16,
    pub subject_id: u16,
    pub n_epochs: u32,
    pub n_channels: u16,
    pub n_samples: u32,
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
    pub labels: Vec<u8>,
}

impl EpochFileHeader {
    /// Number of payload bytes the header promises.
    pub fn payload_len(&self) -> usize {
        self.n_epochs as usize * self.n_channels as usize * self.n_samples as usize * 8
    }

    pub fn class_counts(&self) -> [usize; ClassLabel::COUNT] {
        let mut counts = [0; ClassLabel::COUNT];
        for &l in &self.labels {
            if let Some(c) = ClassLabel::from_code(l) {
                counts[c.index()] += 1;
            }
        }
        counts
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], IngestError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(IngestError::TruncatedPayload {
                what,
                expected: n,
                actual: available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, IngestError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, IngestError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, IngestError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn parse_header(cur: &mut Cursor<'_>) -> Result<EpochFileHeader, IngestError> {
    let available = cur.remaining().min(4);
    let magic = &cur.bytes[..available];
    if magic != &EPB1_MAGIC[..available] || available < 4 {
        if magic == &EPB1_MAGIC[..available] {
            return Err(IngestError::TruncatedPayload {
                what: "magic",
                expected: 4,
                actual: available,
            });
        }
        return Err(IngestError::BadMagic {
            found: magic.to_vec(),
        });
    }
    cur.pos = 4;
    let version = cur.u16("version")?;
    if version != EPB1_VERSION {
        return Err(IngestError::UnsupportedVersion(version));
    }
    let subject_id = cur.u16("subject id")?;
    let n_epochs = cur.u32("epoch count")?;
    let n_channels = cur.u16("channel count")?;
    let n_samples = cur.u32("sample count")?;
    let sample_rate_hz = cur.f64("sample rate")?;
    let name_count = cur.u16("name count")?;
    if name_count != n_channels {
        return Err(IngestError::ShapeMismatch(format!(
            "{name_count} channel names for {n_channels} channels"
        )));
    }
    let mut channel_names = Vec::with_capacity(name_count as usize);
    for i in 0..name_count as usize {
        let len = cur.u16("channel name length")? as usize;
        let raw = cur.take(len, "channel name")?;
        let name = std::str::from_utf8(raw).map_err(|_| IngestError::InvalidName(i))?;
        channel_names.push(name.to_owned());
    }
    let labels = cur.take(n_epochs as usize, "labels")?.to_vec();
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &l)| l > 2) {
        return Err(IngestError::LabelOutOfRange { index, value });
    }
    Ok(EpochFileHeader {
        version,
        subject_id,
        n_epochs,
        n_channels,
        n_samples,
        sample_rate_hz,
        channel_names,
        labels,
    })
}

/// Decodes a complete EPB1 image. Files carry no provenance tag, so the
/// result is marked [`Provenance::Real`].
pub fn parse_epoch_file(bytes: &[u8]) -> Result<SubjectDataset, IngestError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let header = parse_header(&mut cur)?;
    let expected = header.payload_len();
    let actual = cur.remaining();
    if actual < expected {
        return Err(IngestError::TruncatedPayload {
            what: "sample payload",
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(IngestError::ShapeMismatch(format!(
            "{} trailing bytes after the sample payload",
            actual - expected
        )));
    }

    let names: Arc<[String]> = header.channel_names.clone().into();
    let (n_ch, n_s) = (header.n_channels as usize, header.n_samples as usize);
    let mut epochs = Vec::with_capacity(header.n_epochs as usize);
    for &code in &header.labels {
        let raw = cur.take(n_ch * n_s * 8, "sample payload")?;
        let samples: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let data = Array2::from_shape_vec((n_ch, n_s), samples)
            .map_err(|e| IngestError::ShapeMismatch(e.to_string()))?;
        let label = ClassLabel::from_code(code).expect("labels validated in header");
        epochs.push(Epoch::new(
            header.subject_id,
            label,
            data,
            header.sample_rate_hz,
            Arc::clone(&names),
        )?);
    }
    Ok(SubjectDataset::new(header.subject_id, Provenance::Real, epochs)?)
}

pub fn read_epoch_file(path: impl AsRef<Path>) -> Result<SubjectDataset, IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| IngestError::IoFailure {
        path: path.display().to_string(),
        source,
    })?;
    parse_epoch_file(&bytes)
}

/// Reads and validates only the header and labels; the payload size is still
/// checked against the declared geometry.
pub fn read_epoch_header(path: impl AsRef<Path>) -> Result<EpochFileHeader, IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| IngestError::IoFailure {
        path: path.display().to_string(),
        source,
    })?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let header = parse_header(&mut cur)?;
    let actual = cur.remaining();
    if actual < header.payload_len() {
        return Err(IngestError::TruncatedPayload {
            what: "sample payload",
            expected: header.payload_len(),
            actual,
        });
    }
    Ok(header)
}

/// Encodes a dataset as an EPB1 image.
pub fn encode_epoch_file(dataset: &SubjectDataset) -> Result<Vec<u8>, IngestError> {
    let first = dataset.epochs().first().ok_or(IngestError::EmptyDataset)?;
    let n_epochs = u32::try_from(dataset.len())
        .map_err(|_| IngestError::ShapeMismatch("too many epochs".into()))?;
    let n_channels = u16::try_from(first.n_channels())
        .map_err(|_| IngestError::ShapeMismatch("too many channels".into()))?;
    let n_samples = u32::try_from(first.n_samples())
        .map_err(|_| IngestError::ShapeMismatch("too many samples".into()))?;

    let payload = dataset.len() * first.n_channels() * first.n_samples() * 8;
    let mut out = Vec::with_capacity(64 + payload);
    out.extend_from_slice(EPB1_MAGIC);
    out.extend_from_slice(&EPB1_VERSION.to_le_bytes());
    out.extend_from_slice(&dataset.subject_id().to_le_bytes());
    out.extend_from_slice(&n_epochs.to_le_bytes());
    out.extend_from_slice(&n_channels.to_le_bytes());
    out.extend_from_slice(&n_samples.to_le_bytes());
    out.extend_from_slice(&first.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&n_channels.to_le_bytes());
    for name in first.channel_names() {
        let len = u16::try_from(name.len())
            .map_err(|_| IngestError::ShapeMismatch(format!("channel name {name:?} too long")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.extend(dataset.epochs().iter().map(|e| e.label().code()));
    for epoch in dataset.epochs() {
        for row in epoch.data().rows() {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn write_epoch_file(dataset: &SubjectDataset, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    let bytes = encode_epoch_file(dataset)?;
    fs::write(path, bytes).map_err(|source| IngestError::IoFailure {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(n_epochs: usize, n_ch: usize, n_s: usize) -> SubjectDataset {
        let names: Arc<[String]> = (0..n_ch).map(|i| format!("Ch{i}")).collect::<Vec<_>>().into();
        let epochs = (0..n_epochs)
            .map(|e| {
                let data = Array2::from_shape_fn((n_ch, n_s), |(c, s)| {
                    (e * 100 + c * 10 + s) as f64 * 0.25 - 3.0
                });
                let label = ClassLabel::from_index(e % 3).unwrap();
                Epoch::new(4, label, data, 512.0, Arc::clone(&names)).unwrap()
            })
            .collect();
        SubjectDataset::new(4, Provenance::Real, epochs).unwrap()
    }

    #[test]
    fn file_size_matches_layout() {
        let ds = tiny(1, 2, 4);
        let bytes = encode_epoch_file(&ds).unwrap();
        let header = 4 + 2 + 2 + 4 + 2 + 4 + 8 + 2 + 2 * (2 + 3) + 1;
        assert_eq!(bytes.len(), header + 2 * 4 * 8);
    }

    #[test]
    fn round_trip_in_memory() {
        let ds = tiny(5, 3, 7);
        let back = parse_epoch_file(&encode_epoch_file(&ds).unwrap()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn payload_is_epoch_then_channel_major() {
        let ds = tiny(2, 2, 3);
        let bytes = encode_epoch_file(&ds).unwrap();
        let payload = &bytes[bytes.len() - 2 * 2 * 3 * 8..];
        let first: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let expected: Vec<f64> = ds
            .epochs()
            .iter()
            .flat_map(|e| e.data().iter().copied().collect::<Vec<_>>())
            .collect();
        assert_eq!(first, expected);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_epoch_file(&tiny(1, 1, 1)).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            parse_epoch_file(&bytes),
            Err(IngestError::BadMagic { .. })
        ));
        assert!(matches!(
            parse_epoch_file(b"EP"),
            Err(IngestError::TruncatedPayload { what: "magic", .. })
        ));
        assert!(matches!(parse_epoch_file(b""), Err(IngestError::TruncatedPayload { .. })));
    }

    #[test]
    fn truncated_payload_is_detected() {
        let ds = tiny(10, 2, 4);
        let bytes = encode_epoch_file(&ds).unwrap();
        // Drop the last epoch's samples: header still declares 10 epochs.
        let cut = &bytes[..bytes.len() - 2 * 4 * 8];
        match parse_epoch_file(cut) {
            Err(IngestError::TruncatedPayload { expected, actual, .. }) => {
                assert_eq!(expected, 10 * 64);
                assert_eq!(actual, 9 * 64);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_are_a_shape_mismatch() {
        let mut bytes = encode_epoch_file(&tiny(1, 1, 2)).unwrap();
        bytes.push(0);
        assert!(matches!(
            parse_epoch_file(&bytes),
            Err(IngestError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn label_out_of_range() {
        let ds = tiny(2, 1, 1);
        let mut bytes = encode_epoch_file(&ds).unwrap();
        let label_pos = bytes.len() - 2 * 8 - 2;
        bytes[label_pos + 1] = 7;
        assert!(matches!(
            parse_epoch_file(&bytes),
            Err(IngestError::LabelOutOfRange { index: 1, value: 7 })
        ));
    }

    #[test]
    fn version_is_checked() {
        let mut bytes = encode_epoch_file(&tiny(1, 1, 1)).unwrap();
        bytes[4] = 9;
        assert!(matches!(
            parse_epoch_file(&bytes),
            Err(IngestError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn empty_dataset_cannot_be_written() {
        let ds = SubjectDataset::new(1, Provenance::Real, vec![]).unwrap();
        assert!(matches!(encode_epoch_file(&ds), Err(IngestError::EmptyDataset)));
    }

    #[test]
    fn encoding_is_deterministic() {
        let ds = tiny(3, 2, 5);
        assert_eq!(encode_epoch_file(&ds).unwrap(), encode_epoch_file(&ds).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_dataset() -> impl Strategy<Value = SubjectDataset> {
            (1usize..5, 1usize..4, 1usize..9, 1u16..60, prop::bool::ANY).prop_flat_map(
                |(n_e, n_c, n_s, subject, unicode)| {
                    (
                        prop::collection::vec(-1e6f64..1e6, n_e * n_c * n_s),
                        prop::collection::vec(0u8..3, n_e),
                    )
                        .prop_map(move |(samples, labels)| {
                            let names: Arc<[String]> = (0..n_c)
                                .map(|i| if unicode { format!("Känal{i}") } else { format!("C{i}") })
                                .collect::<Vec<_>>()
                                .into();
                            let epochs = labels
                                .iter()
                                .enumerate()
                                .map(|(e, &l)| {
                                    let chunk = samples[e * n_c * n_s..(e + 1) * n_c * n_s].to_vec();
                                    let data = Array2::from_shape_vec((n_c, n_s), chunk).unwrap();
                                    Epoch::new(
                                        subject,
                                        ClassLabel::from_code(l).unwrap(),
                                        data,
                                        250.5,
                                        Arc::clone(&names),
                                    )
                                    .unwrap()
                                })
                                .collect();
                            SubjectDataset::new(subject, Provenance::Real, epochs).unwrap()
                        })
                },
            )
        }

        proptest! {
            #[test]
            fn read_of_write_is_identity(ds in arb_dataset()) {
                let bytes = encode_epoch_file(&ds).unwrap();
                let back = parse_epoch_file(&bytes).unwrap();
                for (a, b) in back.epochs().iter().zip(ds.epochs()) {
                    let bits_a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
                    let bits_b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
                    prop_assert_eq!(bits_a, bits_b);
                }
                prop_assert_eq!(back, ds);
                prop_assert_eq!(encode_epoch_file(&parse_epoch_file(&bytes).unwrap()).unwrap(), bytes);
            }
        }
    }
}
