use std::collections::HashSet;
use std::sync::Arc;

use ndarray::{Array2, Axis};

use super::IngestError;
use crate::model::SubjectDataset;

/// Sensorimotor electrodes over the central scalp, 10-10 names.
pub const DEFAULT_MOTOR_CHANNELS: [&str; 10] =
    ["FC3", "FC4", "C1", "C2", "C3", "C4", "Cz", "CP3", "CP4", "CPz"];

const SELECTION_SIZE: usize = 10;

/// An ordered set of exactly ten distinct montage labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSelection {
    names: Vec<String>,
}

impl ChannelSelection {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, IngestError> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().trim().to_owned()).collect();
        if names.len() != SELECTION_SIZE {
            return Err(IngestError::InvalidSelection(format!(
                "expected {SELECTION_SIZE} channels, got {}",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(IngestError::InvalidSelection("empty channel name".into()));
            }
            if !seen.insert(n.to_ascii_lowercase()) {
                return Err(IngestError::InvalidSelection(format!("duplicate channel {n}")));
            }
        }
        Ok(Self { names })
    }

    pub fn motor_default() -> Self {
        Self::new(&DEFAULT_MOTOR_CHANNELS).expect("default set is valid")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Indices of the selected names in `table`, in selection order. Matching
    /// ignores ASCII case since montage files disagree on `Cz` vs `CZ`.
    pub fn resolve(&self, table: &[String]) -> Result<Vec<usize>, IngestError> {
        self.names
            .iter()
            .map(|n| {
                table
                    .iter()
                    .position(|t| t.eq_ignore_ascii_case(n))
                    .ok_or_else(|| IngestError::UnknownChannel(n.clone()))
            })
            .collect()
    }
}

impl Default for ChannelSelection {
    fn default() -> Self {
        Self::motor_default()
    }
}

/// Scalp side of a 10-10 electrode: odd suffix left, even suffix right, `z`
/// on the midline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    Left,
    Right,
    Midline,
}

impl Hemisphere {
    pub fn of(name: &str) -> Hemisphere {
        let trimmed = name.trim();
        if trimmed.ends_with(['z', 'Z']) {
            return Hemisphere::Midline;
        }
        let digits: String = trimmed
            .chars()
            .rev()
            .take_while(char::is_ascii_digit)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        match digits.parse::<u32>() {
            Ok(n) if n % 2 == 1 => Hemisphere::Left,
            Ok(n) if n > 0 => Hemisphere::Right,
            _ => Hemisphere::Midline,
        }
    }
}

/// Keeps the selected rows of every epoch, in selection order.
pub fn select_channels(
    dataset: &SubjectDataset,
    selection: &ChannelSelection,
) -> Result<SubjectDataset, IngestError> {
    let Some(table) = dataset.channel_names() else {
        return Ok(dataset.clone());
    };
    let indices = selection.resolve(table)?;
    let names: Arc<[String]> = indices.iter().map(|&i| table[i].clone()).collect::<Vec<_>>().into();
    let epochs = dataset
        .epochs()
        .iter()
        .map(|e| {
            let data: Array2<f64> = e.data().select(Axis(0), &indices);
            e.with_data_and_channels(data, Arc::clone(&names))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(dataset.with_epochs(epochs))
}
