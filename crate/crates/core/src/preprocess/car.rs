use ndarray::Axis;

use super::PreprocessError;
use crate::model::Epoch;

/// Common average reference: subtracts the instantaneous mean over all
/// channels from every channel.
pub fn apply_car(epoch: &Epoch) -> Result<Epoch, PreprocessError> {
    if epoch.n_channels() < 2 {
        return Err(PreprocessError::SingleChannel);
    }
    let common = epoch.data().mean_axis(Axis(0)).expect("at least two channels");
    let mut out = epoch.data().clone();
    for mut row in out.rows_mut() {
        row -= &common;
    }
    Ok(epoch.with_data(out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassLabel;
    use ndarray::Array2;
    use std::sync::Arc;

    fn epoch(data: Array2<f64>) -> Epoch {
        let names: Arc<[String]> = (0..data.nrows()).map(|i| format!("C{i}")).collect::<Vec<_>>().into();
        Epoch::new(1, ClassLabel::Left, data, 512.0, names).unwrap()
    }

    #[test]
    fn two_constant_channels() {
        let mut data = Array2::zeros((2, 5));
        data.row_mut(0).fill(1.0);
        data.row_mut(1).fill(3.0);
        let out = apply_car(&epoch(data)).unwrap();
        assert!(out.data().row(0).iter().all(|&v| v == -1.0));
        assert!(out.data().row(1).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn common_mode_is_removed() {
        let data = Array2::from_shape_fn((4, 32), |(_, s)| (s as f64 * 0.3).sin() * 17.0);
        let out = apply_car(&epoch(data)).unwrap();
        assert!(out.data().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn channel_sum_vanishes() {
        let data = Array2::from_shape_fn((10, 64), |(c, s)| ((c * 31 + s * 7) % 19) as f64 - 4.0 * c as f64);
        let out = apply_car(&epoch(data.clone())).unwrap();
        for (col_out, col_in) in out.data().columns().into_iter().zip(data.columns()) {
            let scale: f64 = col_in.iter().map(|v| v.abs()).sum();
            assert!(col_out.sum().abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn single_channel_is_rejected() {
        assert!(matches!(
            apply_car(&epoch(Array2::zeros((1, 4)))),
            Err(PreprocessError::SingleChannel)
        ));
    }
}
