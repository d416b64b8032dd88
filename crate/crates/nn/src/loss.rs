use crate::error::{Error, Result};
use crate::float::Float;
use crate::tensor::Tensor;

/// Mean of the pixelwise squared error over every element, accumulated in
/// double precision.
pub fn mse_loss<T: Float>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    check(pred, target)?;
    let n = pred.data().len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p.as_f64() - t.as_f64()).powi(2))
        .sum::<f64>()
        / n)
}

/// Loss and its gradient with respect to `pred`.
pub fn mse_loss_grad<T: Float>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    let loss = mse_loss(pred, target)?;
    let scale = T::lit(2.0 / pred.data().len() as f64);
    let grad = Tensor::from_vec(
        pred.shape(),
        pred.data().iter().zip(target.data()).map(|(&p, &t)| (p - t) * scale).collect(),
    )?;
    Ok((loss, grad))
}

fn check<T: Float>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if pred.shape() != target.shape() || pred.data().is_empty() {
        return Err(Error::shape(format!("{:?}", target.shape()), format!("{:?}", pred.shape())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_values() {
        let t = Tensor::from_vec([1, 1, 2, 2], vec![0.1f32, -0.4, 3.0, 2.5]).unwrap();
        assert_eq!(mse_loss(&t, &t).unwrap(), 0.0);
        let shifted = t.map(|v| v + 1.0);
        assert!((mse_loss(&shifted, &t).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch() {
        let a = Tensor::<f32>::zeros([1, 1, 2, 2]);
        let b = Tensor::<f32>::zeros([1, 1, 2, 3]);
        assert!(mse_loss(&a, &b).is_err());
    }
}
