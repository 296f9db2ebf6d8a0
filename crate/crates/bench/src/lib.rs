//! Shared fixtures for the benchmarks.

use quasitherm::{ModelParameters, Quasi3DSystem, Result, WindingModel};

/// Reference winding at `resolution` with the default axial grid.
pub fn winding(resolution: usize) -> Result<WindingModel> {
    WindingModel::new(ModelParameters {
        resolution,
        ..Default::default()
    })
}

pub fn system(resolution: usize) -> Result<(WindingModel, Quasi3DSystem)> {
    let model = winding(resolution)?;
    let p = model.params();
    let sys = model.system(p.current_density, p.spray.heat_transfer_coefficient)?;
    Ok((model, sys))
}

/// Deterministic test vector.
pub fn ramp(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 + (i % 97) as f64 * 1e-2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use quasitherm::LinearOperator;

    #[test]
    fn fixture_builds() {
        let (_, sys) = system(12).unwrap();
        let x = ramp(sys.dim());
        let mut y = vec![0.0; sys.dim()];
        sys.operator.apply(&x, &mut y);
        assert!(y.iter().all(|v| v.is_finite()));
    }
}
