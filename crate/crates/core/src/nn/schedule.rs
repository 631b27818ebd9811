/// Exponential per-epoch decay from `lr_start` at epoch 0 to `lr_end` at the
/// last epoch: `lr = lr_start · γ^epoch`, `γ = (lr_end / lr_start)^(1 / (num_epochs − 1))`.
pub fn lr_schedule(epoch: usize, num_epochs: usize, lr_start: f64, lr_end: f64) -> f64 {
    if num_epochs <= 1 {
        return lr_start;
    }
    let epoch = epoch.min(num_epochs - 1);
    let gamma = (lr_end / lr_start).powf(1.0 / (num_epochs - 1) as f64);
    lr_start * gamma.powi(epoch as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_epoch_schedule() {
        assert_eq!(lr_schedule(0, 40, 0.01, 1e-4), 0.01);
        assert!((lr_schedule(39, 40, 0.01, 1e-4) - 1e-4).abs() < 1e-9);
        // 0.01 · (1e-2)^(20/39) = 10^(-2 - 40/39)
        let expected = 10f64.powf(-2.0 - 40.0 / 39.0);
        assert!((lr_schedule(20, 40, 0.01, 1e-4) - expected).abs() < 1e-12);
        assert!((expected - 9.4e-4).abs() < 1e-5);
        let gamma = lr_schedule(1, 40, 0.01, 1e-4) / 0.01;
        assert!((gamma - 0.8886).abs() < 1e-4);
    }

    #[test]
    fn monotone_decay() {
        let lrs: Vec<f64> = (0..40).map(|e| lr_schedule(e, 40, 0.01, 1e-4)).collect();
        assert!(lrs.windows(2).all(|w| w[1] < w[0]));
    }
}
