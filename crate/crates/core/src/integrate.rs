//! Classical fixed-step Runge-Kutta.

/// One RK4 step of `ẏ = f(t, y)` from `(t, y)` with step `h`.
#[inline]
pub fn rk4_step<const N: usize, F>(t: f64, y: &[f64; N], h: f64, mut f: F) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let axpy = |a: f64, k: &[f64; N]| -> [f64; N] { std::array::from_fn(|i| y[i] + a * k[i]) };

    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(0.5 * h, &k2));
    let k4 = f(t + h, &axpy(h, &k3));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_single_step() {
        let y = rk4_step(0.0, &[1.0], 0.1, |_, y| [-y[0]]);
        // 1 - h + h²/2 - h³/6 + h⁴/24 at h = 0.1
        assert!((y[0] - 0.904_837_5).abs() < 1e-12, "{}", y[0]);
    }

    #[test]
    fn fourth_order_on_harmonic_oscillator() {
        let solve = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut y = [1.0, 0.0];
            for k in 0..n {
                y = rk4_step(k as f64 * h, &y, h, |_, y| [y[1], -y[0]]);
            }
            (y[0] - 1f64.cos()).abs()
        };
        let ratio = solve(0.02) / solve(0.01);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }
}
