use super::gains::GainConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchState {
    /// Blade pitch (deg).
    pub beta: f64,
}

/// One Euler step of the pitch law, clamped to `[beta_min, beta_max]`.
pub fn pitch_step(
    gc: &GainConfig,
    pitch: PitchState,
    beta_limits: (f64, f64),
    p: f64,
    p_rated: f64,
    dt: f64,
) -> PitchState {
    let (lo, hi) = beta_limits;
    let b = pitch.beta;
    let rate = if (b <= lo && p < p_rated) || (b >= hi && p > p_rated) {
        0.0
    } else {
        -gc.eps3 * (p_rated - p)
    };
    PitchState {
        beta: (b + dt * rate).clamp(lo, hi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LIM: (f64, f64) = (0.0, 30.0);

    #[test]
    fn rests_at_minimum_below_rating() {
        let gc = GainConfig::default();
        let s = pitch_step(&gc, PitchState { beta: 0.0 }, LIM, 0.5, 1.0, 0.01);
        assert_eq!(s.beta, 0.0);
    }

    #[test]
    fn rises_above_rating() {
        let gc = GainConfig::default();
        let s = pitch_step(&gc, PitchState { beta: 5.0 }, LIM, 1.1, 1.0, 0.01);
        assert!((s.beta - 5.0027).abs() < 1e-12, "{}", s.beta);
    }

    #[test]
    fn holds_at_maximum_above_rating() {
        let gc = GainConfig::default();
        let s = pitch_step(&gc, PitchState { beta: 30.0 }, LIM, 1.2, 1.0, 0.01);
        assert_eq!(s.beta, 30.0);
    }

    proptest! {
        #[test]
        fn stays_in_range(beta in 0.0f64..30.0, p in -2.0f64..3.0, dt in 1e-4f64..5.0) {
            let gc = GainConfig::default();
            let s = pitch_step(&gc, PitchState { beta }, LIM, p, 1.0, dt);
            prop_assert!((LIM.0..=LIM.1).contains(&s.beta));
        }
    }
}
