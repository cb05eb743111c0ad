use serde::{Deserialize, Serialize};

use super::config::AttackConfig;

/// Regularizer weight with its success/failure streak counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaState {
    pub alpha: f64,
    /// Positive: consecutive successes. Negative: consecutive failures.
    pub streak: i64,
}

impl AlphaState {
    pub fn new(alpha_init: f64) -> Self {
        Self { alpha: alpha_init, streak: 0 }
    }
}

pub fn update_alpha(state: AlphaState, success: bool, cfg: &AttackConfig) -> AlphaState {
    let AlphaState { mut alpha, streak } = state;
    let mut streak = match (success, streak) {
        (true, s) if s > 0 => s + 1,
        (true, _) => 1,
        (false, s) if s < 0 => s - 1,
        (false, _) => -1,
    };
    if streak >= i64::from(cfg.inc_streak) {
        alpha *= cfg.alpha_factor;
        streak = 0;
    } else if streak <= -i64::from(cfg.dec_streak) {
        alpha = (alpha / cfg.alpha_factor).max(cfg.alpha_init);
        streak = 0;
    }
    AlphaState { alpha, streak }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(n: usize, success: bool) -> AlphaState {
        let cfg = AttackConfig::default();
        (0..n).fold(AlphaState::new(0.3), |s, _| update_alpha(s, success, &cfg))
    }

    #[test]
    fn fifteen_successes_raise_alpha() {
        let s = run(15, true);
        assert!((s.alpha - 0.33).abs() < 1e-12);
        assert_eq!(s.streak, 0);
    }

    #[test]
    fn failures_never_go_below_initial() {
        assert_eq!(run(100, false), AlphaState { alpha: 0.3, streak: 0 });
        assert_eq!(run(1000, false).alpha, 0.3);
    }

    #[test]
    fn broken_streak_flips_direction() {
        let cfg = AttackConfig::default();
        let s = update_alpha(run(14, true), false, &cfg);
        assert_eq!(s, AlphaState { alpha: 0.3, streak: -1 });
    }
}
