//! Brute-force comparators for thresholds and winner attribution, plus the
//! grid generator the equivalence suite runs them on.

use decs::metrics::Winner;

/// Parity threshold by scanning an explicit tier table upward. Same
/// definition as production, different mechanism.
pub fn brute_parity_threshold(v_in_usd: f64) -> f64 {
    const TIERS: [(f64, f64); 4] = [
        (10_000.0, 1.0),
        (100_000.0, 5.0),
        (500_000.0, 10.0),
        (f64::INFINITY, 50.0),
    ];
    for (upper, eps) in TIERS {
        if v_in_usd < upper {
            return eps;
        }
    }
    unreachable!("last tier is unbounded")
}

/// Winner by checking the three disjoint regions separately instead of
/// through an if/else cascade.
pub fn brute_winner(a_eff_in: f64, a_eff_out: f64, epsilon_usd: f64) -> Winner {
    let diff = a_eff_out - a_eff_in;
    let baseline_wins = diff > epsilon_usd;
    let competitor_wins = diff < -epsilon_usd;
    let draw = -epsilon_usd <= diff && diff <= epsilon_usd;
    assert!(
        u8::from(baseline_wins) + u8::from(competitor_wins) + u8::from(draw) == 1,
        "regions must partition the line: diff={diff}, eps={epsilon_usd}"
    );
    if baseline_wins {
        Winner::Oneinch
    } else if competitor_wins {
        Winner::Competitor
    } else {
        Winner::Draw
    }
}

/// Deterministic grid of (diff, v_in) points: a dense lattice plus every
/// tier boundary and the exact band edges around each boundary's threshold.
pub fn comparison_grid() -> Vec<(f64, f64)> {
    let mut points = Vec::new();
    let volumes: Vec<f64> = {
        let mut v: Vec<f64> = (0..100).map(|i| 25.0 + 7_000.0 * i as f64).collect();
        for boundary in [10_000.0, 100_000.0, 500_000.0] {
            v.extend([boundary - 0.01, boundary, boundary + 0.01]);
        }
        v
    };
    let diffs: Vec<f64> = {
        let mut d: Vec<f64> = (-60..=60).map(|i| i as f64 * 1.37).collect();
        for eps in [1.0, 5.0, 10.0, 50.0] {
            d.extend([eps, -eps, eps + 1e-9, -eps - 1e-9, eps - 1e-9, -eps + 1e-9]);
        }
        d
    };
    for v in &volumes {
        for d in &diffs {
            points.push((*d, *v));
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_large_and_covers_boundaries() {
        let grid = comparison_grid();
        assert!(grid.len() >= 10_000, "grid has {} points", grid.len());
        assert!(grid.iter().any(|(_, v)| *v == 10_000.0));
        assert!(grid.iter().any(|(d, _)| *d == 50.0));
    }

    #[test]
    fn brute_threshold_tiers() {
        assert_eq!(brute_parity_threshold(0.0), 1.0);
        assert_eq!(brute_parity_threshold(10_000.0), 5.0);
        assert_eq!(brute_parity_threshold(499_999.0), 10.0);
        assert_eq!(brute_parity_threshold(1e9), 50.0);
    }

    #[test]
    fn brute_winner_band() {
        assert_eq!(brute_winner(0.0, 2.0, 1.0), Winner::Oneinch);
        assert_eq!(brute_winner(0.0, -2.0, 1.0), Winner::Competitor);
        assert_eq!(brute_winner(0.0, 1.0, 1.0), Winner::Draw);
        assert_eq!(brute_winner(0.0, -1.0, 1.0), Winner::Draw);
    }
}
