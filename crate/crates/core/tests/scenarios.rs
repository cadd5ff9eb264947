//! Topology-sweep scenarios: the qualitative shapes the closed forms
//! predict for the cyclic and spatially-decaying families.

use platoon_risk::risk::risk_vector;
use platoon_risk::stability;
use platoon_risk::variance::sigma_vector;
use platoon_risk::{EventSpec, RiskValue, Spectrum, WeightedGraph};

/// Widening the cyclic neighborhood first damps the deviations, then
/// drives the top modes toward the stability boundary where the variance
/// blows back up: sigma falls monotonically through p = 40 and explodes
/// approaching the all-to-all limit p = 50 (boundary margin below 5e-3).
#[test]
fn p_cycle_neighborhood_sweep() {
    let (n, k, beta, tau, g) = (101usize, 0.0211, 1.0, 0.5, 1.0);
    let sigma_at = |p: usize| -> f64 {
        let graph = WeightedGraph::p_cycle(n, k, p).unwrap();
        let spectrum = Spectrum::of_graph(&graph).unwrap();
        let md = sigma_vector(&spectrum, g, tau, beta).unwrap();
        // Cyclic symmetry: all pairs identical.
        for &s in &md.sigma {
            assert!((s - md.sigma[0]).abs() < 1e-9 * md.sigma[0]);
        }
        md.sigma[0]
    };

    let falling = [2usize, 6, 12, 20, 30, 40];
    let mut prev = f64::INFINITY;
    for &p in &falling {
        let s = sigma_at(p);
        assert!(s < prev, "sigma did not fall at p={p}: {s} vs {prev}");
        prev = s;
    }
    // Near the all-to-all limit the modes crowd the region boundary.
    let near_limit = sigma_at(48);
    assert!(near_limit > prev, "no blow-up near the boundary");
    let graph = WeightedGraph::p_cycle(n, k, 50).unwrap();
    let spectrum = Spectrum::of_graph(&graph).unwrap();
    let verdict = stability::assess(&spectrum, beta, tau);
    let min_margin = verdict
        .per_mode
        .iter()
        .map(|m| m.margin)
        .fold(f64::INFINITY, f64::min);
    assert!(
        min_margin < 5e-3,
        "expected near-marginal modes at p=50, margin {min_margin}"
    );
}

/// Spatial localization sweep: heavy connectivity under delay is unstable;
/// moderate localization is very safe (middle pairs safest); further
/// localization raises risk until many pairs go infinite.
#[test]
fn spatial_decay_phase_transition() {
    let (n, k0, g, beta, d, tau) = (50usize, 1.5, 0.8, 1.0, 1.0, 0.18);
    let spec = EventSpec::collision(d, 1.5, 0.05).unwrap();

    let risks_at = |gamma: f64| -> Option<Vec<RiskValue>> {
        let graph = WeightedGraph::spatial(n, k0, gamma).unwrap();
        let spectrum = Spectrum::of_graph(&graph).ok()?;
        let md = sigma_vector(&spectrum, g, tau, beta).ok()?;
        Some(risk_vector(&md, &spec))
    };

    // Dense communication plus delay: no steady state at all.
    assert!(risks_at(0.2).is_none(), "expected instability at gamma=0.2");

    // Moderate localization: low risk, middle of the platoon safest.
    let low = risks_at(0.4).expect("stable at gamma=0.4");
    let low_max = low.iter().map(|r| r.as_f64()).fold(0.0f64, f64::max);
    assert!(low_max < 0.1, "expected low risk, max {low_max}");
    assert!(low[n / 2 - 1] <= low[0], "middle should be safest");

    // Larger decay: risk rises across the profile.
    let mid = risks_at(0.6).expect("stable at gamma=0.6");
    let high = risks_at(0.85).expect("stable at gamma=0.85");
    let mid_max = mid.iter().map(|r| r.as_f64()).fold(0.0f64, f64::max);
    let high_max = high.iter().map(|r| r.as_f64()).fold(0.0f64, f64::max);
    assert!(
        low_max < mid_max && mid_max < high_max,
        "{low_max} {mid_max} {high_max}"
    );
    assert!(high_max.is_finite());

    // Strong localization: infinite entries dominate, middle included.
    for gamma in [1.0, 1.2] {
        let far = risks_at(gamma).expect("still formally stable");
        let inf_count = far
            .iter()
            .filter(|r| matches!(r, RiskValue::Infinite))
            .count();
        assert!(
            inf_count > 20,
            "gamma={gamma}: only {inf_count} infinite pairs"
        );
        assert_eq!(far[n / 2 - 1], RiskValue::Infinite);
    }
}
