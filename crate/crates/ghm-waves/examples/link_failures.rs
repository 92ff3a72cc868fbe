//! Monte Carlo studies under randomness: how often random initial states
//! contain a seed as density grows, and how unreliable links kill a wave
//! that would persist forever on a perfect network.

use ghm_waves::engine::cycle_network;
use ghm_waves::geometry::{build_domain, Rect};
use ghm_waves::stochastic::{
    defect_survival_curve, estimate_seed_probability, LinkModel, MonteCarloConfig,
};
use ghm_waves::State;

fn main() {
    let domain = build_domain(&[Rect::new(0.0, 0.0, 12.0, 12.0)]).unwrap();
    let config = MonteCarloConfig {
        trials: 40,
        seed: 17,
        n: 4,
        node_counts: vec![30, 80, 160, 320],
        r: 1.5,
        eps: 1.5,
        p_s: 1.0,
        horizon: 40,
        cell_side: 1.0,
        n_tilde: 8,
        link_model: LinkModel::PerTick,
    };

    println!("seed probability vs density (n = {}, {} trials):", config.n, config.trials);
    for row in estimate_seed_probability(&domain, &config).unwrap() {
        println!(
            "  {:4} nodes: {:.2} in [{:.2}, {:.2}]  (analytic lower bound {:.3})",
            row.node_count,
            row.estimate.fraction,
            row.estimate.ci.0,
            row.estimate.ci.1,
            row.analytic_lower_bound
        );
    }

    // A seeded ring lives forever with perfect links; thin them and count
    // deaths within the horizon.
    let n = 4u8;
    let net = cycle_network(16);
    let ring = State::new((0..16).map(|i| (i % 4) as u8).collect(), n);
    println!("\nwave death under link failure (ring of 16, horizon 80):");
    for p_s in [1.0, 0.95, 0.9, 0.8] {
        let curve =
            defect_survival_curve(&net, &ring, p_s, 80, 60, 23, LinkModel::PerTick).unwrap();
        println!(
            "  p_s = {:.2}: death fraction {:.2} in [{:.2}, {:.2}]",
            p_s, curve.death_fraction.fraction, curve.death_fraction.ci.0, curve.death_fraction.ci.1
        );
    }
}
