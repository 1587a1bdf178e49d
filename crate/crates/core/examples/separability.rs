//! Linear separability with synthetic oracles: a perfectly encoded attribute,
//! one coin-flip attribute and two independent coin flips.

use restyle::metrics::{linear_separability, LatentCoordinateOracle, LinearGenerator, RandomOracle, SeparabilityConfig, Space};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = LinearGenerator { z_dim: 4, gain: 1.0 };
    let cfg = SeparabilityConfig::new(Space::Z, 4000, 11);

    let r = linear_separability(&g, &LatentCoordinateOracle { space: Space::Z, coordinate: 2 }, &cfg)?;
    println!("encoded attribute: {:.6} {:?}", r.score, r.entropies);
    let r = linear_separability(&g, &RandomOracle { attributes: 1, seed: 5 }, &cfg)?;
    println!("one random attribute: {:.4}", r.score);
    let r = linear_separability(&g, &RandomOracle { attributes: 2, seed: 5 }, &cfg)?;
    println!("two random attributes: {:.4}", r.score);
    Ok(())
}
