//! Categorical distributions over fixed supports: two-hot projection,
//! convex mixing, the +1 shift used by distance learning and the swap from a
//! distance histogram to an expected discount.

use std::sync::Arc;

use tapkit::distributional::{
    shift_discount_target, support_swap_to_discount, two_hot, Histogram, Horizon, Support,
};

fn main() -> tapkit::Result<()> {
    let values = Arc::new(Support::value(0.9, 1.0));
    let h = two_hot(values.clone(), 3.3);
    let nonzero: Vec<(f64, f64)> =
        values.atoms().iter().zip(h.masses()).filter(|(_, &m)| m > 0.0).map(|(&z, &m)| (z, m)).collect();
    println!("two-hot of 3.3 on a 16-atom value support: {nonzero:.4?}, mean {:.4}", h.expectation());

    let dist = Arc::new(Support::distance(16));
    let near = Histogram::one_hot(dist.clone(), 1);
    let never = Histogram::one_hot(dist.clone(), 15);
    let mixed = near.mix_toward(&never, 0.25)?;
    println!("mix 25% of 'never' into D = 2: mean {:.2}", mixed.expectation());
    println!("shifted by one step:           mean {:.2}", shift_discount_target(&mixed).expectation());

    // E[γ^D] differs from γ^E[D]: D in {1, 3} with equal odds at γ = 0.9.
    let mut m = vec![0.0; 16];
    m[0] = 0.5;
    m[2] = 0.5;
    let two_point = Histogram::new(dist, m)?;
    let swapped = support_swap_to_discount(&two_point, 0.9, Horizon::Infinite);
    println!("E[0.9^D] = {swapped:.4}, 0.9^E[D] = {:.4}", 0.9f64.powf(two_point.expectation()));
    println!("'never' contributes {} discount", support_swap_to_discount(&never, 0.9, Horizon::Infinite));
    Ok(())
}
