//! Caching placement: a fractional knapsack over file popularity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::CacheConfig;

/// Zipf popularity `c̃_v = v^{-s} / Σ_i i^{-s}` for `v = 1..=n`.
pub fn zipf_popularity(n: usize, skew: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n).map(|v| (v as f64).powf(-skew)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheSolution {
    pub e: Vec<f64>,
    /// Uncached popularity mass `Σ (1 - e_v) c̃_v`.
    pub objective: f64,
    /// Knapsack multiplier on the capacity constraint (popularity per bit);
    /// absent for heuristic placements.
    pub dual_price: Option<f64>,
}

pub fn uncached_mass(e: &[f64], pop: &[f64]) -> f64 {
    e.iter().zip(pop).map(|(e, c)| (1.0 - e) * c).sum()
}

/// Minimizes the uncached mass subject to `Σ q_v e_v ≤ F`, `0 ≤ e ≤ 1`.
///
/// Files are filled in order of popularity per bit; ties go to the smaller
/// index. At most one entry ends up fractional.
pub fn solve_caching(cache: &CacheConfig) -> CacheSolution {
    let pop = zipf_popularity(cache.n_files, cache.skew);
    let weights: Vec<f64> = pop
        .iter()
        .zip(0..cache.n_files)
        .map(|(c, v)| cache.price(v) * c)
        .collect();
    solve_weighted(
        &weights,
        &(0..cache.n_files).map(|v| cache.length(v)).collect::<Vec<_>>(),
        cache.capacity,
        &pop,
    )
}

fn solve_weighted(weights: &[f64], lengths: &[f64], capacity: f64, pop: &[f64]) -> CacheSolution {
    let n = weights.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps smaller indices first among equal ratios.
    order.sort_by(|&a, &b| {
        let ra = weights[a] / lengths[a];
        let rb = weights[b] / lengths[b];
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut e = vec![0.0; n];
    let mut left = capacity.max(0.0);
    let mut dual_price = 0.0_f64;
    for &v in &order {
        if left <= 0.0 {
            break;
        }
        if lengths[v] <= left {
            e[v] = 1.0;
            left -= lengths[v];
        } else {
            e[v] = left / lengths[v];
            left = 0.0;
            dual_price = weights[v] / lengths[v];
        }
    }
    if left <= 0.0 && dual_price == 0.0 {
        // Capacity exhausted exactly: price is the best ratio left out.
        dual_price = order
            .iter()
            .find(|&&v| e[v] < 1.0)
            .map(|&v| weights[v] / lengths[v])
            .unwrap_or(0.0);
    }
    CacheSolution {
        objective: uncached_mass(&e, pop),
        e,
        dual_price: Some(dual_price),
    }
}

/// Baseline placement: whole files drawn without replacement with
/// probability proportional to popularity, skipping those that no longer
/// fit, until nothing else fits.
pub fn random_caching<R: Rng + ?Sized>(cache: &CacheConfig, rng: &mut R) -> CacheSolution {
    let pop = zipf_popularity(cache.n_files, cache.skew);
    let mut e = vec![0.0; cache.n_files];
    let mut left = cache.capacity;
    let mut pool: Vec<usize> = (0..cache.n_files).collect();
    while !pool.is_empty() {
        let fits: Vec<usize> = pool.iter().copied().filter(|&v| cache.length(v) <= left).collect();
        if fits.is_empty() {
            break;
        }
        let mass: f64 = fits.iter().map(|&v| pop[v]).sum();
        let mut draw = rng.random::<f64>() * mass;
        let mut pick = *fits.last().unwrap();
        for &v in &fits {
            if draw < pop[v] {
                pick = v;
                break;
            }
            draw -= pop[v];
        }
        e[pick] = 1.0;
        left -= cache.length(pick);
        pool.retain(|&v| v != pick);
    }
    CacheSolution {
        objective: uncached_mass(&e, &pop),
        e,
        dual_price: None,
    }
}

pub fn no_caching(cache: &CacheConfig) -> CacheSolution {
    CacheSolution {
        e: vec![0.0; cache.n_files],
        objective: 1.0,
        dual_price: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize, capacity: f64, lengths: Vec<f64>, skew: f64) -> CacheConfig {
        CacheConfig {
            n_files: n,
            capacity,
            lengths,
            skew,
            ..CacheConfig::default()
        }
    }

    /// LP optimum by enumerating basic solutions: every vertex of the
    /// knapsack polytope has at most one fractional coordinate.
    fn vertex_oracle(pop: &[f64], q: &[f64], cap: f64) -> f64 {
        let n = pop.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let used: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| q[i]).sum();
            if used > cap + 1e-12 {
                continue;
            }
            let base: f64 = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| pop[i]).sum();
            best = best.min(base);
            for j in (0..n).filter(|i| mask >> i & 1 == 0) {
                let frac = ((cap - used) / q[j]).min(1.0);
                best = best.min(base - frac * pop[j]);
            }
        }
        best
    }

    #[test]
    fn zipf_examples() {
        assert_eq!(zipf_popularity(2, 0.0), vec![0.5, 0.5]);
        assert_eq!(zipf_popularity(1, 3.3), vec![1.0]);
        let z = zipf_popularity(3, 1.0);
        for (a, b) in z.iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn full_capacity_caches_everything() {
        let s = solve_caching(&cfg(4, 10.0, vec![2.0], 1.0));
        assert_eq!(s.e, vec![1.0; 4]);
        assert!(s.objective.abs() < 1e-15);
    }

    #[test]
    fn three_file_example() {
        let s = solve_caching(&cfg(3, 3.0, vec![2.0], 1.0));
        assert_eq!(s.e, vec![1.0, 0.5, 0.0]);
        assert!((s.objective - 3.5 / 11.0).abs() < 1e-15);
        assert!((s.dual_price.unwrap() - 3.0 / 11.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn table_instance_caches_top_ten() {
        let s = solve_caching(&CacheConfig::default());
        for (v, e) in s.e.iter().enumerate() {
            assert_eq!(*e, if v < 10 { 1.0 } else { 0.0 }, "file {v}");
        }
    }

    #[test]
    fn zero_capacity_caches_nothing() {
        let s = solve_caching(&cfg(5, 0.0, vec![1.0], 1.0));
        assert!(s.e.iter().all(|&e| e == 0.0));
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_smaller_index() {
        let s = solve_caching(&cfg(4, 1.0, vec![1.0], 0.0));
        assert_eq!(s.e, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn random_caching_respects_capacity_and_seed() {
        let c = cfg(50, 7.5, vec![1.0], 1.0);
        let a = random_caching(&c, &mut ChaCha8Rng::seed_from_u64(3));
        let b = random_caching(&c, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert_eq!(a.e.iter().sum::<f64>(), 7.0);
        assert!(a.objective >= solve_caching(&c).objective);
        assert!(a.objective <= no_caching(&c).objective);
    }

    proptest! {
        #[test]
        fn greedy_matches_vertex_oracle(
            n in 1usize..=10,
            seed in any::<u64>(),
            skew in 0.0f64..2.0,
            frac in 0.0f64..1.2,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
            let cap = frac * q.iter().sum::<f64>();
            let c = cfg(n, cap, q.clone(), skew);
            let s = solve_caching(&c);
            let used: f64 = s.e.iter().zip(&q).map(|(e, q)| e * q).sum();
            prop_assert!(used <= cap * (1.0 + 1e-12) + 1e-12);
            prop_assert!(s.e.iter().filter(|&&e| e > 0.0 && e < 1.0).count() <= 1);
            let oracle = vertex_oracle(&zipf_popularity(n, skew), &q, cap);
            prop_assert!((s.objective - oracle).abs() <= 1e-12, "{} vs {}", s.objective, oracle);
        }

        #[test]
        fn objective_nonincreasing_in_capacity(n in 1usize..30, a in 0.0f64..40.0, b in 0.0f64..40.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let o_lo = solve_caching(&cfg(n, lo, vec![1.5], 1.1)).objective;
            let o_hi = solve_caching(&cfg(n, hi, vec![1.5], 1.1)).objective;
            prop_assert!(o_hi <= o_lo + 1e-15);
        }
    }
}
