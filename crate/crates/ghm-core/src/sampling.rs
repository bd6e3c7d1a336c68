//! Hypergeometric sampling for the instance-level holdout split.
//!
//! The split draws, for each (leaf, tag, level) group, how many of its
//! instances land in the test side of an exact without-replacement sample.
//! Populations reach tens of millions here, which overflows the factorial
//! fractions inside `rand_distr`'s hypergeometric sampler, so this module
//! carries its own: inverse transform started at the mode, expanding
//! outward with the pmf ratio recurrence. The mode pmf is evaluated in log
//! space from Stirling-series log-factorials, and the expected number of
//! steps is on the order of the distribution's standard deviation.

use std::sync::OnceLock;

use rand::Rng;

const STIRLING_CUTOFF: u64 = 1024;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = vec![0.0f64; STIRLING_CUTOFF as usize];
        let mut acc = 0.0;
        for n in 1..STIRLING_CUTOFF as usize {
            acc += (n as f64).ln();
            table[n] = acc;
        }
        table
    })
}

fn ln_factorial(n: u64) -> f64 {
    if n < STIRLING_CUTOFF {
        return ln_factorial_table()[n as usize];
    }
    let x = n as f64;
    let x2 = x * x;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x * x2 * x2)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Number of marked items in a uniform without-replacement sample of
/// `draws` items from a population of `total` containing `successes`
/// marked ones.
pub(crate) fn hypergeometric<R: Rng>(rng: &mut R, total: u64, successes: u64, draws: u64) -> u64 {
    assert!(successes <= total && draws <= total);
    let lo = draws.saturating_sub(total - successes);
    let hi = successes.min(draws);
    if lo == hi {
        return lo;
    }

    let mode = (((draws + 1) as f64) * ((successes + 1) as f64) / ((total + 2) as f64)) as u64;
    let mode = mode.clamp(lo, hi);
    let ln_p_mode = ln_choose(successes, mode) + ln_choose(total - successes, draws - mode)
        - ln_choose(total, draws);

    // p(x+1) / p(x) and p(x-1) / p(x) follow from the pmf directly. The
    // failure-count term is grouped as (total + x) - (successes + draws),
    // which is nonnegative everywhere the closures are called (x > lo for
    // the down ratio, x >= lo for the up ratio).
    let ratio_up = |x: u64| {
        ((successes - x) as f64 * (draws - x) as f64)
            / ((x + 1) as f64 * ((total + x + 1) - (successes + draws)) as f64)
    };
    let ratio_down = |x: u64| {
        (x as f64 * ((total + x) - (successes + draws)) as f64)
            / ((successes - x + 1) as f64 * (draws - x + 1) as f64)
    };

    // Walk outward from the mode, consuming probability mass until the
    // uniform draw is exhausted. Enumeration order is fixed (mode, mode-1,
    // mode+1, ...), so each value is returned with exactly its pmf.
    let mut u: f64 = rng.random::<f64>();
    let p_mode = ln_p_mode.exp();
    u -= p_mode;
    if u < 0.0 {
        return mode;
    }
    let mut down = mode;
    let mut p_down = p_mode;
    let mut up = mode;
    let mut p_up = p_mode;
    loop {
        let can_down = down > lo;
        let can_up = up < hi;
        if can_down {
            p_down *= ratio_down(down);
            down -= 1;
            u -= p_down;
            if u < 0.0 {
                return down;
            }
        }
        if can_up {
            p_up *= ratio_up(up);
            up += 1;
            u -= p_up;
            if u < 0.0 {
                return up;
            }
        }
        if !can_down && !can_up {
            // Accumulated rounding left a sliver of mass unassigned; the
            // mode is the safest owner of it.
            return mode;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ln_factorial_is_accurate_across_the_cutoff() {
        // Compare the Stirling branch against the exact iterative sum.
        for n in [1024u64, 1500, 5000, 100_000] {
            let exact: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
            let approx = ln_factorial(n);
            assert!(
                (exact - approx).abs() / exact < 1e-12,
                "n={n}: {exact} vs {approx}"
            );
        }
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
    }

    #[test]
    fn degenerate_supports_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Sampling everything takes all successes.
        assert_eq!(hypergeometric(&mut rng, 10, 4, 10), 4);
        // Sampling nothing takes none.
        assert_eq!(hypergeometric(&mut rng, 10, 4, 0), 0);
        // No marked items.
        assert_eq!(hypergeometric(&mut rng, 10, 0, 5), 0);
        // All marked.
        assert_eq!(hypergeometric(&mut rng, 10, 10, 5), 5);
    }

    #[test]
    fn samples_stay_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(n, k, s) in &[(100u64, 30u64, 50u64), (17, 17, 3), (50, 40, 45)] {
            let lo = s.saturating_sub(n - k);
            let hi = k.min(s);
            for _ in 0..200 {
                let x = hypergeometric(&mut rng, n, k, s);
                assert!((lo..=hi).contains(&x));
            }
        }
    }

    #[test]
    fn empirical_frequencies_match_the_exact_pmf() {
        // Small enough to enumerate the pmf exactly.
        let (n, k, s) = (20u64, 8u64, 7u64);
        let choose = |n: u64, k: u64| -> f64 {
            (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
        };
        let total = choose(n, s);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 200_000;
        let mut counts = [0u64; 8];
        for _ in 0..trials {
            counts[hypergeometric(&mut rng, n, k, s) as usize] += 1;
        }
        for x in 0..=7u64 {
            let pmf = choose(k, x) * choose(n - k, s - x) / total;
            let freq = counts[x as usize] as f64 / trials as f64;
            assert!(
                (freq - pmf).abs() < 0.005,
                "x={x}: pmf {pmf:.4}, freq {freq:.4}"
            );
        }
    }

    #[test]
    fn large_populations_sample_near_the_mean() {
        // The parameter regime that overflows naive factorial fractions.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(n, k, s) in &[
            (2_000u64, 100u64, 100u64),
            (20_000_000, 2_000_000, 2_000_000),
            (40_000_000, 57, 4_000_000),
        ] {
            let mean = s as f64 * k as f64 / n as f64;
            let sd = (mean * (1.0 - k as f64 / n as f64)).sqrt().max(1.0);
            let avg: f64 = (0..300)
                .map(|_| hypergeometric(&mut rng, n, k, s) as f64)
                .sum::<f64>()
                / 300.0;
            assert!(
                (avg - mean).abs() < 6.0 * sd / (300f64).sqrt() + 0.5,
                "N={n} K={k} n={s}: mean {mean}, avg {avg}"
            );
        }
    }
}
