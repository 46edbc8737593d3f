//! Small statistical helpers: moments, quantile bins, bootstrap, Wilson CI.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Deterministic RNG for resampling, decoupled from the simulation streams.
pub fn resampling_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(salt);
    rng
}

/// Equal-count quantile bins: returns for each observation its bin index and
/// the number of bins actually produced (ties on the ordering variable can
/// collapse bins; callers should check `collapsed`).
pub struct QuantileBins {
    pub assignment: Vec<usize>,
    pub n_bins: usize,
    pub collapsed: bool,
}

pub fn quantile_bins(xs: &[f64], n_bins: usize) -> QuantileBins {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut assignment = vec![0usize; n];
    for (rank, &idx) in order.iter().enumerate() {
        assignment[idx] = rank * n_bins / n;
    }
    // merge bins whose boundary value ties (atoms in the distribution)
    let mut collapsed = false;
    for w in 1..n {
        let (a, b) = (order[w - 1], order[w]);
        if xs[a] == xs[b] && assignment[a] != assignment[b] {
            collapsed = true;
        }
    }
    if collapsed {
        // reassign: equal values share the bin of their first member
        let mut k = 0;
        while k + 1 < n {
            let mut j = k + 1;
            while j < n && xs[order[j]] == xs[order[k]] {
                assignment[order[j]] = assignment[order[k]];
                j += 1;
            }
            k = j;
        }
    }
    let n_eff = assignment.iter().copied().collect::<std::collections::BTreeSet<_>>().len();
    QuantileBins {
        assignment,
        n_bins: n_eff,
        collapsed,
    }
}

/// Within-bin variance ratio R = sum_b w_b Var(z | bin b) / Var(z).
pub fn variance_ratio(z: &[f64], bins: &QuantileBins, n_bins_nominal: usize) -> f64 {
    let n = z.len();
    let mut sums = vec![0.0; n_bins_nominal];
    let mut sqs = vec![0.0; n_bins_nominal];
    let mut counts = vec![0usize; n_bins_nominal];
    for (zi, &b) in z.iter().zip(&bins.assignment) {
        sums[b] += zi;
        sqs[b] += zi * zi;
        counts[b] += 1;
    }
    let total_var = variance(z);
    if total_var == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for b in 0..n_bins_nominal {
        if counts[b] >= 2 {
            let m = sums[b] / counts[b] as f64;
            let var = (sqs[b] - counts[b] as f64 * m * m) / (counts[b] - 1) as f64;
            acc += counts[b] as f64 / n as f64 * var.max(0.0);
        }
    }
    acc / total_var
}

/// Percentile bootstrap CI of a statistic of (x, z) pairs under path
/// resampling.
pub fn bootstrap_ci<F>(
    n: usize,
    n_boot: usize,
    level: f64,
    rng: &mut ChaCha8Rng,
    stat: F,
) -> (f64, f64)
where
    F: Fn(&[usize]) -> f64,
{
    let mut vals = Vec::with_capacity(n_boot);
    let mut idx = vec![0usize; n];
    for _ in 0..n_boot {
        for slot in idx.iter_mut() {
            *slot = rng.gen_range(0..n);
        }
        vals.push(stat(&idx));
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = ((1.0 - level) / 2.0 * (n_boot - 1) as f64).round() as usize;
    let hi = ((1.0 - (1.0 - level) / 2.0) * (n_boot - 1) as f64).round() as usize;
    (vals[lo], vals[hi])
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let p = successes as f64 / n as f64;
    let nf = n as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * ((p * (1.0 - p) + z2 / (4.0 * nf)) / nf).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
