use rand::Rng;

/// Stratified resampling: stratum `i` draws the point `(i + u_i) / N` with an
/// independent `u_i ~ U[0, 1)` and selects the particle whose cumulative
/// weight interval contains it. Returns the selected indices, sorted.
///
/// `weights` must be non-negative and sum to (approximately) one.
pub fn stratified_indices(weights: &[f64], rng: &mut impl Rng) -> Vec<usize> {
    let n = weights.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let target = (i as f64 + rng.random::<f64>()) / n as f64 * acc;
        while j + 1 < n && cumulative[j] <= target {
            j += 1;
        }
        out.push(j);
    }
    out
}
