/// Optimal-transport cost between two empirical distributions on the line
/// under squared distance, `∫₀¹ (F⁻¹(u) − G⁻¹(u))² du`.
///
/// The quantile functions are step functions with breaks at `k/n` and `l/m`;
/// the integral is evaluated exactly on the merged breakpoints. For equal
/// sizes this is the mean squared difference of the sorted samples.
pub fn emd1d_squared(p: &[f64], q: &[f64]) -> f64 {
    assert!(!p.is_empty() && !q.is_empty(), "emd1d_squared needs nonempty inputs");
    let mut a = p.to_vec();
    let mut b = q.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        return a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    }
    // walk both quantile functions in integer units of 1/(n·m)
    let (n, m) = (a.len() as u128, b.len() as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut pos, total) = (0u128, n * m);
    let mut acc = 0.0;
    while pos < total {
        let next_a = (i as u128 + 1) * m;
        let next_b = (j as u128 + 1) * n;
        let next = next_a.min(next_b);
        acc += (next - pos) as f64 * (a[i] - b[j]).powi(2);
        pos = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    acc / total as f64
}
