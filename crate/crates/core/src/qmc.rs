//! Low-discrepancy node sets.

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u32) -> f64 {
    let b = b as u64;
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// The `i`-th Halton point in `[0,1)^d`, written into `out`.
pub fn halton(i: u64, out: &mut [f64]) {
    assert!(out.len() <= PRIMES.len(), "halton: dimension too large");
    for (k, o) in out.iter_mut().enumerate() {
        *o = radical_inverse(i, PRIMES[k]);
    }
}

/// Nodes in the shell `kappa < |z| <= 1`, closed under every coordinate sign
/// flip, with at least `min_nodes` entries. Flat layout, `d` per node.
pub fn symmetric_shell_nodes(d: usize, kappa: f64, min_nodes: usize) -> Vec<f64> {
    let copies = 1usize << d;
    let base_needed = min_nodes.div_ceil(copies).max(1);
    let mut base = Vec::with_capacity(base_needed * d);
    let mut z = vec![0.0; d];
    let mut i = 1u64;
    let mut accepted = 0;
    while accepted < base_needed {
        halton(i, &mut z);
        i += 1;
        let r2: f64 = z.iter().map(|v| v * v).sum();
        if r2 <= 1.0 && r2 > kappa * kappa {
            base.extend_from_slice(&z);
            accepted += 1;
        }
    }
    let mut nodes = Vec::with_capacity(accepted * copies * d);
    for b in base.chunks_exact(d) {
        for mask in 0..copies {
            for (k, &v) in b.iter().enumerate() {
                nodes.push(if mask >> k & 1 == 1 { -v } else { v });
            }
        }
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn shell_nodes_are_symmetric_and_inside() {
        let nodes = symmetric_shell_nodes(2, 0.5, 4096);
        assert!(nodes.len() / 2 >= 4096);
        let mean: f64 = nodes.iter().step_by(2).sum::<f64>();
        assert!(mean.abs() < 1e-9);
        for z in nodes.chunks_exact(2) {
            let r2 = z[0] * z[0] + z[1] * z[1];
            assert!(r2 <= 1.0 && r2 > 0.25);
        }
    }
}
