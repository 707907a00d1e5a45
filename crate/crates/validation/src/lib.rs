//! Brute-force reference computations for the acceptance suite. Everything
//! here works on nested vectors with plain loops and shares no code with the
//! library under test.

/// `batch x k` probabilities, one inner vector per sample.
pub type Probs = Vec<Vec<f64>>;

/// Cosine of column `c` of `a` and column `w` of `b`, norm product floored at 1e-12.
pub fn cosine(a: &Probs, b: &Probs, c: usize, w: usize) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for r in 0..a.len() {
        dot += a[r][c] * b[r][w];
        na += a[r][c] * a[r][c];
        nb += b[r][w] * b[r][w];
    }
    dot / (na.sqrt() * nb.sqrt()).max(1e-12)
}

/// Directed pair loss and its per-class ratios, with the denominator summed
/// over every column of both heads minus the self-similarity `e^{1/tau}`.
pub fn pair_loss(qi: &Probs, qj: &Probs, tau: f64) -> (f64, Vec<f64>) {
    pair_loss_with(qi, qj, tau, true)
}

/// Same ratios with the within-head self term and the `e^{1/tau}` correction
/// both left out. Equal to [`pair_loss`] unless a column of `qi` has squared
/// norm below 1e-12, where the floored self-cosine drops below one.
pub fn pair_loss_without_self(qi: &Probs, qj: &Probs, tau: f64) -> (f64, Vec<f64>) {
    pair_loss_with(qi, qj, tau, false)
}

fn pair_loss_with(qi: &Probs, qj: &Probs, tau: f64, literal: bool) -> (f64, Vec<f64>) {
    let k = qi[0].len();
    let mut loss = 0.0;
    let mut ratios = Vec::with_capacity(k);
    for c in 0..k {
        let mut denom = 0.0;
        for w in 0..k {
            if literal || w != c {
                denom += (cosine(qi, qi, c, w) / tau).exp();
            }
            denom += (cosine(qi, qj, c, w) / tau).exp();
        }
        if literal {
            denom -= (1.0 / tau).exp();
        }
        let f = (cosine(qi, qj, c, c) / tau).exp() / denom;
        loss -= f.ln();
        ratios.push(f);
    }
    (loss, ratios)
}

/// True when some column of some head has squared norm below 1e-12.
pub fn has_vanishing_column(heads: &[Probs]) -> bool {
    heads.iter().any(|q| (0..q[0].len()).any(|c| q.iter().map(|r| r[c] * r[c]).sum::<f64>() < 1e-12))
}

/// Sum of `p ln p` over the batch-mean class distribution of every head.
pub fn mean_entropy_term(heads: &[Probs]) -> f64 {
    let mut total = 0.0;
    for q in heads {
        for c in 0..q[0].len() {
            let mut p = 0.0;
            for row in q {
                p += row[c];
            }
            p /= q.len() as f64;
            total += p * p.max(1e-12).ln();
        }
    }
    total
}

/// `(l_sum, l_reg)`: half the mean over classes of every ordered head pair's
/// loss, and the regularizer. `literal` selects [`pair_loss`] over
/// [`pair_loss_without_self`].
pub fn semantic(heads: &[Probs], tau: f64, literal: bool) -> (f64, f64) {
    let k = heads[0][0].len() as f64;
    let mut l_sum = 0.0;
    for i in 0..heads.len() {
        for j in 0..heads.len() {
            if i != j {
                l_sum += pair_loss_with(&heads[i], &heads[j], tau, literal).0 / (2.0 * k);
            }
        }
    }
    (l_sum, mean_entropy_term(heads))
}

/// Best accuracy over every bijection of label ids (both padded to the
/// larger label count).
pub fn brute_force_acc(pred: &[usize], truth: &[usize]) -> f64 {
    let size = pred.iter().chain(truth).max().map_or(0, |m| m + 1);
    let mut perm: Vec<usize> = (0..size).collect();
    let mut best = 0;
    heap_permutations(&mut perm, size, &mut |p| {
        let hits = pred.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count();
        best = best.max(hits);
    });
    best as f64 / pred.len() as f64
}

fn heap_permutations(p: &mut [usize], n: usize, f: &mut dyn FnMut(&[usize])) {
    if n <= 1 {
        f(p);
        return;
    }
    for i in 0..n - 1 {
        heap_permutations(p, n - 1, f);
        if n % 2 == 0 {
            p.swap(i, n - 1);
        } else {
            p.swap(0, n - 1);
        }
    }
    heap_permutations(p, n - 1, f);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_pair_closed_form() {
        let q = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (l, f) = pair_loss(&q, &q, 0.5);
        let expected = 2.0 * (1.0 + 2.0 * (-2.0f64).exp()).ln();
        assert!((l - expected).abs() < 1e-14);
        assert!(f.iter().all(|&v| (v - 1.0 / (1.0 + 2.0 * (-2.0f64).exp())).abs() < 1e-14));
    }

    #[test]
    fn forms_agree_away_from_vanishing_columns() {
        let a = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6], vec![0.2, 0.5, 0.3]];
        let b = vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6], vec![0.3, 0.4, 0.3]];
        let (x, _) = pair_loss(&a, &b, 0.3);
        let (y, _) = pair_loss_without_self(&a, &b, 0.3);
        assert!((x - y).abs() < 1e-12);
        assert!(!has_vanishing_column(&[a, b]));
        let z = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert!(has_vanishing_column(&[z]));
    }

    #[test]
    fn uniform_heads_hit_the_entropy_floor() {
        let q = vec![vec![0.25; 4]; 3];
        let v = mean_entropy_term(&[q.clone(), q]);
        assert!((v + 2.0 * 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn permutation_search_covers_every_bijection() {
        let mut seen = std::collections::HashSet::new();
        let mut p: Vec<usize> = (0..4).collect();
        heap_permutations(&mut p, 4, &mut |x| {
            seen.insert(x.to_vec());
        });
        assert_eq!(seen.len(), 24);
        assert_eq!(brute_force_acc(&[0, 1, 2, 2], &[0, 0, 1, 1]), 0.75);
        assert_eq!(brute_force_acc(&[1, 1, 0], &[0, 0, 1]), 1.0);
    }
}
