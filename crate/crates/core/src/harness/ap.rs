//! Average precision for multi-label scores.

/// Average precision of one action: clips sorted by descending score (ties
/// keep their original order), precision taken at the rank of every
/// positive, averaged over positives. `None` when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Per-action AP over a score matrix (`scores[clip][action]`) and the mean
/// over actions whose AP is defined.
pub fn mean_average_precision(scores: &[Vec<f64>], labels: &[Vec<u8>], n_actions: usize) -> (Vec<Option<f64>>, f64) {
    let per: Vec<Option<f64>> = (0..n_actions)
        .map(|a| {
            let s: Vec<f64> = scores.iter().map(|r| r[a]).collect();
            let l: Vec<u8> = labels.iter().map(|r| r[a]).collect();
            average_precision(&s, &l)
        })
        .collect();
    let defined: Vec<f64> = per.iter().flatten().copied().collect();
    let map = if defined.is_empty() { 0.0 } else { defined.iter().sum::<f64>() / defined.len() as f64 };
    (per, map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.1], &[1, 1, 0]), Some(1.0));
    }

    #[test]
    fn single_positive_second_of_four() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.3, 0.1], &[0, 1, 0, 0]), Some(0.5));
    }

    #[test]
    fn no_positives_is_undefined() {
        assert_eq!(average_precision(&[0.1, 0.2], &[0, 0]), None);
    }

    #[test]
    fn ties_keep_original_order() {
        assert_eq!(average_precision(&[0.5, 0.5], &[0, 1]), Some(0.5));
        assert_eq!(average_precision(&[0.5, 0.5], &[1, 0]), Some(1.0));
    }

    #[test]
    fn mean_skips_undefined_actions() {
        let scores = vec![vec![0.9, 0.1], vec![0.2, 0.3]];
        let labels = vec![vec![1, 0], vec![0, 0]];
        let (per, map) = mean_average_precision(&scores, &labels, 2);
        assert_eq!(per, vec![Some(1.0), None]);
        assert_eq!(map, 1.0);
    }
}
