//! k-nearest-neighbours classification with Euclidean distance, and the
//! per-category precision/recall report whose averaged precision drives the
//! GA fitness.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CategoryId;
use crate::error::{Error, Result};
use crate::vectorspace::FeatureMatrix;

/// How category-vote ties among the k neighbours are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Among the tied categories, take the one of the nearest neighbour;
    /// fall back to the lowest category index.
    #[default]
    NearestThenIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    pub tie_break: TieBreak,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            k: 1,
            tie_break: TieBreak::default(),
        }
    }
}

impl KnnConfig {
    pub fn new(k: usize) -> Self {
        KnnConfig {
            k,
            ..Default::default()
        }
    }

    pub fn validate(&self, n_train: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.k > n_train {
            return Err(Error::config(format!(
                "k = {} exceeds the {n_train} training documents",
                self.k
            )));
        }
        Ok(())
    }
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(distance_unchecked(a, b))
}

#[inline]
fn distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Column indices of the `k` nearest training documents, nearest first.
/// Equal distances are ordered by doc id.
pub fn nearest_neighbors(train: &FeatureMatrix, query: &[f64], k: usize) -> Result<Vec<usize>> {
    if train.n_docs() == 0 {
        return Err(Error::input("training set is empty"));
    }
    if query.len() != train.n_keywords() {
        return Err(Error::input(format!(
            "query has {} coordinates, training basis has {}",
            query.len(),
            train.n_keywords()
        )));
    }
    let ids = train.doc_ids();
    let mut scored: Vec<(f64, usize)> = train
        .columns()
        .enumerate()
        .map(|(j, col)| (distance_unchecked(col, query), j))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
        a.0.total_cmp(&b.0).then_with(|| ids[a.1].cmp(&ids[b.1]))
    };
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_distance);
        scored.truncate(k);
    }
    scored.sort_by(by_distance);
    Ok(scored.into_iter().map(|(_, j)| j).collect())
}

/// Predicts a category index for `query`.
pub fn classify(train: &FeatureMatrix, query: &[f64], cfg: &KnnConfig) -> Result<usize> {
    if train.n_docs() == 0 {
        return Err(Error::input("training set is empty"));
    }
    cfg.validate(train.n_docs())?;
    let neighbors = nearest_neighbors(train, query, cfg.k)?;
    let labels = train.labels();
    let mut votes = vec![0usize; train.categories().len()];
    for &j in &neighbors {
        votes[labels[j]] += 1;
    }
    let top = votes.iter().copied().max().unwrap_or(0);
    let winner = match cfg.tie_break {
        TieBreak::NearestThenIndex => neighbors
            .iter()
            .map(|&j| labels[j])
            .find(|&c| votes[c] == top)
            .or_else(|| votes.iter().position(|&v| v == top)),
    };
    winner.ok_or_else(|| Error::Internal("no neighbour cast a vote".into()))
}

/// Confusion counts indexed by (true category, predicted category).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    n: usize,
    cells: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(n_categories: usize) -> Self {
        ConfusionCounts {
            n: n_categories,
            cells: vec![0; n_categories * n_categories],
        }
    }

    pub fn from_pairs<I>(n_categories: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut c = Self::new(n_categories);
        for (t, p) in pairs {
            c.record(t, p)?;
        }
        Ok(c)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.n || predicted >= self.n {
            return Err(Error::input(format!(
                "category pair ({truth}, {predicted}) outside 0..{}",
                self.n
            )));
        }
        self.cells[truth * self.n + predicted] += 1;
        Ok(())
    }

    pub fn n_categories(&self) -> usize {
        self.n
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.cells[truth * self.n + predicted]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n).map(|c| self.get(c, c)).sum()
    }

    /// Documents predicted as `c`.
    pub fn predicted(&self, c: usize) -> u64 {
        (0..self.n).map(|t| self.get(t, c)).sum()
    }

    /// Documents truly in `c`.
    pub fn actual(&self, c: usize) -> u64 {
        (0..self.n).map(|p| self.get(c, p)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub name: String,
    /// `None` when nothing was predicted as this category.
    pub precision: Option<f64>,
    /// `None` when the category has no evaluated documents.
    pub recall: Option<f64>,
}

/// Per-category precision and recall with their macro averages.
///
/// `fitness` is `1 - pr_avg`. Averages skip undefined entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub categories: Vec<CategoryScore>,
    pub pr_avg: f64,
    pub rc_avg: f64,
    pub fitness: f64,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl EvalReport {
    pub fn from_confusion(counts: &ConfusionCounts, categories: &[CategoryId]) -> Result<Self> {
        if categories.len() != counts.n_categories() {
            return Err(Error::Internal(format!(
                "{} category names for a {}-category confusion table",
                categories.len(),
                counts.n_categories()
            )));
        }
        let scores: Vec<CategoryScore> = categories
            .iter()
            .map(|cat| {
                let c = cat.index;
                let hit = counts.get(c, c) as f64;
                let predicted = counts.predicted(c);
                let actual = counts.actual(c);
                CategoryScore {
                    name: cat.name.clone(),
                    precision: (predicted > 0).then(|| hit / predicted as f64),
                    recall: (actual > 0).then(|| hit / actual as f64),
                }
            })
            .collect();
        let pr_avg = mean_defined(scores.iter().map(|s| s.precision))
            .ok_or_else(|| Error::evaluation("no category has a defined precision"))?;
        let rc_avg = mean_defined(scores.iter().map(|s| s.recall))
            .ok_or_else(|| Error::evaluation("no category has a defined recall"))?;
        Ok(EvalReport {
            categories: scores,
            pr_avg,
            rc_avg,
            fitness: 1.0 - pr_avg,
        })
    }

    /// CSV with columns `category,precision,recall`; undefined cells are
    /// left empty.
    pub fn write_per_category_csv<W: Write>(&self, out: W) -> Result<()> {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["category", "precision", "recall"])?;
        for s in &self.categories {
            w.write_record([s.name.clone(), fmt(s.precision), fmt(s.recall)])?;
        }
        w.flush()
            .map_err(|e| Error::Internal(format!("csv flush: {e}")))?;
        Ok(())
    }
}

/// `1 - Pr_avg`, recomputed from the per-category precisions.
pub fn fitness_from_report(report: &EvalReport) -> Result<f64> {
    let pr_avg = mean_defined(report.categories.iter().map(|s| s.precision))
        .ok_or_else(|| Error::evaluation("all precisions are undefined"))?;
    Ok(1.0 - pr_avg)
}

/// Predicted category index for every column of `test`.
pub fn predict_all(train: &FeatureMatrix, test: &FeatureMatrix, cfg: &KnnConfig) -> Result<Vec<usize>> {
    if train.keywords() != test.keywords() {
        return Err(Error::input(
            "train and test matrices use different keyword bases",
        ));
    }
    cfg.validate(train.n_docs())?;
    (0..test.n_docs())
        .into_par_iter()
        .map(|j| classify(train, test.column(j), cfg))
        .collect()
}

pub fn confusion(train: &FeatureMatrix, test: &FeatureMatrix, cfg: &KnnConfig) -> Result<ConfusionCounts> {
    if train.categories() != test.categories() {
        return Err(Error::input(
            "train and test matrices use different category tables",
        ));
    }
    let predicted = predict_all(train, test, cfg)?;
    ConfusionCounts::from_pairs(
        train.categories().len(),
        test.labels().iter().copied().zip(predicted),
    )
}

/// Classifies every test document and scores the result.
pub fn evaluate(train: &FeatureMatrix, test: &FeatureMatrix, cfg: &KnnConfig) -> Result<EvalReport> {
    if test.n_docs() == 0 {
        return Err(Error::evaluation("test set is empty"));
    }
    let counts = confusion(train, test, cfg)?;
    EvalReport::from_confusion(&counts, train.categories())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats(n: usize) -> Vec<CategoryId> {
        (0..n)
            .map(|i| CategoryId {
                name: format!("c{i}"),
                index: i,
            })
            .collect()
    }

    fn matrix(cols: Vec<Vec<f64>>, labels: Vec<usize>, n_cat: usize) -> FeatureMatrix {
        let nw = cols.first().map_or(0, |c| c.len());
        FeatureMatrix::from_columns(
            (0..nw).map(|i| format!("w{i}")).collect(),
            (0..cols.len()).map(|j| format!("d{j:03}")).collect(),
            cols,
            labels,
            cats(n_cat),
        )
        .unwrap()
    }

    #[test]
    fn distance_basics() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!(matches!(
            euclidean_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn k1_exact_match() {
        let m = matrix(vec![vec![0.0], vec![0.5], vec![1.0]], vec![0, 1, 2], 3);
        assert_eq!(classify(&m, &[0.5], &KnnConfig::new(1)).unwrap(), 1);
    }

    #[test]
    fn strict_majority() {
        let m = matrix(
            vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]],
            vec![0, 0, 1, 1],
            2,
        );
        assert_eq!(classify(&m, &[0.15], &KnnConfig::new(3)).unwrap(), 0);
    }

    #[test]
    fn vote_tie_goes_to_nearest() {
        // k=2, one vote each; category 1 owns the nearest column.
        let m = matrix(vec![vec![0.0], vec![1.0]], vec![0, 1], 2);
        assert_eq!(classify(&m, &[0.9], &KnnConfig::new(2)).unwrap(), 1);
        assert_eq!(classify(&m, &[0.1], &KnnConfig::new(2)).unwrap(), 0);
    }

    #[test]
    fn distance_tie_goes_to_smaller_doc_id() {
        // d000 and d001 are equidistant from 0.5.
        let m = matrix(vec![vec![1.0], vec![0.0]], vec![1, 0], 2);
        assert_eq!(classify(&m, &[0.5], &KnnConfig::new(1)).unwrap(), 1);
    }

    #[test]
    fn bad_inputs() {
        let m = matrix(vec![vec![0.0]], vec![0], 1);
        assert!(classify(&m, &[0.0, 1.0], &KnnConfig::new(1)).is_err());
        assert!(matches!(
            classify(&m, &[0.0], &KnnConfig::new(2)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            classify(&m, &[0.0], &KnnConfig::new(0)),
            Err(Error::Config(_))
        ));
        let empty = FeatureMatrix::from_columns(vec!["w".into()], vec![], vec![], vec![], cats(1)).unwrap();
        assert!(matches!(
            classify(&empty, &[0.0], &KnnConfig::new(1)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn perfect_classifier_report() {
        let m = matrix(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 2], 3);
        let r = evaluate(&m, &m, &KnnConfig::new(1)).unwrap();
        assert!(r
            .categories
            .iter()
            .all(|s| s.precision == Some(1.0) && s.recall == Some(1.0)));
        assert_eq!(r.fitness, 0.0);
    }

    #[test]
    fn everything_predicted_as_a() {
        let c = ConfusionCounts::from_pairs(2, [(0, 0), (0, 0), (1, 0), (1, 0)]).unwrap();
        let r = EvalReport::from_confusion(&c, &cats(2)).unwrap();
        assert_eq!(r.categories[0].precision, Some(0.5));
        assert_eq!(r.categories[0].recall, Some(1.0));
        assert_eq!(r.categories[1].precision, None);
        assert_eq!(r.categories[1].recall, Some(0.0));
        assert_eq!(r.pr_avg, 0.5);
        assert_eq!(r.rc_avg, 0.5);
        assert_eq!(r.fitness, 0.5);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["categories"][1]["precision"].is_null());
    }

    #[test]
    fn fitness_arithmetic() {
        let report = |p: f64| EvalReport {
            categories: vec![CategoryScore {
                name: "a".into(),
                precision: Some(p),
                recall: Some(p),
            }],
            pr_avg: p,
            rc_avg: p,
            fitness: 1.0 - p,
        };
        assert_eq!(fitness_from_report(&report(1.0)).unwrap(), 0.0);
        assert!((fitness_from_report(&report(0.8417)).unwrap() - 0.1583).abs() < 1e-12);
        assert!((fitness_from_report(&report(0.9142)).unwrap() - 0.0858).abs() < 1e-12);
        let mut undefined = report(0.5);
        undefined.categories[0].precision = None;
        assert!(matches!(
            fitness_from_report(&undefined),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn basis_mismatch_rejected() {
        let a = matrix(vec![vec![0.0, 1.0]], vec![0], 1);
        let b = a.project(&[1, 0]).unwrap();
        assert!(matches!(
            evaluate(&a, &b, &KnnConfig::new(1)),
            Err(Error::Input(_))
        ));
    }
}
