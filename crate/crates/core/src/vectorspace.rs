//! Keyword-frequency document vectors.
//!
//! A [`FeatureMatrix`] holds, for every (keyword, document) pair, the number
//! of occurrences of the keyword divided by the document's token count.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::{CategoryId, Corpus, Document};
use crate::error::{Error, Result};

/// Relative frequency of `word` in `doc`.
pub fn document_frequency(doc: &Document, word: &str) -> Result<f64> {
    if doc.token_count() == 0 {
        return Err(Error::input(format!("document '{}' has no tokens", doc.id)));
    }
    let hits = doc.tokens.iter().filter(|t| t.as_str() == word).count();
    Ok(hits as f64 / doc.token_count() as f64)
}

/// Keywords × documents matrix of relative frequencies.
///
/// Storage is document-major (each document's vector is contiguous) since
/// the classifier only ever reads whole columns. Doc ids, labels and the
/// category table are shared between a matrix and its projections.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    keywords: Vec<String>,
    doc_ids: Arc<[String]>,
    labels: Arc<[usize]>,
    categories: Arc<[CategoryId]>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Assembles a matrix from per-document columns.
    ///
    /// `labels[j]` is the category index of column `j` in `categories`.
    pub fn from_columns(
        keywords: Vec<String>,
        doc_ids: Vec<String>,
        columns: Vec<Vec<f64>>,
        labels: Vec<usize>,
        categories: Vec<CategoryId>,
    ) -> Result<Self> {
        let nw = keywords.len();
        if doc_ids.len() != columns.len() || labels.len() != columns.len() {
            return Err(Error::input("doc_ids, columns and labels differ in length"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= categories.len()) {
            return Err(Error::input(format!("label {bad} has no category")));
        }
        let mut data = Vec::with_capacity(nw * columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != nw {
                return Err(Error::input(format!(
                    "column {j} has {} values for {nw} keywords",
                    col.len()
                )));
            }
            data.extend_from_slice(col);
        }
        Ok(FeatureMatrix {
            keywords,
            doc_ids: doc_ids.into(),
            labels: labels.into(),
            categories: categories.into(),
            data,
        })
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Category index per column.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn categories(&self) -> &[CategoryId] {
        &self.categories
    }

    /// Number of keywords (rows).
    pub fn n_keywords(&self) -> usize {
        self.keywords.len()
    }

    /// Number of documents (columns).
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    /// Value for keyword row `k` and document column `j`.
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[j * self.keywords.len() + k]
    }

    /// The vector of document `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let nw = self.keywords.len();
        &self.data[j * nw..(j + 1) * nw]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero; an empty basis yields empty vectors.
        let nw = self.keywords.len();
        (0..self.n_docs()).map(move |j| &self.data[j * nw..(j + 1) * nw])
    }

    /// Row subset in `gene_indices` order; columns and labels are kept.
    pub fn project(&self, gene_indices: &[usize]) -> Result<FeatureMatrix> {
        let nw = self.keywords.len();
        let mut seen = vec![false; nw];
        for &g in gene_indices {
            if g >= nw {
                return Err(Error::input(format!(
                    "gene index {g} out of range for {nw} keywords"
                )));
            }
            if std::mem::replace(&mut seen[g], true) {
                return Err(Error::input(format!("duplicate gene index {g}")));
            }
        }
        let mut data = Vec::with_capacity(gene_indices.len() * self.n_docs());
        for col in self.columns() {
            data.extend(gene_indices.iter().map(|&g| col[g]));
        }
        Ok(FeatureMatrix {
            keywords: gene_indices.iter().map(|&g| self.keywords[g].clone()).collect(),
            doc_ids: Arc::clone(&self.doc_ids),
            labels: Arc::clone(&self.labels),
            categories: Arc::clone(&self.categories),
            data,
        })
    }

    /// Debug CSV: header `keyword,<doc ids...>`, one row per keyword.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["keyword".to_string()];
        header.extend(self.doc_ids.iter().cloned());
        w.write_record(&header)?;
        for (k, kw) in self.keywords.iter().enumerate() {
            let mut row = vec![kw.clone()];
            row.extend((0..self.n_docs()).map(|j| self.get(k, j).to_string()));
            w.write_record(&row)?;
        }
        w.flush()
            .map_err(|e| Error::Internal(format!("csv flush: {e}")))?;
        Ok(())
    }
}

/// Builds the matrix for `doc_ids` (sorted into column order) over
/// `keywords` (row order as given).
pub fn build_feature_matrix<S: AsRef<str>>(
    corpus: &Corpus,
    doc_ids: &[S],
    keywords: &[String],
) -> Result<FeatureMatrix> {
    if keywords.is_empty() {
        return Err(Error::input("keyword list is empty"));
    }
    if doc_ids.is_empty() {
        return Err(Error::input("document list is empty"));
    }
    let mut row_of: HashMap<&str, usize> = HashMap::with_capacity(keywords.len());
    for (k, w) in keywords.iter().enumerate() {
        if row_of.insert(w.as_str(), k).is_some() {
            return Err(Error::input(format!("duplicate keyword '{w}'")));
        }
    }

    let mut docs = Vec::with_capacity(doc_ids.len());
    for id in doc_ids {
        let id = id.as_ref();
        let d = corpus
            .document(id)
            .ok_or_else(|| Error::input(format!("unknown document id '{id}'")))?;
        if d.token_count() == 0 {
            return Err(Error::input(format!("document '{id}' has no tokens")));
        }
        docs.push(d);
    }
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    docs.dedup_by(|a, b| a.id == b.id);

    let nw = keywords.len();
    let columns: Vec<Vec<f64>> = docs
        .par_iter()
        .map(|d| {
            let mut counts = vec![0u64; nw];
            for t in &d.tokens {
                if let Some(&k) = row_of.get(t.as_str()) {
                    counts[k] += 1;
                }
            }
            let len = d.token_count() as f64;
            counts.into_iter().map(|c| c as f64 / len).collect()
        })
        .collect();

    FeatureMatrix::from_columns(
        keywords.to_vec(),
        docs.iter().map(|d| d.id.clone()).collect(),
        columns,
        docs.iter().map(|d| d.category.index).collect(),
        corpus.categories().to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CategoryId;
    use proptest::prelude::*;

    fn cat() -> CategoryId {
        CategoryId {
            name: "a".into(),
            index: 0,
        }
    }

    fn doc(id: &str, toks: &[&str]) -> Document {
        Document::new(id, cat(), toks.iter().map(|s| s.to_string()).collect())
    }

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn document_frequency_counts() {
        let d = doc("a/1", &["a", "b", "a", "c"]);
        assert_eq!(document_frequency(&d, "a").unwrap(), 0.5);
        assert_eq!(document_frequency(&d, "z").unwrap(), 0.0);
        assert!(document_frequency(&doc("a/2", &[]), "a").is_err());
    }

    #[test]
    fn single_cell_matrix() {
        let c = Corpus::new(vec![doc("a/1", &["a", "a", "b", "b"])], vec![cat()]).unwrap();
        let m = build_feature_matrix(&c, &["a/1"], &words(&["a"])).unwrap();
        assert_eq!((m.n_keywords(), m.n_docs()), (1, 1));
        assert_eq!(m.get(0, 0), 0.5);
    }

    #[test]
    fn absent_keywords_give_zero_matrix() {
        let c = Corpus::new(vec![doc("a/1", &["a", "b"]), doc("a/2", &["c"])], vec![cat()]).unwrap();
        let m = build_feature_matrix(&c, &["a/1", "a/2"], &words(&["x", "y"])).unwrap();
        assert!(m.columns().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn unknown_doc_and_duplicate_keyword_rejected() {
        let c = Corpus::new(vec![doc("a/1", &["a"])], vec![cat()]).unwrap();
        assert!(matches!(
            build_feature_matrix(&c, &["a/9"], &words(&["a"])),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            build_feature_matrix(&c, &["a/1"], &words(&["a", "a"])),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn columns_sorted_regardless_of_request_order() {
        let c = Corpus::new(
            vec![doc("a/1", &["a", "b"]), doc("a/2", &["a"]), doc("a/3", &["b"])],
            vec![cat()],
        )
        .unwrap();
        let kw = words(&["a", "b"]);
        let m1 = build_feature_matrix(&c, &["a/3", "a/1", "a/2"], &kw).unwrap();
        let m2 = build_feature_matrix(&c, &["a/1", "a/2", "a/3"], &kw).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.doc_ids(), ["a/1", "a/2", "a/3"]);
    }

    #[test]
    fn projection_edge_cases() {
        let m = FeatureMatrix::from_columns(
            words(&["a", "b", "c"]),
            vec!["d1".into(), "d2".into()],
            vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]],
            vec![0, 0],
            vec![cat()],
        )
        .unwrap();
        assert_eq!(m.project(&[0, 1, 2]).unwrap(), m);
        let one = m.project(&[1]).unwrap();
        assert_eq!(one.keywords(), ["b"]);
        assert_eq!(one.column(1), [0.5]);
        let rev = m.project(&[2, 0]).unwrap();
        assert_eq!(rev.column(0), [0.3, 0.1]);
        assert!(m.project(&[3]).is_err());
        assert!(m.project(&[1, 1]).is_err());
    }

    proptest! {
        #[test]
        fn project_then_identity_is_stable(
            cols in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 6), 1..8),
            subset in proptest::sample::subsequence((0..6usize).collect::<Vec<_>>(), 1..6),
        ) {
            let n = cols.len();
            let m = FeatureMatrix::from_columns(
                (0..6).map(|i| format!("w{i}")).collect(),
                (0..n).map(|j| format!("d{j}")).collect(),
                cols,
                vec![0; n],
                vec![cat()],
            ).unwrap();
            let p = m.project(&subset).unwrap();
            let id: Vec<usize> = (0..subset.len()).collect();
            prop_assert_eq!(p.project(&id).unwrap(), p);
        }
    }
}
