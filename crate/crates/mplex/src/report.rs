//! Test-split evaluation of a trained model.
//!
//! Every metric is recomputed from the frozen parameters alone, so scoring a
//! freshly trained model and re-scoring its checkpoint later produce the
//! same report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use mplex_core::eval::{
    f1_scores, nmi_c, nmi_n, similarity_search, EvalError, EvalReport, SEARCH_KS,
};
use mplex_core::graph::{propagation_kernel, GraphError, MultiplexGraph, Split};
use mplex_core::model::{embed_relations, predict_probs, soft_assignments, ModelError, ModelParams};
use mplex_core::tensor::{DenseMatrix, SparseMatrix};
use mplex_core::trainer::TrainConfig;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Hex SHA-256 of the configuration's JSON form, recorded in every report so
/// results can be traced back to the exact settings that produced them.
pub fn config_hash(config: &TrainConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Test nodes that carry ground-truth labels, ascending.
///
/// All metrics are computed on this set: unlabeled test nodes contribute
/// neither truth for classification nor relevance for search.
pub fn scored_test_nodes(g: &MultiplexGraph, split: &Split) -> Vec<usize> {
    let mut nodes: Vec<usize> = split
        .test
        .iter()
        .copied()
        .filter(|&i| g.is_labeled(i))
        .collect();
    nodes.sort_unstable();
    nodes
}

/// Score a trained model on the labeled test nodes.
///
/// Classification uses the label head, clustering uses k-means (or fuzzy
/// c-means for multi-label graphs) over the consensus embedding plus the
/// learned per-relation memberships, and search ranks test nodes by cosine
/// similarity of their consensus rows. For multi-label graphs the clustering
/// agreement is itself an overlapping-NMI score, surfaced again in `onmi`.
pub fn build_report(
    g: &MultiplexGraph,
    split: &Split,
    config: &TrainConfig,
    params: &ModelParams,
) -> Result<EvalReport, ReportError> {
    let multi = g.multi_label();
    let test = scored_test_nodes(g, split);
    let labels_test = g.labels().select_rows(&test);

    let probs = predict_probs(params, multi);
    let (micro_f1, macro_f1) = f1_scores(&probs.select_rows(&test), &labels_test, multi)?;

    let consensus_test = params.consensus.select_rows(&test);
    let nmi_n_val = nmi_n(
        &consensus_test,
        &labels_test,
        params.dims.clusters,
        config.seed,
        multi,
    )?;

    let kernels: Vec<SparseMatrix> = (0..g.num_relations())
        .map(|r| propagation_kernel(g.intra(r), config.epsilon))
        .collect::<Result<_, _>>()?;
    let locals = embed_relations(params, &kernels, g.features())?;
    let assignments: Vec<DenseMatrix> = soft_assignments(params, &locals)?
        .iter()
        .map(|h| h.select_rows(&test))
        .collect();
    let membership = nmi_c(&assignments, &labels_test, multi)?;

    // A collapsed model (e.g. every loss term switched off) leaves consensus
    // rows at zero, which no cosine ranking can order. Record why instead of
    // refusing to report the metrics that are still well defined.
    let mut notes = Vec::new();
    let sim_search = match similarity_search(&params.consensus, g.labels(), &test, &SEARCH_KS, multi)
    {
        Ok(m) => m,
        Err(e @ EvalError::ZeroNormEmbedding { .. }) => {
            notes.push(format!("similarity search skipped: {e}"));
            BTreeMap::new()
        }
        Err(e) => return Err(e.into()),
    };

    Ok(EvalReport {
        micro_f1,
        macro_f1,
        nmi_n: nmi_n_val,
        nmi_c: membership.mean,
        nmi_c_per_relation: membership.per_relation,
        onmi: multi.then_some(nmi_n_val),
        sim_search,
        config_hash: config_hash(config),
        split_seed: split.seed,
        notes,
    })
}

/// Aligned plain-text rendering of a report.
pub fn render_report_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let mut row = |name: &str, value: String| {
        let _ = writeln!(out, "{name:<22}{value:>12}");
    };
    row("micro-f1 (%)", format!("{:.2}", report.micro_f1));
    row("macro-f1 (%)", format!("{:.2}", report.macro_f1));
    row("nmi-n", format!("{:.4}", report.nmi_n));
    row("nmi-c (mean)", format!("{:.4}", report.nmi_c));
    for (r, v) in report.nmi_c_per_relation.iter().enumerate() {
        row(&format!("nmi-c (relation {r})"), format!("{v:.4}"));
    }
    if let Some(o) = report.onmi {
        row("onmi", format!("{o:.4}"));
    }
    for (k, p) in &report.sim_search {
        row(&format!("precision@{k}"), format!("{p:.4}"));
    }
    let _ = writeln!(out, "{:<22}{}", "config hash", report.config_hash);
    let _ = writeln!(out, "{:<22}{}", "split seed", report.split_seed);
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use mplex_core::graph::make_split;
    use mplex_core::model::Dims;
    use mplex_core::synth::{generate, SynthConfig};
    use mplex_core::Real;
    use std::collections::BTreeSet;

    fn fixture() -> (MultiplexGraph, Split, TrainConfig, ModelParams) {
        let g = generate(&SynthConfig::easy_3x2(5)).unwrap();
        let split = make_split(&g, 5).unwrap();
        let config = TrainConfig {
            embed: 8,
            clusters: Some(3),
            ..TrainConfig::default()
        };
        let mut params = ModelParams::init(
            Dims {
                nodes: g.num_nodes(),
                features: g.num_features(),
                embed: 8,
                layers: 2,
                clusters: 3,
                labels: g.num_labels(),
                relations: g.num_relations(),
            },
            3,
        );
        // Untrained consensus is all zeros, which no similarity ranking can
        // order; fill it with noise so the report exercises every metric.
        let mut v = 0.0;
        params.consensus = DenseMatrix::from_fn(g.num_nodes(), 8, |i, j| {
            v += 1.0;
            ((i * 31 + j * 17) as Real).sin() + v * 1e-3
        });
        (g, split, config, params)
    }

    #[test]
    fn report_is_deterministic_and_in_range() {
        let (g, split, config, params) = fixture();
        let a = build_report(&g, &split, &config, &params).unwrap();
        let b = build_report(&g, &split, &config, &params).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=100.0).contains(&a.micro_f1));
        assert!((0.0..=100.0).contains(&a.macro_f1));
        assert!((0.0..=1.0).contains(&a.nmi_n));
        assert!((0.0..=1.0).contains(&a.nmi_c));
        assert_eq!(a.nmi_c_per_relation.len(), g.num_relations());
        assert_eq!(a.onmi, None);
        assert_eq!(
            a.sim_search.keys().copied().collect::<Vec<_>>(),
            SEARCH_KS.to_vec()
        );
        assert!(a.sim_search.values().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(a.split_seed, 5);
    }

    #[test]
    fn zero_consensus_degrades_search_to_a_note() {
        let (g, split, config, mut params) = fixture();
        params.consensus = DenseMatrix::zeros(g.num_nodes(), 8);
        let report = build_report(&g, &split, &config, &params).unwrap();
        assert!(report.sim_search.is_empty());
        assert_eq!(report.notes.len(), 1);
        assert!(report.notes[0].contains("similarity search skipped"));
        assert_eq!(report.nmi_n, 0.0, "one giant cluster carries no signal");
    }

    #[test]
    fn config_hash_tracks_the_configuration() {
        let (g, split, config, params) = fixture();
        let base = build_report(&g, &split, &config, &params).unwrap();
        assert_eq!(base.config_hash, config_hash(&config));
        let mut changed = config.clone();
        changed.learning_rate *= 2.0;
        assert_ne!(config_hash(&changed), base.config_hash);
    }

    #[test]
    fn multi_label_reports_surface_onmi() {
        // Hand-built 2-relation ring graph with two label bits per node.
        let n = 12;
        let ring: Vec<(usize, usize, Real)> = (0..n)
            .flat_map(|i| {
                let j = (i + 1) % n;
                [(i, j, 1.0), (j, i, 1.0)]
            })
            .collect();
        let a = SparseMatrix::from_triplets(n, n, &ring).unwrap();
        let labels = DenseMatrix::from_fn(n, 3, |i, q| {
            if q == i % 3 || q == (i + 1) % 3 {
                1.0
            } else {
                0.0
            }
        });
        let g = MultiplexGraph::new(
            n,
            vec!["a".into(), "b".into()],
            vec![a.clone(), a],
            BTreeMap::new(),
            DenseMatrix::from_fn(n, 4, |i, j| ((i + j) as Real).cos()),
            labels,
            (0..n).collect::<BTreeSet<_>>(),
            true,
        )
        .unwrap();
        let split = make_split(&g, 1).unwrap();
        let config = TrainConfig {
            embed: 4,
            clusters: Some(3),
            multi_label: true,
            ..TrainConfig::default()
        };
        let mut params = ModelParams::init(
            Dims {
                nodes: n,
                features: 4,
                embed: 4,
                layers: 2,
                clusters: 3,
                labels: 3,
                relations: 2,
            },
            9,
        );
        params.consensus = DenseMatrix::from_fn(n, 4, |i, j| ((i * 7 + j * 3) as Real).sin() + 0.01);
        let report = build_report(&g, &split, &config, &params).unwrap();
        assert_eq!(report.onmi, Some(report.nmi_n));
    }

    #[test]
    fn text_rendering_names_every_metric() {
        let (g, split, config, params) = fixture();
        let report = build_report(&g, &split, &config, &params).unwrap();
        let text = render_report_text(&report);
        for needle in [
            "micro-f1",
            "macro-f1",
            "nmi-n",
            "nmi-c (mean)",
            "nmi-c (relation 1)",
            "precision@100",
            "config hash",
            "split seed",
        ] {
            assert!(text.contains(needle), "missing {needle:?} in:\n{text}");
        }
        assert!(!text.contains("onmi"), "single-label report shows onmi");
        assert!(text.contains(&report.config_hash));
    }
}
