mod common;

use std::io::Cursor;

use rand::seq::SliceRandom;
use rand::Rng;

use jobrec::embed::{
    embed_document_avg, infer_doc_vector, load_embeddings, train_paragraph_vectors, train_paragraph_vectors_traced,
    PvConfig,
};
use jobrec::linalg::cosine;

fn random_table(seed: u64) -> (jobrec::embed::EmbeddingTable, Vec<String>) {
    let mut r = common::rng(seed);
    let words: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
    let mut text = String::new();
    for w in &words[..20] {
        text.push_str(w);
        for _ in 0..4 {
            text.push_str(&format!(" {}", r.random_range(-1.0..1.0)));
        }
        text.push('\n');
    }
    (load_embeddings(Cursor::new(text)).unwrap(), words)
}

#[test]
fn average_matches_direct_summation() {
    let (table, words) = random_table(60);
    let mut r = common::rng(61);
    for _ in 0..200 {
        let tokens: Vec<String> = (0..r.random_range(0..12)).map(|_| words[r.random_range(0..30)].clone()).collect();
        let (got, found) = embed_document_avg(&tokens, &table);
        let mut sum = [0.0; 4];
        let mut count = 0;
        for t in &tokens {
            if let Some(v) = table.vectors.get(t) {
                for k in 0..4 {
                    sum[k] += v[k];
                }
                count += 1;
            }
        }
        assert_eq!(found, count);
        for k in 0..4 {
            let want = if count == 0 { 0.0 } else { sum[k] / count as f64 };
            assert!((got[k] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn average_ignores_order_and_duplication() {
    let (table, words) = random_table(62);
    let mut r = common::rng(63);
    let mut tokens: Vec<String> = words[..10].to_vec();
    let (a, _) = embed_document_avg(&tokens, &table);
    tokens.shuffle(&mut r);
    let (b, _) = embed_document_avg(&tokens, &table);
    let doubled: Vec<String> = tokens.iter().chain(&tokens).cloned().collect();
    let (c, _) = embed_document_avg(&doubled, &table);
    for k in 0..4 {
        assert!((a[k] - b[k]).abs() < 1e-12 && (a[k] - c[k]).abs() < 1e-12);
    }
}

#[test]
fn loss_does_not_rise_over_the_first_five_epochs() {
    let corpus = common::pv_corpus();
    let config = PvConfig { dim: 16, window: 2, epochs: 5, ..PvConfig::default() };
    let (model, trace) = train_paragraph_vectors_traced(&corpus, &config).unwrap();
    assert_eq!(trace.len(), 5);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0], "{trace:?}");
    }
    assert!(model.docs.iter().chain(&model.word_in).chain(&model.word_out).all(|v| v.is_finite()));
}

#[test]
fn inference_recovers_a_training_document() {
    let corpus = common::pv_corpus();
    let config = PvConfig { dim: 16, window: 2, epochs: 200, ..PvConfig::default() };
    let model = train_paragraph_vectors(&corpus, &config).unwrap();
    let mut worst: f64 = 1.0;
    for (d, doc) in corpus.iter().enumerate() {
        let (v, found) = infer_doc_vector(doc, &model, 200, 0.025, 7);
        assert!(found);
        worst = worst.min(cosine(&v, model.doc_vector(d)));
    }
    assert!(worst >= 0.6, "lowest cosine {worst}");
}

#[test]
fn inference_edge_cases() {
    let corpus = common::pv_corpus();
    let model = train_paragraph_vectors(&corpus, &PvConfig { dim: 8, epochs: 2, ..PvConfig::default() }).unwrap();
    let (init, _) = infer_doc_vector(&["nothing"], &model, 0, 0.025, 3);
    let (oov, found) = infer_doc_vector(&["nothing"], &model, 50, 0.025, 3);
    assert!(!found);
    assert_eq!(init, oov);
    let (a, _) = infer_doc_vector(&corpus[0], &model, 20, 0.025, 1);
    let (b, _) = infer_doc_vector(&corpus[0], &model, 20, 0.025, 2);
    assert_ne!(a, b);
}
