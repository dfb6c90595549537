mod oracles;

use rand::Rng;

use lanlan_core::cooccur::{accumulate, build_vocab, CooccurConfig};
use lanlan_core::embed::{loss_and_gradients, objective, train, EmbeddingModel, TrainingConfig};
use lanlan_core::textprep::{normalize, Mode};

fn entry_loss(m: &EmbeddingModel, cfg: &TrainingConfig, i: u32, j: u32, x: f64) -> f64 {
    loss_and_gradients(m, cfg, i, j, x).unwrap().loss
}

fn rel_ok(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-5 * analytic.abs().max(numeric.abs()).max(1e-4)
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = oracles::rng(99);
    let cfg = TrainingConfig { dim: 6, ..Default::default() };
    let h = 1e-6;
    for _ in 0..100 {
        let v = 5;
        let mut m = EmbeddingModel::initialize(v, cfg.dim, &mut rng);
        for p in m.w.iter_mut().chain(m.w_tilde.iter_mut()).chain(m.b.iter_mut()).chain(m.b_tilde.iter_mut()) {
            *p = rng.random_range(-1.0..1.0);
        }
        let i = rng.random_range(0..v as u32);
        let j = rng.random_range(0..v as u32);
        let x = rng.random_range(0.1..250.0);
        let g = loss_and_gradients(&m, &cfg, i, j, x).unwrap();
        let k = rng.random_range(0..cfg.dim);
        let wi = i as usize * cfg.dim + k;
        let wj = j as usize * cfg.dim + k;

        let probe = |set: &dyn Fn(&mut EmbeddingModel, f64)| {
            let mut plus = m.clone();
            set(&mut plus, h);
            let mut minus = m.clone();
            set(&mut minus, -h);
            (entry_loss(&plus, &cfg, i, j, x) - entry_loss(&minus, &cfg, i, j, x)) / (2.0 * h)
        };
        assert!(rel_ok(g.w_i[k], probe(&|mm, d| mm.w[wi] += d)));
        assert!(rel_ok(g.w_tilde_j[k], probe(&|mm, d| mm.w_tilde[wj] += d)));
        assert!(rel_ok(g.b_i, probe(&|mm, d| mm.b[i as usize] += d)));
        assert!(rel_ok(g.b_tilde_j, probe(&|mm, d| mm.b_tilde[j as usize] += d)));
    }
}

pub fn toy_corpus() -> Vec<Vec<String>> {
    let text = [
        "the parser fails on empty input and raises an error",
        "how do i read a csv file into a table",
        "the plot function crashes when the axis is empty",
        "what is the best way to read a large file",
        "error when loading the package after the update",
        "how can i change the colors of the plot",
    ];
    (0..20)
        .flat_map(|r| text.iter().map(move |t| format!("{t} {}", ["today", "again", "now", "here"][r % 4])))
        .map(|t| normalize(&t, Mode::Training).tokens)
        .collect()
}

#[test]
fn toy_training_reduces_loss_and_is_deterministic() {
    let docs = toy_corpus();
    let vocab = build_vocab(docs.iter().map(Vec::as_slice), 1).unwrap();
    let acc = accumulate(&docs, &vocab, &CooccurConfig::default()).unwrap();
    let cfg = TrainingConfig { seed: 42, epochs: 50, workers: 1, ..Default::default() };
    let (init, _) = train(&acc, &vocab, &TrainingConfig { epochs: 0, ..cfg.clone() }).unwrap();
    let (model, state) = train(&acc, &vocab, &cfg).unwrap();
    let before = objective(&init, &acc, &cfg).unwrap();
    let after = objective(&model, &acc, &cfg).unwrap();
    assert!(after < 0.1 * before, "{after} vs {before}");
    assert_eq!(state.epochs_completed, 50);
    let (again, _) = train(&acc, &vocab, &cfg).unwrap();
    assert_eq!(again, model);
}
