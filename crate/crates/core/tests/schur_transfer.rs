use bandloc_core::band_model::{green_edge_block_dense, BlockModel};
use bandloc_core::linalg::{basis, norm2, operator_norm_exact, Matrix};
use bandloc_core::schur::{edge_block_product, edge_norm_log, schur_chain, vector_action_log_norm, vector_action_on_chain};
use bandloc_core::stats::mean;
use bandloc_core::{BlockModel32, SeedSpec};
use rayon::prelude::*;

fn model(w: usize, n: usize, e: f64, seed: u64, trial: u64) -> BlockModel<f64> {
    BlockModel::sample(w, n, e, SeedSpec::new(seed, trial, 0)).unwrap()
}

fn prefix(m: &BlockModel<f64>, n: usize) -> BlockModel<f64> {
    BlockModel::new(m.e(), m.v()[..n].to_vec(), m.t()[..n - 1].to_vec()).unwrap()
}

fn rel(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}

#[test]
fn product_matches_dense_oracle_on_grid() {
    for w in [1usize, 2, 3, 5] {
        for n in 1..=6 {
            for (trial, e) in [(0u64, 0.0), (1, 0.3), (2, -0.7)] {
                let m = model(w, n, e, 11, trial);
                let chain = schur_chain(&m);
                let dense = green_edge_block_dense(&m).unwrap();
                if chain.max_cond() > 1e8 || dense.cond_estimate > 1e8 {
                    continue;
                }
                let err = edge_block_product(&chain, m.t()).relative_error(&dense);
                assert!(err <= 1e-8, "W={w} N={n} E={e}: relative error {err}");
            }
        }
    }
}

#[test]
fn incremental_green_function_matches_every_prefix() {
    for w in [1usize, 2, 4, 8] {
        for trial in 0..3u64 {
            let m = model(w, 10, 0.0, 12, trial);
            let chain = schur_chain(&m);
            let mut g = chain.u_inv[0].as_matrix().clone();
            for n in 1..=10 {
                if n > 1 {
                    g = g.matmul(&m.t()[n - 2]).matmul(&chain.u_inv[n - 1]).scale(-1.0);
                }
                let pm = prefix(&m, n);
                let pc = schur_chain(&pm);
                // the prefix chain is the head of the full chain
                assert_eq!(pc.u[..], chain.u[..n]);
                let product = edge_block_product(&pc, pm.t()).to_matrix();
                let err = rel(&g, &product);
                assert!(err <= 1e-8, "W={w} trial {trial} n={n}: {err}");
            }
        }
    }
}

#[test]
fn ledger_matches_dense_action() {
    for trial in 0..10u64 {
        let m = model(4, 8, 0.0, 13, trial);
        let f: Vec<f64> = {
            let v: Vec<f64> = (0..4).map(|i| (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let nv = norm2(&v);
            v.into_iter().map(|x| x / nv).collect()
        };
        let ledger = vector_action_log_norm(&m, &f).unwrap();
        let dense = green_edge_block_dense(&m).unwrap().to_matrix();
        let expected = norm2(&dense.mul_vec(&f)).ln();
        assert!((ledger.total - expected).abs() <= 1e-8, "trial {trial}: {} vs {expected}", ledger.total);
    }
}

/// Right-to-left action with the factors grouped `group` at a time between renormalizations.
fn bracketed_total(m: &BlockModel<f64>, f: &[f64], group: usize) -> f64 {
    let chain = schur_chain(m);
    let n = m.n();
    let mut factors: Vec<Matrix<f64>> = vec![chain.u_inv[n - 1].as_matrix().clone()];
    for site in (0..n - 1).rev() {
        factors.push(m.t()[site].clone());
        factors.push(chain.u_inv[site].as_matrix().clone());
    }
    let mut g = f.to_vec();
    let mut total = 0.0;
    for block in factors.chunks(group) {
        let combined = block.iter().skip(1).fold(block[0].clone(), |acc, next| next.matmul(&acc));
        let v = combined.mul_vec(&g);
        let nv = norm2(&v);
        total += nv.ln();
        g = v.into_iter().map(|x| x / nv).collect();
    }
    total
}

#[test]
fn ledger_total_is_invariant_under_rebracketing() {
    for trial in 0..5u64 {
        let m = model(5, 12, 0.0, 14, trial);
        let f = basis(5, 2);
        let ledger = vector_action_log_norm(&m, &f).unwrap();
        for group in [1usize, 2, 3, 4, 7] {
            let t = bracketed_total(&m, &f, group);
            assert!((t - ledger.total).abs() <= 1e-9 * (1.0 + ledger.total.abs()), "group {group}: {t} vs {}", ledger.total);
        }
        assert!((ledger.term_sum() - ledger.total).abs() == 0.0);
    }
}

#[test]
fn edge_norm_dominates_every_vector_action() {
    for trial in 0..5u64 {
        let m = model(4, 6, 0.0, 15, trial);
        let norm = edge_norm_log(&m).unwrap();
        let dense = green_edge_block_dense(&m).unwrap().to_matrix();
        assert!((norm - operator_norm_exact(&dense).ln()).abs() <= 1e-8);
        for j in 0..4 {
            assert!(vector_action_log_norm(&m, &basis(4, j)).unwrap().total <= norm + 1e-12);
        }
    }
}

#[test]
fn long_chain_stays_finite() {
    let m = model(16, 2048, 0.0, 16, 0);
    let ledger = vector_action_log_norm(&m, &basis(16, 0)).unwrap();
    assert!(ledger.total.is_finite());
    assert!(ledger.inverse_terms.iter().chain(&ledger.coupling_terms).all(|v| v.is_finite()));
    let chain = schur_chain(&m);
    let norm = edge_norm_log(&m).unwrap();
    assert!(norm.is_finite() && norm >= ledger.total - 1e-9);
    assert!(chain.is_complete());
}

#[test]
fn underflowing_product_stays_finite_in_log_scale() {
    let m = model(2, 4096, 0.0, 16, 1);
    let ledger = vector_action_log_norm(&m, &basis(2, 0)).unwrap();
    let norm = edge_norm_log(&m).unwrap();
    assert!(ledger.total.is_finite() && norm.is_finite());
    // the unscaled block is below the smallest positive double
    assert!(norm < f64::MIN_POSITIVE.ln() + f64::EPSILON.ln(), "log norm {norm}");
    assert!(edge_block_product(&schur_chain(&m), m.t()).to_matrix().max_abs() == 0.0);
}

#[test]
fn mean_edge_norm_decreases_with_length() {
    let avg = |n: usize| {
        let v: Vec<f64> = (0..200u64).into_par_iter().map(|i| edge_norm_log(&model(8, n, 0.0, 17 + n as u64, i)).unwrap()).collect();
        mean(&v)
    };
    let (short, long) = (avg(32), avg(64));
    assert!(long < short, "N=64 mean {long} not below N=32 mean {short}");
}

#[test]
fn single_precision_tracks_double() {
    let mut compared = 0;
    for trial in 0..20u64 {
        let m = model(4, 8, 0.0, 18, trial);
        if schur_chain(&m).max_cond() > 1e3 {
            continue;
        }
        let m32: BlockModel32 = m.cast();
        let a = vector_action_log_norm(&m, &basis(4, 0)).unwrap().total;
        let b = vector_action_log_norm(&m32, &basis::<f32>(4, 0)).unwrap().total;
        assert!((a - b).abs() < 1e-3 * (1.0 + a.abs()), "trial {trial}: f64 {a}, f32 {b}");
        let na = edge_norm_log(&m).unwrap();
        let nb = edge_norm_log(&m32).unwrap();
        assert!((na - nb).abs() < 1e-3 * (1.0 + na.abs()));
        compared += 1;
    }
    assert!(compared >= 10);
}

#[test]
fn shared_chain_gives_same_ledger() {
    let m = model(3, 7, 0.2, 19, 0);
    let chain = schur_chain(&m);
    let a = vector_action_on_chain(&chain, m.t(), &basis(3, 1)).unwrap();
    let b = vector_action_log_norm(&m, &basis(3, 1)).unwrap();
    assert_eq!(a.total, b.total);
    assert_eq!(a.coupling_terms, b.coupling_terms);
}
