mod common;

use dbcd_core::cluster::bytes_per_iteration;
use dbcd_core::generator::{generate, BlockAngularSpec};
use dbcd_core::{
    compute_beta, compute_xi, Cluster, ClusterOptions, CompositeProblem, Error, LassoProblem, Partition, PartitionScheme, Strategy,
    TransmitMode,
};

fn block_angular(nodes: usize, seed: u64) -> LassoProblem {
    let spec = BlockAngularSpec {
        nodes,
        local_rows: 12,
        local_cols: 8,
        global_rows: 4,
        noise_sigma: 0.05,
        seed,
        ..BlockAngularSpec::default()
    };
    generate(&spec).unwrap().problem
}

fn cluster(p: &LassoProblem, nodes: usize, strategy: Strategy, transmit: TransmitMode, tau: usize) -> (Cluster, f64) {
    let partition = Partition::balanced(p.num_blocks(), nodes, PartitionScheme::Contiguous).unwrap();
    let xi = compute_xi(&p.separability(), &partition);
    let beta = compute_beta(xi, tau, partition.group_size(), nodes).unwrap();
    let mut options = ClusterOptions::new(strategy, tau, 13);
    options.transmit = transmit;
    (Cluster::new(p, partition, options).unwrap(), beta)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn coupling_rows_match_full_transmission() {
    let p = block_angular(4, 1);
    for strategy in [Strategy::ReduceAll, Strategy::AsyncRing, Strategy::AsyncTorus { width: 2 }] {
        let (mut full, beta) = cluster(&p, 4, strategy, TransmitMode::Full, 3);
        let (mut coupled, _) = cluster(&p, 4, strategy, TransmitMode::CouplingRows, 3);
        assert!(coupled.payload_len() < full.payload_len());
        for _ in 0..200 {
            full.step(&p, beta);
            coupled.step(&p, beta);
            assert_eq!(bits(full.x()), bits(coupled.x()), "{}", strategy.label());
        }
        for c in 0..4 {
            for &r in coupled.view(c) {
                assert_eq!(full.residual(c)[r].to_bits(), coupled.residual(c)[r].to_bits());
            }
        }
        assert!(coupled.audit(&p).unwrap().iter().all(|a| !a.replaced));
    }
}

#[test]
fn torus_extremes_reduce_to_ring_and_reduce_all() {
    let p = common::random_lasso(20, 24, 0.2, 0.05, 3);
    let pairs = [
        (Strategy::AsyncTorus { width: 4 }, Strategy::ReduceAll),
        (Strategy::AsyncTorus { width: 1 }, Strategy::AsyncRing),
    ];
    for (torus, other) in pairs {
        let (mut a, beta) = cluster(&p, 4, torus, TransmitMode::Full, 2);
        let (mut b, _) = cluster(&p, 4, other, TransmitMode::Full, 2);
        for _ in 0..150 {
            a.step(&p, beta);
            b.step(&p, beta);
            assert_eq!(bits(a.x()), bits(b.x()));
            for c in 0..4 {
                assert_eq!(bits(a.residual(c)), bits(b.residual(c)));
            }
        }
    }
}

#[test]
fn reduce_all_copies_agree_on_every_row() {
    let p = block_angular(3, 2);
    let (mut c, beta) = cluster(&p, 3, Strategy::ReduceAll, TransmitMode::Full, 4);
    for _ in 0..100 {
        c.step(&p, beta);
        assert_eq!(bits(c.residual(0)), bits(c.residual(1)));
        assert_eq!(bits(c.residual(0)), bits(c.residual(2)));
    }
}

#[test]
fn bytes_follow_the_payload() {
    let p = block_angular(4, 4);
    for strategy in [Strategy::ReduceAll, Strategy::AsyncRing, Strategy::AsyncTorus { width: 2 }] {
        for transmit in [TransmitMode::Full, TransmitMode::CouplingRows] {
            let (mut c, beta) = cluster(&p, 4, strategy, transmit, 2);
            let per = bytes_per_iteration(c.topology(), c.payload_len());
            for k in 1..=7 {
                assert_eq!(c.step(&p, beta).bytes, per);
                assert_eq!(c.clock().bytes_sent(), k * per);
            }
        }
    }
    let (c, _) = cluster(&p, 4, Strategy::AsyncRing, TransmitMode::CouplingRows, 2);
    // only the coupling band travels
    assert_eq!(c.payload_len(), 4);
}

#[test]
fn corrupted_copy_is_rejected() {
    let p = common::random_lasso(15, 12, 0.3, 0.05, 5);
    let (mut c, beta) = cluster(&p, 3, Strategy::AsyncRing, TransmitMode::Full, 2);
    for _ in 0..10 {
        c.step(&p, beta);
    }
    let mut g = c.residual(1).to_vec();
    g[0] += 1.0;
    c.set_residual(1, g);
    match c.audit(&p) {
        Err(Error::ResidualDrift { node, .. }) => assert_eq!(node, 1),
        other => panic!("expected drift error, got {other:?}"),
    }
}
