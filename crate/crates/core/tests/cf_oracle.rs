#![allow(clippy::needless_range_loop)]

mod oracles;

use hyql_core::collab::{
    build_item_model, fill_vacant, group_score, predict, social_group_action, RatingMatrix, UserId,
};
use hyql_core::context::GroupId;
use hyql_core::qlearning::ActionId;
use oracles::Dense;

const TOY_3X3: &str = include_str!("data/cf_3x3.tsv");
const TOY_10X20: &str = include_str!("data/cf_10x20.tsv");

fn matrix(dense: &Dense) -> RatingMatrix {
    let n_items = dense[0].len() as u32;
    let roster = (0..dense.len() as u32).map(|u| (UserId(u), GroupId(0)));
    let mut m = RatingMatrix::new((0..n_items).map(ActionId), roster);
    for (u, row) in dense.iter().enumerate() {
        for (i, cell) in row.iter().enumerate() {
            if let Some(r) = cell {
                m.set(UserId(u as u32), ActionId(i as u32), *r).unwrap();
            }
        }
    }
    m
}

/// Compares every CF stage on `dense` for one neighbourhood size, bit for bit.
fn check(dense: &Dense, k_users: usize, k_items: usize) {
    let m = matrix(dense);
    let n_users = dense.len();
    let n_items = dense[0].len();
    let items: Vec<ActionId> = (0..n_items as u32).map(ActionId).collect();

    let filled = fill_vacant(&m, k_users).unwrap();
    let want_filled = oracles::fill(dense, k_users);
    for u in 0..n_users {
        for i in 0..n_items {
            let got = filled.value(UserId(u as u32), ActionId(i as u32)).unwrap();
            assert_eq!(
                got.to_bits(),
                want_filled[u][i].to_bits(),
                "fill ({u}, {i}) k={k_users}"
            );
            assert_eq!(
                filled.is_observed(UserId(u as u32), ActionId(i as u32)).unwrap(),
                dense[u][i].is_some()
            );
        }
    }

    let model = build_item_model(&filled, k_items).unwrap();
    let want_neighbours = oracles::item_neighbours(&want_filled, k_items);
    for i in 0..n_items {
        let got: Vec<(u32, u64)> = model
            .neighbours(ActionId(i as u32))
            .unwrap()
            .iter()
            .map(|(j, s)| (j.0, s.to_bits()))
            .collect();
        let want: Vec<(u32, u64)> = want_neighbours[i]
            .iter()
            .map(|(j, s)| (*j as u32, s.to_bits()))
            .collect();
        assert_eq!(got, want, "neighbours of {i} k={k_items}");
    }

    for u in 0..n_users {
        let user = UserId(u as u32);
        for i in 0..n_items {
            let item = ActionId(i as u32);
            let got = predict(&model, &filled, user, item).unwrap();
            let want = oracles::predict(&want_neighbours, &want_filled, u, i);
            assert_eq!(got.to_bits(), want.to_bits(), "predict ({u}, {i})");
            let got = group_score(&model, &filled, &m, user, item).unwrap();
            let want = oracles::score(dense, &want_neighbours, &want_filled, u, i);
            assert_eq!(got.to_bits(), want.to_bits(), "score ({u}, {i})");
        }
        let got = social_group_action(&model, &filled, &m, user, &items).unwrap();
        let want = oracles::social_action(dense, &want_neighbours, &want_filled, u);
        assert_eq!(got, ActionId(want as u32), "social action of {u}");
    }
}

#[test]
fn toy_3x3_matches_brute_force() {
    let dense = oracles::parse_dense(TOY_3X3);
    assert_eq!((dense.len(), dense[0].len()), (3, 3));
    for k_users in 1..=3 {
        for k_items in 1..=3 {
            check(&dense, k_users, k_items);
        }
    }
}

#[test]
fn toy_10x20_matches_brute_force() {
    let dense = oracles::parse_dense(TOY_10X20);
    assert_eq!((dense.len(), dense[0].len()), (10, 20));
    for k_users in [1, 2, 3, 5, 10] {
        for k_items in [1, 3, 10, 20] {
            check(&dense, k_users, k_items);
        }
    }
}

#[test]
fn toy_3x3_known_values() {
    // Every pair of users co-rates exactly one item, both with 1, so every
    // vacant cell is filled with 1.
    let dense = oracles::parse_dense(TOY_3X3);
    let filled = oracles::fill(&dense, 5);
    assert_eq!(filled, vec![vec![1.0, 1.0, 1.0]; 3]);
}
