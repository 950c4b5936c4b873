//! Collaborative filtering over implicit ratings.
//!
//! The pipeline is hybrid:
//!
//! 1. [`fill_vacant`] predicts every missing user × item cell from the
//!    ratings of the most similar users (cosine over co-rated items);
//! 2. [`build_item_model`] computes item-item cosine neighbourhoods over the
//!    columns of the filled matrix;
//! 3. [`predict`] scores an item for a user from that user's filled ratings
//!    on the item's neighbours.
//!
//! [`GroupModel`] runs the pipeline on the transactions of one social group
//! and backs the CF exploration branch of the hybrid agent.
//!
//! All loops visit users and items in ascending id order, so results do not
//! depend on the order the matrix was assembled in.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::context::{GroupId, StateId};
use crate::qlearning::ActionId;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

/// One logged interaction `<id, user, item, rating>`, with the state it
/// happened in and the trial index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transaction {
    pub id: u64,
    pub user: UserId,
    pub item: ActionId,
    pub rating: f64,
    pub state: StateId,
    pub trial: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    users: Vec<UserId>,
    items: Vec<ActionId>,
    entries: BTreeMap<(UserId, ActionId), f64>,
    group_of: BTreeMap<UserId, GroupId>,
}

impl RatingMatrix {
    pub fn new(items: impl IntoIterator<Item = ActionId>, roster: impl IntoIterator<Item = (UserId, GroupId)>) -> Self {
        let mut items: Vec<ActionId> = items.into_iter().collect();
        items.sort_unstable();
        items.dedup();
        let group_of: BTreeMap<UserId, GroupId> = roster.into_iter().collect();
        let users = group_of.keys().copied().collect();
        RatingMatrix {
            users,
            items,
            entries: BTreeMap::new(),
            group_of,
        }
    }

    /// Builds a matrix from transactions; a later transaction on the same
    /// cell overrides an earlier one.
    pub fn from_transactions<'a>(
        items: impl IntoIterator<Item = ActionId>,
        roster: impl IntoIterator<Item = (UserId, GroupId)>,
        transactions: impl IntoIterator<Item = &'a Transaction>,
    ) -> Result<Self> {
        let mut m = RatingMatrix::new(items, roster);
        for t in transactions {
            m.set(t.user, t.item, t.rating)?;
        }
        Ok(m)
    }

    pub fn set(&mut self, user: UserId, item: ActionId, rating: f64) -> Result<()> {
        self.user_index(user)?;
        self.item_index(item)?;
        if !(0.0..=1.0).contains(&rating) {
            return Err(Error::InvalidRating(rating));
        }
        self.entries.insert((user, item), rating);
        Ok(())
    }

    pub fn rating(&self, user: UserId, item: ActionId) -> Option<f64> {
        self.entries.get(&(user, item)).copied()
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn items(&self) -> &[ActionId] {
        &self.items
    }

    pub fn group_of(&self, user: UserId) -> Option<GroupId> {
        self.group_of.get(&user).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (UserId, ActionId, f64)> + '_ {
        self.entries.iter().map(|(&(u, i), &r)| (u, i, r))
    }

    pub fn has_ratings(&self, user: UserId) -> bool {
        self.entries
            .range((user, ActionId(0))..=(user, ActionId(u32::MAX)))
            .next()
            .is_some()
    }

    fn user_index(&self, user: UserId) -> Result<usize> {
        self.users.binary_search(&user).map_err(|_| Error::UnknownUser(user.0))
    }

    fn item_index(&self, item: ActionId) -> Result<usize> {
        self.items
            .binary_search(&item)
            .map_err(|_| Error::UnknownAction(item.0))
    }

    fn dense_rows(&self) -> Vec<Vec<Option<f64>>> {
        let mut rows = vec![vec![None; self.items.len()]; self.users.len()];
        for (&(u, i), &r) in &self.entries {
            // Both ids were checked on insertion.
            let ui = self.users.binary_search(&u).unwrap_or_default();
            let ii = self.items.binary_search(&i).unwrap_or_default();
            rows[ui][ii] = Some(r);
        }
        rows
    }
}

/// `dot / sqrt(|a|² · |b|²)`, 0 when either norm vanishes.
pub(crate) fn cosine(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    let s = dot / libm::sqrt(norm_a * norm_b);
    s.clamp(-1.0, 1.0)
}

fn co_rated_cosine(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
    }
    cosine(dot, na, nb)
}

/// Cosine similarity over the items both users rated; 0 without co-rated
/// items.
pub fn user_similarity(matrix: &RatingMatrix, u: UserId, v: UserId) -> Result<f64> {
    let ui = matrix.user_index(u)?;
    let vi = matrix.user_index(v)?;
    let rows = matrix.dense_rows();
    Ok(co_rated_cosine(&rows[ui], &rows[vi]))
}

/// Dense user × item matrix with every vacant cell predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct FilledMatrix {
    users: Vec<UserId>,
    items: Vec<ActionId>,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl FilledMatrix {
    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn items(&self) -> &[ActionId] {
        &self.items
    }

    pub fn value(&self, user: UserId, item: ActionId) -> Result<f64> {
        let (u, i) = self.cell(user, item)?;
        Ok(self.values[u * self.items.len() + i])
    }

    pub fn is_observed(&self, user: UserId, item: ActionId) -> Result<bool> {
        let (u, i) = self.cell(user, item)?;
        Ok(self.observed[u * self.items.len() + i])
    }

    fn cell(&self, user: UserId, item: ActionId) -> Result<(usize, usize)> {
        let u = self
            .users
            .binary_search(&user)
            .map_err(|_| Error::UnknownUser(user.0))?;
        let i = self
            .items
            .binary_search(&item)
            .map_err(|_| Error::UnknownAction(item.0))?;
        Ok((u, i))
    }

    fn at(&self, u: usize, i: usize) -> f64 {
        self.values[u * self.items.len() + i]
    }
}

/// Ranks `(id, similarity)` candidates: similarity descending, then id
/// ascending.
fn by_similarity<T: Ord>(a: &(T, f64), b: &(T, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Memory-based fill of the vacant cells.
///
/// A vacant `(u, i)` becomes the similarity-weighted mean of the ratings on
/// `i` by the `k_users` most similar users that rated `i`. Only positively
/// similar users count as neighbours; without any the cell is 0.
pub fn fill_vacant(matrix: &RatingMatrix, k_users: usize) -> Result<FilledMatrix> {
    if k_users == 0 {
        return Err(Error::InvalidNeighbourhood("k_users must be at least 1"));
    }
    let rows = matrix.dense_rows();
    let n_users = matrix.users.len();
    let n_items = matrix.items.len();

    let mut sim = vec![0.0; n_users * n_users];
    for u in 0..n_users {
        for v in (u + 1)..n_users {
            let s = co_rated_cosine(&rows[u], &rows[v]);
            sim[u * n_users + v] = s;
            sim[v * n_users + u] = s;
        }
    }

    let mut values = vec![0.0; n_users * n_items];
    let mut observed = vec![false; n_users * n_items];
    let mut raters: Vec<(usize, f64)> = Vec::with_capacity(n_users);
    for (u, row) in rows.iter().enumerate() {
        for (i, &own) in row.iter().enumerate() {
            let cell = u * n_items + i;
            if let Some(r) = own {
                values[cell] = r;
                observed[cell] = true;
                continue;
            }
            raters.clear();
            raters.extend(
                (0..n_users)
                    .filter(|&v| v != u && rows[v][i].is_some())
                    .map(|v| (v, sim[u * n_users + v]))
                    .filter(|&(_, s)| s > 0.0),
            );
            raters.sort_by(by_similarity);
            raters.truncate(k_users);
            let (mut num, mut den) = (0.0, 0.0);
            for &(v, s) in raters.iter() {
                num += s * rows[v][i].unwrap_or_default();
                den += s;
            }
            if den > 0.0 {
                values[cell] = (num / den).clamp(0.0, 1.0);
            }
        }
    }

    Ok(FilledMatrix {
        users: matrix.users.clone(),
        items: matrix.items.clone(),
        values,
        observed,
    })
}

/// Item-item neighbourhoods: for every item, at most `k` other items with
/// positive similarity, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemModel {
    items: Vec<ActionId>,
    neighbours: Vec<Vec<(ActionId, f64)>>,
}

impl ItemModel {
    pub fn neighbours(&self, item: ActionId) -> Result<&[(ActionId, f64)]> {
        let i = self
            .items
            .binary_search(&item)
            .map_err(|_| Error::UnknownAction(item.0))?;
        Ok(&self.neighbours[i])
    }

    pub fn items(&self) -> &[ActionId] {
        &self.items
    }
}

pub fn build_item_model(filled: &FilledMatrix, k_items: usize) -> Result<ItemModel> {
    if k_items == 0 {
        return Err(Error::InvalidNeighbourhood("k_items must be at least 1"));
    }
    let n_users = filled.users.len();
    let n_items = filled.items.len();
    let norms: Vec<f64> = (0..n_items)
        .map(|i| (0..n_users).map(|u| filled.at(u, i) * filled.at(u, i)).sum())
        .collect();

    let mut sim = vec![0.0; n_items * n_items];
    for i in 0..n_items {
        if norms[i] == 0.0 {
            continue;
        }
        for j in (i + 1)..n_items {
            if norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = (0..n_users).map(|u| filled.at(u, i) * filled.at(u, j)).sum();
            let s = cosine(dot, norms[i], norms[j]);
            sim[i * n_items + j] = s;
            sim[j * n_items + i] = s;
        }
    }

    let neighbours = (0..n_items)
        .map(|i| {
            let mut list: Vec<(ActionId, f64)> = (0..n_items)
                .filter(|&j| j != i)
                .map(|j| (filled.items[j], sim[i * n_items + j]))
                .filter(|&(_, s)| s > 0.0)
                .collect();
            list.sort_by(by_similarity);
            list.truncate(k_items);
            list
        })
        .collect();

    Ok(ItemModel {
        items: filled.items.clone(),
        neighbours,
    })
}

/// Similarity-weighted mean of the user's filled ratings over the item's
/// neighbours; 0 when the item has none.
pub fn predict(model: &ItemModel, filled: &FilledMatrix, user: UserId, item: ActionId) -> Result<f64> {
    let u = filled
        .users
        .binary_search(&user)
        .map_err(|_| Error::UnknownUser(user.0))?;
    let neighbours = model.neighbours(item)?;
    let (mut num, mut den) = (0.0, 0.0);
    for &(j, s) in neighbours {
        let ji = filled.items.binary_search(&j).map_err(|_| Error::UnknownAction(j.0))?;
        num += s * filled.at(u, ji);
        den += s;
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// Score the CF branch assigns to `item` for `user`.
///
/// A user with ratings in `matrix` gets [`predict`]. A user without any
/// (the cold-start case) gets the mean filled rating of the other users in
/// the matrix, i.e. the group's consensus.
pub fn group_score(
    model: &ItemModel,
    filled: &FilledMatrix,
    matrix: &RatingMatrix,
    user: UserId,
    item: ActionId,
) -> Result<f64> {
    if matrix.has_ratings(user) {
        return predict(model, filled, user, item);
    }
    let ui = filled
        .users
        .binary_search(&user)
        .map_err(|_| Error::UnknownUser(user.0))?;
    let ii = filled
        .items
        .binary_search(&item)
        .map_err(|_| Error::UnknownAction(item.0))?;
    let others = filled.users.len() - 1;
    if others == 0 {
        return Ok(0.0);
    }
    let sum: f64 = (0..filled.users.len())
        .filter(|&v| v != ui)
        .map(|v| filled.at(v, ii))
        .sum();
    Ok(sum / others as f64)
}

/// The available action with the highest [`group_score`]; ties go to the
/// lowest action id, so an empty history yields the lowest available id.
///
/// `matrix` is expected to be restricted to the user's social group (see
/// [`GroupModel`]).
pub fn social_group_action(
    model: &ItemModel,
    filled: &FilledMatrix,
    matrix: &RatingMatrix,
    user: UserId,
    available: &[ActionId],
) -> Result<ActionId> {
    if available.is_empty() {
        return Err(Error::EmptyActionSpace);
    }
    if matrix.group_of(user).is_none() {
        return Err(Error::UnknownUser(user.0));
    }
    let mut best: Option<(ActionId, f64)> = None;
    for &a in available {
        let score = group_score(model, filled, matrix, user, a)?;
        let better = match best {
            None => true,
            Some((ba, bs)) => score > bs || (score == bs && a < ba),
        };
        if better {
            best = Some((a, score));
        }
    }
    Ok(best.map(|(a, _)| a).unwrap_or(available[0]))
}

/// The `n` best-scored items for a user, best first.
pub fn top_n(
    model: &ItemModel,
    filled: &FilledMatrix,
    matrix: &RatingMatrix,
    user: UserId,
    n: usize,
) -> Result<Vec<(ActionId, f64)>> {
    let mut scored = filled
        .items
        .iter()
        .map(|&i| group_score(model, filled, matrix, user, i).map(|s| (i, s)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(by_similarity);
    scored.truncate(n);
    Ok(scored)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbourhood {
    pub k_users: usize,
    pub k_items: usize,
}

impl Default for Neighbourhood {
    fn default() -> Self {
        Neighbourhood {
            k_users: 5,
            k_items: 10,
        }
    }
}

/// CF state for one user, computed from the transactions of the user's
/// social group.
///
/// When a state is given and the group has transactions logged in it, only
/// those are used; otherwise all of the group's transactions are.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupModel {
    pub user: UserId,
    pub matrix: RatingMatrix,
    pub filled: FilledMatrix,
    pub model: ItemModel,
}

impl GroupModel {
    pub fn build(
        items: &[ActionId],
        roster: &BTreeMap<UserId, GroupId>,
        transactions: &[Transaction],
        user: UserId,
        state: Option<StateId>,
        sizes: Neighbourhood,
    ) -> Result<Self> {
        let group = *roster.get(&user).ok_or(Error::UnknownUser(user.0))?;
        let members: BTreeMap<UserId, GroupId> = roster
            .iter()
            .filter(|(_, g)| **g == group)
            .map(|(u, g)| (*u, *g))
            .collect();
        let in_group = |t: &&Transaction| members.contains_key(&t.user);
        let in_state = state.filter(|s| transactions.iter().filter(in_group).any(|t| t.state == *s));
        let selected = transactions
            .iter()
            .filter(in_group)
            .filter(|t| in_state.is_none_or(|s| t.state == s));
        let matrix = RatingMatrix::from_transactions(items.iter().copied(), members.clone(), selected)?;
        let filled = fill_vacant(&matrix, sizes.k_users)?;
        let model = build_item_model(&filled, sizes.k_items)?;
        Ok(GroupModel {
            user,
            matrix,
            filled,
            model,
        })
    }

    pub fn recommend(&self, available: &[ActionId]) -> Result<ActionId> {
        social_group_action(&self.model, &self.filled, &self.matrix, self.user, available)
    }
}
