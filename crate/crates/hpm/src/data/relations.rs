//! Item-to-item relations and the two-level relation graph.
//!
//! Four directed relations connect items: co-purchase (also_buy) and
//! shared brand act as complement signals, co-view (also_view) and
//! same-category-with-similar-price as substitute signals. Every item
//! edge is also projected onto the category level, so the graph carries
//! edges over dense item indices and dense category indices.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Temporal behavior family a relation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Complements tend to be bought shortly after one another.
    Complement,
    /// Substitutes are avoided right after a purchase but attractive
    /// again later.
    Substitute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    AlsoBuy,
    AlsoView,
    SameBrand,
    SameCatSimilarPrice,
}

pub const RELATION_COUNT: usize = 4;

impl Relation {
    pub const ALL: [Relation; RELATION_COUNT] = [
        Relation::AlsoBuy,
        Relation::AlsoView,
        Relation::SameBrand,
        Relation::SameCatSimilarPrice,
    ];

    /// Dense index into relation embedding tables.
    pub fn index(self) -> usize {
        match self {
            Relation::AlsoBuy => 0,
            Relation::AlsoView => 1,
            Relation::SameBrand => 2,
            Relation::SameCatSimilarPrice => 3,
        }
    }

    pub fn family(self) -> Family {
        match self {
            Relation::AlsoBuy | Relation::SameBrand => Family::Complement,
            Relation::AlsoView | Relation::SameCatSimilarPrice => Family::Substitute,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::AlsoBuy => "also_buy",
            Relation::AlsoView => "also_view",
            Relation::SameBrand => "same_brand",
            Relation::SameCatSimilarPrice => "same_cat_similar_price",
        }
    }
}

/// Directed edge set over dense indices, kept sorted for deterministic
/// iteration and serialization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeSet {
    pairs: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn insert(&mut self, head: usize, tail: usize) {
        self.pairs.insert((head, tail));
    }

    pub fn contains(&self, head: usize, tail: usize) -> bool {
        self.pairs.contains(&(head, tail))
    }

    /// True when the two entities are linked in either direction.
    pub fn connects(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a, b)) || self.pairs.contains(&(b, a))
    }

    /// All tails reachable from `head`, in ascending order.
    pub fn tails(&self, head: usize) -> impl Iterator<Item = usize> + '_ {
        self.pairs
            .range((head, 0)..=(head, usize::MAX))
            .map(|&(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Relation edges at the item level plus their category projections.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationGraph {
    item_edges: [EdgeSet; RELATION_COUNT],
    cat_edges: [EdgeSet; RELATION_COUNT],
}

impl RelationGraph {
    pub fn items(&self, rel: Relation) -> &EdgeSet {
        &self.item_edges[rel.index()]
    }

    pub fn categories(&self, rel: Relation) -> &EdgeSet {
        &self.cat_edges[rel.index()]
    }

    /// Inserts an item edge together with its category projection.
    /// Item self-edges are dropped; category self-edges are kept because
    /// distinct items of one category may legitimately relate.
    pub fn insert_item_edge(
        &mut self,
        rel: Relation,
        head: usize,
        tail: usize,
        head_cat: usize,
        tail_cat: usize,
    ) {
        if head == tail {
            return;
        }
        self.item_edges[rel.index()].insert(head, tail);
        self.cat_edges[rel.index()].insert(head_cat, tail_cat);
    }

    pub fn total_item_edges(&self) -> usize {
        self.item_edges.iter().map(EdgeSet::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_follow_relation_semantics() {
        assert_eq!(Relation::AlsoBuy.family(), Family::Complement);
        assert_eq!(Relation::SameBrand.family(), Family::Complement);
        assert_eq!(Relation::AlsoView.family(), Family::Substitute);
        assert_eq!(Relation::SameCatSimilarPrice.family(), Family::Substitute);
    }

    #[test]
    fn indices_are_dense_and_distinct() {
        let mut seen = [false; RELATION_COUNT];
        for rel in Relation::ALL {
            assert!(!seen[rel.index()]);
            seen[rel.index()] = true;
        }
    }

    #[test]
    fn tails_are_sorted_per_head() {
        let mut set = EdgeSet::default();
        set.insert(3, 9);
        set.insert(3, 2);
        set.insert(1, 5);
        set.insert(3, 7);
        let tails: Vec<usize> = set.tails(3).collect();
        assert_eq!(tails, vec![2, 7, 9]);
        assert_eq!(set.tails(2).count(), 0);
    }

    #[test]
    fn connects_ignores_direction() {
        let mut set = EdgeSet::default();
        set.insert(2, 5);
        assert!(set.connects(2, 5));
        assert!(set.connects(5, 2));
        assert!(!set.connects(2, 4));
    }

    #[test]
    fn item_self_edges_are_dropped_but_category_pairs_kept() {
        let mut g = RelationGraph::default();
        g.insert_item_edge(Relation::AlsoView, 4, 4, 2, 2);
        assert!(g.items(Relation::AlsoView).is_empty());
        g.insert_item_edge(Relation::AlsoView, 4, 5, 2, 2);
        assert!(g.items(Relation::AlsoView).contains(4, 5));
        assert!(g.categories(Relation::AlsoView).contains(2, 2));
    }
}
