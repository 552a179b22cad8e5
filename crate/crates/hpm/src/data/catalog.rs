//! Dense index catalog for items and categories.
//!
//! External string ids are mapped to dense indices starting at 1; index 0
//! is reserved as the padding sentinel at both levels. Indices are
//! assigned in lexicographic order of the external id, so the mapping is
//! independent of input file ordering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Padding index at both the item and category level.
pub const PAD: usize = 0;

/// Per-item attributes carried from metadata into the catalog.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemAttrs {
    pub leaf_category: String,
    pub brand: Option<String>,
    pub price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "CatalogSerde", into = "CatalogSerde")]
pub struct Catalog {
    item_ids: Vec<String>,
    cat_names: Vec<String>,
    item_category: Vec<usize>,
    item_brand: Vec<Option<String>>,
    item_price: Vec<Option<f64>>,
    item_index: BTreeMap<String, usize>,
    cat_index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CatalogSerde {
    item_ids: Vec<String>,
    cat_names: Vec<String>,
    item_category: Vec<usize>,
    item_brand: Vec<Option<String>>,
    item_price: Vec<Option<f64>>,
}

impl From<Catalog> for CatalogSerde {
    fn from(c: Catalog) -> Self {
        CatalogSerde {
            item_ids: c.item_ids,
            cat_names: c.cat_names,
            item_category: c.item_category,
            item_brand: c.item_brand,
            item_price: c.item_price,
        }
    }
}

impl From<CatalogSerde> for Catalog {
    fn from(s: CatalogSerde) -> Self {
        let item_index = s
            .item_ids
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let cat_index = s
            .cat_names
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, name)| (name.clone(), i))
            .collect();
        Catalog {
            item_ids: s.item_ids,
            cat_names: s.cat_names,
            item_category: s.item_category,
            item_brand: s.item_brand,
            item_price: s.item_price,
            item_index,
            cat_index,
        }
    }
}

impl Catalog {
    /// Builds the catalog from (external id, attributes) pairs. The map
    /// keys being sorted fixes the dense index assignment.
    pub fn build(items: &BTreeMap<String, ItemAttrs>) -> Catalog {
        let mut cat_names = vec!["<pad>".to_string()];
        let mut cat_index = BTreeMap::new();
        let mut leaf_names: Vec<&String> =
            items.values().map(|a| &a.leaf_category).collect();
        leaf_names.sort();
        leaf_names.dedup();
        for name in leaf_names {
            cat_index.insert(name.clone(), cat_names.len());
            cat_names.push(name.clone());
        }

        let mut item_ids = vec!["<pad>".to_string()];
        let mut item_index = BTreeMap::new();
        let mut item_category = vec![PAD];
        let mut item_brand = vec![None];
        let mut item_price = vec![None];
        for (id, attrs) in items {
            item_index.insert(id.clone(), item_ids.len());
            item_ids.push(id.clone());
            item_category.push(cat_index[&attrs.leaf_category]);
            item_brand.push(attrs.brand.clone());
            item_price.push(attrs.price);
        }

        Catalog {
            item_ids,
            cat_names,
            item_category,
            item_brand,
            item_price,
            item_index,
            cat_index,
        }
    }

    /// Number of real items (excluding the padding slot).
    pub fn n_items(&self) -> usize {
        self.item_ids.len() - 1
    }

    /// Number of real categories (excluding the padding slot).
    pub fn n_categories(&self) -> usize {
        self.cat_names.len() - 1
    }

    pub fn item_index(&self, external_id: &str) -> Option<usize> {
        self.item_index.get(external_id).copied()
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.cat_index.get(name).copied()
    }

    pub fn item_id(&self, idx: usize) -> &str {
        &self.item_ids[idx]
    }

    pub fn category_name(&self, idx: usize) -> &str {
        &self.cat_names[idx]
    }

    /// Dense category index of an item; the padding item maps to the
    /// padding category.
    pub fn category_of(&self, item: usize) -> usize {
        self.item_category[item]
    }

    pub fn brand_of(&self, item: usize) -> Option<&str> {
        self.item_brand[item].as_deref()
    }

    pub fn price_of(&self, item: usize) -> Option<f64> {
        self.item_price[item]
    }

    /// All real item indices, 1..=n_items.
    pub fn item_indices(&self) -> impl Iterator<Item = usize> {
        1..self.item_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.item_ids.len();
        if self.item_category.len() != n
            || self.item_brand.len() != n
            || self.item_price.len() != n
        {
            return Err(Error::DataIntegrity(
                "catalog attribute columns disagree in length".into(),
            ));
        }
        if n == 0 || self.cat_names.is_empty() {
            return Err(Error::DataIntegrity("catalog lost its padding slot".into()));
        }
        for (i, &c) in self.item_category.iter().enumerate() {
            if c >= self.cat_names.len() {
                return Err(Error::DataIntegrity(format!(
                    "item {i} references category {c} outside the catalog"
                )));
            }
            if i > 0 && c == PAD {
                return Err(Error::DataIntegrity(format!(
                    "real item {i} mapped to the padding category"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Catalog {
        let mut items = BTreeMap::new();
        items.insert(
            "b-item".to_string(),
            ItemAttrs {
                leaf_category: "tools".into(),
                brand: Some("acme".into()),
                price: Some(10.0),
            },
        );
        items.insert(
            "a-item".to_string(),
            ItemAttrs { leaf_category: "garden".into(), brand: None, price: None },
        );
        Catalog::build(&items)
    }

    #[test]
    fn indices_are_dense_and_sorted() {
        let c = sample();
        assert_eq!(c.n_items(), 2);
        assert_eq!(c.n_categories(), 2);
        assert_eq!(c.item_index("a-item"), Some(1));
        assert_eq!(c.item_index("b-item"), Some(2));
        assert_eq!(c.category_index("garden"), Some(1));
        assert_eq!(c.category_index("tools"), Some(2));
        assert_eq!(c.category_of(2), 2);
        assert_eq!(c.category_of(PAD), PAD);
    }

    #[test]
    fn unknown_ids_resolve_to_none() {
        let c = sample();
        assert_eq!(c.item_index("missing"), None);
        assert_eq!(c.category_index("missing"), None);
    }

    #[test]
    fn serde_round_trip_rebuilds_lookup() {
        let c = sample();
        let json = serde_json::to_string(&c).unwrap();
        let back: Catalog = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
        assert_eq!(back.item_index("b-item"), Some(2));
        back.validate().unwrap();
    }
}
