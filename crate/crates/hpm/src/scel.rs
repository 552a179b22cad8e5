//! Temporal relation kernels and semantics-enhanced target embeddings.
//!
//! A candidate item is tied to entries of the user's history through the
//! relation graph. Every relation contributes an intensity: the sum,
//! over related history entries, of a temporal kernel evaluated at the
//! age of the entry in days. Complement relations use a decay kernel
//! that peaks immediately after an interaction; substitute relations use
//! a kernel that is negative at first and turns positive around a
//! learned revisit horizon. The enhanced candidate embedding is the base
//! row plus the intensity-weighted sum of relation embeddings.
//!
//! Kernel scales are trainable. The raw parameters are unconstrained and
//! pass through softplus, so sigma and mu stay strictly positive no
//! matter what the optimizer does. Everything exists twice: a plain
//! floating-point path for evaluation and a tape path for training.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::data::{EdgeSet, Family, Relation, RelationGraph, PAD, RELATION_COUNT};
use crate::error::{Error, Result};
use crate::kge::{EmbeddingTables, Level};
use crate::numeric::{Matrix, NodeId, Tape};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn level_slot(level: Level) -> usize {
    match level {
        Level::Item => 0,
        Level::Category => 1,
    }
}

/// Trainable kernel scales, a (sigma, mu) pair per embedding level,
/// stored as one 1 x 4 row of unconstrained parameters in the column
/// order sigma_item, mu_item, sigma_cat, mu_cat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub rho: Matrix,
}

impl KernelParams {
    pub fn new(
        sigma_item: f64,
        mu_item: f64,
        sigma_cat: f64,
        mu_cat: f64,
    ) -> Result<Self> {
        let days = [sigma_item, mu_item, sigma_cat, mu_cat];
        if days.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::Config(format!(
                "kernel scales must be positive, got {days:?}"
            )));
        }
        let rho = Matrix::from_vec(1, 4, days.iter().map(|&v| softplus_inv(v)).collect())?;
        Ok(Self { rho })
    }

    pub fn sigma(&self, level: Level) -> f64 {
        softplus(self.rho.get(0, 2 * level_slot(level)))
    }

    pub fn mu(&self, level: Level) -> f64 {
        softplus(self.rho.get(0, 2 * level_slot(level) + 1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.shape() != (1, 4) {
            return Err(Error::Shape(format!(
                "kernel parameter row must be 1x4, got {}x{}",
                self.rho.rows(),
                self.rho.cols()
            )));
        }
        if !self.rho.is_finite() {
            return Err(Error::NonFinite("kernel parameters".into()));
        }
        Ok(())
    }

    /// Registers the raw row as a tape leaf and maps it through softplus
    /// into per-level sigma and mu nodes.
    pub fn leaves(&self, tape: &mut Tape) -> Result<KernelNodes> {
        let rho = tape.param(self.rho.clone());
        let mut sigma = [rho; 2];
        let mut mu = [rho; 2];
        for slot in 0..2 {
            let s_raw = tape.slice_cols(rho, 2 * slot, 2 * slot + 1)?;
            let m_raw = tape.slice_cols(rho, 2 * slot + 1, 2 * slot + 2)?;
            sigma[slot] = tape.softplus(s_raw);
            mu[slot] = tape.softplus(m_raw);
        }
        Ok(KernelNodes { rho, sigma, mu })
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self::new(7.0, 30.0, 7.0, 30.0).expect("positive defaults")
    }
}

/// Tape-side view of [`KernelParams`]: the raw leaf plus softplus-mapped
/// scalar nodes per level.
pub struct KernelNodes {
    pub rho: NodeId,
    sigma: [NodeId; 2],
    mu: [NodeId; 2],
}

impl KernelNodes {
    pub fn sigma(&self, level: Level) -> NodeId {
        self.sigma[level_slot(level)]
    }

    pub fn mu(&self, level: Level) -> NodeId {
        self.mu[level_slot(level)]
    }
}

fn normal_density(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * TAU.sqrt())
}

/// Decay kernel for complement relations: a zero-mean Gaussian density
/// over the age of the interaction.
pub fn kernel_complement(dt_days: f64, sigma: f64) -> f64 {
    normal_density(dt_days, 0.0, sigma)
}

/// Kernel for substitute relations: negative right after the related
/// interaction, crossing zero at mu/2 and peaking at mu.
pub fn kernel_substitute(dt_days: f64, sigma: f64, mu: f64) -> f64 {
    normal_density(dt_days, mu, sigma) - normal_density(dt_days, 0.0, sigma)
}

pub fn kernel_value(family: Family, dt_days: f64, sigma: f64, mu: f64) -> f64 {
    match family {
        Family::Complement => kernel_complement(dt_days, sigma),
        Family::Substitute => kernel_substitute(dt_days, sigma, mu),
    }
}

/// Ages in days of the history entries related to `target` under the
/// given edge set. Padding entries never contribute.
pub fn related_ages(
    entities: &[usize],
    times: &[i64],
    target: usize,
    target_time: i64,
    edges: &EdgeSet,
) -> Vec<f64> {
    entities
        .iter()
        .zip(times)
        .filter(|&(&e, _)| e != PAD && edges.connects(e, target))
        .map(|(_, &t)| (target_time - t) as f64 / SECONDS_PER_DAY)
        .collect()
}

fn level_edges(graph: &RelationGraph, level: Level, rel: Relation) -> &EdgeSet {
    match level {
        Level::Item => graph.items(rel),
        Level::Category => graph.categories(rel),
    }
}

/// Intensity of one relation for a (history, target) pair: the kernel
/// summed over the ages of related history entries.
pub fn relation_intensity(
    entities: &[usize],
    times: &[i64],
    target: usize,
    target_time: i64,
    rel: Relation,
    edges: &EdgeSet,
    sigma: f64,
    mu: f64,
) -> f64 {
    related_ages(entities, times, target, target_time, edges)
        .iter()
        .map(|&dt| kernel_value(rel.family(), dt, sigma, mu))
        .sum()
}

/// All four relation intensities for one target at one level.
pub fn target_intensities(
    entities: &[usize],
    times: &[i64],
    target: usize,
    target_time: i64,
    graph: &RelationGraph,
    level: Level,
    kernels: &KernelParams,
) -> [f64; RELATION_COUNT] {
    let (sigma, mu) = (kernels.sigma(level), kernels.mu(level));
    let mut out = [0.0; RELATION_COUNT];
    for rel in Relation::ALL {
        out[rel.index()] = relation_intensity(
            entities,
            times,
            target,
            target_time,
            rel,
            level_edges(graph, level, rel),
            sigma,
            mu,
        );
    }
    out
}

/// Base embedding plus the intensity-weighted sum of relation rows.
pub fn enhance(
    base: &[f64],
    relation_table: &Matrix,
    intensities: &[f64; RELATION_COUNT],
) -> Vec<f64> {
    let mut out = base.to_vec();
    for (r, &f) in intensities.iter().enumerate() {
        for (o, &e) in out.iter_mut().zip(relation_table.row(r)) {
            *o += f * e;
        }
    }
    out
}

/// Enhanced item and category embeddings for one candidate, plain path.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedTarget {
    pub item: Vec<f64>,
    pub category: Vec<f64>,
    pub item_intensities: [f64; RELATION_COUNT],
    pub category_intensities: [f64; RELATION_COUNT],
}

/// Computes both levels of enhancement for a candidate interaction at
/// `target_time`, reading base rows straight from the tables.
#[allow(clippy::too_many_arguments)]
pub fn enhance_target(
    tables: &EmbeddingTables,
    graph: &RelationGraph,
    kernels: &KernelParams,
    items: &[usize],
    cats: &[usize],
    times: &[i64],
    target_item: usize,
    target_cat: usize,
    target_time: i64,
) -> EnhancedTarget {
    let item_intensities = target_intensities(
        items,
        times,
        target_item,
        target_time,
        graph,
        Level::Item,
        kernels,
    );
    let category_intensities = target_intensities(
        cats,
        times,
        target_cat,
        target_time,
        graph,
        Level::Category,
        kernels,
    );
    EnhancedTarget {
        item: enhance(tables.item.row(target_item), &tables.relation, &item_intensities),
        category: enhance(
            tables.category.row(target_cat),
            &tables.relation,
            &category_intensities,
        ),
        item_intensities,
        category_intensities,
    }
}

fn density_node(
    tape: &mut Tape,
    x: NodeId,
    mean: Option<NodeId>,
    sigma: NodeId,
) -> Result<NodeId> {
    let centered = match mean {
        Some(m) => {
            let neg = tape.scale_const(m, -1.0);
            tape.add_scalar(x, neg)?
        }
        None => x,
    };
    let z = tape.div_scalar(centered, sigma)?;
    let zz = tape.mul(z, z)?;
    let scaled = tape.scale_const(zz, -0.5);
    let e = tape.exp(scaled);
    let one = tape.constant(Matrix::scalar(1.0));
    let inv_sigma = tape.div_scalar(one, sigma)?;
    let normed = tape.mul_scalar(e, inv_sigma)?;
    Ok(tape.scale_const(normed, 1.0 / TAU.sqrt()))
}

/// Tape version of one relation intensity over precomputed ages.
pub fn intensity_node(
    tape: &mut Tape,
    ages_days: &[f64],
    family: Family,
    sigma: NodeId,
    mu: NodeId,
) -> Result<NodeId> {
    let dt = tape.constant(Matrix::from_vec(1, ages_days.len(), ages_days.to_vec())?);
    let phi = match family {
        Family::Complement => density_node(tape, dt, None, sigma)?,
        Family::Substitute => {
            let revisit = density_node(tape, dt, Some(mu), sigma)?;
            let decay = density_node(tape, dt, None, sigma)?;
            tape.sub(revisit, decay)?
        }
    };
    Ok(tape.row_sum(phi))
}

/// Tape version of [`target_intensities`]; relations with no related
/// history entries stay `None` and drop out of the enhancement sum.
#[allow(clippy::too_many_arguments)]
pub fn target_intensity_nodes(
    tape: &mut Tape,
    entities: &[usize],
    times: &[i64],
    target: usize,
    target_time: i64,
    graph: &RelationGraph,
    level: Level,
    kernels: &KernelNodes,
) -> Result<[Option<NodeId>; RELATION_COUNT]> {
    let mut out = [None; RELATION_COUNT];
    for rel in Relation::ALL {
        let edges = level_edges(graph, level, rel);
        let ages = related_ages(entities, times, target, target_time, edges);
        if ages.is_empty() {
            continue;
        }
        out[rel.index()] = Some(intensity_node(
            tape,
            &ages,
            rel.family(),
            kernels.sigma(level),
            kernels.mu(level),
        )?);
    }
    Ok(out)
}

/// Tape version of [`enhance`]: base row plus intensity-scaled relation
/// rows gathered from the relation leaf.
pub fn enhance_node(
    tape: &mut Tape,
    base: NodeId,
    relation_leaf: NodeId,
    intensities: &[Option<NodeId>; RELATION_COUNT],
) -> Result<NodeId> {
    let mut acc = base;
    for (r, f) in intensities.iter().enumerate() {
        let Some(f) = f else { continue };
        let row = tape.gather(relation_leaf, &[r])?;
        let scaled = tape.mul_scalar(row, *f)?;
        acc = tape.add(acc, scaled)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Gradients;

    fn unit_kernels() -> KernelParams {
        KernelParams::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn complement_matches_closed_form() {
        assert!((kernel_complement(0.0, 1.0) - 0.3989422804014327).abs() < 1e-15);
        assert!((kernel_complement(2.5, 1.7) - 0.07958881881395721).abs() < 1e-15);
    }

    #[test]
    fn complement_three_sigma_ratio() {
        for sigma in [0.5, 1.0, 7.0] {
            let ratio = kernel_complement(3.0 * sigma, sigma) / kernel_complement(0.0, sigma);
            assert!((ratio - 0.011108996538242306).abs() < 1e-12, "sigma {sigma}");
        }
    }

    #[test]
    fn complement_strictly_decreasing_on_grid() {
        for sigma in [0.8, 7.0] {
            let mut prev = kernel_complement(0.0, sigma);
            for k in 1..100 {
                let dt = 5.0 * sigma * k as f64 / 99.0;
                let v = kernel_complement(dt, sigma);
                assert!(v < prev, "not decreasing at dt {dt} for sigma {sigma}");
                assert!(v > 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn substitute_matches_closed_form() {
        assert!((kernel_substitute(0.0, 1.0, 1.0) + 0.15697155588228934).abs() < 1e-15);
        assert!((kernel_substitute(4.0, 2.0, 9.0) + 0.01823133300980976).abs() < 1e-15);
        assert!((kernel_substitute(30.0, 7.0, 30.0) - 0.05698590114372862).abs() < 1e-15);
    }

    #[test]
    fn substitute_zero_exactly_at_half_mu() {
        for (sigma, mu) in [(1.0, 1.0), (7.0, 30.0), (2.5, 11.0)] {
            assert_eq!(kernel_substitute(mu / 2.0, sigma, mu), 0.0);
        }
    }

    #[test]
    fn substitute_negative_early_positive_at_mu() {
        for (sigma, mu) in [(1.0, 1.0), (7.0, 30.0), (0.3, 2.0)] {
            assert!(kernel_substitute(0.0, sigma, mu) < 0.0);
            assert!(kernel_substitute(mu, sigma, mu) > 0.0);
        }
    }

    #[test]
    fn params_map_through_softplus_and_stay_positive() {
        let k = KernelParams::default();
        assert!((k.sigma(Level::Item) - 7.0).abs() < 1e-9);
        assert!((k.mu(Level::Item) - 30.0).abs() < 1e-9);
        assert!((k.sigma(Level::Category) - 7.0).abs() < 1e-9);
        assert!((k.mu(Level::Category) - 30.0).abs() < 1e-9);

        let mut wild = k.clone();
        for v in wild.rho.as_mut_slice() {
            *v = -40.0;
        }
        for level in [Level::Item, Level::Category] {
            assert!(wild.sigma(level) > 0.0);
            assert!(wild.mu(level) > 0.0);
        }
        assert!(KernelParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(KernelParams::new(1.0, -2.0, 1.0, 1.0).is_err());
    }

    fn toy_edges(pairs: &[(usize, usize)]) -> EdgeSet {
        let mut edges = EdgeSet::default();
        for &(a, b) in pairs {
            edges.insert(a, b);
        }
        edges
    }

    #[test]
    fn related_ages_skip_padding_and_unrelated() {
        let edges = toy_edges(&[(2, 9), (9, 4)]);
        let entities = [PAD, 2, 3, 4];
        let day = SECONDS_PER_DAY as i64;
        let times = [0, 100 * day, 101 * day, 102 * day];
        let ages = related_ages(&entities, &times, 9, 103 * day, &edges);
        assert_eq!(ages, vec![3.0, 1.0]);
    }

    #[test]
    fn intensity_single_entry_is_kernel_value() {
        let edges = toy_edges(&[(5, 8)]);
        let t = 7_777_777;
        let got = relation_intensity(&[5], &[t], 8, t, Relation::AlsoBuy, &edges, 1.0, 1.0);
        assert!((got - 0.3989422804014327).abs() < 1e-15);
    }

    #[test]
    fn intensity_two_entries_add_up() {
        let edges = toy_edges(&[(1, 8), (2, 8)]);
        let quarter_day = (SECONDS_PER_DAY / 4.0) as i64;
        let times = [0, 13 * quarter_day];
        let target_time = 18 * quarter_day;
        let got = relation_intensity(
            &[1, 2],
            &times,
            8,
            target_time,
            Relation::SameBrand,
            &edges,
            2.0,
            1.0,
        );
        assert!((got - 0.17995031019302124).abs() < 1e-15, "{got}");
    }

    #[test]
    fn intensity_splits_additively_over_history() {
        let edges = toy_edges(&[(1, 9), (3, 9), (4, 9)]);
        let entities = [1, 2, 3, 4, 5];
        let day = SECONDS_PER_DAY as i64;
        let times: Vec<i64> = (0..5).map(|k| k * day).collect();
        let t = 6 * day;
        let whole = relation_intensity(&entities, &times, 9, t, Relation::AlsoView, &edges, 3.0, 5.0);
        let left = relation_intensity(&entities[..2], &times[..2], 9, t, Relation::AlsoView, &edges, 3.0, 5.0);
        let right = relation_intensity(&entities[2..], &times[2..], 9, t, Relation::AlsoView, &edges, 3.0, 5.0);
        assert!((whole - (left + right)).abs() < 1e-15);
    }

    fn toy_graph() -> RelationGraph {
        let mut graph = RelationGraph::default();
        graph.insert_item_edge(Relation::AlsoBuy, 1, 3, 1, 2);
        graph.insert_item_edge(Relation::AlsoView, 2, 3, 1, 2);
        graph.insert_item_edge(Relation::SameBrand, 4, 3, 2, 2);
        graph
    }

    #[test]
    fn tape_intensities_match_plain_path() {
        let graph = toy_graph();
        let kernels = KernelParams::new(2.0, 5.0, 1.5, 9.0).unwrap();
        let day = SECONDS_PER_DAY as i64;
        let items = [PAD, 1, 2, 4];
        let times = [0, 4 * day, 5 * day, 6 * day];
        let plain = target_intensities(&items, &times, 3, 7 * day, &graph, Level::Item, &kernels);

        let mut tape = Tape::new();
        let nodes = kernels.leaves(&mut tape).unwrap();
        let on_tape = target_intensity_nodes(
            &mut tape,
            &items,
            &times,
            3,
            7 * day,
            &graph,
            Level::Item,
            &nodes,
        )
        .unwrap();
        for (rel, node) in Relation::ALL.iter().zip(&on_tape) {
            let want = plain[rel.index()];
            match node {
                Some(id) => {
                    let got = tape.value(*id).item().unwrap();
                    assert!((got - want).abs() < 1e-12, "{}: {got} vs {want}", rel.name());
                }
                None => assert_eq!(want, 0.0, "{}", rel.name()),
            }
        }
    }

    fn rho_grad_for(kernels: &KernelParams, shift: Option<(usize, f64)>) -> (f64, Option<Gradients>) {
        let graph = toy_graph();
        let mut shifted = kernels.clone();
        if let Some((col, delta)) = shift {
            let v = shifted.rho.get(0, col);
            shifted.rho.set(0, col, v + delta);
        }
        let day = SECONDS_PER_DAY as i64;
        let items = [1, 2, 4];
        let times = [4 * day, 5 * day, 6 * day];
        let mut tape = Tape::new();
        let nodes = shifted.leaves(&mut tape).unwrap();
        let intensities = target_intensity_nodes(
            &mut tape,
            &items,
            &times,
            3,
            7 * day,
            &graph,
            Level::Item,
            &nodes,
        )
        .unwrap();
        let parts: Vec<NodeId> = intensities.iter().flatten().copied().collect();
        let stacked = tape.concat_rows(&parts).unwrap();
        let sq = tape.mul(stacked, stacked).unwrap();
        let loss = tape.sum_all(sq);
        let value = tape.value(loss).item().unwrap();
        if shift.is_some() {
            (value, None)
        } else {
            (value, Some(tape.backward(loss).unwrap()))
        }
    }

    #[test]
    fn kernel_gradients_pass_finite_difference() {
        let kernels = KernelParams::new(2.0, 5.0, 1.5, 9.0).unwrap();
        let (_, grads) = rho_grad_for(&kernels, None);
        let grads = grads.unwrap();
        let mut tape_probe = Tape::new();
        let nodes = kernels.leaves(&mut tape_probe).unwrap();
        let grad = grads.get(nodes.rho).expect("rho gradient");
        let h = 1e-5;
        for col in 0..2 {
            let (up, _) = rho_grad_for(&kernels, Some((col, h)));
            let (down, _) = rho_grad_for(&kernels, Some((col, -h)));
            let fd = (up - down) / (2.0 * h);
            let got = grad.get(0, col);
            assert!(
                (got - fd).abs() <= 1e-4 * fd.abs().max(1e-4),
                "col {col}: analytic {got} vs fd {fd}"
            );
        }
        for col in 2..4 {
            assert_eq!(grad.get(0, col), 0.0);
        }
    }

    #[test]
    fn zero_intensities_leave_base_untouched() {
        let table = Matrix::from_rows(&[
            vec![1.0, -1.0],
            vec![0.5, 0.5],
            vec![2.0, 0.0],
            vec![0.0, 3.0],
        ]);
        let base = [0.25, -0.75];
        let out = enhance(&base, &table, &[0.0; RELATION_COUNT]);
        assert_eq!(out, base.to_vec());
    }

    #[test]
    fn unit_intensity_adds_exactly_one_relation_row() {
        let table = Matrix::from_rows(&[
            vec![1.0, -1.0],
            vec![0.5, 0.5],
            vec![2.0, 0.0],
            vec![0.0, 3.0],
        ]);
        let mut f = [0.0; RELATION_COUNT];
        f[Relation::SameBrand.index()] = 1.0;
        let out = enhance(&[0.1, 0.2], &table, &f);
        assert_eq!(out, vec![2.1, 0.2]);
    }

    #[test]
    fn enhancement_matches_hand_combination() {
        let table = Matrix::from_rows(&[
            vec![1.0, -1.0],
            vec![0.5, 0.5],
            vec![2.0, 0.0],
            vec![0.0, 3.0],
        ]);
        let f = [0.5, -0.2, 0.0, 0.0];
        let out = enhance(&[1.0, 1.0], &table, &f);
        assert!((out[0] - (1.0 + 0.5 - 0.1)).abs() < 1e-15);
        assert!((out[1] - (1.0 - 0.5 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn enhancement_difference_reconstructs_from_intensities() {
        let mut rng = crate::rng::stream(11, "enhance-prop");
        use rand::Rng;
        let table = {
            let mut m = Matrix::zeros(RELATION_COUNT, 6);
            for v in m.as_mut_slice() {
                *v = rng.random_range(-1.0..1.0);
            }
            m
        };
        let base: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = [0.37, -1.2, 0.0, 2.5];
        let out = enhance(&base, &table, &f);
        for c in 0..6 {
            let expect: f64 = (0..RELATION_COUNT).map(|r| f[r] * table.get(r, c)).sum();
            assert!((out[c] - base[c] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn tape_enhancement_matches_plain() {
        let graph = toy_graph();
        let kernels = unit_kernels();
        let day = SECONDS_PER_DAY as i64;
        let items = [1, 2, 4];
        let times = [4 * day, 5 * day, 6 * day];
        let mut tables = EmbeddingTables::init(6, 4, 4, &mut crate::rng::stream(99, "scel-test"));
        for (r, row) in [[1.0, -1.0], [0.5, 0.5], [2.0, 0.0], [0.0, 3.0]]
            .iter()
            .enumerate()
        {
            tables.relation.row_mut(r)[..2].copy_from_slice(row);
        }
        let plain = enhance_target(
            &tables, &graph, &kernels, &items, &[1, 1, 2], &times, 3, 2, 7 * day,
        );

        let mut tape = Tape::new();
        let nodes = kernels.leaves(&mut tape).unwrap();
        let rel_leaf = tape.param(tables.relation.clone());
        let item_leaf = tape.param(tables.item.clone());
        let base = tape.gather(item_leaf, &[3]).unwrap();
        let intensities = target_intensity_nodes(
            &mut tape, &items, &times, 3, 7 * day, &graph, Level::Item, &nodes,
        )
        .unwrap();
        let enhanced = enhance_node(&mut tape, base, rel_leaf, &intensities).unwrap();
        let got = tape.value(enhanced);
        for c in 0..4 {
            assert!((got.get(0, c) - plain.item[c]).abs() < 1e-12);
        }
    }
}
