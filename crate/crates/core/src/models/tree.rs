//! Regression trees: exact CART on presorted columns and histogram trees on
//! binned columns. Both grow level by level and share the node layout.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng::PipelineRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

/// Flattened binary tree; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn constant(value: f64) -> Self {
        Self { nodes: vec![Node::Leaf { value }] }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature as usize] <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_leaf: 1 }
    }
}

/// Per-feature row orders with the matching sorted values, plus a
/// column-major copy for routing rows through splits.
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
    sorted: Vec<Vec<f64>>,
    columns: Vec<Vec<f64>>,
    /// Earlier feature inducing the same ordered partition candidates, e.g.
    /// a monotone transform of it. Such a feature can never win a split
    /// over its twin, so its scan is skipped whenever the twin is scanned.
    twin: Vec<Option<usize>>,
    rows: usize,
}

fn same_candidates(a: (&[u32], &[f64]), b: (&[u32], &[f64])) -> bool {
    a.0 == b.0 && (1..a.1.len()).all(|k| (a.1[k] > a.1[k - 1]) == (b.1[k] > b.1[k - 1]))
}

impl Presorted {
    pub(crate) fn new(x: &Matrix) -> Self {
        let columns: Vec<Vec<f64>> = (0..x.cols()).map(|j| x.column(j)).collect();
        let mut order: Vec<Vec<u32>> = Vec::with_capacity(x.cols());
        let mut sorted: Vec<Vec<f64>> = Vec::with_capacity(x.cols());
        for col in &columns {
            let mut idx: Vec<u32> = (0..col.len() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            sorted.push(idx.iter().map(|&i| col[i as usize]).collect());
            order.push(idx);
        }
        let twin = (0..columns.len())
            .map(|g| {
                (0..g).find(|&f| same_candidates((&order[f], &sorted[f]), (&order[g], &sorted[g])))
            })
            .collect();
        Self { order, sorted, columns, twin, rows: x.rows() }
    }
}

/// Splittable node statistics must exceed this share of the node's sum of
/// squares, otherwise the node is treated as pure.
const PURITY_EPS: f64 = 1e-12;

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + 0.5 * (hi - lo);
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Between-children sum of squares of a split; the parent term is constant
/// per node and left out.
#[inline]
fn split_score(left_w: f64, left_wy: f64, total_w: f64, total_wy: f64) -> f64 {
    let right_wy = total_wy - left_wy;
    left_wy * left_wy / left_w + right_wy * right_wy / (total_w - left_w)
}

fn gain(left_w: f64, left_wy: f64, total_w: f64, total_wy: f64) -> f64 {
    let right_w = total_w - left_w;
    let right_wy = total_wy - left_wy;
    left_wy * left_wy / left_w + right_wy * right_wy / right_w - total_wy * total_wy / total_w
}

/// Optional per-node feature subsampling.
pub(crate) struct FeatureSampler<'r> {
    pub rng: &'r mut PipelineRng,
    pub per_node: usize,
}

impl FeatureSampler<'_> {
    fn candidates(&mut self, d: usize) -> Vec<usize> {
        if self.per_node >= d {
            return (0..d).collect();
        }
        let mut picked = sample(self.rng, d, self.per_node).into_vec();
        picked.sort_unstable();
        picked
    }
}

const SETTLED: u32 = u32::MAX;

/// Open node of the current level with its weighted target sums.
#[derive(Clone, Copy)]
struct Open {
    id: usize,
    depth: usize,
    w: f64,
    wy: f64,
    wyy: f64,
}

#[derive(Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    left_w: f64,
    left_wy: f64,
}

#[derive(Clone, Copy)]
struct Scan {
    w: f64,
    wy: f64,
    last_x: f64,
}

impl Scan {
    const EMPTY: Self = Self { w: 0.0, wy: 0.0, last_x: f64::NEG_INFINITY };
}

/// Per-row state kept together so the scan touches one cache line per row.
#[derive(Clone, Copy)]
struct RowState {
    y: f64,
    w: f64,
    slot: u32,
}

/// Exact CART grower over presorted columns. Each level makes one
/// sequential pass per feature, routing rows to their open node through a
/// row → node map, so no per-node partitioning is needed.
pub(crate) struct ExactGrower<'a> {
    data: &'a Presorted,
    state: Vec<RowState>,
}

impl<'a> ExactGrower<'a> {
    pub(crate) fn new(data: &'a Presorted) -> Self {
        Self { data, state: vec![RowState { y: 0.0, w: 0.0, slot: SETTLED }; data.rows] }
    }

    /// Variance-reduction splits with mean leaves. `weights` are per-row
    /// multiplicities (bootstrap counts); rows with weight 0 are ignored.
    /// Ties in gain keep the lowest feature index, then the lowest
    /// threshold.
    pub(crate) fn grow(
        &mut self,
        y: &[f64],
        weights: Option<&[u32]>,
        params: &TreeParams,
        mut sampler: Option<FeatureSampler<'_>>,
    ) -> Tree {
        let data = self.data;
        let n = data.rows;
        let d = data.order.len();
        let max_depth = params.max_depth.unwrap_or(usize::MAX);
        let min_leaf = params.min_leaf.max(1) as f64;
        let may_split = |w: f64, depth: usize| depth < max_depth && w >= 2.0 * min_leaf;

        let mut root = Open { id: 0, depth: 0, w: 0.0, wy: 0.0, wyy: 0.0 };
        for (i, st) in self.state.iter_mut().enumerate() {
            let wi = weights.map_or(1.0, |ws| ws[i] as f64);
            *st = RowState { y: y[i], w: wi, slot: if wi > 0.0 { 0 } else { SETTLED } };
            if wi > 0.0 {
                root.w += wi;
                root.wy += wi * y[i];
                root.wyy += wi * y[i] * y[i];
            }
        }
        if root.w == 0.0 || d == 0 {
            let total: f64 = y.iter().sum();
            return Tree::constant(if n == 0 { 0.0 } else { total / n as f64 });
        }

        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut level = vec![root];
        while !level.is_empty() {
            let k = level.len();
            let mut active = vec![false; k];
            // Splits must beat the parent's sum of squares plus a relative margin.
            let mut best_score = vec![0.0; k];
            for (s, o) in level.iter().enumerate() {
                let sse = o.wyy - o.wy * o.wy / o.w;
                active[s] = may_split(o.w, o.depth) && sse > PURITY_EPS * o.wyy;
                best_score[s] = o.wy * o.wy / o.w + PURITY_EPS * sse;
            }
            let allowed: Option<Vec<Vec<bool>>> = sampler.as_mut().map(|smp| {
                (0..k)
                    .map(|s| {
                        let mut mask = vec![false; d];
                        if active[s] {
                            smp.candidates(d).into_iter().for_each(|f| mask[f] = true);
                        }
                        mask
                    })
                    .collect()
            });

            let mut best: Vec<Option<Split>> = vec![None; k];
            let mut enabled = vec![false; k];
            let mut scans = vec![Scan::EMPTY; k];
            let scanned = |s: usize, f: usize| active[s] && allowed.as_ref().is_none_or(|m| m[s][f]);
            for f in 0..d {
                for s in 0..k {
                    enabled[s] = scanned(s, f) && data.twin[f].is_none_or(|t| !scanned(s, t));
                }
                if !enabled.iter().any(|&e| e) {
                    continue;
                }
                scans.fill(Scan::EMPTY);
                for (&row, &x) in data.order[f].iter().zip(&data.sorted[f]) {
                    let st = self.state[row as usize];
                    if st.slot == SETTLED || !enabled[st.slot as usize] {
                        continue;
                    }
                    let s = st.slot as usize;
                    let sc = &mut scans[s];
                    let o = &level[s];
                    if x > sc.last_x && sc.w >= min_leaf && o.w - sc.w >= min_leaf {
                        let score = split_score(sc.w, sc.wy, o.w, o.wy);
                        if score > best_score[s] {
                            best_score[s] = score;
                            best[s] = Some(Split {
                                feature: f,
                                threshold: midpoint(sc.last_x, x),
                                left_w: sc.w,
                                left_wy: sc.wy,
                            });
                        }
                    }
                    sc.w += st.w;
                    sc.wy += st.w * st.y;
                    sc.last_x = x;
                }
            }

            // Children that may split again join the next level; the rest
            // become leaves straight from the split statistics.
            let mut next: Vec<Open> = Vec::new();
            let mut route: Vec<(u32, u32)> = vec![(SETTLED, SETTLED); k];
            for (s, o) in level.iter().enumerate() {
                let Some(sp) = best[s] else {
                    nodes[o.id] = Node::Leaf { value: o.wy / o.w };
                    continue;
                };
                let left = nodes.len();
                nodes[o.id] = Node::Split {
                    feature: sp.feature as u32,
                    threshold: sp.threshold,
                    left: left as u32,
                    right: left as u32 + 1,
                };
                let sides = [(sp.left_w, sp.left_wy), (o.w - sp.left_w, o.wy - sp.left_wy)];
                for (side, (w, wy)) in sides.into_iter().enumerate() {
                    let id = left + side;
                    nodes.push(Node::Leaf { value: wy / w });
                    if may_split(w, o.depth + 1) {
                        let r = next.len() as u32;
                        if side == 0 {
                            route[s].0 = r;
                        } else {
                            route[s].1 = r;
                        }
                        next.push(Open { id, depth: o.depth + 1, w: 0.0, wy: 0.0, wyy: 0.0 });
                    }
                }
            }
            for (i, st) in self.state.iter_mut().enumerate() {
                if st.slot == SETTLED {
                    continue;
                }
                let s = st.slot as usize;
                st.slot = match best[s] {
                    None => SETTLED,
                    Some(sp) if data.columns[sp.feature][i] <= sp.threshold => route[s].0,
                    Some(_) => route[s].1,
                };
                if st.slot != SETTLED {
                    let o = &mut next[st.slot as usize];
                    o.w += st.w;
                    o.wy += st.w * st.y;
                    o.wyy += st.w * st.y * st.y;
                }
            }
            level = next;
        }
        Tree { nodes }
    }
}

/// Quantile bin boundaries per feature, fit on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    /// Ascending cut points; bin b holds values in (cuts[b-1], cuts[b]].
    pub cuts: Vec<Vec<f64>>,
}

impl BinMapper {
    /// At most `n_bins` bins (so at most `n_bins - 1` cuts) per feature.
    pub fn fit(x: &Matrix, n_bins: usize) -> Self {
        let cuts = (0..x.cols())
            .map(|j| {
                let mut col = x.column(j);
                col.sort_by(f64::total_cmp);
                let mut distinct = col.clone();
                distinct.dedup();
                if n_bins <= 1 || distinct.len() <= 1 {
                    return Vec::new();
                }
                if distinct.len() <= n_bins {
                    return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
                }
                let n = col.len();
                let max = col[n - 1];
                let mut cuts: Vec<f64> = (1..n_bins)
                    .map(|k| col[(k * n).div_ceil(n_bins) - 1])
                    .filter(|&c| c < max)
                    .collect();
                cuts.dedup();
                cuts
            })
            .collect();
        Self { cuts }
    }

    fn bin(cuts: &[f64], v: f64) -> u8 {
        cuts.partition_point(|&c| c < v) as u8
    }

    pub(crate) fn transform(&self, x: &Matrix) -> Vec<Vec<u8>> {
        self.cuts
            .iter()
            .enumerate()
            .map(|(j, cuts)| (0..x.rows()).map(|i| Self::bin(cuts, x.get(i, j))).collect())
            .collect()
    }
}

/// Histogram tree on binned columns. Splits are searched over bin
/// boundaries only; the smaller child's histogram is built directly and the
/// larger one by subtraction from the parent.
pub(crate) fn grow_hist(bins: &[Vec<u8>], mapper: &BinMapper, y: &[f64], params: &TreeParams) -> Tree {
    let n = y.len();
    let d = bins.len();
    let max_depth = params.max_depth.unwrap_or(usize::MAX);
    let min_leaf = params.min_leaf.max(1);
    let widths: Vec<usize> = mapper.cuts.iter().map(|c| c.len() + 1).collect();

    type Hist = Vec<Vec<(f64, u32)>>;
    let build = |rows: &[u32]| -> Hist {
        let mut h: Hist = widths.iter().map(|&w| vec![(0.0, 0u32); w]).collect();
        for (f, hf) in h.iter_mut().enumerate() {
            let col = &bins[f];
            for &i in rows {
                let cell = &mut hf[col[i as usize] as usize];
                cell.0 += y[i as usize];
                cell.1 += 1;
            }
        }
        h
    };

    let root_rows: Vec<u32> = (0..n as u32).collect();
    let root_hist = build(&root_rows);
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut frontier = vec![(0usize, root_rows, root_hist, 0usize)];

    while !frontier.is_empty() {
        let mut next = Vec::new();
        for (node, rows, hist, depth) in frontier {
            let count = rows.len();
            let (mut sy, mut syy) = (0.0, 0.0);
            for &i in &rows {
                let v = y[i as usize];
                sy += v;
                syy += v * v;
            }
            let sw = count as f64;
            let value = if count == 0 { 0.0 } else { sy / sw };
            let sse = syy - sy * sy / sw;
            let splittable = depth < max_depth && count >= 2 * min_leaf && sse > PURITY_EPS * syy;
            let mut best: Option<(usize, usize)> = None;
            if splittable {
                let mut best_gain = PURITY_EPS * sse;
                for f in 0..d {
                    let (mut lw, mut lwy) = (0usize, 0.0);
                    for b in 0..widths[f] - 1 {
                        let (s, c) = hist[f][b];
                        lw += c as usize;
                        lwy += s;
                        if count - lw < min_leaf {
                            break;
                        }
                        if lw < min_leaf || c == 0 {
                            continue;
                        }
                        let g = gain(lw as f64, lwy, sw, sy);
                        if g > best_gain {
                            best_gain = g;
                            best = Some((f, b));
                        }
                    }
                }
            }
            let Some((feature, bin)) = best else {
                nodes[node] = Node::Leaf { value };
                continue;
            };
            let col = &bins[feature];
            let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
                rows.iter().partition(|&&i| col[i as usize] as usize <= bin);
            let (small, small_is_left) =
                if left_rows.len() <= right_rows.len() { (&left_rows, true) } else { (&right_rows, false) };
            let small_hist = build(small);
            let large_hist: Hist = hist
                .iter()
                .zip(&small_hist)
                .map(|(p, s)| p.iter().zip(s).map(|(a, b)| (a.0 - b.0, a.1 - b.1)).collect())
                .collect();
            let (left_hist, right_hist) =
                if small_is_left { (small_hist, large_hist) } else { (large_hist, small_hist) };

            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[node] = Node::Split {
                feature: feature as u32,
                threshold: mapper.cuts[feature][bin],
                left: left as u32,
                right: left as u32 + 1,
            };
            next.push((left, left_rows, left_hist, depth + 1));
            next.push((left + 1, right_rows, right_hist, depth + 1));
        }
        frontier = next;
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_mapper_uses_midpoints_for_few_values() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [2.0], [4.0]]).unwrap();
        let m = BinMapper::fit(&x, 255);
        assert_eq!(m.cuts[0], vec![1.5, 3.0]);
        assert_eq!(m.transform(&x)[0], vec![0, 1, 1, 2]);
    }

    #[test]
    fn bin_mapper_caps_thresholds() {
        let rows: Vec<[f64; 1]> = (0..5000).map(|i| [i as f64 * 0.37]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = BinMapper::fit(&x, 255);
        assert!(m.cuts[0].len() <= 254);
        assert!(m.cuts[0].windows(2).all(|w| w[0] < w[1]));
        assert!(BinMapper::fit(&x, 1).cuts[0].is_empty());
    }

    #[test]
    fn tree_layout_round_trips_through_prediction() {
        let t = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 1.0 },
            ],
        };
        assert_eq!(t.predict_row(&[0.5]), -1.0);
        assert_eq!(t.predict_row(&[0.6]), 1.0);
        assert_eq!((t.depth(), t.leaves()), (1, 2));
    }

    #[test]
    fn monotone_copies_are_twins_and_never_split() {
        let rows: Vec<[f64; 2]> = (0..200).map(|i| [(i % 13) as f64, ((i * 37) % 101) as f64 * 0.1]).collect();
        let y: Vec<f64> = rows.iter().map(|r| libm::sin(r[0]) + 0.3 * r[1]).collect();
        let plain = Matrix::from_rows(&rows).unwrap();
        let with_copy: Vec<[f64; 3]> = rows.iter().map(|r| [r[0], r[1], libm::exp(r[0])]).collect();
        let with_copy = Matrix::from_rows(&with_copy).unwrap();

        let data = Presorted::new(&with_copy);
        assert_eq!(data.twin, vec![None, None, Some(0)]);
        let params = TreeParams { max_depth: Some(6), min_leaf: 2 };
        let a = ExactGrower::new(&Presorted::new(&plain)).grow(&y, None, &params, None);
        let b = ExactGrower::new(&data).grow(&y, None, &params, None);
        assert_eq!(a, b);
    }
}
