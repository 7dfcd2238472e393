//! Sequential chain-rule privatization of tabular records.
//!
//! Coordinate 1 (in privatization order) is privatized against the marginal
//! `Ĉ` of the hold-out sample. Coordinate `l >= 2` is privatized against the
//! conditional `Ĉ(x_l | x_1, ..., x_{l-1})`, which is linear on the segment
//! `(d_{j-1,l}, d_{jl}]` of the single hold-out record whose bottom-left cell
//! contains the prefix. The forward CDF conditions on the raw prefix, the
//! inverse on the already privatized prefix. Ceilings are applied last.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continualize::{edf_from_order_statistics, jitter_sorted, ContinualizedCdf, DiscreteSupport};
use crate::error::{DipError, Result};
use crate::kdtree::KdTree;
use crate::noise::{convolved_cdf, LaplaceScale};
use crate::rng::{Domain, DrawSource, Randomness, StreamSeed};
use crate::search::BlockIndex;
use crate::univariate::{privatize_value, ColumnKind};

pub const DEFAULT_HOLDOUT_RATIO: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Column-major table. Categorical cells hold the level index `0..s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    columns: Vec<Column>,
    data: Vec<Vec<f64>>,
}

impl DataTable {
    pub fn new(columns: Vec<Column>, data: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(DipError::Empty("table has no columns"));
        }
        if columns.len() != data.len() {
            return Err(DipError::DimensionMismatch(format!(
                "{} columns declared but {} given",
                columns.len(),
                data.len()
            )));
        }
        let rows = data[0].len();
        for (c, col) in columns.iter().zip(&data) {
            if col.len() != rows {
                return Err(DipError::DimensionMismatch(format!(
                    "column `{}` has {} rows, expected {rows}",
                    c.name,
                    col.len()
                )));
            }
            if let ColumnKind::Categorical(levels) = &c.kind {
                if levels.len() < 2 {
                    return Err(
                        DipError::param("levels", "categorical columns need at least 2 levels").in_column(&c.name)
                    );
                }
                if let Some(&x) = col
                    .iter()
                    .find(|&&x| !(x >= 0.0 && x.fract() == 0.0 && (x as usize) < levels.len()))
                {
                    return Err(DipError::OutsideSupport { value: x }.in_column(&c.name));
                }
            }
        }
        Ok(Self { columns, data })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c]
    }

    pub fn n_rows(&self) -> usize {
        self.data[0].len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.iter().map(|c| c[i]).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        DataTable {
            columns: self.columns.clone(),
            data: self.data.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect(),
        }
    }

    /// Coordinate layout after expanding categorical columns into dummies.
    pub fn coordinates(&self) -> Vec<Coordinate> {
        let mut out = Vec::new();
        for (c, col) in self.columns.iter().enumerate() {
            match &col.kind {
                ColumnKind::Categorical(levels) => {
                    for level in 1..levels.len() {
                        out.push(Coordinate {
                            column: c,
                            dummy: Some(level),
                            kind: ColumnKind::Discrete(DiscreteSupport::Points(vec![0.0, 1.0])),
                        });
                    }
                }
                kind => out.push(Coordinate {
                    column: c,
                    dummy: None,
                    kind: kind.clone(),
                }),
            }
        }
        out
    }

    fn coordinate_values(&self, coords: &[Coordinate]) -> Vec<Vec<f64>> {
        coords
            .iter()
            .map(|co| match co.dummy {
                None => self.data[co.column].clone(),
                Some(level) => self.data[co.column]
                    .iter()
                    .map(|&x| if x as usize == level { 1.0 } else { 0.0 })
                    .collect(),
            })
            .collect()
    }
}

/// One privatized coordinate: a column, or one dummy of a categorical column.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub column: usize,
    /// For dummies, the categorical level this coordinate indicates.
    pub dummy: Option<usize>,
    pub kind: ColumnKind,
}

/// Disjoint hold-out / release partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub holdout: DataTable,
    pub released: DataTable,
    /// Row numbers of the released rows in the input, ascending.
    pub released_rows: Vec<usize>,
    holdout_rows: Vec<usize>,
}

impl Split {
    pub fn holdout_len(&self) -> usize {
        self.holdout_rows.len()
    }
}

/// Hold out `m = round(N * ratio)` rows chosen by a seeded shuffle.
pub fn split_sample<S: DrawSource>(table: &DataTable, holdout_ratio: f64, draws: &S) -> Result<Split> {
    let rows = table.n_rows();
    if !(holdout_ratio > 0.0 && holdout_ratio < 1.0) {
        return Err(DipError::param(
            "holdout_ratio",
            format!("{holdout_ratio} is not in (0, 1)"),
        ));
    }
    let m = (rows as f64 * holdout_ratio).round() as usize;
    if m < 2 || m >= rows {
        return Err(DipError::DegenerateSplit {
            ratio: holdout_ratio,
            rows,
            holdout: m,
            released: rows.saturating_sub(m),
        });
    }
    let mut idx: Vec<usize> = (0..rows).collect();
    let mut rng = draws.stream(Domain::Split, 0, 0);
    for i in (1..rows).rev() {
        let j = ((rng.unit() * (i + 1) as f64) as usize).min(i);
        idx.swap(i, j);
    }
    let mut holdout_rows = idx[..m].to_vec();
    let mut released_rows = idx[m..].to_vec();
    holdout_rows.sort_unstable();
    released_rows.sort_unstable();
    Ok(Split {
        holdout: table.select_rows(&holdout_rows),
        released: table.select_rows(&released_rows),
        released_rows,
        holdout_rows,
    })
}

/// Equal split of `ε` over `p` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub epsilon: f64,
    pub coordinates: usize,
    pub per_coordinate: f64,
    pub scale: LaplaceScale,
}

impl BudgetPlan {
    pub fn new(epsilon: f64, coordinates: usize) -> Result<Self> {
        crate::error::check_epsilon(epsilon)?;
        if coordinates == 0 {
            return Err(DipError::Empty("no coordinates to privatize"));
        }
        let per_coordinate = epsilon / coordinates as f64;
        Ok(Self {
            epsilon,
            coordinates,
            per_coordinate,
            scale: LaplaceScale::new(coordinates as f64 / epsilon)?,
        })
    }

    /// `Σ ε_l`, equal to `ε` up to rounding.
    pub fn total(&self) -> f64 {
        self.per_coordinate * self.coordinates as f64
    }
}

/// A linear conditional segment `(lo, hi]` owned by hold-out record `record`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub record: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Sorted, record-linked view of the continualized hold-out sample.
pub struct HoldoutIndex {
    m: usize,
    p: usize,
    order: Vec<usize>,
    // per coordinate: anchor d_0 followed by d_1 < ... < d_m
    knots: Vec<Vec<f64>>,
    search: Vec<BlockIndex>,
    // rank[q * p + l] in 1..=m
    rank: Vec<u32>,
    // record_at_rank[l][j] for j in 1..=m (slot 0 unused)
    record_at_rank: Vec<Vec<u32>>,
    marginal: ContinualizedCdf,
    // by_first[(j - 1) * p + l]: cell (lo, hi] of coordinate l for the record
    // of rank j in the first coordinate, so exact lookups read one row
    by_first: Vec<(f64, f64)>,
    // trees[k] indexes rank prefixes of length k, for k >= 2
    trees: Vec<Option<KdTree>>,
}

impl HoldoutIndex {
    /// `values[l]` holds the continualized hold-out values of coordinate `l`;
    /// `order` is the privatization order of the coordinates.
    pub fn build(values: &[Vec<f64>], order: &[usize]) -> Result<Self> {
        let p = values.len();
        if p == 0 {
            return Err(DipError::Empty("no coordinates"));
        }
        let m = values[0].len();
        if m == 0 {
            return Err(DipError::HoldoutTooSmall { needed: 1, got: 0 });
        }
        check_order(order, p)?;
        if values.iter().any(|v| v.len() != m) {
            return Err(DipError::DimensionMismatch(
                "hold-out coordinates differ in length".into(),
            ));
        }
        let mut knots = Vec::with_capacity(p);
        let mut rank = vec![0u32; m * p];
        let mut record_at_rank = Vec::with_capacity(p);
        for (l, col) in values.iter().enumerate() {
            if col.iter().any(|x| !x.is_finite()) {
                return Err(DipError::param("hold-out", "values must be finite"));
            }
            let mut ids: Vec<u32> = (0..m as u32).collect();
            ids.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            let mut d: Vec<f64> = ids.iter().map(|&q| col[q as usize]).collect();
            jitter_sorted(&mut d);
            let mut k = Vec::with_capacity(m + 1);
            k.push(d[0] - 1.0);
            k.extend(d);
            knots.push(k);
            let mut at = vec![0u32; m + 1];
            for (j, &q) in ids.iter().enumerate() {
                rank[q as usize * p + l] = j as u32 + 1;
                at[j + 1] = q;
            }
            record_at_rank.push(at);
        }
        let first = order[0];
        let marginal = edf_from_order_statistics(knots[first][1..].to_vec());
        let search = knots.iter().map(|k| BlockIndex::new(k)).collect();
        let mut by_first = Vec::with_capacity(m * p);
        for &q in &record_at_rank[first][1..] {
            for (l, k) in knots.iter().enumerate() {
                let j = rank[q as usize * p + l] as usize;
                by_first.push((k[j - 1], k[j]));
            }
        }
        let trees = (0..p)
            .map(|k| {
                (k >= 2).then(|| {
                    let mut coords = Vec::with_capacity(m * k);
                    for q in 0..m {
                        coords.extend(order[..k].iter().map(|&l| rank[q * p + l]));
                    }
                    KdTree::new(k, coords)
                })
            })
            .collect();
        Ok(Self {
            m,
            p,
            order: order.to_vec(),
            knots,
            rank,
            record_at_rank,
            search,
            marginal,
            by_first,
            trees,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dims(&self) -> usize {
        self.p
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Marginal `Ĉ` of the first coordinate in privatization order.
    pub fn marginal(&self) -> &ContinualizedCdf {
        &self.marginal
    }

    /// Knots `d_0 < d_1 < ... < d_m` of coordinate `l`.
    pub fn knots(&self, l: usize) -> &[f64] {
        &self.knots[l]
    }

    // cell j with d_{j-1} < x <= d_j, 0 below d_0 and m+1 above d_m
    fn cell(&self, l: usize, x: f64) -> usize {
        self.search[l].count_below(&self.knots[l], x)
    }

    fn segment_of(&self, q: usize, l: usize) -> Segment {
        let j = self.rank[q * self.p + l] as usize;
        Segment {
            record: q,
            lo: self.knots[l][j - 1],
            hi: self.knots[l][j],
        }
    }

    /// The segment of the next coordinate (`order[prefix.len()]`) owned by
    /// the hold-out record whose bottom-left cell contains `prefix`, or
    /// `None` if no record qualifies.
    pub fn conditional_edf(&self, prefix: &[f64]) -> Option<Segment> {
        assert!(
            !prefix.is_empty() && prefix.len() < self.p,
            "prefix length must be in 1..p"
        );
        self.exact(prefix, self.prefix_cell(0, prefix[0]))
    }

    /// Exact conditional segment, or the segment of the record nearest to
    /// the prefix in per-coordinate rank space (L∞, ties to the lowest
    /// record). The flag is true when the fallback was used.
    pub fn segment_or_nearest(&self, prefix: &[f64]) -> (Segment, bool) {
        assert!(
            !prefix.is_empty() && prefix.len() < self.p,
            "prefix length must be in 1..p"
        );
        let cells: Vec<usize> = prefix
            .iter()
            .enumerate()
            .map(|(t, &x)| self.prefix_cell(t, x))
            .collect();
        self.lookup(prefix, &cells)
    }

    // cell of the value at prefix position t
    fn prefix_cell(&self, t: usize, x: f64) -> usize {
        self.cell(self.order[t], x)
    }

    // j1 is the cell of prefix[0]
    fn exact(&self, prefix: &[f64], j1: usize) -> Option<Segment> {
        if j1 == 0 || j1 > self.m {
            return None;
        }
        let row = &self.by_first[(j1 - 1) * self.p..j1 * self.p];
        let inside = self.order[1..prefix.len()].iter().zip(&prefix[1..]).all(|(&l, &x)| {
            let (lo, hi) = row[l];
            lo < x && x <= hi
        });
        inside.then(|| {
            let (lo, hi) = row[self.order[prefix.len()]];
            Segment {
                record: self.record_at_rank[self.order[0]][j1] as usize,
                lo,
                hi,
            }
        })
    }

    // segment_or_nearest with the cells of the prefix already known
    fn lookup(&self, prefix: &[f64], cells: &[usize]) -> (Segment, bool) {
        if let Some(s) = self.exact(prefix, cells[0]) {
            return (s, false);
        }
        let t = prefix.len();
        let clamp = |j: usize| j.clamp(1, self.m) as u32;
        let q = if t == 1 {
            self.record_at_rank[self.order[0]][clamp(cells[0]) as usize] as usize
        } else {
            let query: Vec<u32> = cells.iter().map(|&j| clamp(j)).collect();
            self.trees[t].as_ref().expect("tree for prefix length").nearest(&query) as usize
        };
        (self.segment_of(q, self.order[t]), true)
    }
}

fn check_order(order: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    if order.len() != p || order.iter().any(|&l| l >= p || std::mem::replace(&mut seen[l], true)) {
        return Err(DipError::param(
            "order",
            format!("{order:?} is not a permutation of 0..{p}"),
        ));
    }
    Ok(())
}

fn conditional_inverse(segment: Segment, u: f64) -> f64 {
    let Segment { lo, hi, .. } = segment;
    if u <= 0.0 {
        return lo + 1e-12 * (hi - lo);
    }
    if u >= 1.0 {
        return hi;
    }
    (lo + u * (hi - lo)).clamp(crate::special::next_up(lo), hi)
}

/// Laplace-draw counting wrapper for budget instrumentation.
struct Counted<'a, R> {
    inner: R,
    laplace: &'a mut u64,
}

impl<R: Randomness> Randomness for Counted<'_, R> {
    fn unit(&mut self) -> f64 {
        self.inner.unit()
    }

    fn open_unit(&mut self) -> f64 {
        self.inner.open_unit()
    }

    fn laplace(&mut self, scale: LaplaceScale) -> f64 {
        *self.laplace += 1;
        self.inner.laplace(scale)
    }
}

/// Per-record fallback and draw counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordStats {
    pub forward_fallbacks: u64,
    pub inverse_fallbacks: u64,
    pub laplace_draws: u64,
}

/// Privatize one record given as raw coordinate values. Record `i` draws
/// from streams `(Privatize, i, l)` for coordinate `l`.
pub fn privatize_record<S: DrawSource>(
    record: &[f64],
    kinds: &[ColumnKind],
    index: &HoldoutIndex,
    plan: &BudgetPlan,
    draws: &S,
    i: u64,
) -> Result<(Vec<f64>, RecordStats)> {
    let p = index.dims();
    if record.len() != p || kinds.len() != p || plan.coordinates != p {
        return Err(DipError::DimensionMismatch(format!(
            "record has {} values, {} kinds, index {p} coordinates, budget {}",
            record.len(),
            kinds.len(),
            plan.coordinates
        )));
    }
    let mut stats = RecordStats::default();
    let mut streams: Vec<S::Stream> = (0..p).map(|l| draws.stream(Domain::Privatize, i, l as u64)).collect();
    let mut v = Vec::with_capacity(p);
    for l in 0..p {
        v.push(kinds[l].continualize(record[l], &mut streams[l])?);
    }
    let order = index.order();
    let mut raw_prefix = Vec::with_capacity(p);
    let mut out_prefix = Vec::with_capacity(p);
    let (mut raw_cells, mut out_cells) = (Vec::with_capacity(p), Vec::with_capacity(p));
    let mut out = vec![0.0; p];
    for (t, (&l, stream)) in order.iter().zip(reorder(&mut streams, order)).enumerate() {
        let mut rng = Counted {
            inner: stream,
            laplace: &mut stats.laplace_draws,
        };
        let value = if t == 0 {
            privatize_value(v[l], index.marginal(), plan.scale, &mut rng)
        } else {
            let (fwd, f_fb) = index.lookup(&raw_prefix, &raw_cells);
            let u = if v[l] <= fwd.lo {
                0.0
            } else if v[l] > fwd.hi {
                1.0
            } else {
                (v[l] - fwd.lo) / (fwd.hi - fwd.lo)
            };
            let w = u + rng.laplace(plan.scale);
            let (inv, i_fb) = index.lookup(&out_prefix, &out_cells);
            stats.forward_fallbacks += f_fb as u64;
            stats.inverse_fallbacks += i_fb as u64;
            conditional_inverse(inv, convolved_cdf(w, plan.scale))
        };
        if t + 1 < p {
            raw_cells.push(index.prefix_cell(t, v[l]));
            out_cells.push(index.prefix_cell(t, value));
        }
        raw_prefix.push(v[l]);
        out_prefix.push(value);
        out[l] = value;
    }
    for l in 0..p {
        out[l] = kinds[l].ceiling_map().apply(out[l])?;
    }
    Ok((out, stats))
}

// Move the streams out in privatization order.
fn reorder<T>(streams: &mut Vec<T>, order: &[usize]) -> Vec<T> {
    let mut slots: Vec<Option<T>> = streams.drain(..).map(Some).collect();
    order
        .iter()
        .map(|&l| slots[l].take().expect("order is a permutation"))
        .collect()
}

/// Configuration of a table release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivatizeConfig {
    pub epsilon: f64,
    pub holdout_ratio: f64,
    /// Column privatization order; `None` means schema order.
    pub column_order: Option<Vec<usize>>,
    pub seed: u64,
}

impl PrivatizeConfig {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            holdout_ratio: DEFAULT_HOLDOUT_RATIO,
            column_order: None,
            seed,
        }
    }
}

/// What a release reports about itself. Hold-out rows are only counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub epsilon: f64,
    pub coordinates: usize,
    pub per_coordinate_epsilon: f64,
    pub laplace_scale: f64,
    pub released: usize,
    pub holdout: usize,
    pub seed: Option<u64>,
    pub column_order: Vec<String>,
    pub forward_fallbacks: u64,
    pub inverse_fallbacks: u64,
    pub laplace_draws: u64,
}

/// Privatize `released` against an already separated `holdout` table.
pub fn privatize_against_holdout<S: DrawSource>(
    holdout: &DataTable,
    released: &DataTable,
    epsilon: f64,
    column_order: Option<&[usize]>,
    draws: &S,
) -> Result<(DataTable, RunMetadata)> {
    if holdout.columns() != released.columns() {
        return Err(DipError::DimensionMismatch(
            "hold-out and release schemas differ".into(),
        ));
    }
    let columns = released.columns();
    let natural: Vec<usize> = (0..columns.len()).collect();
    let column_order = column_order.unwrap_or(&natural);
    check_order(column_order, columns.len())?;

    let coords = released.coordinates();
    let p = coords.len();
    let order: Vec<usize> = column_order
        .iter()
        .flat_map(|&c| {
            let coords = &coords;
            (0..p).filter(move |&l| coords[l].column == c)
        })
        .collect();
    let kinds: Vec<ColumnKind> = coords.iter().map(|c| c.kind.clone()).collect();
    let plan = BudgetPlan::new(epsilon, p)?;

    let name = |l: usize| columns[coords[l].column].name.as_str();
    let raw_holdout = holdout.coordinate_values(&coords);
    let continualized: Vec<Vec<f64>> = raw_holdout
        .iter()
        .enumerate()
        .map(|(l, col)| {
            crate::univariate::continualize_holdout(col, &kinds[l], draws, l as u64).map_err(|e| e.in_column(name(l)))
        })
        .collect::<Result<_>>()?;
    let index = HoldoutIndex::build(&continualized, &order)?;

    let values = released.coordinate_values(&coords);
    let n = released.n_rows();
    let forward = AtomicU64::new(0);
    let inverse = AtomicU64::new(0);
    let laplace = AtomicU64::new(0);
    // Each record has its own streams, so the visiting order only affects
    // memory locality, not the output.
    let visit = locality_order(&values, &order);
    let mut records = Vec::with_capacity(n * p);
    for &i in &visit {
        records.extend(values.iter().map(|c| c[i]));
    }
    let computed: Vec<Vec<f64>> = records
        .par_chunks(p)
        .zip(visit.par_iter())
        .map(|(record, &i)| {
            let (out, stats) =
                privatize_record(record, &kinds, &index, &plan, draws, i as u64).map_err(|e| match e {
                    DipError::OutsideSupport { value } => {
                        let l = record.iter().position(|&x| x == value).unwrap_or(0);
                        DipError::OutsideSupport { value }.in_column(name(l))
                    }
                    other => other,
                })?;
            forward.fetch_add(stats.forward_fallbacks, Ordering::Relaxed);
            inverse.fetch_add(stats.inverse_fallbacks, Ordering::Relaxed);
            laplace.fetch_add(stats.laplace_draws, Ordering::Relaxed);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut data = vec![vec![0.0; n]; columns.len()];
    for (row, &i) in computed.iter().zip(&visit) {
        for (c, column) in data.iter_mut().enumerate() {
            column[i] = decode_column(c, &coords, row);
        }
    }
    let table = DataTable::new(columns.to_vec(), data)?;
    let metadata = RunMetadata {
        epsilon,
        coordinates: p,
        per_coordinate_epsilon: plan.per_coordinate,
        laplace_scale: plan.scale.get(),
        released: n,
        holdout: holdout.n_rows(),
        seed: None,
        column_order: column_order.iter().map(|&c| columns[c].name.clone()).collect(),
        forward_fallbacks: forward.into_inner(),
        inverse_fallbacks: inverse.into_inner(),
        laplace_draws: laplace.into_inner(),
    };
    Ok((table, metadata))
}

/// Records sorted along a Z-order curve of their ranks in the leading
/// coordinates, so consecutive records query nearby parts of the index.
fn locality_order(values: &[Vec<f64>], order: &[usize]) -> Vec<usize> {
    let n = values.first().map_or(0, Vec::len);
    let dims = order.len().min(4);
    let bits = 64 / dims.max(1) as u32;
    let mut codes = vec![0u64; n];
    let mut ids: Vec<usize> = (0..n).collect();
    for (d, &l) in order[..dims].iter().enumerate() {
        let col = &values[l];
        ids.sort_unstable_by(|&a, &b| col[a].total_cmp(&col[b]));
        for (r, &i) in ids.iter().enumerate() {
            let q = ((r as u128) << bits) / n.max(1) as u128;
            for b in 0..bits {
                codes[i] |= ((q as u64 >> b) & 1) << (b as usize * dims + d);
            }
        }
    }
    ids.sort_unstable_by_key(|&i| (codes[i], i));
    ids
}

// Categorical decoding: exactly one dummy set gives its level, none gives
// level 0, several give the first one set.
fn decode_column(c: usize, coords: &[Coordinate], row: &[f64]) -> f64 {
    let mut level = None;
    for (l, co) in coords.iter().enumerate().filter(|(_, co)| co.column == c) {
        match co.dummy {
            None => return row[l],
            Some(k) if row[l] == 1.0 && level.is_none() => level = Some(k),
            Some(_) => {}
        }
    }
    level.unwrap_or(0) as f64
}

/// Split, then privatize the released part. Output rows follow the input
/// order of the released rows.
pub fn privatize_table(table: &DataTable, config: &PrivatizeConfig) -> Result<(DataTable, RunMetadata)> {
    let draws = StreamSeed(config.seed);
    let split = split_sample(table, config.holdout_ratio, &draws)?;
    let (out, mut meta) = privatize_against_holdout(
        &split.holdout,
        &split.released,
        config.epsilon,
        config.column_order.as_deref(),
        &draws,
    )?;
    meta.seed = Some(config.seed);
    Ok((out, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continualize::continualized_edf;
    use crate::rng::{FixedDraws, RandomStream};
    use crate::univariate::privatize_empirical;

    fn continuous_table(cols: Vec<Vec<f64>>) -> DataTable {
        let columns = (0..cols.len())
            .map(|i| Column::new(format!("x{i}"), ColumnKind::Continuous))
            .collect();
        DataTable::new(columns, cols).unwrap()
    }

    #[test]
    fn split_arithmetic_and_determinism() {
        let t = continuous_table(vec![(0..100).map(f64::from).collect()]);
        let s = split_sample(&t, 0.25, &StreamSeed(1)).unwrap();
        assert_eq!((s.holdout.n_rows(), s.released.n_rows()), (25, 75));
        let mut all: Vec<usize> = s.holdout_rows.iter().chain(&s.released_rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(s, split_sample(&t, 0.25, &StreamSeed(1)).unwrap());
        assert_ne!(s, split_sample(&t, 0.25, &StreamSeed(2)).unwrap());

        let small = continuous_table(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let s = split_sample(&small, 0.5, &StreamSeed(1)).unwrap();
        assert_eq!((s.holdout.n_rows(), s.released.n_rows()), (2, 2));
        assert!(matches!(
            split_sample(&small, 0.1, &StreamSeed(1)),
            Err(DipError::DegenerateSplit { .. })
        ));
        assert!(split_sample(&small, 1.0, &StreamSeed(1)).is_err());
    }

    #[test]
    fn budget_plan() {
        let b = BudgetPlan::new(1.0, 7).unwrap();
        assert!((b.total() - 1.0).abs() < 1e-15);
        assert_eq!(b.scale.get(), 7.0);
        assert!(BudgetPlan::new(0.0, 3).is_err());
    }

    fn figure_index() -> HoldoutIndex {
        // (d11,d23) (d12,d21) (d13,d25) (d14,d22) (d15,d24) with d1j = j, d2j = 10 j
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let x2 = vec![30.0, 10.0, 50.0, 20.0, 40.0];
        HoldoutIndex::build(&[x1, x2], &[0, 1]).unwrap()
    }

    #[test]
    fn conditional_segment_of_figure_layout() {
        let idx = figure_index();
        let s = idx.conditional_edf(&[2.5]).unwrap();
        assert_eq!((s.record, s.lo, s.hi), (2, 40.0, 50.0));
        assert_eq!(idx.conditional_edf(&[7.0]), None);
        assert_eq!(idx.conditional_edf(&[0.0]), None);
        assert_eq!(idx.conditional_edf(&[1.0]).unwrap().record, 0);
        // anchors sit one unit below the smallest value
        assert_eq!(idx.knots(1)[0], 9.0);
        assert_eq!(idx.conditional_edf(&[0.5]).unwrap().lo, 20.0);
    }

    #[test]
    fn three_dimensional_lookup_and_fallback() {
        let x1 = vec![1.0, 2.0, 3.0];
        let x2 = vec![3.0, 1.0, 2.0];
        let x3 = vec![10.0, 30.0, 20.0];
        let idx = HoldoutIndex::build(&[x1, x2, x3], &[0, 1, 2]).unwrap();
        // record 1 has ranks (2, 1, 3): cell (1,2] x (0,1]
        let s = idx.conditional_edf(&[1.5, 0.5]).unwrap();
        assert_eq!((s.record, s.lo, s.hi), (1, 20.0, 30.0));
        // x2 in the wrong cell: no record, nearest by ranks (2, 3) is record 0 at (1, 3)
        assert_eq!(idx.conditional_edf(&[1.5, 2.5]), None);
        let (s, fallback) = idx.segment_or_nearest(&[1.5, 2.5]);
        assert!(fallback);
        assert_eq!(s.record, 0);
    }

    #[test]
    fn single_holdout_record() {
        let idx = HoldoutIndex::build(&[vec![2.0], vec![5.0]], &[0, 1]).unwrap();
        let s = idx.conditional_edf(&[1.5]).unwrap();
        assert_eq!((s.record, s.lo, s.hi), (0, 4.0, 5.0));
    }

    #[test]
    fn prefix_uniqueness() {
        let mut rng = RandomStream::new(4);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..200).map(|_| rng.unit()).collect()).collect();
        let idx = HoldoutIndex::build(&cols, &[0, 1, 2]).unwrap();
        for _ in 0..2000 {
            let prefix = [rng.unit(), rng.unit()];
            let hits: Vec<usize> = (0..200)
                .filter(|&q| {
                    (0..2).all(|c| {
                        let r = idx.rank[q * 3 + c] as usize;
                        idx.knots[c][r - 1] < prefix[c] && prefix[c] <= idx.knots[c][r]
                    })
                })
                .collect();
            assert!(hits.len() <= 1);
            assert_eq!(idx.conditional_edf(&prefix).map(|s| s.record), hits.first().copied());
        }
    }

    #[test]
    fn one_column_matches_univariate_exactly() {
        let mut rng = RandomStream::new(6);
        let h: Vec<f64> = (0..40).map(|_| rng.unit() * 5.0).collect();
        let z: Vec<f64> = (0..300).map(|_| rng.unit() * 6.0 - 0.5).collect();
        let seed = StreamSeed(77);
        let (out, meta) = privatize_against_holdout(
            &continuous_table(vec![h.clone()]),
            &continuous_table(vec![z.clone()]),
            1.3,
            None,
            &seed,
        )
        .unwrap();
        let uni = privatize_empirical(&z, &h, 1.3, &ColumnKind::Continuous, &seed).unwrap();
        assert_eq!(out.column(0), uni.as_slice());
        assert_eq!(meta.laplace_draws, 300);
        assert_eq!(meta.forward_fallbacks + meta.inverse_fallbacks, 0);

        let poisson = ColumnKind::Discrete(DiscreteSupport::lattice(0.0, 1.0, None));
        let hd: Vec<f64> = h.iter().map(|x| x.floor()).collect();
        let zd: Vec<f64> = z.iter().map(|x| x.max(0.0).floor()).collect();
        let t = |c: Vec<f64>| DataTable::new(vec![Column::new("k", poisson.clone())], vec![c]).unwrap();
        let (out, _) = privatize_against_holdout(&t(hd.clone()), &t(zd.clone()), 0.7, None, &seed).unwrap();
        let uni = privatize_empirical(&zd, &hd, 0.7, &poisson, &seed).unwrap();
        assert_eq!(out.column(0), uni.as_slice());
    }

    #[test]
    fn zero_noise_keeps_first_coordinate() {
        let h = continuous_table(vec![vec![2.0, 5.0, 9.0], vec![1.0, 3.0, 2.0]]);
        let z = continuous_table(vec![vec![3.5], vec![2.5]]);
        let (out, _) = privatize_against_holdout(&h, &z, 1.0, None, &FixedDraws::ZERO).unwrap();
        assert_eq!(out.column(0), &[3.5]);
        // 3.5 selects record 1 (x1 = 5), whose x2 = 3 is the top rank: segment (2, 3]
        let x2 = out.column(1)[0];
        assert!(x2 > 2.0 && x2 <= 3.0);
    }

    #[test]
    fn budget_and_categorical_expansion() {
        let mut rng = RandomStream::new(10);
        let n = 400;
        let cont: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
        let cat: Vec<f64> = (0..n).map(|_| (rng.unit() * 3.0).floor()).collect();
        let columns = vec![
            Column::new("x", ColumnKind::Continuous),
            Column::new("c", ColumnKind::Categorical(vec!["a".into(), "b".into(), "c".into()])),
        ];
        let t = DataTable::new(columns, vec![cont, cat]).unwrap();
        assert_eq!(t.coordinates().len(), 3);
        let (out, meta) = privatize_table(&t, &PrivatizeConfig::new(2.0, 5)).unwrap();
        assert_eq!(meta.coordinates, 3);
        assert!((meta.per_coordinate_epsilon - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(meta.laplace_scale, 1.5);
        assert_eq!(meta.laplace_draws, 3 * meta.released as u64);
        assert_eq!(meta.released + meta.holdout, n);
        assert!(out.column(1).iter().all(|&x| x == 0.0 || x == 1.0 || x == 2.0));
    }

    #[test]
    fn decode_rules() {
        let t = DataTable::new(
            vec![Column::new(
                "c",
                ColumnKind::Categorical(vec!["a".into(), "b".into(), "c".into()]),
            )],
            vec![vec![0.0]],
        )
        .unwrap();
        let co = t.coordinates();
        assert_eq!(decode_column(0, &co, &[0.0, 0.0]), 0.0);
        assert_eq!(decode_column(0, &co, &[1.0, 0.0]), 1.0);
        assert_eq!(decode_column(0, &co, &[0.0, 1.0]), 2.0);
        assert_eq!(decode_column(0, &co, &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn table_validation() {
        let cat = ColumnKind::Categorical(vec!["a".into(), "b".into()]);
        assert!(DataTable::new(vec![Column::new("c", cat.clone())], vec![vec![2.0]]).is_err());
        assert!(DataTable::new(vec![Column::new("c", cat)], vec![vec![0.5]]).is_err());
        assert!(DataTable::new(
            vec![
                Column::new("a", ColumnKind::Continuous),
                Column::new("b", ColumnKind::Continuous)
            ],
            vec![vec![1.0], vec![]]
        )
        .is_err());
    }

    #[test]
    fn column_errors_name_the_column() {
        let kind = ColumnKind::Discrete(DiscreteSupport::Points(vec![0.0, 1.0]));
        let columns = vec![Column::new("x", ColumnKind::Continuous), Column::new("flag", kind)];
        let h = DataTable::new(columns.clone(), vec![vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let z = DataTable::new(columns, vec![vec![1.5], vec![0.5]]).unwrap();
        let err = privatize_against_holdout(&h, &z, 1.0, None, &StreamSeed(1)).unwrap_err();
        assert!(
            matches!(err, DipError::Column { ref column, .. } if column == "flag"),
            "{err}"
        );
    }

    #[test]
    fn order_is_validated_and_reported() {
        let h = continuous_table(vec![vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]]);
        let z = continuous_table(vec![vec![1.5, 2.5], vec![0.5, 2.5]]);
        assert!(privatize_against_holdout(&h, &z, 1.0, Some(&[0, 0]), &StreamSeed(1)).is_err());
        let (_, meta) = privatize_against_holdout(&h, &z, 1.0, Some(&[1, 0]), &StreamSeed(1)).unwrap();
        assert_eq!(meta.column_order, vec!["x1", "x0"]);
    }

    #[test]
    fn marginal_is_the_continualized_edf() {
        let mut rng = RandomStream::new(12);
        let h: Vec<f64> = (0..50).map(|_| (rng.unit() * 10.0).floor()).collect();
        let idx = HoldoutIndex::build(std::slice::from_ref(&h), &[0]).unwrap();
        assert_eq!(idx.marginal(), &continualized_edf(&h).unwrap());
    }
}
