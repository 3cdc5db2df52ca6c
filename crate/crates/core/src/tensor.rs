//! Sparse symmetric count tensors over a dynamic network.
//!
//! A dynamic network on `node_count` nodes observed for `horizon` steps is a
//! third-order tensor `X` where `X[i, j, t]` counts the edges between `i` and
//! `j` at step `t`. Edges are undirected: cells are stored once under the
//! canonical key `(min(i, j), max(i, j), t)` and mirrored on read, so
//! `get(i, j, t) == get(j, i, t)` always holds. Entries are kept in a
//! [`BTreeMap`] so that every iteration order, and therefore every floating
//! point accumulation order downstream, is deterministic.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One undirected edge observation: `weight` edges between `src` and `dst`
/// at step `t`. Weights are non-negative counts and default to 1 in files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEvent {
    pub src: usize,
    pub dst: usize,
    pub t: usize,
    pub weight: f64,
}

impl EdgeEvent {
    pub fn new(src: usize, dst: usize, t: usize) -> Self {
        EdgeEvent {
            src,
            dst,
            t,
            weight: 1.0,
        }
    }

    pub fn weighted(src: usize, dst: usize, t: usize, weight: f64) -> Self {
        EdgeEvent {
            src,
            dst,
            t,
            weight,
        }
    }
}

/// Sparse symmetric `node x node x time` count tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DynTensor {
    node_count: usize,
    horizon: usize,
    self_loops_allowed: bool,
    entries: BTreeMap<(usize, usize, usize), f64>,
}

impl DynTensor {
    /// An all-zero tensor of the given shape.
    pub fn zeros(node_count: usize, horizon: usize, self_loops_allowed: bool) -> Self {
        DynTensor {
            node_count,
            horizon,
            self_loops_allowed,
            entries: BTreeMap::new(),
        }
    }

    /// Accumulates edge events into a tensor.
    ///
    /// Events at `(i, j, t)` and `(j, i, t)` land in the same canonical cell;
    /// reading either orientation returns their combined weight. Events out
    /// of bounds, with negative or non-finite weight, or self-loops when
    /// disallowed are rejected naming the offending event.
    pub fn from_edge_events(
        events: &[EdgeEvent],
        node_count: usize,
        horizon: usize,
        self_loops_allowed: bool,
    ) -> Result<Self> {
        let mut tensor = DynTensor::zeros(node_count, horizon, self_loops_allowed);
        for ev in events {
            if ev.src >= node_count || ev.dst >= node_count || ev.t >= horizon {
                return Err(Error::EventOutOfBounds {
                    src: ev.src,
                    dst: ev.dst,
                    t: ev.t,
                    node_count,
                    horizon,
                });
            }
            if ev.src == ev.dst && !self_loops_allowed {
                return Err(Error::SelfLoopDisallowed {
                    node: ev.src,
                    t: ev.t,
                });
            }
            if !(ev.weight >= 0.0) || !ev.weight.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "event ({}, {}, t={}) has invalid weight {}",
                    ev.src, ev.dst, ev.t, ev.weight
                )));
            }
            if ev.weight > 0.0 {
                tensor.add_count(ev.src, ev.dst, ev.t, ev.weight);
            }
        }
        Ok(tensor)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn self_loops_allowed(&self) -> bool {
        self.self_loops_allowed
    }

    /// Number of stored canonical cells.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Count at `(i, j, t)`; symmetric in `i, j`, zero for absent cells.
    pub fn get(&self, i: usize, j: usize, t: usize) -> f64 {
        let key = (i.min(j), i.max(j), t);
        *self.entries.get(&key).unwrap_or(&0.0)
    }

    /// Canonical cells `(i <= j, t, count)` in deterministic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j, t), &c)| (i, j, t, c))
    }

    /// Sum of counts over canonical cells (each undirected edge once).
    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Squared Frobenius norm over ordered index pairs: off-diagonal cells
    /// count twice (once per orientation), diagonal cells once.
    pub fn frobenius_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|(&(i, j, _), &c)| if i == j { c * c } else { 2.0 * c * c })
            .sum()
    }

    pub(crate) fn add_count(&mut self, i: usize, j: usize, t: usize, c: f64) {
        debug_assert!(i < self.node_count && j < self.node_count && t < self.horizon);
        debug_assert!(c >= 0.0);
        if c > 0.0 {
            *self.entries.entry((i.min(j), i.max(j), t)).or_insert(0.0) += c;
        }
    }

    /// Re-bins time into disjoint windows of `w` consecutive steps.
    ///
    /// Window `t'` covers steps `[t' * w, (t' + 1) * w)`; the last window is
    /// shorter when `w` does not divide the horizon. Counts are summed, so
    /// total mass is conserved and `w = 1` is the identity.
    pub fn aggregate_granularity(&self, w: usize) -> Result<DynTensor> {
        if w == 0 {
            return Err(Error::InvalidArgument(
                "granularity w must be at least 1".to_string(),
            ));
        }
        if w == 1 {
            return Ok(self.clone());
        }
        let horizon = self.horizon.div_ceil(w);
        let mut out = DynTensor::zeros(self.node_count, horizon.max(1), self.self_loops_allowed);
        if self.horizon == 0 {
            out.horizon = 0;
        }
        for (&(i, j, t), &c) in &self.entries {
            *out.entries.entry((i, j, t / w)).or_insert(0.0) += c;
        }
        Ok(out)
    }

    /// Fraction of admissible node pairs with at least one edge at step `t`.
    ///
    /// Admissible pairs are unordered distinct pairs, plus singleton pairs
    /// when self-loops are allowed; the result is always in `[0, 1]`.
    pub fn snapshot_density(&self, t: usize) -> Result<f64> {
        if t >= self.horizon {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let n = self.node_count;
        let admissible = if self.self_loops_allowed {
            n * (n + 1) / 2
        } else {
            n * (n - 1) / 2
        };
        if admissible == 0 {
            return Ok(0.0);
        }
        let occupied = self
            .entries
            .iter()
            .filter(|(&(_, _, tt), &c)| tt == t && c > 0.0)
            .count();
        Ok(occupied as f64 / admissible as f64)
    }

    /// Mean per-ordered-pair edge count at each step: element `t` is
    /// `sum_ij X[i, j, t] / node_count^2`, with each undirected edge counted
    /// in both orientations.
    pub fn empirical_rate_series(&self) -> Vec<f64> {
        let mut series = vec![0.0f64; self.horizon];
        let denom = (self.node_count * self.node_count) as f64;
        for (&(i, j, t), &c) in &self.entries {
            series[t] += if i == j { c } else { 2.0 * c };
        }
        for v in &mut series {
            *v /= denom;
        }
        series
    }

    /// Canonical cells grouped by step, for per-snapshot algorithms.
    pub fn by_time(&self) -> Vec<Vec<(usize, usize, f64)>> {
        let mut slices: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); self.horizon];
        for (&(i, j, t), &c) in &self.entries {
            slices[t].push((i, j, c));
        }
        slices
    }

    /// Dense symmetric matrix of the snapshot at step `t`.
    pub fn to_dense_slice(&self, t: usize) -> Result<Array2<f64>> {
        if t >= self.horizon {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let mut m = Array2::<f64>::zeros((self.node_count, self.node_count));
        for (&(i, j, tt), &c) in &self.entries {
            if tt == t {
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        Ok(m)
    }
}

/// Serialized tensor layout: canonical cells as `[i, j, t, count]` rows with
/// `i <= j`, in deterministic key order.
#[derive(Serialize, Deserialize)]
struct TensorDump {
    node_count: usize,
    horizon: usize,
    self_loops_allowed: bool,
    entries: Vec<(usize, usize, usize, f64)>,
}

impl Serialize for DynTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorDump {
            node_count: self.node_count,
            horizon: self.horizon,
            self_loops_allowed: self.self_loops_allowed,
            entries: self.iter().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DynTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dump = TensorDump::deserialize(d)?;
        let mut tensor = DynTensor::zeros(dump.node_count, dump.horizon, dump.self_loops_allowed);
        for (i, j, t, c) in dump.entries {
            if i > j || i >= dump.node_count || j >= dump.node_count || t >= dump.horizon {
                return Err(serde::de::Error::custom(format!(
                    "tensor entry ({i}, {j}, {t}) violates canonical bounds"
                )));
            }
            if !(c >= 0.0) || !c.is_finite() {
                return Err(serde::de::Error::custom(format!(
                    "tensor entry ({i}, {j}, {t}) has invalid count {c}"
                )));
            }
            tensor.add_count(i, j, t, c);
        }
        Ok(tensor)
    }
}

/// Reads edge events from CSV with header `src,dst,t[,weight]`.
///
/// Blank lines and lines starting with `#` are skipped; a missing weight
/// column means weight 1.
pub fn read_events_csv<R: BufRead>(reader: R) -> Result<Vec<EdgeEvent>> {
    let mut events = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if cols.len() < 3 || cols[0] != "src" || cols[1] != "dst" || cols[2] != "t" {
                return Err(Error::CsvParse {
                    line: line_no,
                    message: format!("expected header 'src,dst,t[,weight]', got '{trimmed}'"),
                });
            }
            if cols.len() > 4 || (cols.len() == 4 && cols[3] != "weight") {
                return Err(Error::CsvParse {
                    line: line_no,
                    message: format!("unexpected header columns in '{trimmed}'"),
                });
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols.len() > 4 {
            return Err(Error::CsvParse {
                line: line_no,
                message: format!("expected 3 or 4 columns, got {}", cols.len()),
            });
        }
        let parse_idx = |s: &str, name: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::CsvParse {
                line: line_no,
                message: format!("invalid {name} '{s}'"),
            })
        };
        let src = parse_idx(cols[0], "src")?;
        let dst = parse_idx(cols[1], "dst")?;
        let t = parse_idx(cols[2], "t")?;
        let weight = if cols.len() == 4 {
            cols[3].parse::<f64>().map_err(|_| Error::CsvParse {
                line: line_no,
                message: format!("invalid weight '{}'", cols[3]),
            })?
        } else {
            1.0
        };
        events.push(EdgeEvent::weighted(src, dst, t, weight));
    }
    if !saw_header {
        return Err(Error::CsvParse {
            line: 1,
            message: "missing header 'src,dst,t[,weight]'".to_string(),
        });
    }
    Ok(events)
}

/// Writes canonical cells as edge-event CSV (`src,dst,t,weight`).
pub fn write_events_csv<W: Write>(tensor: &DynTensor, mut writer: W) -> Result<()> {
    writeln!(writer, "src,dst,t,weight")?;
    for (i, j, t, c) in tensor.iter() {
        writeln!(writer, "{i},{j},{t},{c}")?;
    }
    Ok(())
}

/// Loads a tensor from either a JSON dump (`.json`) or an edge-event CSV.
pub fn read_tensor_file(path: &Path, csv_shape: Option<(usize, usize, bool)>) -> Result<DynTensor> {
    let data = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&data)?)
    } else {
        let events = read_events_csv(data.as_bytes())?;
        let (node_count, horizon, self_loops) = csv_shape.map(Ok).unwrap_or_else(|| {
            let n = events.iter().map(|e| e.src.max(e.dst) + 1).max().unwrap_or(0);
            let t = events.iter().map(|e| e.t + 1).max().unwrap_or(0);
            let loops = events.iter().any(|e| e.src == e.dst);
            Ok::<_, Error>((n, t, loops))
        })?;
        DynTensor::from_edge_events(&events, node_count, horizon, self_loops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_event_list_gives_zero_tensor() {
        let t = DynTensor::from_edge_events(&[], 4, 3, false).unwrap();
        assert_eq!(t.nnz(), 0);
        assert_eq!(t.total_mass(), 0.0);
        assert_eq!(t.get(1, 2, 0), 0.0);
    }

    #[test]
    fn single_event_is_mirrored_on_read() {
        let t = DynTensor::from_edge_events(&[EdgeEvent::new(0, 1, 0)], 2, 1, false).unwrap();
        assert_eq!(t.get(0, 1, 0), 1.0);
        assert_eq!(t.get(1, 0, 0), 1.0);
        assert_eq!(t.nnz(), 1);
    }

    #[test]
    fn both_orientations_accumulate_into_one_cell() {
        let events = [
            EdgeEvent::weighted(0, 1, 0, 1.0),
            EdgeEvent::weighted(1, 0, 0, 2.0),
        ];
        let t = DynTensor::from_edge_events(&events, 2, 1, false).unwrap();
        assert_eq!(t.get(0, 1, 0), 3.0);
        assert_eq!(t.get(1, 0, 0), 3.0);
        assert_eq!(t.nnz(), 1);
        assert_eq!(t.total_mass(), 3.0);
    }

    #[test]
    fn out_of_bounds_event_is_named() {
        let err = DynTensor::from_edge_events(&[EdgeEvent::new(0, 5, 0)], 3, 2, false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(0, 5, t=0)"), "unexpected message: {msg}");
    }

    #[test]
    fn self_loop_respects_flag() {
        let ev = [EdgeEvent::new(2, 2, 1)];
        assert!(DynTensor::from_edge_events(&ev, 3, 2, false).is_err());
        let t = DynTensor::from_edge_events(&ev, 3, 2, true).unwrap();
        assert_eq!(t.get(2, 2, 1), 1.0);
    }

    #[test]
    fn negative_weight_is_rejected() {
        let ev = [EdgeEvent::weighted(0, 1, 0, -1.0)];
        assert!(DynTensor::from_edge_events(&ev, 2, 1, false).is_err());
    }

    #[test]
    fn aggregate_identity_at_w1() {
        let ev = [EdgeEvent::new(0, 1, 0), EdgeEvent::new(1, 2, 3)];
        let t = DynTensor::from_edge_events(&ev, 3, 4, false).unwrap();
        let agg = t.aggregate_granularity(1).unwrap();
        assert_eq!(agg, t);
    }

    #[test]
    fn aggregate_sums_disjoint_windows() {
        // Counts at t = 0, 1, 3 on one pair; w = 2 bins them as {0,1}, {2,3}.
        let ev = [
            EdgeEvent::weighted(0, 1, 0, 2.0),
            EdgeEvent::weighted(0, 1, 1, 1.0),
            EdgeEvent::weighted(0, 1, 3, 5.0),
        ];
        let t = DynTensor::from_edge_events(&ev, 2, 4, false).unwrap();
        let agg = t.aggregate_granularity(2).unwrap();
        assert_eq!(agg.horizon(), 2);
        assert_eq!(agg.get(0, 1, 0), 3.0);
        assert_eq!(agg.get(0, 1, 1), 5.0);
        assert_eq!(agg.total_mass(), t.total_mass());
    }

    #[test]
    fn aggregate_keeps_trailing_partial_window() {
        let ev = [EdgeEvent::new(0, 1, 4)];
        let t = DynTensor::from_edge_events(&ev, 2, 5, false).unwrap();
        let agg = t.aggregate_granularity(2).unwrap();
        assert_eq!(agg.horizon(), 3);
        assert_eq!(agg.get(0, 1, 2), 1.0);
    }

    #[test]
    fn aggregate_whole_horizon_single_frame() {
        let ev = [EdgeEvent::new(0, 1, 0), EdgeEvent::new(0, 1, 9)];
        let t = DynTensor::from_edge_events(&ev, 2, 10, false).unwrap();
        let agg = t.aggregate_granularity(10).unwrap();
        assert_eq!(agg.horizon(), 1);
        assert_eq!(agg.get(0, 1, 0), 2.0);
    }

    #[test]
    fn aggregate_rejects_zero_window() {
        let t = DynTensor::zeros(2, 2, false);
        assert!(t.aggregate_granularity(0).is_err());
    }

    #[test]
    fn density_of_empty_snapshot_is_zero() {
        let t = DynTensor::zeros(4, 2, false);
        assert_eq!(t.snapshot_density(0).unwrap(), 0.0);
    }

    #[test]
    fn density_counts_occupied_pairs() {
        // 3 nodes without self-loops: 3 admissible pairs, 1 occupied.
        let t = DynTensor::from_edge_events(&[EdgeEvent::new(0, 1, 0)], 3, 1, false).unwrap();
        assert_abs_diff_eq!(t.snapshot_density(0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn density_of_complete_snapshot_is_one() {
        let ev = [
            EdgeEvent::new(0, 1, 0),
            EdgeEvent::new(0, 2, 0),
            EdgeEvent::new(1, 2, 0),
        ];
        let t = DynTensor::from_edge_events(&ev, 3, 1, false).unwrap();
        assert_eq!(t.snapshot_density(0).unwrap(), 1.0);
    }

    #[test]
    fn density_rejects_out_of_range_step() {
        let t = DynTensor::zeros(3, 2, false);
        assert!(t.snapshot_density(2).is_err());
    }

    #[test]
    fn rate_series_counts_both_orientations() {
        // One edge between 2 nodes at t=0: sum over ordered pairs is 2, /4.
        let t = DynTensor::from_edge_events(&[EdgeEvent::new(0, 1, 0)], 2, 2, false).unwrap();
        let series = t.empirical_rate_series();
        assert_eq!(series, vec![0.5, 0.0]);
    }

    #[test]
    fn rate_series_counts_self_loop_once() {
        let t = DynTensor::from_edge_events(&[EdgeEvent::new(1, 1, 0)], 2, 1, true).unwrap();
        assert_eq!(t.empirical_rate_series(), vec![0.25]);
    }

    #[test]
    fn csv_round_trip_preserves_cells() {
        let ev = [
            EdgeEvent::weighted(0, 3, 1, 2.0),
            EdgeEvent::new(1, 2, 0),
            EdgeEvent::new(2, 1, 0),
        ];
        let t = DynTensor::from_edge_events(&ev, 4, 2, false).unwrap();
        let mut buf = Vec::new();
        write_events_csv(&t, &mut buf).unwrap();
        let back = read_events_csv(&buf[..]).unwrap();
        let t2 = DynTensor::from_edge_events(&back, 4, 2, false).unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn csv_skips_comments_and_defaults_weight() {
        let data = "# generated\nsrc,dst,t\n\n0,1,0\n2,0,1\n";
        let events = read_events_csv(data.as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].weight, 1.0);
        assert_eq!(events[1], EdgeEvent::new(2, 0, 1));
    }

    #[test]
    fn csv_bad_line_reports_line_number() {
        let data = "src,dst,t,weight\n0,1,zero,1\n";
        let err = read_events_csv(data.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "got: {err}");
    }

    #[test]
    fn csv_missing_header_is_rejected() {
        let err = read_events_csv("0,1,0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("header"), "got: {err}");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ev = [
            EdgeEvent::weighted(0, 1, 0, 1.5),
            EdgeEvent::new(2, 2, 3),
            EdgeEvent::new(0, 2, 2),
        ];
        let t = DynTensor::from_edge_events(&ev, 3, 4, true).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: DynTensor = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn json_rejects_non_canonical_entries() {
        let json = r#"{"node_count":3,"horizon":1,"self_loops_allowed":false,
                       "entries":[[2,1,0,1.0]]}"#;
        assert!(serde_json::from_str::<DynTensor>(json).is_err());
    }

    #[test]
    fn dense_slice_is_symmetric() {
        let ev = [EdgeEvent::weighted(0, 2, 1, 3.0)];
        let t = DynTensor::from_edge_events(&ev, 3, 2, false).unwrap();
        let m = t.to_dense_slice(1).unwrap();
        assert_eq!(m[(0, 2)], 3.0);
        assert_eq!(m[(2, 0)], 3.0);
        assert_eq!(m[(0, 1)], 0.0);
    }

    #[test]
    fn frobenius_counts_mirrors() {
        let t = DynTensor::from_edge_events(&[EdgeEvent::weighted(0, 1, 0, 3.0)], 2, 1, false)
            .unwrap();
        // Ordered pairs (0,1) and (1,0) each contribute 9.
        assert_eq!(t.frobenius_sq(), 18.0);
    }
}
