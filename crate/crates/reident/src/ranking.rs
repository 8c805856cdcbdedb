//! Turns a score table into a candidate ranking via the `score` or `rank`
//! aggregation method, with sensor weights and layered tie handling:
//! tied candidates receive their mean position (realistic) and their worst
//! position (pessimistic); top-k membership is decided pessimistically.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attack::ScoreTable;
use crate::types::{LogicalSensor, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    /// Weighted mean of sensor similarities; higher aggregate is better.
    #[default]
    Score,
    /// Weighted mean of per-sensor realistic ranks; lower aggregate is better.
    Rank,
}

impl std::fmt::Display for RankingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RankingMethod::Score => f.write_str("score"),
            RankingMethod::Rank => f.write_str("rank"),
        }
    }
}

impl std::str::FromStr for RankingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "score" => Ok(RankingMethod::Score),
            "rank" => Ok(RankingMethod::Rank),
            other => Err(format!("unknown ranking method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub handle: String,
    pub aggregate: f64,
    /// Mean position among candidates tied on the aggregate.
    pub realistic_rank: f64,
    /// Worst (largest) position among ties; decides top-k membership.
    pub pessimistic_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    pub method: RankingMethod,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn entry(&self, handle: &str) -> Option<&RankedEntry> {
        self.entries.iter().find(|e| e.handle == handle)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("handle,aggregate,realistic_rank,pessimistic_rank\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.handle, e.aggregate, e.realistic_rank, e.pessimistic_rank
            ));
        }
        out
    }
}

/// Weighted mean of sensor similarities per handle. Equal weights reproduce
/// the unweighted mean; indicator weights project onto a sensor subset.
pub fn aggregate_score(table: &ScoreTable, weights: &WeightVector) -> BTreeMap<String, f64> {
    table
        .rows
        .iter()
        .map(|(handle, sensors)| {
            let agg = LogicalSensor::ALL
                .iter()
                .map(|s| weights.component(*s) * sensors[s])
                .sum();
            (handle.clone(), agg)
        })
        .collect()
}

/// Realistic (mean-of-ties) positions for values ranked descending.
fn realistic_ranks_desc(values: &[(String, f64)]) -> BTreeMap<String, f64> {
    let mut sorted: Vec<&(String, f64)> = values.iter().collect();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut ranks = BTreeMap::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].1 == sorted[i].1 {
            j += 1;
        }
        // positions i+1 ..= j, mean of the tied block
        let mean = (i + 1 + j) as f64 / 2.0;
        for item in &sorted[i..j] {
            ranks.insert(item.0.clone(), mean);
        }
        i = j;
    }
    ranks
}

/// Weighted mean of per-sensor realistic ranks; lower is better.
pub fn aggregate_rank(table: &ScoreTable, weights: &WeightVector) -> BTreeMap<String, f64> {
    let mut totals: BTreeMap<String, f64> =
        table.rows.keys().map(|h| (h.clone(), 0.0)).collect();
    for sensor in LogicalSensor::ALL {
        let values: Vec<(String, f64)> = table
            .rows
            .iter()
            .map(|(h, sensors)| (h.clone(), sensors[&sensor]))
            .collect();
        let ranks = realistic_ranks_desc(&values);
        let w = weights.component(sensor);
        for (handle, rank) in ranks {
            *totals.get_mut(&handle).unwrap() += w * rank;
        }
    }
    totals
}

/// Sorts candidates by aggregate (descending for `Score`, ascending for
/// `Rank`) and assigns realistic and pessimistic ranks to tied blocks.
pub fn rank_candidates(
    table: &ScoreTable,
    method: RankingMethod,
    weights: &WeightVector,
) -> RankedList {
    let aggregates = match method {
        RankingMethod::Score => aggregate_score(table, weights),
        RankingMethod::Rank => aggregate_rank(table, weights),
    };
    let mut items: Vec<(String, f64)> = aggregates.into_iter().collect();
    match method {
        RankingMethod::Score => {
            items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)))
        }
        RankingMethod::Rank => {
            items.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        }
    }

    let mut entries = Vec::with_capacity(items.len());
    let mut i = 0;
    while i < items.len() {
        let mut j = i;
        while j < items.len() && items[j].1 == items[i].1 {
            j += 1;
        }
        let realistic = (i + 1 + j) as f64 / 2.0;
        let pessimistic = j;
        for (handle, aggregate) in &items[i..j] {
            entries.push(RankedEntry {
                handle: handle.clone(),
                aggregate: *aggregate,
                realistic_rank: realistic,
                pessimistic_rank: pessimistic,
            });
        }
        i = j;
    }
    RankedList { method, entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, [f64; 4])]) -> ScoreTable {
        // order: bvp, eda, temp, acc
        let rows = rows
            .iter()
            .map(|(handle, sims)| {
                let sensors = [
                    (LogicalSensor::Bvp, sims[0]),
                    (LogicalSensor::Eda, sims[1]),
                    (LogicalSensor::Temp, sims[2]),
                    (LogicalSensor::Acc, sims[3]),
                ]
                .into_iter()
                .collect();
                (handle.to_string(), sensors)
            })
            .collect();
        ScoreTable {
            target_id: "T".to_string(),
            rows,
            warnings: vec![],
        }
    }

    #[test]
    fn perfect_scores_aggregate_to_one() {
        let t = table(&[("a", [1.0, 1.0, 1.0, 1.0])]);
        let agg = aggregate_score(&t, &WeightVector::new(0.4, 0.3, 0.2, 0.1).unwrap());
        assert_eq!(agg["a"], 1.0);
    }

    #[test]
    fn weighted_mean_arithmetic() {
        let t = table(&[("a", [0.8, 0.0, 0.0, 0.6])]);
        let w = WeightVector::indicator(&[LogicalSensor::Bvp, LogicalSensor::Acc]).unwrap();
        assert_eq!(aggregate_score(&t, &w)["a"], 0.7);
    }

    #[test]
    fn bvp_projection_equals_raw_bvp() {
        let t = table(&[("a", [0.81, 0.2, 0.3, 0.4]), ("b", [0.37, 0.9, 0.9, 0.9])]);
        let w = WeightVector::indicator(&[LogicalSensor::Bvp]).unwrap();
        let agg = aggregate_score(&t, &w);
        assert_eq!(agg["a"], 0.81);
        assert_eq!(agg["b"], 0.37);
        let ranked = rank_candidates(&t, RankingMethod::Score, &w);
        assert_eq!(ranked.entries[0].handle, "a");
    }

    #[test]
    fn best_on_all_sensors_gets_aggregate_rank_one() {
        let t = table(&[
            ("a", [0.9, 0.9, 0.9, 0.9]),
            ("b", [0.5, 0.5, 0.5, 0.5]),
            ("c", [0.1, 0.1, 0.1, 0.1]),
        ]);
        let agg = aggregate_rank(&t, &WeightVector::equal());
        assert_eq!(agg["a"], 1.0);
        let ranked = rank_candidates(&t, RankingMethod::Rank, &WeightVector::equal());
        assert_eq!(ranked.entries[0].handle, "a");
        assert_eq!(ranked.entries[0].realistic_rank, 1.0);
    }

    #[test]
    fn tied_candidates_share_aggregates() {
        let t = table(&[("a", [0.5, 0.5, 0.5, 0.5]), ("b", [0.5, 0.5, 0.5, 0.5])]);
        let agg = aggregate_rank(&t, &WeightVector::equal());
        assert_eq!(agg["a"], agg["b"]);
    }

    #[test]
    fn hand_computed_rank_aggregation() {
        // 3 candidates, 2 sensors (bvp, eda), per-sensor ranks
        // a: (1,3), b: (2,1), c: (3,2); equal weights over the two sensors
        // aggregates 2.0, 1.5, 2.5 -> order b, a, c
        let t = table(&[
            ("a", [0.9, 0.1, 0.0, 0.0]),
            ("b", [0.5, 0.8, 0.0, 0.0]),
            ("c", [0.2, 0.4, 0.0, 0.0]),
        ]);
        let w = WeightVector::indicator(&[LogicalSensor::Bvp, LogicalSensor::Eda]).unwrap();
        let agg = aggregate_rank(&t, &w);
        assert_eq!(agg["a"], 2.0);
        assert_eq!(agg["b"], 1.5);
        assert_eq!(agg["c"], 2.5);
        let ranked = rank_candidates(&t, RankingMethod::Rank, &w);
        let order: Vec<&str> = ranked.entries.iter().map(|e| e.handle.as_str()).collect();
        assert_eq!(order, vec!["b", "a", "c"]);
    }

    #[test]
    fn distinct_aggregates_have_position_ranks() {
        let t = table(&[
            ("a", [0.9, 0.9, 0.9, 0.9]),
            ("b", [0.5, 0.5, 0.5, 0.5]),
            ("c", [0.1, 0.1, 0.1, 0.1]),
        ]);
        let ranked = rank_candidates(&t, RankingMethod::Score, &WeightVector::equal());
        for (i, e) in ranked.entries.iter().enumerate() {
            assert_eq!(e.realistic_rank, (i + 1) as f64);
            assert_eq!(e.pessimistic_rank, i + 1);
        }
    }

    #[test]
    fn full_tie_is_pessimistic_about_topk() {
        let rows: Vec<(String, [f64; 4])> = (0..15)
            .map(|i| (format!("h{i:02}"), [0.4, 0.4, 0.4, 0.4]))
            .collect();
        let refs: Vec<(&str, [f64; 4])> =
            rows.iter().map(|(h, s)| (h.as_str(), *s)).collect();
        let t = table(&refs);
        let ranked = rank_candidates(&t, RankingMethod::Score, &WeightVector::equal());
        for e in &ranked.entries {
            assert_eq!(e.realistic_rank, 8.0);
            assert_eq!(e.pessimistic_rank, 15);
        }
    }

    #[test]
    fn pessimistic_never_more_generous_than_realistic() {
        let t = table(&[
            ("a", [0.5, 0.5, 0.5, 0.5]),
            ("b", [0.5, 0.5, 0.5, 0.5]),
            ("c", [0.9, 0.1, 0.3, 0.2]),
        ]);
        for method in [RankingMethod::Score, RankingMethod::Rank] {
            let ranked = rank_candidates(&t, method, &WeightVector::equal());
            for e in &ranked.entries {
                assert!(e.pessimistic_rank as f64 >= e.realistic_rank);
            }
        }
    }
}
