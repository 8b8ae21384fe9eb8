//! Distribution of discontinuity moves over a corpus.

use serde::{Deserialize, Serialize};

use crate::conversion::{remove_discontinuities, strip_remotes, MoveClass};
use crate::error::{Error, Result};
use crate::graph::UccaGraph;
use crate::par::Execution;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCounts {
    pub ancestor1: usize,
    pub ancestor2: usize,
    pub ancestor3_plus: usize,
    pub discontinuous: usize,
}

impl MoveCounts {
    pub fn total(&self) -> usize {
        self.ancestor1 + self.ancestor2 + self.ancestor3_plus + self.discontinuous
    }

    pub fn merge(self, o: MoveCounts) -> MoveCounts {
        MoveCounts {
            ancestor1: self.ancestor1 + o.ancestor1,
            ancestor2: self.ancestor2 + o.ancestor2,
            ancestor3_plus: self.ancestor3_plus + o.ancestor3_plus,
            discontinuous: self.discontinuous + o.discontinuous,
        }
    }
}

/// Counts plus percentages of the total (all zero for an empty table).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub sentences: usize,
    pub counts: MoveCounts,
    pub percent: [f64; 4],
}

impl StatsReport {
    pub fn from_counts(sentences: usize, counts: MoveCounts) -> Self {
        let total = counts.total();
        let pct = |c: usize| {
            if total == 0 {
                0.0
            } else {
                100.0 * c as f64 / total as f64
            }
        };
        StatsReport {
            sentences,
            counts,
            percent: [
                pct(counts.ancestor1),
                pct(counts.ancestor2),
                pct(counts.ancestor3_plus),
                pct(counts.discontinuous),
            ],
        }
    }

    /// Four `category<TAB>count<TAB>percent` rows.
    pub fn table(&self) -> String {
        let c = self.counts;
        [
            ("ancestor 1", c.ancestor1),
            ("ancestor 2", c.ancestor2),
            ("ancestor 3+", c.ancestor3_plus),
            ("discontinuous", c.discontinuous),
        ]
        .iter()
        .zip(self.percent)
        .map(|((name, n), p)| format!("{name}\t{n}\t{p:.1}%"))
        .collect::<Vec<_>>()
        .join("\n")
    }
}

pub fn graph_moves(graph: &UccaGraph) -> Result<MoveCounts> {
    if let Some(v) = graph.validate().into_iter().next() {
        return Err(Error::InvalidGraph(v.0));
    }
    let (stripped, _) = strip_remotes(graph);
    let (_, moves) = remove_discontinuities(&stripped)?;
    let mut out = MoveCounts::default();
    for m in moves {
        match m.class {
            MoveClass::Ancestor(1) => out.ancestor1 += 1,
            MoveClass::Ancestor(2) => out.ancestor2 += 1,
            MoveClass::Ancestor(_) => out.ancestor3_plus += 1,
            MoveClass::Discontinuous => out.discontinuous += 1,
        }
    }
    Ok(out)
}

pub fn corpus_stats(corpus: &[UccaGraph], exec: Execution) -> Result<StatsReport> {
    let per = exec.map(corpus, graph_moves);
    let mut total = MoveCounts::default();
    for (idx, c) in per.into_iter().enumerate() {
        total =
            total.merge(c.map_err(|e| Error::InvalidGraph(format!("sentence {}: {e}", idx + 1)))?);
    }
    Ok(StatsReport::from_counts(corpus.len(), total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::sample_graph;
    use crate::generator::{generate, SyntheticSpec};

    #[test]
    fn sample_has_two_ancestor_one_moves() {
        let c = graph_moves(&sample_graph()).unwrap();
        assert_eq!(
            c,
            MoveCounts {
                ancestor1: 2,
                ..Default::default()
            }
        );
    }

    #[test]
    fn continuous_corpus_is_all_zero() {
        let spec = SyntheticSpec {
            sentences: 30,
            p_discontinuity: 0.0,
            ..Default::default()
        };
        let r = corpus_stats(&generate(&spec, 2).unwrap(), Execution::Sequential).unwrap();
        assert_eq!(r.counts.total(), 0);
        assert_eq!(r.percent, [0.0; 4]);
    }

    #[test]
    fn injected_corpus_is_all_ancestor_one() {
        let spec = SyntheticSpec {
            sentences: 60,
            p_discontinuity: 1.0,
            min_tokens: 5,
            ..Default::default()
        };
        let r = corpus_stats(&generate(&spec, 3).unwrap(), Execution::Parallel).unwrap();
        assert!(r.counts.ancestor1 > 0);
        assert_eq!(r.percent[0], 100.0);
    }

    #[test]
    fn table_one_percentages() {
        let counts = MoveCounts {
            ancestor1: 1609,
            ancestor2: 115,
            ancestor3_plus: 21,
            discontinuous: 18,
        };
        let r = StatsReport::from_counts(0, counts);
        let rounded: Vec<String> = r.percent.iter().map(|p| format!("{p:.1}")).collect();
        assert_eq!(rounded, ["91.3", "6.5", "1.2", "1.0"]);
    }
}
