use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FusionError, FusionRow, FusionTable};
use crate::normalize::{Modality4, ModalityVector};

// Gains closer than this are treated as equal so the fixed attribute order
// decides, independent of summation order.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        confidence: f64,
    },
    Split {
        attribute: Modality4,
        when_false: Box<Node>,
        when_true: Box<Node>,
    },
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split {
                when_false,
                when_true,
                ..
            } => 1 + when_false.depth().max(when_true.depth()),
        }
    }

    fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split {
                when_false,
                when_true,
                ..
            } => when_false.leaves() + when_true.leaves(),
        }
    }
}

/// Decision tree over the four modality booleans; leaves hold confidence
/// percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    root: Node,
}

/// Shape of a trained model, for the analytics view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub depth: usize,
    pub leaves: usize,
    pub tree: Node,
}

impl FusionModel {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            depth: self.depth(),
            leaves: self.root.leaves(),
            tree: self.root.clone(),
        }
    }
}

fn entropy(rows: &[&FusionRow]) -> f64 {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for r in rows {
        *counts.entry(r.confidence.to_bits()).or_default() += 1;
    }
    let n = rows.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn is_pure(rows: &[&FusionRow]) -> bool {
    rows.windows(2)
        .all(|w| w[0].confidence.to_bits() == w[1].confidence.to_bits())
}

fn partition<'a>(
    rows: &[&'a FusionRow],
    attr: Modality4,
) -> (Vec<&'a FusionRow>, Vec<&'a FusionRow>) {
    rows.iter().partition(|r| !r.vector.get(attr))
}

fn grow(rows: &[&FusionRow], remaining: &[Modality4]) -> Result<Node, FusionError> {
    if is_pure(rows) {
        return Ok(Node::Leaf {
            confidence: rows[0].confidence,
        });
    }
    let base = entropy(rows);
    let n = rows.len() as f64;
    let mut best: Option<(Modality4, f64)> = None;
    for &attr in remaining {
        let (f, t) = partition(rows, attr);
        if f.is_empty() || t.is_empty() {
            continue;
        }
        let gain = base - (f.len() as f64 / n) * entropy(&f) - (t.len() as f64 / n) * entropy(&t);
        if best.is_none_or(|(_, g)| gain > g + GAIN_EPS) {
            best = Some((attr, gain));
        }
    }
    let Some((attr, _)) = best else {
        return Err(FusionError::Training(format!(
            "rows {:?} disagree but no attribute separates them",
            rows.iter().map(|r| r.vector).collect::<Vec<_>>()
        )));
    };
    let rest: Vec<Modality4> = remaining.iter().copied().filter(|&a| a != attr).collect();
    let (f, t) = partition(rows, attr);
    Ok(Node::Split {
        attribute: attr,
        when_false: Box::new(grow(&f, &rest)?),
        when_true: Box::new(grow(&t, &rest)?),
    })
}

/// ID3 on the complete table: each distinct confidence is a class, splits
/// maximize information gain, ties go to finger, face, gender, age in that
/// order.
pub fn train(table: &FusionTable) -> Result<FusionModel, FusionError> {
    if !table.is_complete() {
        let missing: Vec<_> = ModalityVector::all()
            .filter(|v| table.lookup(v).is_none())
            .collect();
        return Err(FusionError::Training(format!(
            "table is missing rows {missing:?}"
        )));
    }
    let rows: Vec<&FusionRow> = table.rows().iter().collect();
    Ok(FusionModel {
        root: grow(&rows, &Modality4::ALL)?,
    })
}

pub fn infer(model: &FusionModel, v: &ModalityVector) -> f64 {
    let mut node = &model.root;
    loop {
        match node {
            Node::Leaf { confidence } => return *confidence,
            Node::Split {
                attribute,
                when_false,
                when_true,
            } => {
                node = if v.get(*attribute) {
                    when_true
                } else {
                    when_false
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::complete_table;

    fn model() -> FusionModel {
        train(&complete_table(&FusionTable::published()).unwrap()).unwrap()
    }

    #[test]
    fn zero_training_error() {
        let table = complete_table(&FusionTable::published()).unwrap();
        let m = train(&table).unwrap();
        for r in table.rows() {
            assert_eq!(infer(&m, &r.vector), r.confidence);
        }
    }

    #[test]
    fn published_examples() {
        let m = model();
        assert_eq!(
            infer(&m, &ModalityVector::new(true, true, true, false)),
            80.0
        );
        assert_eq!(
            infer(&m, &ModalityVector::new(false, false, false, false)),
            0.0
        );
        assert_eq!(
            infer(&m, &ModalityVector::new(true, false, true, true)),
            60.0
        );
    }

    #[test]
    fn deterministic_and_shallow() {
        assert_eq!(model(), model());
        assert!(model().depth() <= 4);
    }

    #[test]
    fn root_splits_on_finger() {
        // finger and face carry identical gain on this table; the tie-break
        // order puts finger first.
        match model().root() {
            Node::Split { attribute, .. } => assert_eq!(*attribute, Modality4::Finger),
            other => panic!("unexpected root {other:?}"),
        }
    }

    #[test]
    fn incomplete_table_refuses_training() {
        assert!(matches!(
            train(&FusionTable::published()),
            Err(FusionError::Training(_))
        ));
    }

    #[test]
    fn constant_table_is_a_single_leaf() {
        let t = FusionTable::new(ModalityVector::all().map(|v| (v, 42.0))).unwrap();
        let m = train(&t).unwrap();
        assert_eq!(m.depth(), 0);
        assert_eq!(
            infer(&m, &ModalityVector::new(true, false, true, false)),
            42.0
        );
    }
}
