use std::collections::BTreeMap;

use crate::prototype::Label;

/// `2PR / (P + R)`, defined as 0 when there are no true positives.
pub fn f1_score(tp: u64, fp: u64, fn_: u64) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ClassCounts {
    pub fn f1(&self) -> f64 {
        f1_score(self.tp, self.fp, self.fn_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F1Mode {
    /// F1 of a single positive class.
    Binary { positive: Label },
    /// Unweighted mean of per-class F1 over every class seen.
    Macro,
}

impl F1Mode {
    /// Binary on the larger label when exactly two labels exist, macro otherwise.
    pub fn for_labels<I: IntoIterator<Item = Label>>(labels: I) -> Self {
        let mut set: Vec<Label> = labels.into_iter().collect();
        set.sort_unstable();
        set.dedup();
        match set.as_slice() {
            [_, positive] => F1Mode::Binary {
                positive: *positive,
            },
            _ => F1Mode::Macro,
        }
    }
}

/// Test-then-train confusion counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Prequential {
    mode: F1Mode,
    per_class: BTreeMap<Label, ClassCounts>,
    predictions: u64,
}

impl Prequential {
    pub fn new(mode: F1Mode) -> Self {
        Self {
            mode,
            per_class: BTreeMap::new(),
            predictions: 0,
        }
    }

    pub fn mode(&self) -> F1Mode {
        self.mode
    }

    pub fn update(&mut self, truth: Label, predicted: Label) {
        self.predictions += 1;
        if truth == predicted {
            self.per_class.entry(truth).or_default().tp += 1;
        } else {
            self.per_class.entry(predicted).or_default().fp += 1;
            self.per_class.entry(truth).or_default().fn_ += 1;
        }
    }

    pub fn total_predictions(&self) -> u64 {
        self.predictions
    }

    pub fn class(&self, label: Label) -> ClassCounts {
        self.per_class.get(&label).copied().unwrap_or_default()
    }

    pub fn per_class(&self) -> &BTreeMap<Label, ClassCounts> {
        &self.per_class
    }

    /// Counts reported in metric records: the positive class in binary mode,
    /// the sum over classes in macro mode.
    pub fn headline_counts(&self) -> ClassCounts {
        match self.mode {
            F1Mode::Binary { positive } => self.class(positive),
            F1Mode::Macro => self
                .per_class
                .values()
                .fold(ClassCounts::default(), |a, c| ClassCounts {
                    tp: a.tp + c.tp,
                    fp: a.fp + c.fp,
                    fn_: a.fn_ + c.fn_,
                }),
        }
    }

    pub fn f1(&self) -> f64 {
        match self.mode {
            F1Mode::Binary { positive } => self.class(positive).f1(),
            F1Mode::Macro if self.per_class.is_empty() => 0.0,
            F1Mode::Macro => {
                self.per_class.values().map(ClassCounts::f1).sum::<f64>()
                    / self.per_class.len() as f64
            }
        }
    }
}
