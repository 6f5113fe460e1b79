use serde::{Deserialize, Serialize};

/// Square count matrix, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

/// The headline scores of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Unweighted accuracy: mean per-class recall over classes with support.
    pub ua: f64,
    /// Support-weighted mean precision.
    pub wap: f64,
    /// Support-weighted mean F1.
    pub waf1: f64,
    /// Overall fraction correct.
    pub accuracy: f64,
}

impl Metrics {
    /// The three reported scores with their table labels.
    pub fn headline(&self) -> [(&'static str, f64); 3] {
        [("UA", self.ua), ("WAP", self.wap), ("WAF1", self.waf1)]
    }
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    /// Builds from nested rows; `None` if they are not square.
    pub fn from_rows(rows: &[Vec<u64>]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Self {
            classes: n,
            counts: rows.concat(),
        })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Self {
        let mut m = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.add(t, p);
        }
        m
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.classes.max(1))
            .map(<[u64]>::to_vec)
            .collect()
    }

    pub fn support(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.get(c, p)).sum()
    }

    pub fn predicted(&self, c: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, c)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn recall(&self, c: usize) -> f64 {
        Self::ratio(self.get(c, c), self.support(c))
    }

    /// Zero for a class that is never predicted.
    pub fn precision(&self, c: usize) -> f64 {
        Self::ratio(self.get(c, c), self.predicted(c))
    }

    pub fn f1(&self, c: usize) -> f64 {
        let (p, r) = (self.precision(c), self.recall(c));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn weighted(&self, per_class: impl Fn(usize) -> f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..self.classes)
            .map(|c| self.support(c) as f64 * per_class(c))
            .sum::<f64>()
            / total as f64
    }

    pub fn metrics(&self) -> Metrics {
        let present: Vec<usize> = (0..self.classes).filter(|&c| self.support(c) > 0).collect();
        let ua = if present.is_empty() {
            0.0
        } else {
            present.iter().map(|&c| self.recall(c)).sum::<f64>() / present.len() as f64
        };
        let correct: u64 = (0..self.classes).map(|c| self.get(c, c)).sum();
        Metrics {
            ua,
            wap: self.weighted(|c| self.precision(c)),
            waf1: self.weighted(|c| self.f1(c)),
            accuracy: Self::ratio(correct, self.total()),
        }
    }
}
