//! Compensated (Neumaier) summation.

/// Running sum with a compensation term; order-dependent but far less
/// sensitive to cancellation than a naive fold.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_sum() {
        let vals = [1.0, 1e100, 1.0, -1e100];
        let naive: f64 = vals.iter().sum();
        let comp: NeumaierSum = vals.iter().copied().collect();
        assert_eq!(naive, 0.0);
        assert_eq!(comp.value(), 2.0);
    }

    #[test]
    fn merge_matches_single_pass() {
        let a: NeumaierSum = (0..1000).map(|i| 0.1 * i as f64).collect();
        let b: NeumaierSum = (1000..2000).map(|i| 0.1 * i as f64).collect();
        let mut m = a;
        m.merge(&b);
        let all: NeumaierSum = (0..2000).map(|i| 0.1 * i as f64).collect();
        assert!((m.value() - all.value()).abs() <= 1e-9);
    }
}
