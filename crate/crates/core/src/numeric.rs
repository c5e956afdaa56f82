/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Formats a value with 12 significant digits; negative zero prints as zero.
pub(crate) fn sig12(value: f64) -> String {
    let v = if value == 0.0 { 0.0 } else { value };
    format!("{v:.11e}")
}
