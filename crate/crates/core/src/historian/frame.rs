use super::HistorianError;

/// Tag names are restricted so the CSV header never needs quoting.
pub fn is_valid_tag(tag: &str) -> bool {
    !tag.is_empty()
        && tag
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'.' || b == b'_')
}

/// Tagged, time-stamped multi-signal record.
///
/// Values are stored row-major: row `i` holds every tag sampled at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    tags: Vec<String>,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeriesFrame {
    pub fn new(tags: Vec<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self, HistorianError> {
        for (i, tag) in tags.iter().enumerate() {
            if !is_valid_tag(tag) {
                return Err(HistorianError::FrameInvalid(format!("invalid tag name {tag:?}")));
            }
            if tags[..i].contains(tag) {
                return Err(HistorianError::FrameInvalid(format!("duplicate tag {tag}")));
            }
        }
        if values.len() != times.len() * tags.len() {
            return Err(HistorianError::FrameInvalid(format!(
                "{} values for {} rows x {} tags",
                values.len(),
                times.len(),
                tags.len()
            )));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(HistorianError::FrameInvalid(format!(
                "time not strictly increasing at row {}",
                k + 1
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(HistorianError::FrameInvalid("non-finite timestamp".into()));
        }
        Ok(Self { tags, times, values })
    }

    /// Builds a frame from named columns sharing one time axis.
    pub fn from_columns(times: Vec<f64>, columns: Vec<(String, Vec<f64>)>) -> Result<Self, HistorianError> {
        let n = times.len();
        if let Some((tag, _)) = columns.iter().find(|(_, c)| c.len() != n) {
            return Err(HistorianError::FrameInvalid(format!("column {tag} length mismatch")));
        }
        let mut values = Vec::with_capacity(n * columns.len());
        for i in 0..n {
            values.extend(columns.iter().map(|(_, c)| c[i]));
        }
        let tags = columns.into_iter().map(|(t, _)| t).collect();
        Self::new(tags, times, values)
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn width(&self) -> usize {
        self.tags.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.tags.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn tag_index(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn require_tag(&self, tag: &str) -> Result<usize, HistorianError> {
        self.tag_index(tag)
            .ok_or_else(|| HistorianError::UnknownTag(tag.to_string()))
    }

    pub fn column(&self, tag: &str) -> Result<Vec<f64>, HistorianError> {
        let j = self.require_tag(tag)?;
        Ok(self.column_at(j))
    }

    pub fn column_at(&self, j: usize) -> Vec<f64> {
        let w = self.tags.len();
        self.values.iter().skip(j).step_by(w).copied().collect()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.tags.len() + col]
    }

    pub fn set_value(&mut self, row: usize, col: usize, v: f64) {
        let w = self.tags.len();
        self.values[row * w + col] = v;
    }

    /// Keeps only the listed tags, in the listed order.
    pub fn select(&self, tags: &[&str]) -> Result<Self, HistorianError> {
        let idx = tags
            .iter()
            .map(|t| self.require_tag(t))
            .collect::<Result<Vec<_>, _>>()?;
        let mut values = Vec::with_capacity(self.len() * idx.len());
        for i in 0..self.len() {
            let row = self.row(i);
            values.extend(idx.iter().map(|&j| row[j]));
        }
        Self::new(tags.iter().map(|t| t.to_string()).collect(), self.times.clone(), values)
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        let w = self.tags.len();
        Self {
            tags: self.tags.clone(),
            times: self.times[start..end].to_vec(),
            values: self.values[start * w..end * w].to_vec(),
        }
    }

    /// Grid spacing when the timestamps are uniform to within a relative
    /// tolerance of 1e-9, `None` otherwise (or with fewer than two rows).
    pub fn uniform_step(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let span = self.times[self.times.len() - 1] - self.times[0];
        let dt = span / (self.times.len() - 1) as f64;
        let tol = 1e-9 * dt.abs().max(1e-300);
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= tol)
            .then_some(dt)
    }
}
