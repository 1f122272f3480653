use crate::error::{Error, Result};

/// Observations with cached logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct Data {
    x: Vec<f64>,
    ln_x: Vec<f64>,
}

impl Data {
    /// Rejects the first nonpositive or nonfinite value, naming its index.
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Config("no observations".into()));
        }
        if let Some((index, &value)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidDatum { index, value });
        }
        let ln_x = x.iter().map(|v| v.ln()).collect();
        Ok(Self { x, ln_x })
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn ln_values(&self) -> &[f64] {
        &self.ln_x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.x.len() as f64
    }

    /// Elementwise reciprocals.
    pub fn reciprocal(&self) -> Self {
        Self {
            x: self.x.iter().map(|v| 1.0 / v).collect(),
            ln_x: self.x.iter().map(|v| (1.0 / v).ln()).collect(),
        }
    }
}

/// Latent state of the slice sampler.
///
/// Weights are kept as `p_j = V_j ∏_{i<j} (1 - V_i)` together with the
/// leftover stick `∏_j (1 - V_j)`, so the residual mass never suffers
/// cancellation from `1 - Σ p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub(crate) z: f64,
    pub(crate) v: Vec<f64>,
    pub(crate) eps: Vec<f64>,
    pub(crate) p: Vec<f64>,
    pub(crate) rest: f64,
    pub(crate) alloc: Vec<usize>,
    pub(crate) u: Vec<f64>,
    pub(crate) counts: Vec<usize>,
    pub(crate) sums: Vec<f64>,
}

impl ChainState {
    /// Builds a state and derives weights and cluster statistics. Slices are
    /// set to half of each datum's cluster weight.
    pub fn new(z: f64, v: Vec<f64>, eps: Vec<f64>, alloc: Vec<usize>, data: &Data) -> Result<Self> {
        if v.len() != eps.len() {
            return Err(Error::InvalidState(format!(
                "{} sticks but {} atoms",
                v.len(),
                eps.len()
            )));
        }
        if alloc.len() != data.len() {
            return Err(Error::InvalidState(format!(
                "{} allocations for {} observations",
                alloc.len(),
                data.len()
            )));
        }
        let mut s = Self {
            z,
            v,
            eps,
            p: vec![],
            rest: 1.0,
            alloc,
            u: vec![],
            counts: vec![],
            sums: vec![],
        };
        s.refresh_weights();
        s.refresh_stats(data)?;
        s.u = s.alloc.iter().map(|&c| 0.5 * s.p[c]).collect();
        s.check(data)?;
        Ok(s)
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn sticks(&self) -> &[f64] {
        &self.v
    }

    pub fn atoms(&self) -> &[f64] {
        &self.eps
    }

    pub fn weights(&self) -> &[f64] {
        &self.p
    }

    /// `∏_j (1 - V_j)`, the mass not yet assigned to a stick.
    pub fn residual(&self) -> f64 {
        self.rest
    }

    pub fn allocations(&self) -> &[usize] {
        &self.alloc
    }

    pub fn slices(&self) -> &[f64] {
        &self.u
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn num_sticks(&self) -> usize {
        self.v.len()
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|n| **n > 0).count()
    }

    pub fn set_z(&mut self, z: f64) {
        self.z = z;
    }

    pub fn set_atom(&mut self, j: usize, eps: f64) {
        self.eps[j] = eps;
    }

    pub fn set_stick(&mut self, j: usize, v: f64) {
        self.v[j] = v;
        self.refresh_weights();
    }

    pub fn set_slice(&mut self, i: usize, u: f64) {
        self.u[i] = u;
    }

    /// Moves datum `i` to cluster `j`, keeping counts and sums current.
    pub fn set_allocation(&mut self, i: usize, j: usize, data: &Data) {
        let old = self.alloc[i];
        let x = data.values()[i];
        self.counts[old] -= 1;
        self.sums[old] -= x;
        self.counts[j] += 1;
        self.sums[j] += x;
        self.alloc[i] = j;
    }

    pub(crate) fn push_stick(&mut self, v: f64, eps: f64) {
        self.v.push(v);
        self.eps.push(eps);
        self.p.push(v * self.rest);
        self.rest *= 1.0 - v;
        self.counts.push(0);
        self.sums.push(0.0);
    }

    pub(crate) fn refresh_weights(&mut self) {
        self.p.clear();
        let mut rest = 1.0;
        for &v in &self.v {
            self.p.push(v * rest);
            rest *= 1.0 - v;
        }
        self.rest = rest;
    }

    pub(crate) fn refresh_stats(&mut self, data: &Data) -> Result<()> {
        let k = self.v.len();
        self.counts = vec![0; k];
        self.sums = vec![0.0; k];
        for (i, &c) in self.alloc.iter().enumerate() {
            if c >= k {
                return Err(Error::InvalidState(format!(
                    "datum {i} allocated to cluster {c} of {k}"
                )));
            }
            self.counts[c] += 1;
            self.sums[c] += data.values()[i];
        }
        Ok(())
    }

    /// Drops sticks after the last occupied one.
    pub(crate) fn truncate_unoccupied_tail(&mut self) {
        let keep = self
            .counts
            .iter()
            .rposition(|n| *n > 0)
            .map_or(0, |j| j + 1);
        self.v.truncate(keep);
        self.eps.truncate(keep);
        self.counts.truncate(keep);
        self.sums.truncate(keep);
        self.refresh_weights();
    }

    /// Structural consistency: lengths, allocation range, parameter domains
    /// and cluster statistics recomputed from scratch.
    pub fn check(&self, data: &Data) -> Result<()> {
        let k = self.v.len();
        if self.eps.len() != k
            || self.p.len() != k
            || self.counts.len() != k
            || self.sums.len() != k
        {
            return Err(Error::InvalidState(
                "per-stick vectors disagree in length".into(),
            ));
        }
        if self.alloc.len() != data.len() || self.u.len() != data.len() {
            return Err(Error::InvalidState(
                "per-datum vectors disagree in length".into(),
            ));
        }
        if !(self.z > 0.0) || !self.z.is_finite() {
            return Err(Error::InvalidState(format!("shape z = {}", self.z)));
        }
        if self.v.iter().any(|v| !(*v >= 0.0 && *v <= 1.0)) {
            return Err(Error::InvalidState("stick outside [0, 1]".into()));
        }
        if self.eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidState("atom not positive and finite".into()));
        }
        let total: f64 = self.p.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        let mut counts = vec![0usize; k];
        let mut sums = vec![0.0; k];
        for (i, &c) in self.alloc.iter().enumerate() {
            if c >= k {
                return Err(Error::InvalidState(format!(
                    "datum {i} allocated to cluster {c} of {k}"
                )));
            }
            counts[c] += 1;
            sums[c] += data.values()[i];
        }
        if counts != self.counts {
            return Err(Error::InvalidState("cluster counts out of date".into()));
        }
        for (j, (a, b)) in sums.iter().zip(&self.sums).enumerate() {
            if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(Error::InvalidState(format!("cluster {j} sum out of date")));
            }
        }
        Ok(())
    }

    /// [`ChainState::check`] plus `u_i < p_{c_i}` for every datum.
    pub fn check_slices(&self, data: &Data) -> Result<()> {
        self.check(data)?;
        for (i, (&u, &c)) in self.u.iter().zip(&self.alloc).enumerate() {
            if !(u > 0.0 && u < self.p[c]) {
                return Err(Error::InvalidState(format!(
                    "slice {i}: u = {u} not in (0, p = {})",
                    self.p[c]
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_rejects_bad_values_with_index() {
        match Data::new(vec![1.0, 2.0, -0.5, 3.0]) {
            Err(Error::InvalidDatum { index, value }) => {
                assert_eq!(index, 2);
                assert_eq!(value, -0.5);
            }
            other => panic!("{other:?}"),
        }
        assert!(Data::new(vec![1.0, f64::NAN]).is_err());
        assert!(Data::new(vec![]).is_err());
    }

    #[test]
    fn weights_and_stats() {
        let data = Data::new(vec![1.0, 2.0, 3.0]).unwrap();
        let s = ChainState::new(2.0, vec![0.5, 0.5], vec![1.0, 3.0], vec![0, 1, 1], &data).unwrap();
        assert_eq!(s.weights(), &[0.5, 0.25]);
        assert_eq!(s.residual(), 0.25);
        assert_eq!(s.counts(), &[1, 2]);
        assert_eq!(s.sums(), &[1.0, 5.0]);
        s.check_slices(&data).unwrap();
    }

    #[test]
    fn allocation_moves_keep_stats() {
        let data = Data::new(vec![1.0, 2.0, 3.0]).unwrap();
        let mut s =
            ChainState::new(2.0, vec![0.5, 0.5], vec![1.0, 3.0], vec![0, 1, 1], &data).unwrap();
        s.set_allocation(2, 0, &data);
        assert_eq!(s.counts(), &[2, 1]);
        s.check(&data).unwrap();
        s.truncate_unoccupied_tail();
        assert_eq!(s.num_sticks(), 2);
        s.set_allocation(1, 0, &data);
        s.truncate_unoccupied_tail();
        assert_eq!(s.num_sticks(), 1);
        assert_eq!(s.residual(), 0.5);
    }

    #[test]
    fn inconsistent_construction_fails() {
        let data = Data::new(vec![1.0, 2.0]).unwrap();
        assert!(ChainState::new(1.0, vec![0.5], vec![1.0, 2.0], vec![0, 0], &data).is_err());
        assert!(ChainState::new(1.0, vec![0.5], vec![1.0], vec![0, 1], &data).is_err());
        assert!(ChainState::new(1.0, vec![0.5], vec![1.0], vec![0], &data).is_err());
    }
}
