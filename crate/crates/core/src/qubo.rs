//! QUBO and Ising representations.
//!
//! A [`Qubo`] stores a dense symmetric matrix `Q` and a constant offset; its
//! energy is `xᵀQx + offset` over binary `x`. Off-diagonal weight is split
//! evenly between `Q[i][j]` and `Q[j][i]`, so the pair `(i, j)` contributes
//! `2·Q[i][j]·x_i·x_j`. Importers of upper-triangular data must go through
//! [`Qubo::from_upper_triangular`] or [`Qubo::symmetrized`].
//!
//! An [`IsingModel`] uses spins `z ∈ {−1, +1}` with the map `x = (1 − z)/2`.
//! Each unordered pair is counted once: `E(z) = Σ h_i z_i + Σ_{i<j} J_ij z_i z_j + c`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, contiguous, disjoint cover of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    blocks: Vec<Range<usize>>,
}

impl BlockPartition {
    pub fn new(blocks: Vec<Range<usize>>) -> Result<Self> {
        let mut expected_start = 0;
        for (k, block) in blocks.iter().enumerate() {
            if block.start != expected_start {
                return Err(Error::InvalidPartition(format!(
                    "block {k} starts at {} but previous block ended at {expected_start}",
                    block.start
                )));
            }
            if block.end <= block.start {
                return Err(Error::InvalidPartition(format!("block {k} is empty")));
            }
            expected_start = block.end;
        }
        Ok(Self { blocks })
    }

    /// `count` consecutive blocks of `size` variables each.
    pub fn uniform(count: usize, size: usize) -> Result<Self> {
        Self::new((0..count).map(|k| k * size..(k + 1) * size).collect())
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Number of variables covered.
    pub fn n(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn block(&self, index: usize) -> Option<Range<usize>> {
        self.blocks.get(index).cloned()
    }

    /// Block containing variable `var`.
    pub fn block_of(&self, var: usize) -> Option<usize> {
        if var >= self.n() {
            return None;
        }
        Some(self.blocks.partition_point(|b| b.end <= var))
    }

    /// Block id of every variable, in index order.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n());
        for (k, b) in self.blocks.iter().enumerate() {
            out.extend(std::iter::repeat_n(k, b.len()));
        }
        out
    }
}

/// Binary decision vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Assignment {
    bits: Vec<u8>,
}

impl Assignment {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some((index, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(Error::NotBinary { index, value });
        }
        Ok(Self { bits })
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    /// Bit `i` is `(code >> i) & 1`.
    pub fn from_code(code: u64, n: usize) -> Self {
        assert!(n <= 64, "code assignments are limited to 64 bits");
        Self {
            bits: (0..n).map(|i| ((code >> i) & 1) as u8).collect(),
        }
    }

    /// Inverse of [`Assignment::from_code`]; `None` above 64 bits.
    pub fn code(&self) -> Option<u64> {
        if self.bits.len() > 64 {
            return None;
        }
        Some(
            self.bits
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i)),
        )
    }

    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        spins
            .iter()
            .enumerate()
            .map(|(index, &s)| match s {
                1 => Ok(0),
                -1 => Ok(1),
                value => Err(Error::NotSpin { index, value }),
            })
            .collect::<Result<Vec<_>>>()
            .map(|bits| Self { bits })
    }

    /// Spin image `z_i = 1 − 2 x_i`.
    pub fn to_spins(&self) -> Vec<i8> {
        self.bits.iter().map(|&b| 1 - 2 * b as i8).collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value as u8;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] ^= 1;
    }

    pub fn slice(&self, range: Range<usize>) -> Assignment {
        Assignment {
            bits: self.bits[range].to_vec(),
        }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .bytes()
            .enumerate()
            .map(|(index, c)| match c {
                b'0' => Ok(0),
                b'1' => Ok(1),
                other => Err(Error::NotBinary { index, value: other }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bits })
    }
}

impl TryFrom<String> for Assignment {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Assignment> for String {
    fn from(a: Assignment) -> String {
        a.to_string()
    }
}

/// Dense symmetric QUBO `f(x) = xᵀQx + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Qubo {
    coeffs: Array2<f64>,
    offset: f64,
    partition: Option<BlockPartition>,
}

impl Qubo {
    /// Requires an exactly symmetric, finite, square matrix.
    pub fn new(coeffs: Array2<f64>, offset: f64) -> Result<Self> {
        check_square_finite(&coeffs)?;
        if !offset.is_finite() {
            return Err(Error::NonFinite("offset".into()));
        }
        let n = coeffs.nrows();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (coeffs[[i, j]], coeffs[[j, i]]);
                if a != b {
                    return Err(Error::NotSymmetric { i, j, a, b });
                }
            }
        }
        Ok(Self {
            coeffs,
            offset,
            partition: None,
        })
    }

    /// Replaces `Q` by `(Q + Qᵀ)/2`, which leaves every energy unchanged.
    pub fn symmetrized(coeffs: Array2<f64>, offset: f64) -> Result<Self> {
        check_square_finite(&coeffs)?;
        let sym = (&coeffs + &coeffs.t()) * 0.5;
        Self::new(sym, offset)
    }

    /// Builds from a matrix whose strict upper triangle carries the full pair
    /// weight (`u_ij x_i x_j` counted once). The lower triangle is ignored.
    pub fn from_upper_triangular(upper: &Array2<f64>, offset: f64) -> Result<Self> {
        check_square_finite(upper)?;
        let n = upper.nrows();
        let mut coeffs = Array2::zeros((n, n));
        for i in 0..n {
            coeffs[[i, i]] = upper[[i, i]];
            for j in i + 1..n {
                let half = upper[[i, j]] * 0.5;
                coeffs[[i, j]] = half;
                coeffs[[j, i]] = half;
            }
        }
        Self::new(coeffs, offset)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: Array2::zeros((n, n)),
            offset: 0.0,
            partition: None,
        }
    }

    pub fn with_partition(mut self, partition: BlockPartition) -> Result<Self> {
        if partition.n() != self.n() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} variables, model has {}",
                partition.n(),
                self.n()
            )));
        }
        self.partition = Some(partition);
        Ok(self)
    }

    pub fn without_partition(mut self) -> Self {
        self.partition = None;
        self
    }

    pub fn n(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn partition(&self) -> Option<&BlockPartition> {
        self.partition.as_ref()
    }

    fn require_partition(&self) -> Result<&BlockPartition> {
        self.partition.as_ref().ok_or(Error::MissingPartition)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multiplies coefficients and offset by `factor`.
    pub fn scaled(&self, factor: f64) -> Qubo {
        Qubo {
            coeffs: &self.coeffs * factor,
            offset: self.offset * factor,
            partition: self.partition.clone(),
        }
    }

    /// `xᵀQx + offset`.
    pub fn energy(&self, x: &Assignment) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: x.len(),
            });
        }
        Ok(self.energy_of_bits(x.bits()))
    }

    pub(crate) fn energy_of_bits(&self, bits: &[u8]) -> f64 {
        let ones: Vec<usize> = bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (b == 1).then_some(i))
            .collect();
        let mut total = 0.0;
        for &i in &ones {
            let row = self.coeffs.row(i);
            total += ones.iter().map(|&j| row[j]).sum::<f64>();
        }
        total + self.offset
    }

    /// Equivalent Ising model under `x = (1 − z)/2`.
    pub fn to_ising(&self) -> IsingModel {
        let n = self.n();
        let q = &self.coeffs;
        let mut linear = Array1::zeros(n);
        let mut quadratic = Array2::zeros((n, n));
        let mut offset = self.offset;
        for i in 0..n {
            let row_sum: f64 = q.row(i).sum();
            linear[i] = -0.5 * row_sum;
            offset += 0.5 * q[[i, i]];
            for j in i + 1..n {
                let coupling = 0.5 * q[[i, j]];
                quadratic[[i, j]] = coupling;
                quadratic[[j, i]] = coupling;
                offset += coupling;
            }
        }
        IsingModel {
            linear,
            quadratic,
            offset,
        }
    }

    /// Scans every block pair with `|p − q| > 1` for nonzero entries.
    pub fn block_structure(&self) -> Result<BlockStructure> {
        let partition = self.require_partition()?;
        let mut violations = Vec::new();
        let blocks = partition.blocks();
        for (p, bp) in blocks.iter().enumerate() {
            for (q, bq) in blocks.iter().enumerate().skip(p + 2) {
                for i in bp.clone() {
                    for j in bq.clone() {
                        let value = self.coeffs[[i, j]];
                        if value != 0.0 {
                            violations.push(BlockViolation { p, q, i, j, value });
                        }
                    }
                }
            }
        }
        Ok(BlockStructure {
            tridiagonal: violations.is_empty(),
            violations,
        })
    }

    pub fn scale_separation(&self) -> Result<ScaleSeparation> {
        let labels = self.require_partition()?.labels();
        let n = self.n();
        let (mut max_intra, mut max_inter) = (0.0f64, 0.0f64);
        for i in 0..n {
            for j in i..n {
                let v = self.coeffs[[i, j]].abs();
                if labels[i] == labels[j] {
                    max_intra = max_intra.max(v);
                } else {
                    max_inter = max_inter.max(v);
                }
            }
        }
        let ratio = if max_inter == 0.0 {
            0.0
        } else {
            max_inter / max_intra
        };
        Ok(ScaleSeparation {
            max_intra,
            max_inter,
            ratio,
        })
    }
}

fn check_square_finite(m: &Array2<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    if let Some(((i, j), v)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(format!("({i}, {j}) = {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockViolation {
    pub p: usize,
    pub q: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Result of a block-tridiagonal scan. Violations list `p < q` only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockStructure {
    pub tridiagonal: bool,
    pub violations: Vec<BlockViolation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleSeparation {
    pub max_intra: f64,
    pub max_inter: f64,
    /// `max_inter / max_intra`, or 0 without inter-block couplings.
    pub ratio: f64,
}

/// Ising model with symmetric zero-diagonal couplings; pairs counted once.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    linear: Array1<f64>,
    quadratic: Array2<f64>,
    offset: f64,
}

impl IsingModel {
    pub fn new(linear: Array1<f64>, quadratic: Array2<f64>, offset: f64) -> Result<Self> {
        let n = linear.len();
        if quadratic.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: quadratic.nrows(),
            });
        }
        check_square_finite(&quadratic)?;
        if let Some((i, v)) = linear.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("h[{i}] = {v}")));
        }
        for i in 0..n {
            if quadratic[[i, i]] != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "Ising coupling diagonal must be zero (J[{i}][{i}] = {})",
                    quadratic[[i, i]]
                )));
            }
            for j in i + 1..n {
                let (a, b) = (quadratic[[i, j]], quadratic[[j, i]]);
                if a != b {
                    return Err(Error::NotSymmetric { i, j, a, b });
                }
            }
        }
        Ok(Self {
            linear,
            quadratic,
            offset,
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            linear: Array1::zeros(n),
            quadratic: Array2::zeros((n, n)),
            offset: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self) -> &Array1<f64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &Array2<f64> {
        &self.quadratic
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub(crate) fn linear_mut(&mut self) -> &mut Array1<f64> {
        &mut self.linear
    }

    pub fn scaled(&self, factor: f64) -> IsingModel {
        IsingModel {
            linear: &self.linear * factor,
            quadratic: &self.quadratic * factor,
            offset: self.offset * factor,
        }
    }

    /// `Σ h_i z_i + Σ_{i<j} J_ij z_i z_j + offset`.
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: spins.len(),
            });
        }
        if let Some((index, &value)) = spins.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
            return Err(Error::NotSpin { index, value });
        }
        let n = self.n();
        let mut total = self.offset;
        for i in 0..n {
            let zi = spins[i] as f64;
            total += self.linear[i] * zi;
            let row = self.quadratic.row(i);
            let mut pair = 0.0;
            for j in i + 1..n {
                pair += row[j] * spins[j] as f64;
            }
            total += zi * pair;
        }
        Ok(total)
    }

    /// Equivalent QUBO under `z = 1 − 2x`. Integer coefficients stay integer.
    pub fn to_qubo(&self) -> Qubo {
        let n = self.n();
        let mut coeffs = Array2::zeros((n, n));
        let mut offset = self.offset;
        for i in 0..n {
            offset += self.linear[i];
            coeffs[[i, i]] -= 2.0 * self.linear[i];
            for j in i + 1..n {
                let c = self.quadratic[[i, j]];
                if c == 0.0 {
                    continue;
                }
                offset += c;
                coeffs[[i, i]] -= 2.0 * c;
                coeffs[[j, j]] -= 2.0 * c;
                coeffs[[i, j]] += 2.0 * c;
                coeffs[[j, i]] += 2.0 * c;
            }
        }
        Qubo {
            coeffs,
            offset,
            partition: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn naive_energy(q: &Array2<f64>, offset: f64, bits: &[u8]) -> f64 {
        let n = bits.len();
        let mut e = offset;
        for i in 0..n {
            for j in 0..n {
                e += q[[i, j]] * bits[i] as f64 * bits[j] as f64;
            }
        }
        e
    }

    fn lcg_matrix(n: usize, seed: u64) -> Array2<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = next();
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        m
    }

    #[test]
    fn identity_energy() {
        let q = Qubo::new(Array2::eye(2), 0.0).unwrap();
        assert_eq!(q.energy(&Assignment::zeros(2)).unwrap(), 0.0);
        assert_eq!(q.energy(&Assignment::new(vec![1, 1]).unwrap()).unwrap(), 2.0);
    }

    #[test]
    fn energy_matches_naive_double_loop() {
        let m = lcg_matrix(8, 7);
        let q = Qubo::new(m.clone(), 0.25).unwrap();
        for code in 0..256u64 {
            let x = Assignment::from_code(code, 8);
            let expected = naive_energy(&m, 0.25, x.bits());
            assert!((q.energy(&x).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_rejects_wrong_length() {
        let q = Qubo::zeros(3);
        assert!(matches!(
            q.energy(&Assignment::zeros(2)),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let m = array![[0.0, 1.0], [0.0, 0.0]];
        assert!(matches!(Qubo::new(m.clone(), 0.0), Err(Error::NotSymmetric { .. })));
        let sym = Qubo::symmetrized(m, 0.0).unwrap();
        assert_eq!(sym.coeffs()[[0, 1]], 0.5);
    }

    #[test]
    fn upper_triangular_import_keeps_energy() {
        let upper = array![[1.0, 3.0], [0.0, -2.0]];
        let q = Qubo::from_upper_triangular(&upper, 0.0).unwrap();
        // 1 - 2 + 3
        assert_eq!(q.energy(&Assignment::new(vec![1, 1]).unwrap()).unwrap(), 2.0);
    }

    #[test]
    fn zero_qubo_maps_to_zero_ising() {
        let q = Qubo::new(Array2::zeros((3, 3)), 4.5).unwrap();
        let m = q.to_ising();
        assert!(m.linear().iter().all(|&v| v == 0.0));
        assert!(m.quadratic().iter().all(|&v| v == 0.0));
        assert_eq!(m.offset(), 4.5);
    }

    #[test]
    fn single_variable_ising() {
        let q = Qubo::new(array![[1.0]], 0.0).unwrap();
        let m = q.to_ising();
        assert_eq!(m.linear()[0], -0.5);
        assert_eq!(m.offset(), 0.5);
        assert_eq!(m.energy(&[-1]).unwrap(), 1.0);
        assert_eq!(m.energy(&[1]).unwrap(), 0.0);
    }

    #[test]
    fn ising_round_trip_six_variables() {
        let q = Qubo::new(lcg_matrix(6, 99), -1.5).unwrap();
        let m = q.to_ising();
        for code in 0..64u64 {
            let x = Assignment::from_code(code, 6);
            let e_q = q.energy(&x).unwrap();
            let e_i = m.energy(&x.to_spins()).unwrap();
            assert!((e_q - e_i).abs() <= 1e-12 * e_q.abs().max(1.0));
        }
    }

    #[test]
    fn ising_energy_conventions() {
        let zero = IsingModel::zeros(3);
        assert_eq!(zero.energy(&[1, -1, 1]).unwrap(), 0.0);

        let mut j = Array2::zeros((2, 2));
        j[[0, 1]] = 1.0;
        j[[1, 0]] = 1.0;
        let m = IsingModel::new(Array1::zeros(2), j, 0.75).unwrap();
        assert_eq!(m.energy(&[1, -1]).unwrap(), -1.0 + 0.75);
        assert!(matches!(m.energy(&[1, 0]), Err(Error::NotSpin { index: 1, value: 0 })));
    }

    #[test]
    fn ising_to_qubo_inverts() {
        let q = Qubo::new(lcg_matrix(5, 3), 2.0).unwrap();
        let back = q.to_ising().to_qubo();
        for code in 0..32u64 {
            let x = Assignment::from_code(code, 5);
            assert!((q.energy(&x).unwrap() - back.energy(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn block_structure_detects_planted_violation() {
        let p = BlockPartition::uniform(3, 2).unwrap();
        let diag = Qubo::new(Array2::eye(6), 0.0).unwrap().with_partition(p.clone()).unwrap();
        assert!(diag.block_structure().unwrap().tridiagonal);

        let mut m = Array2::<f64>::eye(6);
        m[[0, 5]] = 0.3;
        m[[5, 0]] = 0.3;
        let bad = Qubo::new(m, 0.0).unwrap().with_partition(p).unwrap();
        let report = bad.block_structure().unwrap();
        assert!(!report.tridiagonal);
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!((v.p, v.q, v.i, v.j), (0, 2, 0, 5));

        assert!(matches!(
            Qubo::zeros(2).block_structure(),
            Err(Error::MissingPartition)
        ));
    }

    #[test]
    fn scale_separation_ratio() {
        let p = BlockPartition::uniform(2, 2).unwrap();
        let mut m = Array2::zeros((4, 4));
        m[[0, 1]] = 100.0;
        m[[1, 0]] = 100.0;
        m[[2, 3]] = -100.0;
        m[[3, 2]] = -100.0;
        m[[1, 2]] = 0.1;
        m[[2, 1]] = 0.1;
        let q = Qubo::new(m, 0.0).unwrap().with_partition(p.clone()).unwrap();
        let s = q.scale_separation().unwrap();
        assert!((s.ratio - 1e-3).abs() < 1e-15);

        let d = Qubo::new(Array2::eye(4), 0.0).unwrap().with_partition(p).unwrap();
        assert_eq!(d.scale_separation().unwrap().ratio, 0.0);
    }

    #[test]
    fn partition_validation() {
        assert!(BlockPartition::new(vec![0..2, 3..4]).is_err());
        assert!(BlockPartition::new(vec![0..2, 2..2]).is_err());
        let p = BlockPartition::new(vec![0..2, 2..5]).unwrap();
        assert_eq!(p.block_of(4), Some(1));
        assert_eq!(p.block_of(1), Some(0));
        assert_eq!(p.block_of(5), None);
        assert_eq!(p.labels(), vec![0, 0, 1, 1, 1]);
        assert!(Qubo::zeros(4).with_partition(p).is_err());
    }

    #[test]
    fn assignment_parsing() {
        let a: Assignment = "0110".parse().unwrap();
        assert_eq!(a.code(), Some(0b0110));
        assert_eq!(a.to_string(), "0110");
        assert!("01x".parse::<Assignment>().is_err());
        assert_eq!(Assignment::from_spins(&a.to_spins()).unwrap(), a);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sym_matrix(n: usize) -> impl Strategy<Value = Array2<f64>> {
            proptest::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
                let m = Array2::from_shape_vec((n, n), v).unwrap();
                (&m + &m.t()) * 0.5
            })
        }

        proptest! {
            #[test]
            fn round_trip_all_assignments(m in (1usize..=8).prop_flat_map(sym_matrix), off in -5.0f64..5.0) {
                let n = m.nrows();
                let q = Qubo::new(m, off).unwrap();
                let ising = q.to_ising();
                for code in 0..(1u64 << n) {
                    let x = Assignment::from_code(code, n);
                    let a = q.energy(&x).unwrap();
                    let b = ising.energy(&x.to_spins()).unwrap();
                    let scale = q.coeffs().iter().map(|v| v.abs()).sum::<f64>() + off.abs() + 1.0;
                    prop_assert!((a - b).abs() <= 1e-12 * scale);
                }
            }

            #[test]
            fn symmetrization_preserves_energy(v in proptest::collection::vec(-10.0f64..10.0, 25), code in 0u64..32) {
                let m = Array2::from_shape_vec((5, 5), v).unwrap();
                let x = Assignment::from_code(code, 5);
                let raw = naive_energy(&m, 0.0, x.bits());
                let sym = Qubo::symmetrized(m, 0.0).unwrap().energy(&x).unwrap();
                prop_assert!((raw - sym).abs() < 1e-10);
            }

            #[test]
            fn tridiagonal_check_scale_invariant(m in sym_matrix(6), c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0]) {
                let p = BlockPartition::uniform(3, 2).unwrap();
                let q = Qubo::new(m, 0.0).unwrap().with_partition(p).unwrap();
                let a = q.block_structure().unwrap();
                let b = q.scaled(c).block_structure().unwrap();
                prop_assert_eq!(a.tridiagonal, b.tridiagonal);
                prop_assert_eq!(a.violations.len(), b.violations.len());
            }
        }
    }
}
