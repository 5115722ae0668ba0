//! Exact inference for linear-chain CRFs.
//!
//! All computations run in log space. Constraints are applied by giving
//! disallowed labels a score of negative infinity, which is absorbing under
//! both `max` and log-sum-exp.

use ndarray::{Array1, Array2, Array3, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::uncertainty::{self, Acquisition};

/// Score tables of one sentence: `emissions[i][y]`, `transitions[a][b]`
/// for label `a` followed by `b`, and start/end scores per label.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainScores {
    pub emissions: Array2<f64>,
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub end: Array1<f64>,
}

/// Gradients share the layout of the scores they differentiate.
pub type ChainGradient = ChainScores;

impl ChainScores {
    pub fn new(emissions: Array2<f64>, transitions: Array2<f64>, start: Array1<f64>, end: Array1<f64>) -> Result<Self> {
        let l = emissions.ncols();
        if emissions.nrows() == 0 || l == 0 {
            return Err(Error::Dimension("emissions must be non-empty".into()));
        }
        if transitions.dim() != (l, l) || start.len() != l || end.len() != l {
            return Err(Error::Dimension(format!(
                "{l} labels but transitions {:?}, start {}, end {}",
                transitions.dim(),
                start.len(),
                end.len()
            )));
        }
        Ok(ChainScores {
            emissions,
            transitions,
            start,
            end,
        })
    }

    pub fn zeros(n: usize, labels: usize) -> Self {
        ChainScores {
            emissions: Array2::zeros((n, labels)),
            transitions: Array2::zeros((labels, labels)),
            start: Array1::zeros(labels),
            end: Array1::zeros(labels),
        }
    }

    pub fn len(&self) -> usize {
        self.emissions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.nrows() == 0
    }

    pub fn n_labels(&self) -> usize {
        self.emissions.ncols()
    }

    /// Total score of one label sequence.
    pub fn path_score(&self, labels: &[usize]) -> f64 {
        let mut s = self.start[labels[0]] + self.end[labels[labels.len() - 1]];
        for (i, &y) in labels.iter().enumerate() {
            s += self.emissions[[i, y]];
            if i > 0 {
                s += self.transitions[[labels[i - 1], y]];
            }
        }
        s
    }

    fn masked_emissions(&self, mask: Option<&ConstraintMask>) -> Result<Array2<f64>> {
        let mut e = self.emissions.clone();
        if let Some(mask) = mask {
            mask.check_shape(self)?;
            for ((i, y), v) in e.indexed_iter_mut() {
                if !mask.allowed[[i, y]] {
                    *v = f64::NEG_INFINITY;
                }
            }
        }
        Ok(e)
    }

    /// `self += scale * other`, element-wise.
    pub fn add_scaled(&mut self, other: &ChainScores, scale: f64) {
        self.emissions.scaled_add(scale, &other.emissions);
        self.transitions.scaled_add(scale, &other.transitions);
        self.start.scaled_add(scale, &other.start);
        self.end.scaled_add(scale, &other.end);
    }
}

/// Per-position allowed labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintMask {
    allowed: Array2<bool>,
}

impl ConstraintMask {
    pub fn unconstrained(n: usize, labels: usize) -> Self {
        ConstraintMask {
            allowed: Array2::from_elem((n, labels), true),
        }
    }

    /// Mask fixing every position to the given label.
    pub fn from_labels(labels: &[usize], n_labels: usize) -> Self {
        let mut mask = Self::unconstrained(labels.len(), n_labels);
        for (i, &y) in labels.iter().enumerate() {
            mask.fix(i, y);
        }
        mask
    }

    pub fn from_allowed(allowed: Array2<bool>) -> Result<Self> {
        let mask = ConstraintMask { allowed };
        mask.check_nonempty()?;
        Ok(mask)
    }

    /// Restricts `position` to exactly `label`.
    pub fn fix(&mut self, position: usize, label: usize) {
        let mut row = self.allowed.row_mut(position);
        row.fill(false);
        row[label] = true;
    }

    pub fn allowed(&self, position: usize, label: usize) -> bool {
        self.allowed[[position, label]]
    }

    pub fn is_fixed(&self, position: usize) -> bool {
        self.allowed.row(position).iter().filter(|&&a| a).count() == 1
    }

    pub fn is_unconstrained(&self) -> bool {
        self.allowed.iter().all(|&a| a)
    }

    pub fn len(&self) -> usize {
        self.allowed.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.nrows() == 0
    }

    fn check_nonempty(&self) -> Result<()> {
        for (i, row) in self.allowed.axis_iter(Axis(0)).enumerate() {
            if !row.iter().any(|&a| a) {
                return Err(Error::Constraint(format!("every label masked at position {i}")));
            }
        }
        Ok(())
    }

    fn check_shape(&self, scores: &ChainScores) -> Result<()> {
        if self.allowed.dim() != scores.emissions.dim() {
            return Err(Error::Dimension(format!(
                "mask {:?} vs emissions {:?}",
                self.allowed.dim(),
                scores.emissions.dim()
            )));
        }
        self.check_nonempty()
    }
}

/// Unary and pairwise marginal probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainMarginals {
    /// `[n, L]`
    pub unary: Array2<f64>,
    /// `[n - 1, L, L]`; entry `(i, a, b)` is `p(y_i = a, y_{i+1} = b)`.
    pub pairwise: Array3<f64>,
}

impl ChainMarginals {
    /// Point-mass marginals of a single label sequence.
    pub fn one_hot(labels: &[usize], n_labels: usize) -> Self {
        let n = labels.len();
        let mut unary = Array2::zeros((n, n_labels));
        let mut pairwise = Array3::zeros((n.saturating_sub(1), n_labels, n_labels));
        for (i, &y) in labels.iter().enumerate() {
            unary[[i, y]] = 1.0;
            if i + 1 < n {
                pairwise[[i, y, labels[i + 1]]] = 1.0;
            }
        }
        ChainMarginals { unary, pairwise }
    }

    pub fn len(&self) -> usize {
        self.unary.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.unary.nrows() == 0
    }

    /// Per-position argmax label (lowest index on ties).
    pub fn argmax(&self) -> Vec<usize> {
        self.unary
            .axis_iter(Axis(0))
            .map(|row| uncertainty::top_two(row.as_slice().unwrap_or(&row.to_vec())).0)
            .collect()
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

struct Lattice {
    emissions: Array2<f64>,
    alpha: Array2<f64>,
    beta: Array2<f64>,
    log_z: f64,
}

fn lattice(scores: &ChainScores, mask: Option<&ConstraintMask>) -> Result<Lattice> {
    let emissions = scores.masked_emissions(mask)?;
    let (n, l) = emissions.dim();
    let t = &scores.transitions;

    let mut alpha = Array2::from_elem((n, l), f64::NEG_INFINITY);
    for y in 0..l {
        alpha[[0, y]] = scores.start[y] + emissions[[0, y]];
    }
    for i in 1..n {
        for y in 0..l {
            let acc = log_sum_exp((0..l).map(|p| alpha[[i - 1, p]] + t[[p, y]]));
            alpha[[i, y]] = acc + emissions[[i, y]];
        }
    }
    let log_z = log_sum_exp((0..l).map(|y| alpha[[n - 1, y]] + scores.end[y]));
    if !log_z.is_finite() {
        return Err(if log_z == f64::NEG_INFINITY {
            Error::Constraint("no label sequence satisfies the constraints".into())
        } else {
            Error::Numerical(format!("log partition is {log_z}"))
        });
    }

    let mut beta = Array2::from_elem((n, l), f64::NEG_INFINITY);
    for y in 0..l {
        beta[[n - 1, y]] = scores.end[y];
    }
    for i in (0..n - 1).rev() {
        for y in 0..l {
            beta[[i, y]] = log_sum_exp((0..l).map(|q| t[[y, q]] + emissions[[i + 1, q]] + beta[[i + 1, q]]));
        }
    }
    Ok(Lattice {
        emissions,
        alpha,
        beta,
        log_z,
    })
}

impl Lattice {
    fn marginals(&self, transitions: &Array2<f64>) -> ChainMarginals {
        let (n, l) = self.alpha.dim();
        let unary = Array2::from_shape_fn((n, l), |(i, y)| {
            (self.alpha[[i, y]] + self.beta[[i, y]] - self.log_z).exp()
        });
        let pairwise = Array3::from_shape_fn((n.saturating_sub(1), l, l), |(i, a, b)| {
            (self.alpha[[i, a]] + transitions[[a, b]] + self.emissions[[i + 1, b]] + self.beta[[i + 1, b]] - self.log_z)
                .exp()
        });
        ChainMarginals { unary, pairwise }
    }
}

/// `log Σ_y exp s(y)` by the forward algorithm.
pub fn log_partition(scores: &ChainScores) -> Result<f64> {
    log_partition_masked(scores, None)
}

/// Log partition over the label sequences allowed by `mask`.
pub fn log_partition_masked(scores: &ChainScores, mask: Option<&ConstraintMask>) -> Result<f64> {
    Ok(lattice(scores, mask)?.log_z)
}

/// Exact marginals under the (optionally constrained) distribution.
pub fn marginals(scores: &ChainScores, mask: Option<&ConstraintMask>) -> Result<ChainMarginals> {
    Ok(lattice(scores, mask)?.marginals(&scores.transitions))
}

/// Expected sub-structure counts written into score layout.
fn expectation_gradient(m: &ChainMarginals) -> ChainGradient {
    let n = m.unary.nrows();
    ChainScores {
        emissions: m.unary.clone(),
        transitions: m.pairwise.sum_axis(Axis(0)),
        start: m.unary.row(0).to_owned(),
        end: m.unary.row(n - 1).to_owned(),
    }
}

/// Negative log-likelihood of a gold sequence; gradient is marginals minus
/// the gold indicator.
pub fn nll_full(scores: &ChainScores, gold: &[usize]) -> Result<(f64, ChainGradient)> {
    if gold.len() != scores.len() || gold.iter().any(|&y| y >= scores.n_labels()) {
        return Err(Error::Dimension(format!(
            "gold sequence of length {} for {} positions",
            gold.len(),
            scores.len()
        )));
    }
    let lat = lattice(scores, None)?;
    let m = lat.marginals(&scores.transitions);
    let loss = lat.log_z - scores.path_score(gold);
    let mut grad = expectation_gradient(&m);
    grad.add_scaled(
        &expectation_gradient(&ChainMarginals::one_hot(gold, scores.n_labels())),
        -1.0,
    );
    Ok((loss, grad))
}

/// Negative log marginal likelihood of the sequences consistent with
/// `mask`; gradient is unconstrained minus constrained marginals.
pub fn nll_partial(scores: &ChainScores, mask: &ConstraintMask) -> Result<(f64, ChainGradient)> {
    let free = lattice(scores, None)?;
    let constrained = lattice(scores, Some(mask))?;
    let loss = free.log_z - constrained.log_z;
    let mut grad = expectation_gradient(&free.marginals(&scores.transitions));
    grad.add_scaled(&expectation_gradient(&constrained.marginals(&scores.transitions)), -1.0);
    Ok((loss, grad))
}

/// Cross-entropy between a teacher distribution (given by its marginals)
/// and the student distribution defined by `scores`.
pub fn kd_loss(teacher: &ChainMarginals, scores: &ChainScores) -> Result<(f64, ChainGradient)> {
    let (n, l) = scores.emissions.dim();
    if teacher.unary.dim() != (n, l) || teacher.pairwise.dim() != (n.saturating_sub(1), l, l) {
        return Err(Error::Dimension(format!(
            "teacher marginals {:?} for scores {:?}",
            teacher.unary.dim(),
            (n, l)
        )));
    }
    let lat = lattice(scores, None)?;
    let expected = expectation_gradient(teacher);
    let dot = |p: ArrayView1<f64>, s: ArrayView1<f64>| -> f64 {
        p.iter()
            .zip(s.iter())
            .filter(|(&p, _)| p != 0.0)
            .map(|(&p, &s)| p * s)
            .sum()
    };
    let mut expected_score = 0.0;
    for (p, s) in expected
        .emissions
        .axis_iter(Axis(0))
        .zip(scores.emissions.axis_iter(Axis(0)))
    {
        expected_score += dot(p, s);
    }
    for (p, s) in expected
        .transitions
        .axis_iter(Axis(0))
        .zip(scores.transitions.axis_iter(Axis(0)))
    {
        expected_score += dot(p, s);
    }
    expected_score += dot(expected.start.view(), scores.start.view());
    expected_score += dot(expected.end.view(), scores.end.view());

    let loss = lat.log_z - expected_score;
    let mut grad = expectation_gradient(&lat.marginals(&scores.transitions));
    grad.add_scaled(&expected, -1.0);
    Ok((loss, grad))
}

/// Highest-scoring label sequence allowed by `mask`. Ties go to the lowest
/// label index.
pub fn viterbi(scores: &ChainScores, mask: Option<&ConstraintMask>) -> Result<Vec<usize>> {
    let e = scores.masked_emissions(mask)?;
    let (n, l) = e.dim();
    let t = &scores.transitions;
    let mut delta = Array2::from_elem((n, l), f64::NEG_INFINITY);
    let mut back = Array2::<usize>::zeros((n, l));
    for y in 0..l {
        delta[[0, y]] = scores.start[y] + e[[0, y]];
    }
    for i in 1..n {
        for y in 0..l {
            let mut best = (0, f64::NEG_INFINITY);
            for p in 0..l {
                let v = delta[[i - 1, p]] + t[[p, y]];
                if v > best.1 {
                    best = (p, v);
                }
            }
            delta[[i, y]] = best.1 + e[[i, y]];
            back[[i, y]] = best.0;
        }
    }
    let mut best = (0, f64::NEG_INFINITY);
    for y in 0..l {
        let v = delta[[n - 1, y]] + scores.end[y];
        if v > best.1 {
            best = (y, v);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        return Err(Error::Constraint("no label sequence satisfies the constraints".into()));
    }
    let mut path = vec![best.0; n];
    for i in (1..n).rev() {
        path[i - 1] = back[[i, path[i]]];
    }
    Ok(path)
}

/// Per-position margin between the two most probable labels.
pub fn token_uncertainty(m: &ChainMarginals) -> Vec<f64> {
    token_priority(m, Acquisition::Margin)
}

/// Per-position ranking key of the given acquisition (smaller = more
/// uncertain).
pub fn token_priority(m: &ChainMarginals, acquisition: Acquisition) -> Vec<f64> {
    m.unary
        .axis_iter(Axis(0))
        .map(|row| acquisition.priority(&row.to_vec()))
        .collect()
}
