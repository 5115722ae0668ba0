//! Arc-factored non-projective dependency CRF.
//!
//! The partition function over rooted spanning arborescences is the
//! determinant of the Laplacian minor built from exponentiated arc scores;
//! arc marginals follow from its inverse. The root may take several
//! children.

use ndarray::{Array2, Axis};

use crate::chain::log_sum_exp;
use crate::error::{Error, Result};
use crate::uncertainty::{self, Acquisition};

mod linalg;
mod mst;

pub use mst::chu_liu_edmonds;

/// Arc scores of one sentence with `n` tokens: shape `[n + 1, n]`, where
/// entry `(h, m - 1)` scores head `h` (0 = root) for modifier `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcScores {
    scores: Array2<f64>,
}

pub type ArcGradient = Array2<f64>;

impl ArcScores {
    /// Wraps a `[n + 1, n]` score matrix; self-arcs are forced to `-inf`.
    pub fn new(mut scores: Array2<f64>) -> Result<Self> {
        let (rows, n) = scores.dim();
        if n == 0 || rows != n + 1 {
            return Err(Error::Dimension(format!(
                "arc scores must have shape [n + 1, n], got {:?}",
                scores.dim()
            )));
        }
        for m in 1..=n {
            scores[[m, m - 1]] = f64::NEG_INFINITY;
        }
        Ok(ArcScores { scores })
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(Array2::zeros((n + 1, n))).expect("valid shape")
    }

    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.scores.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.ncols() == 0
    }

    /// Score of head `h` for the 1-based modifier `m`.
    pub fn get(&self, h: usize, m: usize) -> f64 {
        self.scores[[h, m - 1]]
    }

    pub fn set(&mut self, h: usize, m: usize, value: f64) {
        if h != m {
            self.scores[[h, m - 1]] = value;
        }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn tree_score(&self, heads: &[usize]) -> f64 {
        heads.iter().enumerate().map(|(j, &h)| self.scores[[h, j]]).sum()
    }

    fn masked(&self, constraint: Option<&HeadConstraint>) -> Result<Array2<f64>> {
        let mut s = self.scores.clone();
        if let Some(c) = constraint {
            if c.allowed.dim() != s.dim() {
                return Err(Error::Dimension(format!(
                    "constraint {:?} vs scores {:?}",
                    c.allowed.dim(),
                    s.dim()
                )));
            }
            for (v, &ok) in s.iter_mut().zip(c.allowed.iter()) {
                if !ok {
                    *v = f64::NEG_INFINITY;
                }
            }
        }
        Ok(s)
    }
}

/// Allowed heads per modifier, shape `[n + 1, n]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadConstraint {
    allowed: Array2<bool>,
}

impl HeadConstraint {
    pub fn unconstrained(n: usize) -> Self {
        HeadConstraint {
            allowed: Array2::from_elem((n + 1, n), true),
        }
    }

    /// Constraint admitting only the given tree (1-based heads per token).
    pub fn from_heads(heads: &[usize]) -> Self {
        let mut c = Self::unconstrained(heads.len());
        for (j, &h) in heads.iter().enumerate() {
            c.fix(j + 1, h);
        }
        c
    }

    /// Builds a constraint from an explicit `[n + 1, n]` table. Self-arcs
    /// are cleared; a modifier left with no head is an error.
    pub fn from_allowed(mut allowed: Array2<bool>) -> Result<Self> {
        let (rows, n) = allowed.dim();
        if rows != n + 1 {
            return Err(Error::Dimension(format!(
                "head constraint must be [n + 1, n], got [{rows}, {n}]"
            )));
        }
        for j in 0..n {
            allowed[[j + 1, j]] = false;
            if !allowed.column(j).iter().any(|&a| a) {
                return Err(Error::Constraint(format!("token {} has no admissible head", j + 1)));
            }
        }
        Ok(HeadConstraint { allowed })
    }

    /// Restricts the 1-based modifier `m` to head `h`.
    pub fn fix(&mut self, m: usize, h: usize) {
        let mut col = self.allowed.column_mut(m - 1);
        col.fill(false);
        col[h] = true;
    }

    pub fn allowed(&self, h: usize, m: usize) -> bool {
        self.allowed[[h, m - 1]]
    }

    pub fn is_fixed(&self, m: usize) -> bool {
        self.allowed.column(m - 1).iter().filter(|&&a| a).count() == 1
    }

    pub fn is_unconstrained(&self) -> bool {
        self.allowed.indexed_iter().all(|((h, j), &a)| a || h == j + 1)
    }
}

/// Arc marginals, shape `[n + 1, n]`; every column sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcMarginals {
    pub probabilities: Array2<f64>,
}

impl ArcMarginals {
    pub fn one_hot(heads: &[usize]) -> Self {
        let n = heads.len();
        let mut p = Array2::zeros((n + 1, n));
        for (j, &h) in heads.iter().enumerate() {
            p[[h, j]] = 1.0;
        }
        ArcMarginals { probabilities: p }
    }

    pub fn len(&self) -> usize {
        self.probabilities.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.ncols() == 0
    }

    pub fn get(&self, h: usize, m: usize) -> f64 {
        self.probabilities[[h, m - 1]]
    }

    /// Most probable head per modifier (lowest index on ties).
    pub fn argmax(&self) -> Vec<usize> {
        self.probabilities
            .axis_iter(Axis(1))
            .map(|col| uncertainty::top_two(&col.to_vec()).0)
            .collect()
    }
}

/// Every token must be reachable from the root through allowed arcs.
fn check_feasible(masked: &Array2<f64>) -> Result<()> {
    let n = masked.ncols();
    let mut reached = vec![false; n + 1];
    reached[0] = true;
    let mut stack = vec![0];
    while let Some(h) = stack.pop() {
        for m in 1..=n {
            if !reached[m] && masked[[h, m - 1]] > f64::NEG_INFINITY {
                reached[m] = true;
                stack.push(m);
            }
        }
    }
    match reached.iter().position(|&r| !r) {
        Some(m) => Err(Error::Constraint(format!(
            "token {m} cannot be attached by any tree consistent with the constraints"
        ))),
        None => Ok(()),
    }
}

const MARGINAL_TOLERANCE: f64 = 1e-10;

struct MatrixTree {
    weights: Array2<f64>,
    inverse: Array2<f64>,
    log_z: f64,
}

fn matrix_tree(arcs: &ArcScores, constraint: Option<&HeadConstraint>) -> Result<MatrixTree> {
    let masked = arcs.masked(constraint)?;
    check_feasible(&masked)?;
    let n = masked.ncols();

    for normalize in [false, true] {
        // Per-column shift: max for the first attempt, log-sum-exp on retry.
        let shifts: Vec<f64> = masked
            .axis_iter(Axis(1))
            .map(|col| {
                if normalize {
                    log_sum_exp(col.iter().copied())
                } else {
                    col.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect();
        let weights = Array2::from_shape_fn((n + 1, n), |(h, j)| (masked[[h, j]] - shifts[j]).exp());
        let lu = linalg::Lu::factor_laplacian(&weights);
        if !lu.is_regular() {
            continue;
        }
        let log_z = lu.log_det() + shifts.iter().sum::<f64>();
        if !log_z.is_finite() {
            continue;
        }
        return Ok(MatrixTree {
            inverse: lu.inverse(),
            weights,
            log_z,
        });
    }
    Err(Error::Numerical(format!(
        "Laplacian is singular after rescaling ({n} tokens)"
    )))
}

impl MatrixTree {
    /// Arc marginals from the inverse Laplacian. A column whose rounding
    /// bound exceeds `MARGINAL_TOLERANCE` is recomputed from root
    /// absorption probabilities, which avoids the cancellation in
    /// `inv[j][j] - inv[j][h]` when root weights are tiny.
    fn marginals(&self) -> ArcMarginals {
        let (rows, n) = self.weights.dim();
        let inv = &self.inverse;
        let mut p = Array2::zeros((rows, n));
        for j in 0..n {
            let col = self.weights.column(j);
            let scale = inv.row(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let bound = (n as f64) * f64::EPSILON * scale * col.sum();
            if bound <= MARGINAL_TOLERANCE {
                for h in 0..rows {
                    let w = col[h];
                    p[[h, j]] = if w == 0.0 {
                        0.0
                    } else if h == 0 {
                        w * inv[[j, j]]
                    } else {
                        (w * (inv[[j, j]] - inv[[j, h - 1]])).max(0.0)
                    };
                }
            } else {
                let c = linalg::Lu::absorption(&self.weights, j);
                let reach = |h: usize| if h == 0 { 1.0 } else { c[h - 1] };
                let total: f64 = (0..rows).map(|h| col[h] * reach(h)).sum();
                for h in 0..rows {
                    p[[h, j]] = col[h] * reach(h) / total;
                }
            }
        }
        ArcMarginals { probabilities: p }
    }
}

/// Log partition over all arborescences consistent with `constraint`.
pub fn log_partition(arcs: &ArcScores, constraint: Option<&HeadConstraint>) -> Result<f64> {
    Ok(matrix_tree(arcs, constraint)?.log_z)
}

pub fn arc_marginals(arcs: &ArcScores, constraint: Option<&HeadConstraint>) -> Result<ArcMarginals> {
    Ok(matrix_tree(arcs, constraint)?.marginals())
}

fn check_tree(heads: &[usize], n: usize) -> Result<()> {
    if heads.len() != n {
        return Err(Error::Dimension(format!("{} heads for {n} tokens", heads.len())));
    }
    if heads.iter().enumerate().any(|(j, &h)| h > n || h == j + 1) || crate::corpus::find_cycle(heads).is_some() {
        return Err(Error::validation("<gold>", "heads do not form a tree"));
    }
    Ok(())
}

/// Negative log-likelihood of a gold tree; gradient is marginals minus the
/// gold arc indicator.
pub fn nll_full(arcs: &ArcScores, gold_heads: &[usize]) -> Result<(f64, ArcGradient)> {
    check_tree(gold_heads, arcs.len())?;
    let mt = matrix_tree(arcs, None)?;
    let loss = mt.log_z - arcs.tree_score(gold_heads);
    let grad = mt.marginals().probabilities - ArcMarginals::one_hot(gold_heads).probabilities;
    Ok((loss, grad))
}

/// Negative log marginal likelihood of the trees consistent with
/// `constraint`.
pub fn nll_partial(arcs: &ArcScores, constraint: &HeadConstraint) -> Result<(f64, ArcGradient)> {
    let free = matrix_tree(arcs, None)?;
    let constrained = matrix_tree(arcs, Some(constraint))?;
    let loss = free.log_z - constrained.log_z;
    let grad = free.marginals().probabilities - constrained.marginals().probabilities;
    Ok((loss, grad))
}

/// Cross-entropy from teacher arc marginals to the student tree
/// distribution.
pub fn kd_loss(teacher: &ArcMarginals, arcs: &ArcScores) -> Result<(f64, ArcGradient)> {
    if teacher.probabilities.dim() != arcs.scores.dim() {
        return Err(Error::Dimension(format!(
            "teacher {:?} vs scores {:?}",
            teacher.probabilities.dim(),
            arcs.scores.dim()
        )));
    }
    let mt = matrix_tree(arcs, None)?;
    let expected: f64 = teacher
        .probabilities
        .iter()
        .zip(arcs.scores.iter())
        .filter(|(&p, _)| p != 0.0)
        .map(|(&p, &s)| p * s)
        .sum();
    let grad = mt.marginals().probabilities - &teacher.probabilities;
    Ok((mt.log_z - expected, grad))
}

/// Maximum-score arborescence consistent with `constraint`, as 1-based
/// heads per token.
pub fn decode(arcs: &ArcScores, constraint: Option<&HeadConstraint>) -> Result<Vec<usize>> {
    let masked = arcs.masked(constraint)?;
    check_feasible(&masked)?;
    Ok(chu_liu_edmonds(&masked))
}

/// Per-modifier margin between its two most probable heads.
pub fn head_uncertainty(m: &ArcMarginals) -> Vec<f64> {
    head_priority(m, Acquisition::Margin)
}

pub fn head_priority(m: &ArcMarginals, acquisition: Acquisition) -> Vec<f64> {
    m.probabilities
        .axis_iter(Axis(1))
        .map(|col| acquisition.priority(&col.to_vec()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_tokens_uniform() {
        let arcs = ArcScores::zeros(2);
        assert!((log_partition(&arcs, None).unwrap() - 3f64.ln()).abs() < 1e-12);
        let m = arc_marginals(&arcs, None).unwrap();
        assert!((m.get(0, 1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((head_uncertainty(&m)[0] - 1.0 / 3.0).abs() < 1e-12);
        let (nll, _) = nll_full(&arcs, &[2, 0]).unwrap();
        assert!((nll - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_token() {
        let mut arcs = ArcScores::zeros(1);
        arcs.set(0, 1, 1.7);
        assert!((log_partition(&arcs, None).unwrap() - 1.7).abs() < 1e-12);
    }

    #[test]
    fn fixed_root_child() {
        let arcs = ArcScores::zeros(2);
        let mut c = HeadConstraint::unconstrained(2);
        c.fix(1, 0);
        let m = arc_marginals(&arcs, Some(&c)).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(head_uncertainty(&m)[0], 1.0);
        let (loss, _) = nll_partial(&arcs, &c).unwrap();
        assert!((loss - (3f64.ln() - 2f64.ln())).abs() < 1e-12);
        assert_eq!(decode(&arcs, Some(&c)).unwrap()[0], 0);
    }

    #[test]
    fn infeasible_constraint() {
        let arcs = ArcScores::zeros(2);
        let c = HeadConstraint::from_heads(&[2, 1]);
        assert!(matches!(log_partition(&arcs, Some(&c)), Err(Error::Constraint(_))));
        assert!(matches!(decode(&arcs, Some(&c)), Err(Error::Constraint(_))));
    }

    #[test]
    fn invalid_gold_tree() {
        let arcs = ArcScores::zeros(2);
        assert!(nll_full(&arcs, &[2, 1]).is_err());
        assert!(nll_full(&arcs, &[0]).is_err());
    }

    #[test]
    fn kd_against_self_is_entropy() {
        let arcs = ArcScores::zeros(2);
        let m = arc_marginals(&arcs, None).unwrap();
        let (loss, grad) = kd_loss(&m, &arcs).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
        let (kd, _) = kd_loss(&ArcMarginals::one_hot(&[2, 0]), &arcs).unwrap();
        let (nll, _) = nll_full(&arcs, &[2, 0]).unwrap();
        assert!((kd - nll).abs() < 1e-12);
    }

    #[test]
    fn uniform_column_margin_zero() {
        let m = ArcMarginals {
            probabilities: ndarray::array![[1.0 / 3.0], [1.0 / 3.0], [1.0 / 3.0]],
        };
        assert!(head_uncertainty(&m)[0].abs() < 1e-12);
    }
}
