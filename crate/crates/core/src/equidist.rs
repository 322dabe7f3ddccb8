//! Measures on a finite set `X = {0, .., n-1}` as nonnegative weight vectors.
//!
//! For a finite family `Y` and a target `mu0` this module decides whether
//! `mu0` lies in the cone generated by `Y`, produces a separating functional
//! when it does not, and builds Cesàro sequences from `Y` whose running means
//! of normalized measures approach the normalized target. Distances between
//! measures are sup-norm distances of weight vectors.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{Field, Rational};

/// Largest ground set accepted by [`cone_hull_membership`].
pub const MAX_POINTS: usize = 64;
/// Largest family accepted by [`cone_hull_membership`].
pub const MAX_MEMBERS: usize = 64;
/// Default reconstruction tolerance of member certificates.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Cesàro error required of member instances at the harness horizon.
pub const CESARO_TOL: f64 = 5e-2;
/// Sequence length used by [`equivalence_harness`].
pub const HARNESS_K_MAX: usize = 10_000;
/// Random functionals tried per instance for condition i.
pub const HARNESS_FUNCTIONALS: usize = 64;
/// Upper limit on multiplicity vectors enumerated when validating a
/// structured family.
pub const MAX_DECOMPOSITIONS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FiniteMeasure {
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return invalid("measure on an empty set");
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid(format!("weight {i} is {}, expected finite and >= 0", weights[i]));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `int f dmu`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.weights.iter().map(|w| w * c).collect())
    }

    fn normalized(&self) -> Vec<f64> {
        let m = self.total_mass();
        self.weights.iter().map(|w| w / m).collect()
    }
}

impl TryFrom<Vec<f64>> for FiniteMeasure {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FiniteMeasure> for Vec<f64> {
    fn from(m: FiniteMeasure) -> Self {
        m.weights
    }
}

/// Structured family: every member is `sum n_i w_i` with `w_i` in the base
/// set, `n_i <= multiplicity_bound`, and `c <= w(X) <= C` on the base set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    #[serde(rename = "W")]
    pub base: Vec<FiniteMeasure>,
    pub multiplicity_bound: usize,
    pub mass_bounds: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureFamily {
    members: Vec<FiniteMeasure>,
    structure: Option<Structure>,
}

impl MeasureFamily {
    pub fn new(members: Vec<FiniteMeasure>) -> Result<Self> {
        let Some(first) = members.first() else {
            return invalid("measure family must be non-empty");
        };
        let n = first.len();
        if members.iter().any(|m| m.len() != n) {
            return invalid("family members live on ground sets of different sizes");
        }
        Ok(Self {
            members,
            structure: None,
        })
    }

    /// Structured family; each member must decompose over the
    /// base set within the multiplicity bound.
    pub fn structured(members: Vec<FiniteMeasure>, structure: Structure) -> Result<Self> {
        let mut fam = Self::new(members)?;
        let n = fam.ground_size();
        let (c, big_c) = structure.mass_bounds;
        if !(c > 0.0 && c <= big_c && big_c.is_finite()) {
            return invalid(format!("mass bounds must satisfy 0 < c <= C, got ({c}, {big_c})"));
        }
        if structure.base.is_empty() {
            return invalid("structured family needs a non-empty base set");
        }
        for (i, w) in structure.base.iter().enumerate() {
            if w.len() != n {
                return invalid(format!("base measure {i} has {} points, expected {n}", w.len()));
            }
            let m = w.total_mass();
            if m < c || m > big_c {
                return invalid(format!("base measure {i} has mass {m} outside [{c}, {big_c}]"));
            }
        }
        for (j, mu) in fam.members.iter().enumerate() {
            if decompose(mu, &structure.base, structure.multiplicity_bound)?.is_none() {
                return invalid(format!(
                    "member {j} is not a sum of base measures with multiplicities <= {}",
                    structure.multiplicity_bound
                ));
            }
        }
        fam.structure = Some(structure);
        Ok(fam)
    }

    pub fn members(&self) -> &[FiniteMeasure] {
        &self.members
    }

    pub fn structure(&self) -> Option<&Structure> {
        self.structure.as_ref()
    }

    pub fn ground_size(&self) -> usize {
        self.members[0].len()
    }
}

/// Multiplicities `n` with `sum n_i w_i = mu` (relative tolerance 1e-9), by
/// enumeration of `{0..=d}^|W|`.
fn decompose(mu: &FiniteMeasure, base: &[FiniteMeasure], d: usize) -> Result<Option<Vec<usize>>> {
    let count = (d + 1).checked_pow(base.len() as u32).unwrap_or(usize::MAX);
    if count > MAX_DECOMPOSITIONS {
        return invalid(format!("{count} multiplicity vectors exceed the enumeration limit"));
    }
    let scale = mu.weights().iter().fold(1.0f64, |a, &w| a.max(w));
    let mut mult = vec![0usize; base.len()];
    for _ in 0..count {
        let ok = (0..mu.len()).all(|x| {
            let s: f64 = mult.iter().zip(base).map(|(&k, w)| k as f64 * w.weights()[x]).sum();
            (s - mu.weights()[x]).abs() <= 1e-9 * scale
        });
        if ok && mult.iter().any(|&k| k > 0) {
            return Ok(Some(mult));
        }
        for k in mult.iter_mut() {
            *k += 1;
            if *k <= d {
                break;
            }
            *k = 0;
        }
    }
    Ok(None)
}

/// JSON instance: `{ "n", "mu0", "Y", "structure"? }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub mu0: FiniteMeasure,
    #[serde(rename = "Y")]
    pub y: Vec<FiniteMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<Structure>,
}

impl Instance {
    /// Validates sizes and the structure, returning target and family.
    pub fn into_parts(self) -> Result<(FiniteMeasure, MeasureFamily)> {
        if self.mu0.len() != self.n {
            return invalid(format!("mu0 has {} points, n = {}", self.mu0.len(), self.n));
        }
        let fam = match self.structure {
            Some(s) => MeasureFamily::structured(self.y, s)?,
            None => MeasureFamily::new(self.y)?,
        };
        if fam.ground_size() != self.n {
            return invalid(format!("family lives on {} points, n = {}", fam.ground_size(), self.n));
        }
        Ok((self.mu0, fam))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Member,
    NonMember,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipCertificate {
    pub verdict: Verdict,
    /// `(member index, coefficient)` with positive coefficients.
    pub coefficients: Vec<(usize, f64)>,
    pub separating_f: Option<Vec<f64>>,
    /// `||sum c_i mu_i - mu0||_inf`; `None` for non-members.
    pub residual: Option<f64>,
    pub tol: f64,
}

impl MembershipCertificate {
    /// Re-checks the certificate in floating point: reconstruction within
    /// `tol`, or `<f, mu0> > 0` and `<f, mu> <= 0` on the family.
    pub fn is_sound(&self, mu0: &FiniteMeasure, fam: &MeasureFamily) -> bool {
        match self.verdict {
            Verdict::Member => reconstruction_error(mu0, fam, &self.coefficients) <= self.tol,
            Verdict::NonMember => self.separating_f.as_ref().is_some_and(|f| {
                mu0.integrate(f) > 0.0 && fam.members().iter().all(|m| m.integrate(f) <= 0.0)
            }),
        }
    }

    /// Same check in exact rational arithmetic on the stored `f64` values.
    pub fn is_sound_exact(&self, mu0: &FiniteMeasure, fam: &MeasureFamily) -> bool {
        match self.verdict {
            Verdict::Member => self.is_sound(mu0, fam),
            Verdict::NonMember => self.separating_f.as_ref().is_some_and(|f| {
                let f = to_field::<Rational>(f);
                exact_pairing(&f, mu0).is_positive_strict()
                    && fam.members().iter().all(|m| !exact_pairing(&f, m).is_positive_strict())
            }),
        }
    }
}

fn reconstruction_error(mu0: &FiniteMeasure, fam: &MeasureFamily, coeffs: &[(usize, f64)]) -> f64 {
    (0..mu0.len())
        .map(|x| {
            let s: f64 = coeffs.iter().map(|&(j, c)| c * fam.members()[j].weights()[x]).sum();
            (s - mu0.weights()[x]).abs()
        })
        .fold(0.0, f64::max)
}

fn to_field<F: Field>(v: &[f64]) -> Vec<F> {
    v.iter()
        .map(|&x| F::from_f64_exact(x).expect("finite weights convert exactly"))
        .collect()
}

fn exact_pairing(f: &[Rational], mu: &FiniteMeasure) -> Rational {
    f.iter()
        .zip(to_field::<Rational>(mu.weights()))
        .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
}

/// Outcome of phase I for `A lambda = b`, `lambda >= 0`, `b >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<F> {
    Feasible(Vec<F>),
    /// `y` with `y.b > 0` and `y.A_j <= 0` for every column.
    Infeasible(Vec<F>),
}

/// Phase-I simplex with Bland's rule. `columns[j]` is column `j` of `A`;
/// rows of `b` must be nonnegative. Over [`Rational`] the verdict and the
/// certificate are exact.
pub fn phase_one<F: Field>(columns: &[Vec<F>], b: &[F]) -> Result<Feasibility<F>> {
    let rows = b.len();
    let m = columns.len();
    if columns.iter().any(|c| c.len() != rows) {
        return invalid("column length differs from the right-hand side");
    }
    if b.iter().any(|v| v.is_negative_strict()) {
        return invalid("phase one expects a nonnegative right-hand side");
    }
    let width = m + rows;
    // tableau rows: [A | I | b]
    let mut t: Vec<Vec<F>> = (0..rows)
        .map(|i| {
            let mut r: Vec<F> = columns.iter().map(|c| c[i].clone()).collect();
            r.extend((0..rows).map(|k| if k == i { F::one() } else { F::zero() }));
            r.push(b[i].clone());
            r
        })
        .collect();
    let mut basis: Vec<usize> = (m..width).collect();
    loop {
        // reduced cost of column j: c_j - sum over artificial-basic rows
        let reduced = |t: &Vec<Vec<F>>, basis: &[usize], j: usize| -> F {
            let c = if j >= m { F::one() } else { F::zero() };
            let s = (0..rows)
                .filter(|&i| basis[i] >= m)
                .fold(F::zero(), |a, i| a + t[i][j].clone());
            c - s
        };
        let Some(enter) = (0..width).find(|&j| !basis.contains(&j) && reduced(&t, &basis, j).is_negative_strict())
        else {
            break;
        };
        let mut leave: Option<(usize, F)> = None;
        for i in 0..rows {
            let a = &t[i][enter];
            if !a.is_positive_strict() {
                continue;
            }
            let ratio = t[i][width].clone() / a.clone();
            leave = match leave {
                None => Some((i, ratio)),
                Some((k, best)) => {
                    if ratio < best || (ratio == best && basis[i] < basis[k]) {
                        Some((i, ratio))
                    } else {
                        Some((k, best))
                    }
                }
            };
        }
        // phase I is bounded below by zero, so a ratio always exists
        let (p, _) = leave.ok_or_else(|| Error::NonFinite("unbounded phase-one direction".into()))?;
        let pivot = t[p][enter].clone();
        for v in t[p].iter_mut() {
            *v = v.clone() / pivot.clone();
        }
        let prow = t[p].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == p || row[enter].is_zero() {
                continue;
            }
            let factor = row[enter].clone();
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v = v.clone() - factor.clone() * pv.clone();
            }
        }
        basis[p] = enter;
    }
    let infeas = (0..rows)
        .filter(|&i| basis[i] >= m)
        .fold(F::zero(), |a, i| a + t[i][width].clone());
    if infeas.is_positive_strict() {
        // y_k = c_B^T B^-1, read from the artificial columns
        let y = (0..rows)
            .map(|k| {
                (0..rows)
                    .filter(|&i| basis[i] >= m)
                    .fold(F::zero(), |a, i| a + t[i][m + k].clone())
            })
            .collect();
        return Ok(Feasibility::Infeasible(y));
    }
    let mut lambda = vec![F::zero(); m];
    for i in 0..rows {
        if basis[i] < m {
            lambda[basis[i]] = t[i][width].clone();
        }
    }
    Ok(Feasibility::Feasible(lambda))
}

fn check_sizes(mu0: &FiniteMeasure, fam: &MeasureFamily) -> Result<()> {
    if mu0.len() != fam.ground_size() {
        return invalid(format!(
            "target has {} points, family has {}",
            mu0.len(),
            fam.ground_size()
        ));
    }
    Ok(())
}

/// Decides `mu0 in cone(Y)` exactly (rational phase I on the `f64` inputs).
///
/// For non-members the phase-I dual `y` is shifted to
/// `f = y - (<y, mu0> / 2 mu0(X)) 1`, which keeps `<f, mu0> > 0` and makes
/// `<f, mu>` strictly negative on every member of positive mass, so the
/// certificate survives rounding to `f64`. `f` is scaled to sup norm 1.
pub fn cone_hull_membership(mu0: &FiniteMeasure, fam: &MeasureFamily, tol: f64) -> Result<MembershipCertificate> {
    check_sizes(mu0, fam)?;
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let n = mu0.len();
    if n > MAX_POINTS || fam.members().len() > MAX_MEMBERS {
        return invalid(format!(
            "instance exceeds {MAX_POINTS} points or {MAX_MEMBERS} members"
        ));
    }
    if fam.members().iter().all(|m| m.total_mass() == 0.0) {
        return invalid("every member of the family is the zero measure");
    }
    let columns: Vec<Vec<Rational>> = fam.members().iter().map(|m| to_field(m.weights())).collect();
    let b: Vec<Rational> = to_field(mu0.weights());
    match phase_one(&columns, &b)? {
        Feasibility::Feasible(lambda) => {
            let coefficients: Vec<(usize, f64)> = lambda
                .iter()
                .enumerate()
                .filter(|(_, l)| !l.is_zero())
                .map(|(j, l)| (j, l.to_f64_lossy()))
                .collect();
            let residual = reconstruction_error(mu0, fam, &coefficients);
            if residual > tol {
                return Err(Error::NonFinite(format!(
                    "rounded coefficients reconstruct the target only to {residual}, above tol {tol}"
                )));
            }
            Ok(MembershipCertificate {
                verdict: Verdict::Member,
                coefficients,
                separating_f: None,
                residual: Some(residual),
                tol,
            })
        }
        Feasibility::Infeasible(y) => {
            let mass: Rational = b.iter().fold(Rational::zero(), |a, v| a + v);
            let gap: Rational = y.iter().zip(&b).fold(Rational::zero(), |a, (p, q)| a + p * q);
            let two = Rational::one() + Rational::one();
            let shift = gap / (two * mass);
            let f: Vec<Rational> = y.iter().map(|v| v - &shift).collect();
            let norm = f.iter().map(|v| v.to_f64_lossy().abs()).fold(0.0, f64::max);
            let f: Vec<f64> = f.iter().map(|v| v.to_f64_lossy() / norm).collect();
            Ok(MembershipCertificate {
                verdict: Verdict::NonMember,
                coefficients: Vec::new(),
                separating_f: Some(f),
                residual: None,
                tol,
            })
        }
    }
}

/// Exact solution of the square-or-tall system `A_S x = b` by Gaussian
/// elimination; `None` if the columns are dependent or the system is
/// inconsistent.
fn solve_exact<F: Field>(cols: &[&Vec<F>], b: &[F]) -> Option<Vec<F>> {
    let rows = b.len();
    let k = cols.len();
    let mut a: Vec<Vec<F>> = (0..rows)
        .map(|i| {
            let mut r: Vec<F> = cols.iter().map(|c| c[i].clone()).collect();
            r.push(b[i].clone());
            r
        })
        .collect();
    // full column rank is required, so the pivot row equals the column
    for c in 0..k {
        let r = c;
        let p = (r..rows).find(|&i| !a[i][c].is_negligible())?;
        a.swap(r, p);
        let pivot = a[r][c].clone();
        for v in a[r].iter_mut() {
            *v = v.clone() / pivot.clone();
        }
        let prow = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && !row[c].is_negligible() {
                let f = row[c].clone();
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
        }
    }
    if a[k..].iter().any(|row| !row[k].is_negligible()) {
        return None;
    }
    Some((0..k).map(|i| a[i][k].clone()).collect())
}

/// Independent membership test: `mu0` is in the cone iff some linearly
/// independent subset of the family solves `A_S x = mu0` with `x >= 0`
/// (basic solutions, Carathéodory). All subsets are enumerated exactly.
pub fn brute_force_membership(mu0: &FiniteMeasure, fam: &MeasureFamily) -> Result<bool> {
    check_sizes(mu0, fam)?;
    let m = fam.members().len();
    if m > 20 {
        return invalid("brute-force enumeration limited to 20 members");
    }
    let columns: Vec<Vec<Rational>> = fam.members().iter().map(|m| to_field(m.weights())).collect();
    let b: Vec<Rational> = to_field(mu0.weights());
    if b.iter().all(|v| v.is_zero()) {
        return Ok(true);
    }
    for mask in 1u32..(1 << m) {
        let cols: Vec<&Vec<Rational>> = (0..m).filter(|j| mask >> j & 1 == 1).map(|j| &columns[j]).collect();
        if cols.len() > b.len() {
            continue;
        }
        if let Some(x) = solve_exact(&cols, &b) {
            if x.iter().all(|v| !v.is_negative_strict()) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Condition i for one functional: when `<f, mu0> < 0`, some member must have
/// `<f, mu> <= 0`; otherwise the condition holds vacuously.
pub fn condition_i_predicate(mu0: &FiniteMeasure, fam: &MeasureFamily, f: &[f64]) -> bool {
    if mu0.integrate(f) >= 0.0 {
        return true;
    }
    fam.members().iter().any(|m| m.integrate(f) <= 0.0)
}

/// `f0 = <f, mu0> / mu0(X) - f`, which has `<f0, mu0> = 0`.
pub fn mean_zero_functional(mu0: &FiniteMeasure, f: &[f64]) -> Vec<f64> {
    let avg = mu0.integrate(f) / mu0.total_mass();
    f.iter().map(|v| avg - v).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalApproximation {
    pub d: u64,
    pub c: Vec<u64>,
    /// `max_i |alpha_i - c_i / d|`.
    pub max_error: f64,
    pub bound: f64,
}

/// Common denominator `d` and positive numerators with
/// `|alpha_i - c_i / d| < eps / N`. Denominators are swept upwards from 1;
/// the sweep always stops by `d = floor(N / eps) + 1`, where rounding alone
/// meets the bound.
pub fn rational_approximation(alphas: &[f64], eps: f64) -> Result<RationalApproximation> {
    if alphas.is_empty() {
        return invalid("no coefficients to approximate");
    }
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return invalid(format!("coefficients must be positive and finite, got {a}"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    let n = alphas.len() as f64;
    let bound = eps / n;
    let d_max = (n / eps).floor() + 1.0;
    let amax = alphas.iter().copied().fold(0.0, f64::max);
    if d_max * amax > 2f64.powi(52) {
        return invalid("required denominator overflows exact integer range");
    }
    let mut d = 1u64;
    loop {
        let df = d as f64;
        let c: Vec<u64> = alphas.iter().map(|a| ((a * df).round() as u64).max(1)).collect();
        let err = alphas
            .iter()
            .zip(&c)
            .map(|(a, &ci)| (a - ci as f64 / df).abs())
            .fold(0.0, f64::max);
        if err < bound {
            return Ok(RationalApproximation {
                d,
                c,
                max_error: err,
                bound,
            });
        }
        if df >= d_max {
            return Err(Error::NonFinite(format!(
                "no denominator up to {d_max} met the bound {bound}"
            )));
        }
        d += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistTrace {
    /// Selected indices into the family (or base set for the weighted rule).
    pub sequence: Vec<usize>,
    /// Sup-norm distance of the running mean to the normalized target after
    /// each selection.
    pub cesaro_errors: Vec<f64>,
    /// Steps after the warm-up where the error increased.
    pub monotonicity_violations: usize,
}

impl EquidistTrace {
    pub fn final_error(&self) -> f64 {
        self.cesaro_errors.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Selection criterion of the greedy Cesàro rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Minimize `|S + w - (M + w(X)) t|_2`, the Euclidean norm of the
    /// unnormalized residual (`S` running sum, `M` its mass, `t` the
    /// normalized target). Some candidate always has
    /// `<r, w - w(X) t> <= 0`, so `|r|^2` grows by at most `(C D)^2` per
    /// step and the sup error is at most `C D / (c sqrt(k))`, with `D` the
    /// largest Euclidean distance from a normalized candidate to `t`.
    Euclidean,
    /// Minimize the sup distance of the updated mean to `t`. Has no
    /// convergence guarantee; it can settle at a positive error.
    SupNorm,
}

/// Greedy selection shared by both sequences. Ties are broken by the other
/// norm, then by the lowest index. Errors are always sup-norm distances.
fn greedy(
    target: &[f64],
    options: &[Vec<f64>],
    step_weight: &[f64],
    k_max: usize,
    warmup: usize,
    rule: SelectionRule,
) -> EquidistTrace {
    let n = target.len();
    let mut sum = vec![0.0; n];
    let mut total = 0.0;
    let mut mean = vec![0.0; n];
    let mut residual = vec![0.0; n];
    let mut sequence = Vec::with_capacity(k_max);
    let mut errors = Vec::with_capacity(k_max);
    let mut violations = 0;
    for k in 0..k_max {
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for (j, opt) in options.iter().enumerate() {
            let t = total + step_weight[j];
            for x in 0..n {
                mean[x] = (sum[x] + opt[x]) / t;
                residual[x] = sum[x] + opt[x] - t * target[x];
            }
            let sup = sup_dist(&mean, target);
            let l2 = residual.iter().map(|r| r * r).sum::<f64>();
            let key = match rule {
                SelectionRule::Euclidean => (l2, sup),
                SelectionRule::SupNorm => (sup, l2),
            };
            let better = match best {
                None => true,
                Some((_, a, b, _)) => key.0 < a || (key.0 == a && key.1 < b),
            };
            if better {
                best = Some((j, key.0, key.1, sup));
            }
        }
        let (j, _, _, err) = best.expect("non-empty options");
        for x in 0..n {
            sum[x] += options[j][x];
        }
        total += step_weight[j];
        if k >= warmup && errors.last().is_some_and(|&p| err > p) {
            violations += 1;
        }
        sequence.push(j);
        errors.push(err);
    }
    EquidistTrace {
        sequence,
        cesaro_errors: errors,
        monotonicity_violations: violations,
    }
}

fn require_member(mu0: &FiniteMeasure, members: &[FiniteMeasure]) -> Result<()> {
    if !(mu0.total_mass() > 0.0) {
        return invalid("target measure must have positive mass");
    }
    let fam = MeasureFamily::new(members.to_vec())?;
    match cone_hull_membership(mu0, &fam, MEMBERSHIP_TOL)?.verdict {
        Verdict::Member => Ok(()),
        Verdict::NonMember => Err(Error::NotAMember),
    }
}

/// Greedy Cesàro sequence over the family: the running mean of the
/// normalized measures `mu_i / mu_i(X)` tracks `mu0 / mu0(X)`. Uses
/// [`SelectionRule::Euclidean`].
pub fn cesaro_sequence(mu0: &FiniteMeasure, fam: &MeasureFamily, k_max: usize) -> Result<EquidistTrace> {
    cesaro_sequence_with(mu0, fam, k_max, SelectionRule::Euclidean)
}

pub fn cesaro_sequence_with(
    mu0: &FiniteMeasure,
    fam: &MeasureFamily,
    k_max: usize,
    rule: SelectionRule,
) -> Result<EquidistTrace> {
    check_sizes(mu0, fam)?;
    if k_max == 0 {
        return invalid("k_max must be at least 1");
    }
    if let Some(j) = fam.members().iter().position(|m| !(m.total_mass() > 0.0)) {
        return invalid(format!("member {j} has zero mass and cannot be normalized"));
    }
    require_member(mu0, fam.members())?;
    let options: Vec<Vec<f64>> = fam.members().iter().map(|m| m.normalized()).collect();
    let ones = vec![1.0; options.len()];
    Ok(greedy(&mu0.normalized(), &options, &ones, k_max, options.len(), rule))
}

/// Structured variant: greedy over the base set with the mass-weighted mean
/// `(sum mu_i) / (sum mu_i(X))`. The mass bounds `c <= w(X) <= C` enter the
/// convergence bound of [`SelectionRule::Euclidean`].
pub fn weighted_cesaro_structured(mu0: &FiniteMeasure, fam: &MeasureFamily, k_max: usize) -> Result<EquidistTrace> {
    weighted_cesaro_structured_with(mu0, fam, k_max, SelectionRule::Euclidean)
}

pub fn weighted_cesaro_structured_with(
    mu0: &FiniteMeasure,
    fam: &MeasureFamily,
    k_max: usize,
    rule: SelectionRule,
) -> Result<EquidistTrace> {
    check_sizes(mu0, fam)?;
    let Some(s) = fam.structure() else {
        return Err(Error::Unstructured("weighted sequence needs a base set and mass bounds".into()));
    };
    if k_max == 0 {
        return invalid("k_max must be at least 1");
    }
    let (c, big_c) = s.mass_bounds;
    for (i, w) in s.base.iter().enumerate() {
        let m = w.total_mass();
        if !(m >= c && m <= big_c && m > 0.0) {
            return invalid(format!("base measure {i} has mass {m} outside [{c}, {big_c}]"));
        }
    }
    require_member(mu0, &s.base)?;
    let options: Vec<Vec<f64>> = s.base.iter().map(|w| w.weights().to_vec()).collect();
    let masses: Vec<f64> = s.base.iter().map(|w| w.total_mass()).collect();
    Ok(greedy(&mu0.normalized(), &options, &masses, k_max, options.len(), rule))
}

/// `(1/k) sum_i <f, mu_i> / mu_i(X)` along the first `k` selections.
pub fn cesaro_mean(fam: &MeasureFamily, trace: &EquidistTrace, k: usize, f: &[f64]) -> f64 {
    let s: f64 = trace.sequence[..k]
        .iter()
        .map(|&j| {
            let m = &fam.members()[j];
            m.integrate(f) / m.total_mass()
        })
        .sum();
    s / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inconsistency {
    pub trial: usize,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub n: usize,
    pub members: usize,
    pub verdict: Verdict,
    pub cesaro_error: Option<f64>,
    pub weighted_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub seed: u64,
    pub trials: usize,
    pub member_count: usize,
    pub non_member_count: usize,
    pub max_member_cesaro_error: f64,
    pub max_member_weighted_error: f64,
    pub outcomes: Vec<TrialOutcome>,
    pub inconsistencies: Vec<Inconsistency>,
}

/// Multiple of `2^-bits` in `[0, 1)`. Dyadic data keep every generated
/// combination exactly representable, so a target built inside a cone stays
/// inside it after rounding.
fn dyadic(rng: &mut ChaCha8Rng, bits: i32) -> f64 {
    let scale = 2f64.powi(bits);
    (rng.gen::<f64>() * scale).floor() / scale
}

/// Random weights: quantized to eighths in half of the draws so that
/// degenerate (tied, dependent) instances occur.
fn random_weights(rng: &mut ChaCha8Rng, n: usize, quantized: bool) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if quantized {
                    dyadic(rng, 3)
                } else if rng.gen_bool(0.2) {
                    0.0
                } else {
                    dyadic(rng, 20)
                }
            })
            .collect();
        if w.iter().any(|&v| v > 0.0) {
            return w;
        }
    }
}

fn random_target(rng: &mut ChaCha8Rng, members: &[FiniteMeasure], n: usize, quantized: bool) -> FiniteMeasure {
    let w = if rng.gen_bool(0.5) {
        let mut w = vec![0.0; n];
        for m in members {
            let c: f64 = if quantized { rng.gen_range(0..4) as f64 } else { dyadic(rng, 10) };
            for (x, v) in w.iter_mut().enumerate() {
                *v += c * m.weights()[x];
            }
        }
        if w.iter().all(|&v| v == 0.0) {
            w = members[0].weights().to_vec();
        }
        w
    } else {
        random_weights(rng, n, quantized)
    };
    FiniteMeasure::new(w).expect("nonnegative weights")
}

fn structured_instance(rng: &mut ChaCha8Rng, n: usize) -> (FiniteMeasure, MeasureFamily) {
    let (c, big_c) = (0.5, 2.0);
    let d = 3;
    let base: Vec<FiniteMeasure> = (0..rng.gen_range(1..=3))
        .map(|_| {
            // power-of-two rescaling into [c, C] keeps the weights dyadic
            let mut w = random_weights(rng, n, false);
            while w.iter().sum::<f64>() > big_c {
                w.iter_mut().for_each(|v| *v /= 2.0);
            }
            while w.iter().sum::<f64>() < c {
                w.iter_mut().for_each(|v| *v *= 2.0);
            }
            FiniteMeasure::new(w).expect("nonnegative")
        })
        .collect();
    let members: Vec<FiniteMeasure> = (0..rng.gen_range(1..=5))
        .map(|_| loop {
            let mult: Vec<usize> = base.iter().map(|_| rng.gen_range(0..=d)).collect();
            if mult.iter().any(|&k| k > 0) {
                let w = (0..n)
                    .map(|x| mult.iter().zip(&base).map(|(&k, b)| k as f64 * b.weights()[x]).sum())
                    .collect();
                break FiniteMeasure::new(w).expect("nonnegative");
            }
        })
        .collect();
    let mu0 = random_target(rng, &members, n, false);
    let fam = MeasureFamily::structured(
        members,
        Structure {
            base,
            multiplicity_bound: d,
            mass_bounds: (c, big_c),
        },
    )
    .expect("generated family decomposes by construction");
    (mu0, fam)
}

fn generate(seed: u64, trial: usize) -> (ChaCha8Rng, FiniteMeasure, MeasureFamily) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let n = rng.gen_range(2..=6);
    let quantized = rng.gen_bool(0.5);
    let members: Vec<FiniteMeasure> = (0..rng.gen_range(1..=5))
        .map(|_| FiniteMeasure::new(random_weights(&mut rng, n, quantized)).expect("nonnegative"))
        .collect();
    let mu0 = random_target(&mut rng, &members, n, quantized);
    let fam = MeasureFamily::new(members).expect("non-empty family of equal sizes");
    (rng, mu0, fam)
}

/// The unstructured instance of trial `trial` in [`equivalence_harness`].
pub fn harness_instance(seed: u64, trial: usize) -> (FiniteMeasure, MeasureFamily) {
    let (_, mu0, fam) = generate(seed, trial);
    (mu0, fam)
}

fn run_trial(seed: u64, trial: usize) -> Result<(TrialOutcome, Vec<Inconsistency>)> {
    let (mut rng, mu0, fam) = generate(seed, trial);
    let n = mu0.len();
    let mut bad = Vec::new();
    let mut flag = |check: &str, detail: String| {
        bad.push(Inconsistency {
            trial,
            check: check.to_string(),
            detail,
        })
    };

    let cert = cone_hull_membership(&mu0, &fam, MEMBERSHIP_TOL)?;
    let brute = brute_force_membership(&mu0, &fam)?;
    if brute != (cert.verdict == Verdict::Member) {
        flag("lp-vs-enumeration", format!("simplex {:?}, enumeration member = {brute}", cert.verdict));
    }
    if !cert.is_sound(&mu0, &fam) || !cert.is_sound_exact(&mu0, &fam) {
        flag("certificate", format!("{cert:?} fails its soundness check"));
    }

    // condition i over random functionals
    let functionals: Vec<Vec<f64>> = (0..HARNESS_FUNCTIONALS)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let sampled_i = functionals.iter().all(|f| condition_i_predicate(&mu0, &fam, f));

    let mut cesaro_error = None;
    let mut weighted_error = None;
    match cert.verdict {
        Verdict::Member => {
            if !sampled_i {
                flag("condition-i", "a sampled functional violates condition i on a member".into());
            }
            let tr = cesaro_sequence(&mu0, &fam, HARNESS_K_MAX)?;
            let e = tr.final_error();
            if !(e < CESARO_TOL) {
                flag("cesaro", format!("error {e} at k = {HARNESS_K_MAX}"));
            }
            cesaro_error = Some(e);
        }
        Verdict::NonMember => {
            let f = cert.separating_f.as_ref().expect("non-member carries f");
            let f0 = mean_zero_functional(&mu0, f);
            let scale = mu0.integrate(&f0.iter().map(|v| v.abs()).collect::<Vec<_>>()).max(1.0);
            if mu0.integrate(&f0).abs() > 1e-12 * scale {
                flag("f0", format!("<f0, mu0> = {} is not zero", mu0.integrate(&f0)));
            }
            let margins: Vec<f64> = fam.members().iter().map(|m| m.integrate(&f0)).collect();
            if margins.iter().any(|&v| !(v > 0.0)) {
                flag("f0", format!("f0 does not violate condition ii: {margins:?}"));
            }
            // condition i fails for f0 shifted below zero on mu0
            let delta = fam
                .members()
                .iter()
                .zip(&margins)
                .map(|(m, v)| v / m.total_mass())
                .fold(f64::INFINITY, f64::min)
                / 2.0;
            let g: Vec<f64> = f0.iter().map(|v| v - delta).collect();
            if condition_i_predicate(&mu0, &fam, &g) {
                flag("condition-i", "constructed functional satisfies condition i on a non-member".into());
            }
            if !matches!(cesaro_sequence(&mu0, &fam, 10), Err(Error::NotAMember)) {
                flag("cesaro", "sequence accepted a non-member".into());
            }
        }
    }

    let (smu0, sfam) = structured_instance(&mut rng, n);
    let scert = cone_hull_membership(&smu0, &sfam, MEMBERSHIP_TOL)?;
    if brute_force_membership(&smu0, &sfam)? != (scert.verdict == Verdict::Member) {
        flag("lp-vs-enumeration", "structured instance".into());
    }
    if scert.verdict == Verdict::Member {
        let tr = weighted_cesaro_structured(&smu0, &sfam, HARNESS_K_MAX)?;
        let e = tr.final_error();
        if !(e < CESARO_TOL) {
            flag("weighted-cesaro", format!("error {e} at k = {HARNESS_K_MAX}"));
        }
        weighted_error = Some(e);
    }

    Ok((
        TrialOutcome {
            trial,
            n,
            members: fam.members().len(),
            verdict: cert.verdict,
            cesaro_error,
            weighted_error,
        },
        bad,
    ))
}

/// Random instances checked for agreement between the simplex verdict, the
/// enumeration verdict, certificate soundness, the `f0` construction,
/// condition i and Cesàro convergence. Trials run in parallel, each on its
/// own ChaCha stream of `seed`; results are ordered by trial.
pub fn equivalence_harness(seed: u64, trials: usize) -> Result<EquivalenceReport> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let results: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(seed, t))
        .collect::<Result<_>>()?;
    let mut outcomes = Vec::with_capacity(trials);
    let mut inconsistencies = Vec::new();
    for (o, bad) in results {
        outcomes.push(o);
        inconsistencies.extend(bad);
    }
    let max_of = |f: fn(&TrialOutcome) -> Option<f64>| outcomes.iter().filter_map(f).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        seed,
        trials,
        member_count: outcomes.iter().filter(|o| o.verdict == Verdict::Member).count(),
        non_member_count: outcomes.iter().filter(|o| o.verdict == Verdict::NonMember).count(),
        max_member_cesaro_error: max_of(|o| o.cesaro_error),
        max_member_weighted_error: max_of(|o| o.weighted_error),
        outcomes,
        inconsistencies,
    })
}
