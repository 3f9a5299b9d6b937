//! Certified lattice sums over `ℤ^d \ {0}`.
//!
//! Summands are even in every coordinate, so the engine enumerates
//! nonnegative multi-indices and weights each by `2^{#nonzero}`. Cubes
//! `|n|_∞ ≤ N` are swept shell by shell in increasing `|n|_∞`, lexicographic
//! within a shell. Shells may be evaluated on worker threads; partial sums are
//! reduced in shell order with compensated summation, so results do not depend
//! on the thread count.
//!
//! Truncation tails are bounded analytically for summands of the form
//! `Π_i e(n_i) / |n|²` with a per-axis envelope `e(m) ≤ min(1, (a/|m|)^p)`.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default ceiling on the number of lattice points in the truncation cube.
pub const DEFAULT_MAX_TERMS: u64 = 4_000_000_000;

/// Compensated (Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Per-axis decay envelope of a summand `Π_i e(n_i) / |n|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisEnvelope {
    /// `e ≡ 1`. The sum converges only in `d = 1`.
    Flat,
    /// `e(m) ≤ min(1, (scale / |m|)^power)` with `power ≥ 2`.
    Power { scale: f64, power: u32 },
}

/// A truncation radius together with its certified tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPlan {
    pub n_max: usize,
    /// Bound on the omitted part of `Σ Π e(n_i)/|n|²`, after `correction`.
    pub tail_bound: f64,
    /// Value to add to the truncated sum (nonzero only when the tail is known
    /// in closed form up to `tail_bound`).
    pub correction: f64,
}

impl AxisEnvelope {
    fn per_axis(&self, m: f64) -> f64 {
        match *self {
            AxisEnvelope::Flat => 1.0,
            AxisEnvelope::Power { scale, power } => {
                if m <= scale {
                    1.0
                } else {
                    (scale / m).powi(power as i32)
                }
            }
        }
    }

    /// Upper bound on `Σ_{m∈ℤ} e(m)`.
    fn full_line(&self) -> f64 {
        match *self {
            AxisEnvelope::Flat => f64::INFINITY,
            AxisEnvelope::Power { scale, power } => {
                let p = power as f64;
                let floor = scale.floor();
                let m = floor + 1.0;
                let rest = scale.powf(p) * (m.powf(-p) + m.powf(1.0 - p) / (p - 1.0));
                1.0 + 2.0 * (floor + rest)
            }
        }
    }

    /// Upper bound on `Σ_{|m| > n} e(m) / m²`.
    fn line_tail(&self, n: usize) -> f64 {
        let n = n as f64;
        let crude = 2.0 / n;
        match *self {
            AxisEnvelope::Flat => crude,
            AxisEnvelope::Power { scale, power } => {
                let p = power as f64;
                crude.min(2.0 * scale.powf(p) * n.powf(-p - 1.0) / (p + 1.0))
            }
        }
    }

    /// Certified plan for the cube of radius `n`.
    pub fn plan(&self, dimension: usize, n: usize) -> Result<TruncationPlan> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "truncation radius must be >= 1".into(),
            ));
        }
        match (self, dimension) {
            (AxisEnvelope::Flat, 1) => {
                // 2/(N+1) ≤ 2 Σ_{m>N} m^{-2} ≤ 2/N
                let nf = n as f64;
                let lo = 2.0 / (nf + 1.0);
                let hi = 2.0 / nf;
                Ok(TruncationPlan {
                    n_max: n,
                    tail_bound: 0.5 * (hi - lo),
                    correction: 0.5 * (hi + lo),
                })
            }
            (AxisEnvelope::Flat, _) => Err(Error::UnsupportedModel(format!(
                "Σ |n|^-2 diverges in d = {dimension}; a flat spectrum has no finite lattice sum"
            ))),
            (AxisEnvelope::Power { .. }, _) => {
                let d = dimension as f64;
                let b = self.full_line();
                Ok(TruncationPlan {
                    n_max: n,
                    tail_bound: d * self.line_tail(n) * b.powi(dimension as i32 - 1),
                    correction: 0.0,
                })
            }
        }
    }

    /// Smallest radius whose certified tail is at most `target`, subject to a
    /// ceiling of `max_terms` cube points.
    pub fn plan_for_target(
        &self,
        dimension: usize,
        target: f64,
        max_terms: u64,
    ) -> Result<TruncationPlan> {
        if !(target > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {target}"
            )));
        }
        let ceiling = max_radius(dimension, max_terms);
        if ceiling == 0 {
            return Err(Error::InvalidParameter(format!(
                "term budget {max_terms} admits no lattice point"
            )));
        }
        let best = self.plan(dimension, ceiling)?;
        if best.tail_bound > target {
            return Err(Error::Truncation {
                requested: target,
                achievable: best.tail_bound,
                n_max: ceiling,
                max_terms,
            });
        }
        let (mut lo, mut hi) = (1usize, ceiling);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.plan(dimension, mid)?.tail_bound <= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        self.plan(dimension, lo)
    }

    /// Envelope value used only by tests that check a table against it.
    pub fn bound_at(&self, m: i64) -> f64 {
        self.per_axis(m.unsigned_abs() as f64)
    }
}

/// Largest `N` with `(2N+1)^d - 1 ≤ max_terms`.
fn max_radius(dimension: usize, max_terms: u64) -> usize {
    let side = ((max_terms as f64 + 1.0).powf(1.0 / dimension as f64)).floor() as u64;
    let mut n = side.saturating_sub(1) / 2;
    while cube_terms(dimension, n + 1) <= max_terms as u128 {
        n += 1;
    }
    while n > 0 && cube_terms(dimension, n) > max_terms as u128 {
        n -= 1;
    }
    n as usize
}

fn cube_terms(dimension: usize, n: u64) -> u128 {
    (2 * n as u128 + 1).pow(dimension as u32) - 1
}

/// `Σ_{0 < |n|_∞ ≤ n_max} term(|n_1|, …, |n_d|)` in shell order.
///
/// `term` receives the absolute values of the coordinates.
pub fn shell_sum<F>(dimension: usize, n_max: usize, term: F) -> f64
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let partials: Vec<Neumaier> = (1..=n_max)
        .into_par_iter()
        .map(|m| shell(dimension, m, &term))
        .collect();
    let mut total = Neumaier::new();
    for p in &partials {
        total.merge(p);
    }
    total.value()
}

/// Partial sums after each shell, for monotonicity checks.
pub fn shell_partial_sums<F>(dimension: usize, n_max: usize, term: F) -> Vec<f64>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let mut total = Neumaier::new();
    (1..=n_max)
        .map(|m| {
            total.merge(&shell(dimension, m, &term));
            total.value()
        })
        .collect()
}

/// The same cube sum, visiting every signed lattice point in plain
/// lexicographic order.
pub fn cube_sum_lexicographic<F>(dimension: usize, n_max: usize, term: F) -> f64
where
    F: Fn(&[usize]) -> f64,
{
    let side = 2 * n_max + 1;
    let total = side.pow(dimension as u32);
    let mut signed = vec![0i64; dimension];
    let mut abs = vec![0usize; dimension];
    let mut acc = Neumaier::new();
    for flat in 0..total {
        let mut rest = flat;
        for slot in signed.iter_mut().rev() {
            *slot = (rest % side) as i64 - n_max as i64;
            rest /= side;
        }
        if signed.iter().all(|&v| v == 0) {
            continue;
        }
        for (a, s) in abs.iter_mut().zip(&signed) {
            *a = s.unsigned_abs() as usize;
        }
        acc.add(term(&abs));
    }
    acc.value()
}

fn shell<F>(dimension: usize, m: usize, term: &F) -> Neumaier
where
    F: Fn(&[usize]) -> f64,
{
    let mut index = vec![0usize; dimension];
    let mut acc = Neumaier::new();
    visit(&mut index, 0, m, false, term, &mut acc);
    acc
}

fn visit<F>(index: &mut [usize], pos: usize, m: usize, reached: bool, term: &F, acc: &mut Neumaier)
where
    F: Fn(&[usize]) -> f64,
{
    if pos == index.len() {
        let nonzero = index.iter().filter(|&&v| v != 0).count();
        acc.add((1u64 << nonzero) as f64 * term(index));
        return;
    }
    let last = pos + 1 == index.len();
    let start = if last && !reached { m } else { 0 };
    for v in start..=m {
        index[pos] = v;
        visit(index, pos + 1, m, reached || v == m, term, acc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inv_sq(n: &[usize]) -> f64 {
        1.0 / n.iter().map(|&v| (v * v) as f64).sum::<f64>()
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let acc: Neumaier = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn shells_cover_the_cube_once() {
        for d in 1..=3 {
            for n in 1..=4 {
                let count = shell_sum(d, n, |_| 1.0);
                assert_eq!(count, ((2 * n + 1).pow(d as u32) - 1) as f64);
            }
        }
    }

    #[test]
    fn basel_partial_sum() {
        let s = shell_sum(1, 1000, inv_sq);
        let exact: f64 = (1..=1000).rev().map(|m| 2.0 / (m * m) as f64).sum();
        assert!((s - exact).abs() < 1e-15);
    }

    #[test]
    fn shell_and_lexicographic_orders_agree() {
        let term = |n: &[usize]| {
            let e: f64 = n
                .iter()
                .map(|&v| 1.0 / (1.0 + (v as f64).powi(4)))
                .product();
            e * inv_sq(n)
        };
        for d in 1..=3 {
            let a = shell_sum(d, 20, term);
            let b = cube_sum_lexicographic(d, 20, term);
            assert!(((a - b) / a).abs() < 1e-14, "d={d}: {a} vs {b}");
        }
    }

    #[test]
    fn flat_d1_bracket_contains_zeta() {
        let env = AxisEnvelope::Flat;
        for n in [10usize, 1000, 12345] {
            let plan = env.plan(1, n).unwrap();
            let total = shell_sum(1, n, inv_sq) + plan.correction;
            let exact = std::f64::consts::PI.powi(2) / 3.0;
            assert!((total - exact).abs() <= plan.tail_bound * (1.0 + 1e-9) + 1e-15);
        }
        assert!(matches!(env.plan(2, 10), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn power_tail_bound_dominates_actual_tail() {
        // e(m) = min(1, (a/m)^4) itself; compare with a long partial sum.
        let a = 3.7;
        let env = AxisEnvelope::Power { scale: a, power: 4 };
        let term = |n: &[usize]| {
            let e: f64 = n.iter().map(|&v| env.bound_at(v as i64)).product();
            e * inv_sq(n)
        };
        for d in 1..=2 {
            let far = shell_sum(d, 600, term);
            for n in [2usize, 5, 20, 60] {
                let near = shell_sum(d, n, term);
                let bound = env.plan(d, n).unwrap().tail_bound;
                assert!(far - near <= bound, "d={d} n={n}: {} > {bound}", far - near);
            }
        }
    }

    #[test]
    fn target_plan_is_minimal() {
        let env = AxisEnvelope::Power {
            scale: 10.0,
            power: 8,
        };
        let plan = env.plan_for_target(2, 1e-9, DEFAULT_MAX_TERMS).unwrap();
        assert!(plan.tail_bound <= 1e-9);
        assert!(env.plan(2, plan.n_max - 1).unwrap().tail_bound > 1e-9);
    }

    #[test]
    fn truncation_error_reports_achievable_bound() {
        let env = AxisEnvelope::Power {
            scale: 10.0,
            power: 4,
        };
        match env.plan_for_target(3, 1e-30, 1000) {
            Err(Error::Truncation {
                achievable, n_max, ..
            }) => {
                assert!(achievable > 1e-30);
                assert_eq!(n_max, 4);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn partial_sums_monotone(d in 1usize..4, a in 0.5f64..5.0) {
            let env = AxisEnvelope::Power { scale: a, power: 4 };
            let sums = shell_partial_sums(d, 12, |n: &[usize]| {
                let e: f64 = n.iter().map(|&v| env.bound_at(v as i64)).product();
                -e * inv_sq(n)
            });
            for w in sums.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }

        #[test]
        fn radius_respects_budget(d in 1usize..4, budget in 2u64..10_000_000) {
            let n = max_radius(d, budget) as u64;
            prop_assert!(cube_terms(d, n) <= budget as u128);
            prop_assert!(cube_terms(d, n + 1) > budget as u128);
        }
    }
}
