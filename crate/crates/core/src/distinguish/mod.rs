//! Two-hypothesis testing between `x` and `y` from deletion-channel traces.
//!
//! [`build_plan`] picks a multi-bit statistic whose exact expectations
//! under `x` and `y` differ by a gap `Δ`, and sizes the number of traces by
//! Hoeffding's inequality. [`decide`] then compares the empirical frequency
//! against both expectations.

mod experiment;

use num_integer::binomial;
use serde::{Deserialize, Serialize};

use crate::bitstr::{edit_ball_membership, extend_to_nonperiodic, first_diff_index, BitString};
use crate::channel::{empirical_statistic, exact_statistic_expectation, ChannelParam, StatisticSpec, Trace};
use crate::error::{Error, Result};
use crate::seed;

pub use experiment::{
    run_experiment, sample_pair, scaling_sweep, write_sweep_csv, ExperimentConfig, ExperimentResult, FamilyKind,
    SlopeFit, SweepConfig, SweepResult, SweepRow, TrialRecord,
};

/// Pattern length per unit of edit radius in main mode.
pub const PATTERN_FACTOR: usize = 12;
/// Largest family [`StatisticFamily::Exhaustive`] will enumerate.
pub const MAX_FAMILY_SIZE: u64 = 1 << 20;
/// Starting tuples refined by coordinate ascent in the sampled family.
pub const ASCENT_STARTS: usize = 16;
/// Longest pattern searched in the small-`t0` fallback.
pub const FALLBACK_MAX_LEN: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlanMode {
    /// `t0 >= 12k`: a non-periodic pattern of length `12k` is built from
    /// `x` just before the first difference.
    Main,
    /// `t0 < 12k`: exhaustive search over short patterns.
    SmallT0Fallback,
}

/// Index tuples searched in main mode, all carrying the pattern `w`.
#[derive(Clone, Debug, PartialEq)]
pub enum StatisticFamily {
    /// Consecutive positions `(i, .., i + |w| - 1)`.
    Windows,
    /// Every increasing `|w|`-tuple in `1..=n`.
    Exhaustive,
    /// The windows plus `budget` uniformly random tuples; the best few are
    /// then improved by moving one index at a time.
    Sampled { budget: usize, seed: u64 },
    /// A caller-supplied list, used as is in either mode.
    Custom(Vec<StatisticSpec>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelinePlan {
    pub t0: usize,
    pub mode: PlanMode,
    /// The main-mode pattern; `None` in the fallback.
    pub pattern: Option<BitString>,
    #[serde(skip)]
    pub family: Vec<StatisticSpec>,
    pub family_size: usize,
    pub chosen: StatisticSpec,
    pub expected_x: f64,
    pub expected_y: f64,
    pub gap: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub n_samples: u64,
}

/// `ceil(2 ln(2/δ) / Δ²)`.
pub fn hoeffding_sample_size(delta: f64, gap: f64) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(Error::InvalidConfig(format!("gap must lie in (0, 1], got {gap}")));
    }
    let n = (2.0 * (2.0 / delta).ln() / (gap * gap)).ceil();
    if n >= u64::MAX as f64 {
        return Err(Error::InvalidConfig(format!("sample size overflows for gap {gap}")));
    }
    Ok(n as u64)
}

/// Every increasing `len`-tuple of `1..=n`, in lexicographic order.
fn tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if len == 0 || len > n {
        return out;
    }
    let mut idx: Vec<usize> = (1..=len).collect();
    loop {
        out.push(idx.clone());
        let mut i = len;
        while i > 0 && idx[i - 1] == n - len + i {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..len {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn window_family(pattern: &BitString, n: usize) -> Vec<StatisticSpec> {
    let l = pattern.len();
    (1..=(n + 1).saturating_sub(l))
        .map(|i| StatisticSpec::window(pattern.clone(), i).expect("valid window"))
        .collect()
}

/// All `C(n, |w|)` index tuples carrying `pattern`.
pub fn exhaustive_family(pattern: &BitString, n: usize) -> Result<Vec<StatisticSpec>> {
    let count = binomial(n as u64, pattern.len() as u64);
    if pattern.len() > n || count > MAX_FAMILY_SIZE {
        return Err(Error::FamilyTooLarge(format!(
            "C({n}, {}) tuples exceeds {MAX_FAMILY_SIZE}",
            pattern.len()
        )));
    }
    Ok(tuples(n, pattern.len())
        .into_iter()
        .map(|idx| StatisticSpec::new(pattern.clone(), idx).expect("valid tuple"))
        .collect())
}

pub fn sampled_family(pattern: &BitString, n: usize, budget: usize, rng_seed: u64) -> Vec<StatisticSpec> {
    let mut family = window_family(pattern, n);
    if pattern.len() > n {
        return family;
    }
    let mut rng = seed::rng(rng_seed);
    for _ in 0..budget {
        let mut idx = rand::seq::index::sample(&mut rng, n, pattern.len()).into_vec();
        idx.sort_unstable();
        let idx = idx.into_iter().map(|i| i + 1).collect();
        family.push(StatisticSpec::new(pattern.clone(), idx).expect("valid tuple"));
    }
    family
}

/// All patterns of length `1..=max_len` on all index tuples of
/// `1..=positions`.
pub fn short_pattern_family(positions: usize, max_len: usize) -> Vec<StatisticSpec> {
    let mut out = Vec::new();
    for len in 1..=max_len.min(positions) {
        for idx in tuples(positions, len) {
            for p in 0u32..(1 << len) {
                let bits = (0..len).map(|j| (p >> (len - 1 - j) & 1) as u8).collect();
                out.push(StatisticSpec::new(BitString::from_raw(bits), idx.clone()).expect("valid tuple"));
            }
        }
    }
    out
}

/// Main-mode pattern: `x_{t0-12k+1..t0-1}` extended to a non-periodic
/// string of length `12k`.
pub fn main_pattern(x: &BitString, t0: usize, k: usize) -> Result<BitString> {
    let l = PATTERN_FACTOR * k;
    if t0 < l {
        return Err(Error::InvalidSpec(format!("t0 = {t0} is below 12k = {l}")));
    }
    extend_to_nonperiodic(&x.slice(t0 - l + 1, t0 - 1))
}

/// Coordinate ascent on the index tuple: move one index at a time within
/// its neighbours' bounds while `|E_x - E_y|` strictly grows.
fn ascend(
    x: &BitString,
    y: &BitString,
    ch: &ChannelParam,
    mut spec: StatisticSpec,
    mut ex: f64,
    mut ey: f64,
) -> (StatisticSpec, f64, f64) {
    let n = x.len();
    loop {
        let mut improved = false;
        for h in 0..spec.indices().len() {
            let idx = spec.indices();
            let lo = if h == 0 { 1 } else { idx[h - 1] + 1 };
            let hi = idx.get(h + 1).map_or(n, |&next| next - 1);
            for cand in lo..=hi {
                if cand == spec.indices()[h] {
                    continue;
                }
                let mut moved = spec.indices().to_vec();
                moved[h] = cand;
                let trial = StatisticSpec::new(spec.pattern().clone(), moved).expect("still increasing");
                let tx = exact_statistic_expectation(x, &trial, ch);
                let ty = exact_statistic_expectation(y, &trial, ch);
                if (tx - ty).abs() > (ex - ey).abs() {
                    (spec, ex, ey) = (trial, tx, ty);
                    improved = true;
                }
            }
        }
        if !improved {
            return (spec, ex, ey);
        }
    }
}

/// Builds the test for `x` against `y`.
///
/// In main mode the statistic is chosen from `family`; in the fallback
/// every pattern of length at most 2 on trace positions `1..=min(n, 24k)`
/// is searched (a `Custom` family overrides both). The chosen statistic
/// maximises `|E_x - E_y|`, earliest in family order on ties.
pub fn build_plan(
    x: &BitString,
    y: &BitString,
    k: usize,
    ch: &ChannelParam,
    delta: f64,
    family: &StatisticFamily,
) -> Result<PipelinePlan> {
    let t0 = first_diff_index(x, y)?.ok_or(Error::DegeneratePair)?;
    let (inside, report) = edit_ball_membership(x, y, k);
    if !inside {
        return Err(Error::NotInEditBall {
            k,
            deletions: report.deletions_needed,
            insertions: report.insertions_needed,
        });
    }
    let n = x.len();
    let (mode, pattern) = if k >= 1 && t0 >= PATTERN_FACTOR * k {
        (PlanMode::Main, Some(main_pattern(x, t0, k)?))
    } else {
        (PlanMode::SmallT0Fallback, None)
    };
    let specs = match (family, &pattern) {
        (StatisticFamily::Custom(list), _) => list.clone(),
        (StatisticFamily::Windows, Some(w)) => window_family(w, n),
        (StatisticFamily::Exhaustive, Some(w)) => exhaustive_family(w, n)?,
        (StatisticFamily::Sampled { budget, seed }, Some(w)) => sampled_family(w, n, *budget, *seed),
        (_, None) => short_pattern_family(n.min(2 * PATTERN_FACTOR * k.max(1)), FALLBACK_MAX_LEN),
    };
    if specs.is_empty() {
        return Err(Error::NoSeparatingStatistic);
    }
    let scored: Vec<(f64, f64)> = specs
        .iter()
        .map(|s| (exact_statistic_expectation(x, s, ch), exact_statistic_expectation(y, s, ch)))
        .collect();
    let mut order: Vec<usize> = (0..specs.len()).collect();
    // Largest gap first, family order on ties.
    order.sort_by(|&a, &b| {
        let ga = (scored[a].0 - scored[a].1).abs();
        let gb = (scored[b].0 - scored[b].1).abs();
        gb.total_cmp(&ga).then(a.cmp(&b))
    });
    let (mut chosen, mut ex, mut ey) = (specs[order[0]].clone(), scored[order[0]].0, scored[order[0]].1);
    if matches!(family, StatisticFamily::Sampled { .. }) && pattern.is_some() {
        for &i in order.iter().take(ASCENT_STARTS) {
            let (s, tx, ty) = ascend(x, y, ch, specs[i].clone(), scored[i].0, scored[i].1);
            if (tx - ty).abs() > (ex - ey).abs() {
                (chosen, ex, ey) = (s, tx, ty);
            }
        }
    }
    let gap = (ex - ey).abs();
    if gap == 0.0 {
        return Err(Error::NoSeparatingStatistic);
    }
    let n_samples = hoeffding_sample_size(delta, gap)?;
    Ok(PipelinePlan {
        t0,
        mode,
        pattern,
        family_size: specs.len(),
        chosen,
        family: specs,
        expected_x: ex,
        expected_y: ey,
        gap,
        delta,
        n_samples,
    })
}

/// Verdict from a match count: the hypothesis whose expectation is closer
/// to `hits / total`; an exact midpoint goes to `X`.
pub fn decide_from_count(hits: u64, total: u64, plan: &PipelinePlan) -> Result<Verdict> {
    if total == 0 {
        return Err(Error::EmptyTraces);
    }
    let p = hits as f64 / total as f64;
    Ok(closer(p, plan))
}

fn closer(p: f64, plan: &PipelinePlan) -> Verdict {
    if (p - plan.expected_x).abs() <= (p - plan.expected_y).abs() {
        Verdict::X
    } else {
        Verdict::Y
    }
}

pub fn decide(traces: &[Trace], plan: &PipelinePlan) -> Result<Verdict> {
    Ok(closer(empirical_statistic(traces, &plan.chosen)?, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstr::indicator_vector;
    use crate::channel::generate_traces;
    use crate::poly::find_separating_power;
    use proptest::prelude::*;
    use rand::Rng;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn hoeffding_example() {
        assert_eq!(hoeffding_sample_size(0.05, 0.1).unwrap(), 738);
        assert!(hoeffding_sample_size(0.0, 0.1).is_err());
        assert!(hoeffding_sample_size(0.05, 0.0).is_err());
    }

    #[test]
    fn tuple_enumeration() {
        assert_eq!(tuples(4, 2).len(), 6);
        assert_eq!(tuples(4, 2)[5], vec![3, 4]);
        assert_eq!(tuples(3, 3), vec![vec![1, 2, 3]]);
        assert!(tuples(2, 3).is_empty());
        assert_eq!(short_pattern_family(3, 2).len(), 3 * 2 + 3 * 4);
    }

    #[test]
    fn two_bit_example_gap() {
        let x = bs("10");
        let y = bs("01");
        let ch = ChannelParam::new(0.5).unwrap();
        let spec = StatisticSpec::new(bs("1"), vec![1]).unwrap();
        let plan = build_plan(&x, &y, 1, &ch, 0.05, &StatisticFamily::Custom(vec![spec])).unwrap();
        assert_eq!(plan.mode, PlanMode::SmallT0Fallback);
        assert!((plan.expected_x - 0.5).abs() < 1e-15);
        assert!((plan.expected_y - 0.25).abs() < 1e-15);
        assert!((plan.gap - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_equal_and_far_pairs() {
        let ch = ChannelParam::new(0.2).unwrap();
        let x = bs("0110");
        assert_eq!(build_plan(&x, &x, 1, &ch, 0.05, &StatisticFamily::Windows), Err(Error::DegeneratePair));
        let far = bs("1001");
        assert!(matches!(
            build_plan(&x, &far, 1, &ch, 0.05, &StatisticFamily::Windows),
            Err(Error::NotInEditBall { .. })
        ));
    }

    fn late_pair() -> (BitString, BitString) {
        // Delete bit 17 and append a 1: the first difference is at 17.
        let x = bs("0110100111010010100");
        let mut yb = x.bits().to_vec();
        yb.remove(16);
        yb.push(1);
        (x, BitString::new(yb).unwrap())
    }

    #[test]
    fn main_mode_structure() {
        let (x, y) = late_pair();
        let ch = ChannelParam::new(0.1).unwrap();
        assert!(edit_ball_membership(&x, &y, 1).0);
        let plan = build_plan(&x, &y, 1, &ch, 0.05, &StatisticFamily::Windows).unwrap();
        assert_eq!(plan.mode, PlanMode::Main);
        assert_eq!(plan.t0, 17);
        let w = plan.pattern.clone().unwrap();
        assert_eq!(w.len(), 12);
        assert_eq!(w.slice(1, 11), x.slice(6, 16));
        assert!(crate::bitstr::is_non_periodic(&w));
        let u = indicator_vector(&x, &w).unwrap();
        let v = indicator_vector(&y, &w).unwrap();
        assert_ne!(u.entries.get(6), v.entries.get(6));
        let m = find_separating_power(&u, &v, 13).unwrap().unwrap();
        assert!((1..=13).contains(&m));
        assert_eq!(plan.family_size, x.len() - 11);
        assert!(plan.gap > 0.0);
        assert_eq!(plan.n_samples, hoeffding_sample_size(0.05, plan.gap).unwrap());
    }

    #[test]
    fn exhaustive_dominates_windows() {
        let (x, y) = late_pair();
        let ch = ChannelParam::new(0.3).unwrap();
        let w = main_pattern(&x, 17, 1).unwrap();
        assert!(exhaustive_family(&w, 60).is_err());
        let windows = build_plan(&x, &y, 1, &ch, 0.05, &StatisticFamily::Windows).unwrap();
        let sampled = build_plan(&x, &y, 1, &ch, 0.05, &StatisticFamily::Sampled { budget: 200, seed: 1 }).unwrap();
        assert!(sampled.gap >= windows.gap);
        let full = StatisticFamily::Custom(exhaustive_family(&w, 14).unwrap());
        assert_eq!(build_plan(&x, &y, 1, &ch, 0.05, &full).unwrap().family_size, 91);
    }

    #[test]
    fn decide_examples() {
        let (x, y) = late_pair();
        let ch = ChannelParam::new(0.0).unwrap();
        let plan = build_plan(&x, &y, 1, &ch, 0.05, &StatisticFamily::Windows).unwrap();
        let one_x = generate_traces(&x, &ch, 1, 1);
        let one_y = generate_traces(&y, &ch, 1, 1);
        assert_eq!(decide(&one_x, &plan).unwrap(), Verdict::X);
        assert_eq!(decide(&one_y, &plan).unwrap(), Verdict::Y);
        assert_eq!(decide(&[], &plan), Err(Error::EmptyTraces));

        let mut mid = plan.clone();
        mid.expected_x = 0.25;
        mid.expected_y = 0.75;
        assert_eq!(decide_from_count(1, 2, &mid).unwrap(), Verdict::X);
        assert_eq!(decide_from_count(1, 4, &mid).unwrap(), Verdict::X);
        assert_eq!(decide_from_count(3, 4, &mid).unwrap(), Verdict::Y);
    }

    proptest! {
        #[test]
        fn decide_ignores_trace_order(seed in any::<u64>(), shift in 0usize..50) {
            let (x, y) = late_pair();
            let ch = ChannelParam::new(0.4).unwrap();
            let plan = build_plan(&x, &y, 1, &ch, 0.05, &StatisticFamily::Windows).unwrap();
            let mut traces = generate_traces(&x, &ch, seed, 51);
            let before = decide(&traces, &plan).unwrap();
            traces.rotate_left(shift);
            traces.reverse();
            prop_assert_eq!(decide(&traces, &plan).unwrap(), before);
        }

        #[test]
        fn small_instances_match_exhaustive_oracle(seed in any::<u64>(), q in 0.05f64..0.6) {
            // Fallback search equals brute force over the same family.
            let mut rng = seed::rng(seed);
            let x = BitString::random(8, &mut rng);
            let y = crate::bitstr::sample_from_edit_ball(&x, 1, rng.random()).unwrap();
            prop_assume!(x != y);
            let ch = ChannelParam::new(q).unwrap();
            let plan = build_plan(&x, &y, 1, &ch, 0.05, &StatisticFamily::Windows).unwrap();
            prop_assert_eq!(plan.mode, PlanMode::SmallT0Fallback);
            prop_assert!(plan.gap > 0.0);
            let oracle = short_pattern_family(8, 2)
                .iter()
                .map(|s| {
                    let a = crate::channel::exact_trace_distribution(&x, &ch).unwrap();
                    let b = crate::channel::exact_trace_distribution(&y, &ch).unwrap();
                    let p = |d: &std::collections::BTreeMap<BitString, f64>| {
                        d.iter().filter(|(t, _)| s.matches(t.bits())).map(|(_, v)| v).sum::<f64>()
                    };
                    (p(&a) - p(&b)).abs()
                })
                .fold(0.0, f64::max);
            prop_assert!((plan.gap - oracle).abs() < 1e-12);
        }
    }
}
