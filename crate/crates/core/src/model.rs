//! Ground truth: measurement matrices, random-walk sparse signals with a
//! growing support, and noisy observations `y_t = A x_t + w_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{IndexSet, Mat};
use crate::rng::SeedStream;

/// Base of the logarithm in `lambda_m = sqrt(2 log m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

/// `sqrt(2 log m)` in the chosen base; base 2 gives exactly 4 for `m = 256`.
pub fn lambda_m(m: usize, base: LogBase) -> f64 {
    let l = match base {
        LogBase::Two => (m as f64).log2(),
        LogBase::E => (m as f64).ln(),
    };
    (2.0 * l).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Gaussian truncated to `|w_i| <= lambda_m sigma_obs / max_i ||A_i||_1`.
    TruncatedGaussian,
}

/// Ordered list of `(time, indices added at that time)`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SupportSchedule {
    additions: Vec<(usize, IndexSet)>,
}

impl SupportSchedule {
    pub fn new(additions: Vec<(usize, IndexSet)>, m: usize) -> Result<Self> {
        let mut seen = IndexSet::empty();
        let mut last_time = 0;
        for (k, (t, set)) in additions.iter().enumerate() {
            if *t == 0 || (k > 0 && *t <= last_time) {
                return Err(Error::contract(
                    "schedule times must be positive and strictly increasing",
                ));
            }
            if set.max().is_some_and(|i| i >= m) {
                return Err(Error::contract(format!("scheduled index out of range for m={m}")));
            }
            if !seen.is_disjoint(set) {
                return Err(Error::contract("scheduled addition sets must be disjoint"));
            }
            seen = seen.union(set);
            last_time = *t;
        }
        Ok(SupportSchedule { additions })
    }

    pub fn entries(&self) -> &[(usize, IndexSet)] {
        &self.additions
    }

    pub fn additions_at(&self, t: usize) -> Option<&IndexSet> {
        self.additions
            .iter()
            .find(|(time, _)| *time == t)
            .map(|(_, s)| s)
    }

    /// True support `N_t`: union of all additions at times `<= t`.
    pub fn support_at(&self, t: usize) -> IndexSet {
        self.additions
            .iter()
            .filter(|(time, _)| *time <= t)
            .fold(IndexSet::empty(), |acc, (_, s)| acc.union(s))
    }

    pub fn last_time(&self) -> usize {
        self.additions.last().map_or(0, |(t, _)| *t)
    }

    pub fn s_max(&self) -> usize {
        self.additions.iter().map(|(_, s)| s.len()).sum()
    }
}

/// The two simulation protocols with a random support.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// 8 indices at t=1, then 4 more at each of t=10, 20, 30.
    Experiment1,
    /// 8 indices at t=1, then 2 more every 5 steps for 10 <= t <= 50.
    Experiment2,
}

impl Experiment {
    fn sizes(self) -> Vec<(usize, usize)> {
        match self {
            Experiment::Experiment1 => vec![(1, 8), (10, 4), (20, 4), (30, 4)],
            Experiment::Experiment2 => std::iter::once((1, 8))
                .chain((10..=50).step_by(5).map(|t| (t, 2)))
                .collect(),
        }
    }
}

/// Draws the support schedule of one of the two experiments.
pub fn experiment_schedule(which: Experiment, m: usize, seed: u64) -> Result<SupportSchedule> {
    let sizes = which.sizes();
    let total: usize = sizes.iter().map(|(_, k)| k).sum();
    if m < total {
        return Err(Error::contract(format!(
            "dimension {m} too small for {total} scheduled indices"
        )));
    }
    let mut rng = SeedStream::new(seed);
    let mut pool: Vec<usize> = (0..m).collect();
    let additions = sizes
        .into_iter()
        .map(|(t, k)| (t, IndexSet::from_unsorted(rng.sample_without_replacement(&mut pool, k))))
        .collect();
    SupportSchedule::new(additions, m)
}

/// Random-walk signal model on a growing support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub m: usize,
    pub sigma_sys_sq: f64,
    /// Variance of a coefficient at the step it enters the support.
    pub sigma_init_sq: f64,
    pub schedule: SupportSchedule,
}

impl SystemModel {
    pub fn new(m: usize, sigma_sys_sq: f64, sigma_init_sq: f64, schedule: SupportSchedule) -> Result<Self> {
        if !(sigma_sys_sq >= 0.0 && sigma_init_sq >= 0.0) {
            return Err(Error::contract("variances must be non-negative"));
        }
        if schedule.s_max() > m {
            return Err(Error::contract("more scheduled indices than coordinates"));
        }
        // re-validate against this m
        let schedule = SupportSchedule::new(schedule.additions, m)?;
        Ok(SystemModel {
            m,
            sigma_sys_sq,
            sigma_init_sq,
            schedule,
        })
    }
}

/// Measurement operator and noise description.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementModel {
    a: Mat,
    gram: Mat,
    pub sigma_obs_sq: f64,
    pub lambda_m: f64,
    pub noise_kind: NoiseKind,
}

impl MeasurementModel {
    pub fn new(a: Mat, sigma_obs_sq: f64, lambda_m: f64, noise_kind: NoiseKind) -> Result<Self> {
        let (n, m) = (a.rows(), a.cols());
        if n == 0 || n >= m {
            return Err(Error::contract(format!("need 0 < n < m, got n={n}, m={m}")));
        }
        for j in 0..m {
            let norm = a.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::contract(format!("column {j} has norm {norm}, expected 1")));
            }
        }
        if !(sigma_obs_sq >= 0.0) || !(lambda_m >= 0.0) {
            return Err(Error::contract("noise variance and lambda_m must be non-negative"));
        }
        let gram = a.gram();
        Ok(MeasurementModel {
            a,
            gram,
            sigma_obs_sq,
            lambda_m,
            noise_kind,
        })
    }

    #[inline]
    pub fn a(&self) -> &Mat {
        &self.a
    }

    /// `A'A`, cached for the Dantzig selector.
    #[inline]
    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    pub fn sigma_obs(&self) -> f64 {
        self.sigma_obs_sq.sqrt()
    }

    /// Dantzig selector constraint level `lambda_m sigma_obs`.
    pub fn ds_eps(&self) -> f64 {
        self.lambda_m * self.sigma_obs()
    }

    /// Per-coordinate noise bound `lambda_m sigma_obs / max_i ||A_i||_1`.
    pub fn noise_cutoff(&self) -> f64 {
        let max_l1 = (0..self.m())
            .map(|j| self.a.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        self.ds_eps() / max_l1
    }
}

/// Gaussian `n x m` matrix with unit-norm columns.
pub fn gen_matrix(n: usize, m: usize, seed: u64) -> Result<Mat> {
    if n == 0 || n >= m {
        return Err(Error::contract(format!("need 0 < n < m, got n={n}, m={m}")));
    }
    let mut rng = SeedStream::new(seed);
    let data: Vec<f64> = (0..n * m).map(|_| rng.standard_normal()).collect();
    let mut a = Mat::from_vec(n, m, data)?;
    for j in 0..m {
        let norm = a.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..n {
            a[(i, j)] /= norm;
        }
    }
    Ok(a)
}

/// `[I_n, H_n / sqrt n]` with `H_n` the Sylvester Hadamard matrix (`n` a power of two).
///
/// Mutual coherence is `1 / sqrt n`.
pub fn hadamard_pair(n: usize) -> Result<Mat> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::contract(format!("Hadamard pair needs n a power of two >= 2, got {n}")));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut a = Mat::zeros(n, 2 * n);
    for i in 0..n {
        a[(i, i)] = 1.0;
        for j in 0..n {
            a[(i, n + j)] = if (i & j).count_ones() % 2 == 0 { scale } else { -scale };
        }
    }
    Ok(a)
}

/// Matrix from columns, each rescaled to unit Euclidean norm.
pub fn unit_columns(columns: &[Vec<f64>]) -> Result<Mat> {
    let normalized = columns
        .iter()
        .map(|c| {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                Err(Error::contract("columns must be finite and nonzero"))
            } else {
                Ok(c.iter().map(|v| v / norm).collect::<Vec<f64>>())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Mat::from_columns(&normalized)
}

/// Signal value and support at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueState {
    pub t: usize,
    pub x: Vec<f64>,
    pub support: IndexSet,
}

impl TrueState {
    /// `x_0 = 0` with empty support.
    pub fn initial(m: usize) -> Self {
        TrueState {
            t: 0,
            x: vec![0.0; m],
            support: IndexSet::empty(),
        }
    }
}

/// Advances the random walk by one step.
///
/// Coefficients already in the support get an `N(0, sigma_sys^2)` increment;
/// coefficients entering at `t+1` are drawn fresh from `N(0, sigma_init^2)`.
pub fn step_signal(prev: &TrueState, sys: &SystemModel, rng: &mut SeedStream) -> TrueState {
    let t = prev.t + 1;
    let mut x = prev.x.clone();
    for i in prev.support.iter() {
        x[i] += rng.normal(sys.sigma_sys_sq);
    }
    let mut support = prev.support.clone();
    if let Some(added) = sys.schedule.additions_at(t) {
        for i in added.iter() {
            x[i] = rng.normal(sys.sigma_init_sq);
        }
        support = support.union(added);
    }
    TrueState { t, x, support }
}

/// `y = A x + w`.
pub fn measure(x: &[f64], meas: &MeasurementModel, rng: &mut SeedStream) -> Result<Vec<f64>> {
    if x.len() != meas.m() {
        return Err(Error::contract("signal length does not match the measurement matrix"));
    }
    let mut y = meas.a().mul_vec(x)?;
    match meas.noise_kind {
        NoiseKind::Gaussian => {
            for yi in &mut y {
                *yi += rng.normal(meas.sigma_obs_sq);
            }
        }
        NoiseKind::TruncatedGaussian => {
            let cutoff = meas.noise_cutoff();
            for yi in &mut y {
                *yi += rng.truncated_normal(meas.sigma_obs_sq, cutoff);
            }
        }
    }
    Ok(y)
}

/// Signal states and observations for `t = 1..=horizon`.
pub fn simulate(
    sys: &SystemModel,
    meas: &MeasurementModel,
    horizon: usize,
    signal_rng: &mut SeedStream,
    noise_rng: &mut SeedStream,
) -> Result<Vec<(TrueState, Vec<f64>)>> {
    let mut state = TrueState::initial(sys.m);
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        state = step_signal(&state, sys, signal_rng);
        let y = measure(&state.x, meas, noise_rng)?;
        out.push((state.clone(), y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_pair_structure() {
        let a = hadamard_pair(8).unwrap();
        let g = a.gram();
        for i in 0..16 {
            assert!((g[(i, i)] - 1.0).abs() < 1e-15);
            for j in 0..16 {
                if i != j {
                    let expected = if (i < 8) == (j < 8) { 0.0 } else { 8f64.sqrt().recip() };
                    assert!((g[(i, j)].abs() - expected).abs() < 1e-15);
                }
            }
        }
        assert!(hadamard_pair(6).is_err());
    }

    #[test]
    fn unit_columns_normalizes() {
        let a = unit_columns(&[vec![3.0, 4.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(a.column(0), vec![0.6, 0.8]);
        assert_eq!(a.column(1), vec![0.0, 1.0]);
        assert!(unit_columns(&[vec![0.0, 0.0]]).is_err());
    }

    fn sample_var(v: &[f64]) -> f64 {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn gen_matrix_unit_columns_and_deterministic() {
        let a = gen_matrix(72, 256, 9).unwrap();
        assert_eq!((a.rows(), a.cols()), (72, 256));
        for j in 0..256 {
            let norm: f64 = a.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-10);
        }
        assert_eq!(a, gen_matrix(72, 256, 9).unwrap());
        assert_ne!(a, gen_matrix(72, 256, 10).unwrap());
        let small = gen_matrix(4, 8, 1).unwrap();
        for j in 0..8 {
            let norm: f64 = small.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-10);
        }
        assert!(gen_matrix(8, 8, 1).is_err());
    }

    #[test]
    fn lambda_m_base_two_is_four_at_256() {
        assert_eq!(lambda_m(256, LogBase::Two), 4.0);
        assert!((lambda_m(256, LogBase::E) - (2.0 * 256f64.ln()).sqrt()).abs() < 1e-15);
    }

    fn sys_with(schedule: Vec<(usize, Vec<usize>)>, m: usize) -> SystemModel {
        let sched = SupportSchedule::new(
            schedule
                .into_iter()
                .map(|(t, v)| (t, IndexSet::from_unsorted(v)))
                .collect(),
            m,
        )
        .unwrap();
        SystemModel::new(m, 1.0, 3.0, sched).unwrap()
    }

    #[test]
    fn step_without_additions_stays_zero() {
        let sys = sys_with(vec![], 10);
        let mut rng = SeedStream::new(0);
        let s1 = step_signal(&TrueState::initial(10), &sys, &mut rng);
        assert_eq!(s1.t, 1);
        assert!(s1.x.iter().all(|&v| v == 0.0));
        assert!(s1.support.is_empty());
    }

    #[test]
    fn new_coefficient_uses_init_variance() {
        let sys = sys_with(vec![(1, vec![3])], 10);
        let trials = 100_000;
        let mut rng = SeedStream::new(77);
        let mut draws = Vec::with_capacity(trials);
        for _ in 0..trials {
            let s1 = step_signal(&TrueState::initial(10), &sys, &mut rng);
            assert_eq!(s1.support.as_slice(), &[3]);
            assert!(s1.x.iter().enumerate().all(|(i, &v)| i == 3 || v == 0.0));
            draws.push(s1.x[3]);
        }
        let v = sample_var(&draws);
        assert!((v - 3.0).abs() < 0.03 * 3.0, "variance {v}");
    }

    #[test]
    fn ongoing_increment_variance() {
        let sys = SystemModel::new(
            4,
            0.5,
            3.0,
            SupportSchedule::new(vec![(1, IndexSet::from_unsorted([1]))], 4).unwrap(),
        )
        .unwrap();
        let mut rng = SeedStream::new(5);
        let start = TrueState {
            t: 1,
            x: vec![0.0, 2.0, 0.0, 0.0],
            support: IndexSet::from_unsorted([1]),
        };
        let incs: Vec<f64> = (0..100_000)
            .map(|_| step_signal(&start, &sys, &mut rng).x[1] - 2.0)
            .collect();
        let v = sample_var(&incs);
        assert!((v - 0.5).abs() < 0.03 * 0.5, "variance {v}");
    }

    fn meas(n: usize, m: usize, sigma_obs_sq: f64, kind: NoiseKind) -> MeasurementModel {
        MeasurementModel::new(gen_matrix(n, m, 3).unwrap(), sigma_obs_sq, lambda_m(m, LogBase::Two), kind)
            .unwrap()
    }

    #[test]
    fn noiseless_zero_signal() {
        let mm = meas(4, 8, 0.0, NoiseKind::Gaussian);
        let y = measure(&[0.0; 8], &mm, &mut SeedStream::new(1)).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncated_noise_within_cutoff() {
        let mm = meas(10, 20, 0.25, NoiseKind::TruncatedGaussian);
        let cutoff = mm.noise_cutoff();
        let mut rng = SeedStream::new(2);
        let mut max = 0.0f64;
        for _ in 0..10_000 {
            let y = measure(&[0.0; 20], &mm, &mut rng).unwrap();
            max = y.iter().fold(max, |acc, v| acc.max(v.abs()));
        }
        assert!(max <= cutoff);
        // |A_i' w| <= lambda_m sigma_obs for every column
        let w = measure(&[0.0; 20], &mm, &mut rng).unwrap();
        let corr = mm.a().tr_mul_vec(&w).unwrap();
        assert!(corr.iter().all(|c| c.abs() <= mm.ds_eps() + 1e-12));
    }

    #[test]
    fn gaussian_noise_variance() {
        let mm = meas(10, 20, 0.3, NoiseKind::Gaussian);
        let mut rng = SeedStream::new(8);
        let draws: Vec<f64> = (0..10_000)
            .flat_map(|_| measure(&[0.0; 20], &mm, &mut rng).unwrap())
            .collect();
        assert_eq!(draws.len(), 100_000);
        let v = sample_var(&draws);
        assert!((v - 0.3).abs() < 0.03 * 0.3, "variance {v}");
    }

    #[test]
    fn experiment_schedules() {
        let s1 = experiment_schedule(Experiment::Experiment1, 256, 4).unwrap();
        for (t, size) in [(1, 8), (9, 8), (10, 12), (19, 12), (20, 16), (29, 16), (30, 20), (100, 20)] {
            assert_eq!(s1.support_at(t).len(), size, "t={t}");
        }
        assert_eq!(s1.s_max(), 20);
        let s2 = experiment_schedule(Experiment::Experiment2, 256, 4).unwrap();
        assert_eq!(s2.support_at(50).len(), 26);
        assert_eq!(s2.support_at(49).len(), 24);
        assert_eq!(s2.support_at(100).len(), 26);
        assert_eq!(s2.last_time(), 50);
        // disjointness is enforced by the constructor; re-check explicitly
        let all: Vec<usize> = s2.entries().iter().flat_map(|(_, s)| s.iter()).collect();
        assert_eq!(IndexSet::from_unsorted(all.clone()).len(), all.len());
        assert!(experiment_schedule(Experiment::Experiment2, 20, 1).is_err());
    }

    #[test]
    fn schedule_rejects_overlap_and_disorder() {
        let a = IndexSet::from_unsorted([1, 2]);
        let b = IndexSet::from_unsorted([2, 3]);
        assert!(SupportSchedule::new(vec![(1, a.clone()), (2, b)], 5).is_err());
        assert!(SupportSchedule::new(vec![(3, a.clone()), (2, IndexSet::from_unsorted([4]))], 5).is_err());
        assert!(SupportSchedule::new(vec![(0, a)], 5).is_err());
    }

    #[test]
    fn trajectories_are_reproducible_and_nested() {
        let sched = experiment_schedule(Experiment::Experiment1, 64, 1).unwrap();
        let sys = SystemModel::new(64, 1.0, 3.0, sched).unwrap();
        let mm = MeasurementModel::new(gen_matrix(24, 64, 2).unwrap(), 0.05, 3.0, NoiseKind::Gaussian).unwrap();
        let run = || simulate(&sys, &mm, 40, &mut SeedStream::new(3), &mut SeedStream::new(4)).unwrap();
        let a = run();
        assert_eq!(a, run());
        for w in a.windows(2) {
            assert!(w[0].0.support.is_subset(&w[1].0.support));
        }
        for (s, _) in &a {
            assert_eq!(s.support, sys.schedule.support_at(s.t));
            for i in s.support.complement(64).iter() {
                assert_eq!(s.x[i], 0.0);
            }
        }
    }
}
