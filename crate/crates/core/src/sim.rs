//! Monte-Carlo engine.
//!
//! A trial draws every user's channel, lets each user claim a codeword,
//! resolves reservation collisions, optimizes ports and weights against the
//! final codewords and scores the slot. All randomness comes from
//! [`crate::rng::stream`], so a trial is a pure function of
//! `(config, seed, trial index)` and the worker count never matters.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{ChannelMatrix, ChannelModel, CorrelatedRician, Deployment, UserGeometry};
use crate::codebook::{make_dft_codebook, Codebook};
use crate::config::{ExperimentConfig, Scheme, SweepParam};
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::mac::{self, CollisionPolicy, Detection, UserStatus};
use crate::metrics::{self, Interferer, SlotOutcome};
use crate::ports::{self, WeightsMode};
use crate::rng::{stream, Substream};
use crate::selector::{self, BasisMode, SubspaceBasis};
use crate::stats::Summary;

/// Per-entry channel power. Path loss is not modeled, so this only sets the scale.
pub const CHANNEL_POWER: f64 = 1.0;
/// Transmit power of every user.
pub const TX_POWER: f64 = 1.0;
/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CPSC_THREADS";

/// What one trial produced.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub outcome: SlotOutcome,
    /// Some codeword was claimed twice in the reservation phase.
    pub reservation_collision: bool,
}

/// Prepared state for one parameter point.
#[derive(Debug)]
pub struct Simulator {
    config: ExperimentConfig,
    book: Codebook,
    sampler: CorrelatedRician,
    deployment: Deployment,
    noise_power: f64,
}

/// How a user ranks codewords.
enum Preference {
    Subspace(SubspaceBasis),
    Uniform,
}

impl Simulator {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = ChannelModel {
            rice_factor: config.rice_factor,
            channel_power: CHANNEL_POWER,
            num_bs_antennas: config.m,
            grid: config.grid,
        };
        Ok(Simulator {
            book: make_dft_codebook(config.m)?,
            sampler: CorrelatedRician::new(model)?,
            deployment: Deployment::default(),
            noise_power: metrics::noise_power_for_snr(config.snr_db, CHANNEL_POWER),
            config,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn codebook(&self) -> &Codebook {
        &self.book
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// One slot; errors carry the trial index.
    pub fn run_trial(&self, trial: u64) -> Result<TrialRecord> {
        self.trial_inner(trial).map_err(|e| Error::Trial { trial, source: Box::new(e) })
    }

    fn trial_inner(&self, trial: u64) -> Result<TrialRecord> {
        let cfg = &self.config;
        let seed = cfg.seed;
        let channels: Vec<ChannelMatrix> = (0..cfg.u)
            .map(|u| {
                let mut rng = stream(seed, trial, Substream::Channel(u as u32));
                let geom = UserGeometry::random(&mut rng, &self.deployment);
                self.sampler.sample(&geom, u, &mut rng)
            })
            .collect();

        let all = selector::all_codewords(cfg.m);
        let mut prefs = Vec::with_capacity(cfg.u);
        let mut claims = Vec::with_capacity(cfg.u);
        let mut codeword_rngs: Vec<_> =
            (0..cfg.u).map(|u| stream(seed, trial, Substream::Codeword(u as u32))).collect();
        for (u, h) in channels.iter().enumerate() {
            let pref = self.preference(h, u, trial)?;
            let k = match &pref {
                Preference::Subspace(basis) => selector::select_codeword(basis, &self.book, &all)?.index,
                Preference::Uniform => codeword_rngs[u].random_range(0..cfg.m),
            };
            prefs.push(pref);
            claims.push(k);
        }

        let mut mac_rng = stream(seed, trial, Substream::Mac);
        let report = mac::detect_collisions(&claims, &self.book, Detection::Oracle, None, self.noise_power, &mut mac_rng)?;
        let outcome = mac::resolve(
            &report,
            CollisionPolicy::new(cfg.collision_policy),
            |user, free| match &prefs[user] {
                Preference::Subspace(basis) => Ok(selector::select_codeword(basis, &self.book, free)?.index),
                Preference::Uniform => Ok(free[codeword_rngs[user].random_range(0..free.len())]),
            },
            None,
            &mut mac_rng,
        )?;

        let mut served = Vec::new();
        let mut served_channels = Vec::new();
        let mut served_index = Vec::new();
        let mut leaking = Vec::new();
        for (u, h) in channels.iter().enumerate() {
            let Some(k) = outcome.final_index[u] else { continue };
            let q: CVector = self.book.codeword(k).into_owned();
            let eff = self.configure_ports(&h.entries, &q)?;
            if outcome.status[u].is_served() {
                served.push(u);
                served_channels.push(eff);
                served_index.push(k);
            } else {
                leaking.push(eff);
            }
        }
        let interferers: Vec<Interferer<'_>> =
            leaking.iter().map(|channel| Interferer { channel, power: TX_POWER }).collect();
        let powers = vec![TX_POWER; served.len()];
        let sinr = metrics::compute_sinr_with_interferers(
            &served_channels,
            &served_index,
            &powers,
            &interferers,
            self.noise_power,
            &self.book,
        )?;
        let mut per_user = vec![0.0; cfg.u];
        for (&u, s) in served.iter().zip(sinr) {
            per_user[u] = s;
        }
        let outcome_slot = metrics::slot_rates(&per_user, &outcome.status)?;
        if !outcome_slot.sum_rate.is_finite() {
            return Err(Error::Numerical { what: "non-finite sum rate", detail: format!("{:?}", per_user) });
        }
        Ok(TrialRecord { trial, outcome: outcome_slot, reservation_collision: report.has_collision() })
    }

    fn preference(&self, h: &ChannelMatrix, user: usize, trial: u64) -> Result<Preference> {
        let cfg = &self.config;
        let mut rng = stream(cfg.seed, trial, Substream::Selector(user as u32));
        let t = cfg.effective_t();
        Ok(match cfg.scheme {
            Scheme::BsRandomCodeword => Preference::Uniform,
            Scheme::FixedAntenna => {
                let sub = ChannelMatrix::new(h.entries.columns(0, cfg.k).into_owned(), user);
                let t = t.min(cfg.k);
                Preference::Subspace(selector::truncated_basis(&sub, t, &mut rng, BasisMode::Randomized)?)
            }
            _ => Preference::Subspace(selector::truncated_basis(h, t, &mut rng, BasisMode::Randomized)?),
        })
    }

    fn configure_ports(&self, h: &crate::linalg::CMatrix, q: &CVector) -> Result<CVector> {
        let k = self.config.k;
        let res = match self.config.scheme {
            Scheme::Cpsc | Scheme::BsRandomCodeword => ports::omp_port_select(h, q, k)?,
            Scheme::CpscNoCombining => ports::greedy_no_combining(h, q, k)?,
            Scheme::FixedAntenna => ports::fixed_ports(h, q, k)?,
            Scheme::CpscExhaustive => {
                ports::exhaustive_port_select(h, q, k, WeightsMode::Lemma1, ports::EXHAUSTIVE_BUDGET)?
            }
        };
        Ok(res.effective_channel(h))
    }

    /// Every trial of this point, in trial order, on the current rayon pool.
    pub fn run_all(&self) -> Result<Vec<TrialRecord>> {
        let results: Vec<Result<TrialRecord>> =
            (0..self.config.trials).into_par_iter().map(|t| self.run_trial(t)).collect();
        results.into_iter().collect()
    }
}

/// Aggregates of one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    /// Over trials, of the per-slot mean rate per user.
    pub rate: Summary,
    pub sum_rate: Summary,
    pub collision_rate: f64,
    pub trials: u64,
}

impl PointSummary {
    pub fn of(records: &[TrialRecord]) -> Self {
        let rates: Vec<f64> = records.iter().map(|r| r.outcome.mean_rate()).collect();
        let sums: Vec<f64> = records.iter().map(|r| r.outcome.sum_rate).collect();
        let collided = records.iter().filter(|r| r.reservation_collision).count();
        PointSummary {
            rate: Summary::of(&rates),
            sum_rate: Summary::of(&sums),
            collision_rate: if records.is_empty() { 0.0 } else { collided as f64 / records.len() as f64 },
            trials: records.len() as u64,
        }
    }
}

/// Per-trial mean rate per user; the input to paired comparisons.
pub fn mean_rates(records: &[TrialRecord]) -> Vec<f64> {
    records.iter().map(|r| r.outcome.mean_rate()).collect()
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub sweep_param: String,
    pub value: f64,
    pub mean_rate_per_user: f64,
    pub ci95: f64,
    pub mean_sum_rate: f64,
    pub sum_ci95: f64,
    pub collision_rate: f64,
    pub trials: u64,
    pub seed: u64,
}

pub const CSV_HEADER: [&str; 9] =
    ["sweep_param", "value", "mean_rate_per_user", "ci95", "mean_sum_rate", "sum_ci95", "collision_rate", "trials", "seed"];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record(&[
                r.sweep_param.clone(),
                r.value.to_string(),
                r.mean_rate_per_user.to_string(),
                r.ci95.to_string(),
                r.mean_sum_rate.to_string(),
                r.sum_ci95.to_string(),
                r.collision_rate.to_string(),
                r.trials.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Parse a CSV produced by [`SweepResult::write_csv`]; header must match exactly.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != CSV_HEADER {
            return Err(Error::Schema(format!("unexpected header {header:?}")));
        }
        let rows = r
            .deserialize()
            .map(|row| row.map_err(|e: csv::Error| Error::Schema(e.to_string())))
            .collect::<Result<Vec<SweepRow>>>()?;
        Ok(SweepResult { rows })
    }
}

/// Worker count from `CPSC_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
    }
}

/// Run `f` on a dedicated pool with `threads` workers (rayon's default when `None`).
pub fn with_workers<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidState(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Records of one parameter point.
pub fn run_point(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    Simulator::new(config.clone())?.run_all()
}

/// Every sweep point (or the single point) on the current pool.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let mut rows = Vec::new();
    for (param, value, point) in config.points()? {
        let records = run_point(&point)?;
        let s = PointSummary::of(&records);
        rows.push(SweepRow {
            sweep_param: param.map_or("none", SweepParam::name).to_owned(),
            value,
            mean_rate_per_user: s.rate.mean,
            ci95: s.rate.ci95(),
            mean_sum_rate: s.sum_rate.mean,
            sum_ci95: s.sum_rate.ci95(),
            collision_rate: s.collision_rate,
            trials: s.trials,
            seed: point.seed,
        });
    }
    Ok(SweepResult { rows })
}

/// [`run_sweep`] with an explicit worker count.
pub fn run_sweep_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<SweepResult> {
    with_workers(threads, || run_sweep(config))?
}

/// Collision-rate check of a sweep against `1 - P_unique(m, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionCheck {
    pub value: f64,
    pub empirical: f64,
    pub analytic: f64,
    /// `|empirical - analytic|` in binomial standard errors.
    pub z: f64,
}

/// Compare each row's collision rate with the uniform-selection formula.
pub fn check_collision_rows(config: &ExperimentConfig, result: &SweepResult) -> Result<Vec<CollisionCheck>> {
    result
        .rows
        .iter()
        .map(|row| {
            let point = match row.sweep_param.as_str() {
                "none" => config.clone(),
                name => config.at_sweep_point(name.parse()?, row.value)?,
            };
            let analytic = mac::collision_prob_exact(point.m, point.u);
            let se = (analytic * (1.0 - analytic) / row.trials as f64).sqrt();
            let diff = (row.collision_rate - analytic).abs();
            let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            Ok(CollisionCheck { value: row.value, empirical: row.collision_rate, analytic, z })
        })
        .collect()
}

/// Count how often each final status occurs over a set of trials.
pub fn status_counts(records: &[TrialRecord]) -> [(UserStatus, usize); 5] {
    let mut out = [
        (UserStatus::Clear, 0),
        (UserStatus::Deferred, 0),
        (UserStatus::Reselected, 0),
        (UserStatus::Reassigned, 0),
        (UserStatus::Failed, 0),
    ];
    for r in records {
        for u in &r.outcome.users {
            if let Some(slot) = out.iter_mut().find(|(s, _)| *s == u.status) {
                slot.1 += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PortGrid;
    use crate::config::Sweep;
    use crate::mac::PolicyKind;

    fn small(scheme: Scheme) -> ExperimentConfig {
        ExperimentConfig {
            m: 8,
            grid: PortGrid { n1: 3, n2: 3, w1: 2.0, w2: 2.0 },
            u: 3,
            k: 2,
            t: None,
            snr_db: 10.0,
            rice_factor: 0.1,
            trials: 40,
            seed: 11,
            scheme,
            collision_policy: PolicyKind::UeReselect,
            sweep: None,
        }
    }

    #[test]
    fn single_user_has_no_interference() {
        for scheme in Scheme::ALL {
            let mut cfg = small(scheme);
            cfg.u = 1;
            let sim = Simulator::new(cfg.clone()).unwrap();
            for trial in 0..5 {
                let rec = sim.run_trial(trial).unwrap();
                assert!(!rec.reservation_collision);
                // rebuild the effective channel by hand
                let mut rng = stream(cfg.seed, trial, Substream::Channel(0));
                let geom = UserGeometry::random(&mut rng, &Deployment::default());
                let h = sim.sampler.sample(&geom, 0, &mut rng);
                let pref = sim.preference(&h, 0, trial).unwrap();
                let k = match pref {
                    Preference::Subspace(b) => selector::select_codeword(&b, sim.codebook(), &selector::all_codewords(8)).unwrap().index,
                    Preference::Uniform => stream(cfg.seed, trial, Substream::Codeword(0)).random_range(0..8),
                };
                let q: CVector = sim.codebook().codeword(k).into_owned();
                let eff = sim.configure_ports(&h.entries, &q).unwrap();
                let want = (1.0 + q.dotc(&eff).norm_sqr() / sim.noise_power()).log2();
                assert!((rec.outcome.users[0].rate - want).abs() < 1e-12, "{scheme}");
            }
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let sim = Simulator::new(small(Scheme::Cpsc)).unwrap();
        assert_eq!(sim.run_trial(3).unwrap(), sim.run_trial(3).unwrap());
        assert_ne!(sim.run_trial(3).unwrap().outcome, sim.run_trial(4).unwrap().outcome);
    }

    #[test]
    fn served_users_hold_distinct_codewords() {
        for policy in [PolicyKind::Deferral, PolicyKind::UeReselect, PolicyKind::BsReassign] {
            let mut cfg = small(Scheme::BsRandomCodeword);
            cfg.u = 6;
            cfg.collision_policy = policy;
            let recs = run_point(&cfg).unwrap();
            assert!(recs.iter().any(|r| r.reservation_collision));
            for r in &recs {
                let served = r.outcome.users.iter().filter(|u| u.status.is_served()).count();
                assert!(r.outcome.users.iter().all(|u| u.status.is_served() || u.rate == 0.0));
                assert!(served <= 6);
            }
            let counts = status_counts(&recs);
            match policy {
                PolicyKind::Deferral => assert!(counts[1].1 > 0),
                PolicyKind::UeReselect => assert!(counts[2].1 > 0),
                PolicyKind::BsReassign => assert!(counts[3].1 > 0),
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_csv() {
        let mut cfg = small(Scheme::Cpsc);
        cfg.sweep = Some(Sweep { param: SweepParam::U, values: vec![1.0, 4.0] });
        let a = run_sweep_with_threads(&cfg, Some(1)).unwrap().to_csv_string();
        let b = run_sweep_with_threads(&cfg, Some(4)).unwrap().to_csv_string();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn csv_round_trip_and_schema() {
        let res = run_sweep(&small(Scheme::FixedAntenna)).unwrap();
        assert_eq!(res.rows[0].sweep_param, "none");
        let text = res.to_csv_string();
        assert_eq!(SweepResult::read_csv(text.as_bytes()).unwrap(), res);
        assert!(matches!(SweepResult::read_csv("a,b\n1,2\n".as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn budget_error_names_the_trial() {
        let mut cfg = small(Scheme::CpscExhaustive);
        cfg.grid = PortGrid { n1: 10, n2: 10, w1: 4.0, w2: 4.0 };
        cfg.k = 8;
        match Simulator::new(cfg).unwrap().run_trial(5) {
            Err(Error::Trial { trial: 5, source }) => assert!(matches!(*source, Error::BudgetExceeded { .. })),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn threads_env_parsing() {
        // only reads; the variable is not set in the test environment by default
        if std::env::var(THREADS_ENV).is_err() {
            assert_eq!(threads_from_env().unwrap(), None);
        }
    }
}
