//! Projection decoding, SINR and per-slot rates.

use num_complex::Complex64;

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::mac::UserStatus;

/// `z_k = q_k^H y`.
pub fn decode_projection(y: &CVector, book: &Codebook, index: usize) -> Result<Complex64> {
    if index >= book.size() {
        return Err(Error::invalid(format!("codeword {index} out of range for size {}", book.size())));
    }
    if y.len() != book.size() {
        return Err(Error::invalid(format!("observation length {} != codebook size {}", y.len(), book.size())));
    }
    Ok(book.codeword(index).dotc(y))
}

/// Noise power giving `P * omega / sigma^2 = snr` at unit transmit power.
pub fn noise_power_for_snr(snr_db: f64, omega: f64) -> f64 {
    omega / 10f64.powf(snr_db / 10.0)
}

/// A transmitter that is not decoded but still leaks into every projection.
#[derive(Clone, Copy, Debug)]
pub struct Interferer<'a> {
    pub channel: &'a CVector,
    pub power: f64,
}

/// SINR of every decoded user after projecting onto its own codeword.
///
/// `assignments` must be pairwise distinct; collisions are the MAC's job.
pub fn compute_sinr(
    channels: &[CVector],
    assignments: &[usize],
    powers: &[f64],
    noise_power: f64,
    book: &Codebook,
) -> Result<Vec<f64>> {
    compute_sinr_with_interferers(channels, assignments, powers, &[], noise_power, book)
}

/// [`compute_sinr`] plus extra undecoded transmitters in the interference sum.
pub fn compute_sinr_with_interferers(
    channels: &[CVector],
    assignments: &[usize],
    powers: &[f64],
    interferers: &[Interferer<'_>],
    noise_power: f64,
    book: &Codebook,
) -> Result<Vec<f64>> {
    let u = channels.len();
    if assignments.len() != u || powers.len() != u {
        return Err(Error::invalid("channels, assignments and powers must have equal length"));
    }
    if !(noise_power > 0.0) {
        return Err(Error::invalid(format!("noise power must be positive, got {noise_power}")));
    }
    if let Some(p) = powers.iter().chain(interferers.iter().map(|i| &i.power)).find(|p| !(**p > 0.0)) {
        return Err(Error::invalid(format!("powers must be positive, got {p}")));
    }
    let m = book.size();
    let mut seen = vec![false; m];
    for &k in assignments {
        if k >= m {
            return Err(Error::invalid(format!("codeword {k} out of range for size {m}")));
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidState(format!("codeword {k} assigned to more than one decoded user")));
        }
    }
    let total = u + interferers.len();
    if total == 0 {
        return Ok(Vec::new());
    }
    let mut stacked = CMatrix::zeros(m, total);
    let mut all_powers = Vec::with_capacity(total);
    for (c, (h, &p)) in channels.iter().zip(powers).enumerate() {
        check_len(h, m)?;
        stacked.set_column(c, h);
        all_powers.push(p);
    }
    for (c, i) in interferers.iter().enumerate() {
        check_len(i.channel, m)?;
        stacked.set_column(u + c, i.channel);
        all_powers.push(i.power);
    }
    // proj[(v, k)] = q_k^H h_v
    let proj = book.project_all(&stacked)?;
    Ok((0..u)
        .map(|user| {
            let k = assignments[user];
            let signal = all_powers[user] * proj[(user, k)].norm_sqr();
            let interference: f64 =
                (0..total).filter(|&v| v != user).map(|v| all_powers[v] * proj[(v, k)].norm_sqr()).sum();
            signal / (interference + noise_power)
        })
        .collect())
}

fn check_len(h: &CVector, m: usize) -> Result<()> {
    if h.len() != m {
        return Err(Error::invalid(format!("effective channel length {} != {m}", h.len())));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserOutcome {
    pub sinr: f64,
    pub rate: f64,
    pub status: UserStatus,
}

/// Everything one slot produced.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotOutcome {
    pub users: Vec<UserOutcome>,
    pub sum_rate: f64,
    /// Users that took part in a reservation collision.
    pub collision_count: usize,
}

impl SlotOutcome {
    pub fn mean_rate(&self) -> f64 {
        if self.users.is_empty() {
            0.0
        } else {
            self.sum_rate / self.users.len() as f64
        }
    }

    pub fn had_collision(&self) -> bool {
        self.collision_count > 0
    }
}

/// `log2(1 + sinr)` for served users, zero otherwise.
pub fn slot_rates(sinrs: &[f64], statuses: &[UserStatus]) -> Result<SlotOutcome> {
    if sinrs.len() != statuses.len() {
        return Err(Error::invalid("one SINR per status required"));
    }
    let users: Vec<UserOutcome> = sinrs
        .iter()
        .zip(statuses)
        .map(|(&sinr, &status)| {
            let (sinr, rate) = if status.is_served() { (sinr, sinr.ln_1p() / std::f64::consts::LN_2) } else { (0.0, 0.0) };
            UserOutcome { sinr, rate, status }
        })
        .collect();
    let sum_rate = crate::stats::compensated_sum(users.iter().map(|u| u.rate));
    let collision_count = statuses.iter().filter(|&&s| s != UserStatus::Clear).count();
    Ok(SlotOutcome { users, sum_rate, collision_count })
}
