//! Two-source fringe measurements of absorbed power.
//!
//! Two phase-locked probe fields f_a and f_b drive the system while their
//! relative phase is stepped; the total absorbed power traces a fringe
//!
//!   P(phi) = 2 omega0 [ M_aa + M_bb + 2 |M_ab| cos(phi + theta_ab) ]
//!
//! whose mean, amplitude and phase encode the matrix element
//! M_ab = f_a^dagger D f_b. A campaign walks source pairs from a catalog and
//! fills the measured matrix M = F^dagger D F entry by entry.
//!
//! Noise is multiplicative on power readings, with a counter-based generator
//! keyed on (seed, a, b, phase slot) so results are independent of the
//! measurement schedule and of how the work is parallelized.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EaiError, Result};
use crate::force::ForceVector;
use crate::grid::SampleGrid;
use crate::linalg::{C64, CMat, CVec};
use crate::sources::SourceCatalog;
use crate::tensor::{BlockResponseMatrix, Tolerances, ValidationReport};

/// The four canonical fringe phases.
pub const FOUR_PHASES: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];

/// Phase slot used to key noise for single-source (diagonal) readings.
const SINGLE_SLOT: u64 = u64::MAX;

/// Which phase protocol a campaign uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseScheme {
    /// Phases {0, pi/2, pi, 3pi/2}: visibilities and singles-sum come straight
    /// from power differences, cancelling even-harmonic noise.
    FourPhase,
    /// The minimal two-state protocol {0, pi/2}; needs the measured singles.
    TwoState,
}

impl PhaseScheme {
    pub fn phases(self) -> &'static [f64] {
        match self {
            PhaseScheme::FourPhase => &FOUR_PHASES,
            PhaseScheme::TwoState => &FOUR_PHASES[..2],
        }
    }
}

/// Which source pairs a campaign measures.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    AllPairs,
    ReferenceRow(usize),
    Custom(Vec<(usize, usize)>),
}

impl Strategy {
    /// The ordered pair list (a < b) this strategy measures on N sources.
    pub fn pairs(&self, n: usize) -> Result<Vec<(usize, usize)>> {
        match self {
            Strategy::AllPairs => {
                let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
                for a in 0..n {
                    for b in (a + 1)..n {
                        out.push((a, b));
                    }
                }
                Ok(out)
            }
            Strategy::ReferenceRow(m0) => {
                if *m0 >= n {
                    return Err(EaiError::pre(format!(
                        "reference source {m0} out of range (N = {n})"
                    )));
                }
                Ok((0..n)
                    .filter(|&b| b != *m0)
                    .map(|b| ((*m0).min(b), (*m0).max(b)))
                    .collect())
            }
            Strategy::Custom(pairs) => {
                if pairs.is_empty() {
                    return Err(EaiError::Protocol("empty custom pair list".to_string()));
                }
                for &(a, b) in pairs {
                    if a >= n || b >= n {
                        return Err(EaiError::pre(format!(
                            "pair ({a}, {b}) out of range (N = {n})"
                        )));
                    }
                    if a == b {
                        return Err(EaiError::pre(format!("pair ({a}, {b}) is not a pair")));
                    }
                }
                let mut out: Vec<(usize, usize)> =
                    pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
                out.sort_unstable();
                out.dedup();
                Ok(out)
            }
        }
    }
}

/// One measured fringe: the pair of catalog columns, the phases stepped and
/// the (possibly noisy) power readings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FringeRecord {
    pub a: usize,
    pub b: usize,
    pub phases: Vec<f64>,
    pub powers: Vec<f64>,
    pub sigma_rel: f64,
}

/// Provenance of a measured matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: Strategy,
    pub scheme: PhaseScheme,
    pub sigma_rel: f64,
    pub seed: u64,
    pub omega0: f64,
}

/// Fringe-derived matrix elements M indexed by catalog columns, Hermitian on
/// the measured mask, real diagonal.
#[derive(Clone, Debug)]
pub struct MeasuredMatrix {
    pub matrix: CMat,
    /// Row-major mask of which entries were measured.
    pub mask: Vec<bool>,
    pub provenance: Provenance,
    /// Validation of the scanned tensor; campaigns on non-PSD systems warn
    /// here instead of failing.
    pub tensor_validation: Option<ValidationReport>,
    /// Per-entry 1-sigma noise estimates propagated from the power readings
    /// (same layout as `matrix`); zero for noiseless campaigns.
    pub noise_sigma: Vec<f64>,
}

impl MeasuredMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_measured(&self, a: usize, b: usize) -> bool {
        self.mask[a * self.n() + b]
    }

    pub fn mask_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Root-sum-square of the per-entry noise estimates: a propagated bound
    /// on ||M_noisy - M_true||_F and hence on eigenvalue perturbations.
    pub fn propagated_noise(&self) -> f64 {
        self.noise_sigma.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// Absorbed power with both sources on at relative phase phi:
/// P = 2 omega0 (f_a + f_b e^{i phi})^dagger D (f_a + f_b e^{i phi}).
pub fn fringe_power(
    d: &BlockResponseMatrix,
    f_a: &ForceVector,
    f_b: &ForceVector,
    phi: f64,
    omega0: f64,
) -> Result<f64> {
    let drive = combined_drive(d.grid(), f_a, f_b, phi)?;
    let p = crate::tensor::quadratic_form(&d.assembled(), &drive)?;
    Ok(2.0 * omega0 * p.re)
}

fn combined_drive(
    grid: &SampleGrid,
    f_a: &ForceVector,
    f_b: &ForceVector,
    phi: f64,
) -> Result<CVec> {
    let mut drive = f_a.embed(grid)?;
    drive += f_b.embed(grid)? * C64::from_polar(1.0, phi);
    Ok(drive)
}

fn find_phase(rec: &FringeRecord, phi: f64) -> Result<f64> {
    rec.phases
        .iter()
        .position(|&p| (p - phi).abs() < 1e-12)
        .map(|i| rec.powers[i])
        .ok_or_else(|| {
            EaiError::Protocol(format!(
                "fringe record ({}, {}) is missing phase {phi:.6}",
                rec.a, rec.b
            ))
        })
}

/// Invert a four-phase fringe into the complex matrix element and the sum of
/// the two singles:
///   Re M_ab = (P(0) - P(pi)) / 8 omega0,
///   Im M_ab = (P(3pi/2) - P(pi/2)) / 8 omega0,
///   M_aa + M_bb = (P(0) + P(pi)) / 4 omega0.
pub fn extract_visibility(rec: &FringeRecord, omega0: f64) -> Result<(C64, f64)> {
    if !rec.powers.iter().all(|p| p.is_finite()) {
        return Err(EaiError::data("non-finite fringe powers"));
    }
    let p0 = find_phase(rec, FOUR_PHASES[0])?;
    let p1 = find_phase(rec, FOUR_PHASES[1])?;
    let p2 = find_phase(rec, FOUR_PHASES[2])?;
    let p3 = find_phase(rec, FOUR_PHASES[3])?;
    let re = (p0 - p2) / (8.0 * omega0);
    let im = (p3 - p1) / (8.0 * omega0);
    let singles_sum = (p0 + p2) / (4.0 * omega0);
    Ok((C64::new(re, im), singles_sum))
}

/// Two-state extraction from P(0) and P(pi/2), given the singles sum
/// M_aa + M_bb from dedicated single-source readings.
pub fn extract_visibility_two_state(
    rec: &FringeRecord,
    singles_sum: f64,
    omega0: f64,
) -> Result<C64> {
    let p0 = find_phase(rec, FOUR_PHASES[0])?;
    let p1 = find_phase(rec, FOUR_PHASES[1])?;
    let re = 0.5 * (p0 / (2.0 * omega0) - singles_sum);
    let im = 0.5 * (singles_sum - p1 / (2.0 * omega0));
    Ok(C64::new(re, im))
}

/// Multiplicative power-noise factor keyed on (seed, a, b, slot). The key is
/// packed, not hashed, so distinct readings can never collide.
fn noise_factor(seed: u64, a: u64, b: u64, slot: u64, sigma_rel: f64) -> f64 {
    if sigma_rel == 0.0 {
        return 1.0;
    }
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&a.to_le_bytes());
    key[16..24].copy_from_slice(&b.to_le_bytes());
    key[24..32].copy_from_slice(&slot.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    let eps: f64 = rng.sample(StandardNormal);
    1.0 + sigma_rel * eps
}

/// Everything a campaign produces: the measured matrix plus the raw fringe
/// records for dumping.
#[derive(Clone, Debug)]
pub struct CampaignOutput {
    pub measured: MeasuredMatrix,
    pub fringes: Vec<FringeRecord>,
    /// Single-source power readings, indexed by catalog column (NaN where the
    /// strategy did not need the single).
    pub singles: Vec<f64>,
}

/// Run a fringe campaign over a catalog. Diagonal entries come from
/// single-source powers; off-diagonals from phase-stepped fringes, with
/// Hermitian symmetry enforced by construction (only a < b is measured).
/// A noiseless campaign reproduces M = F^dagger D F to rounding.
pub fn run_campaign(
    d: &BlockResponseMatrix,
    catalog: &SourceCatalog,
    strategy: &Strategy,
    scheme: PhaseScheme,
    sigma_rel: f64,
    seed: u64,
    omega0: f64,
) -> Result<CampaignOutput> {
    if catalog.is_empty() {
        return Err(EaiError::Protocol("catalog is empty".to_string()));
    }
    if catalog.grid() != d.grid() {
        return Err(EaiError::dim(
            "catalog and tensor live on different grids".to_string(),
        ));
    }
    if !(sigma_rel >= 0.0 && sigma_rel.is_finite()) {
        return Err(EaiError::data(format!("bad noise level {sigma_rel}")));
    }
    if omega0 <= 0.0 {
        return Err(EaiError::pre(format!("omega0 must be > 0, got {omega0}")));
    }

    let validation = d.validate(&Tolerances::default());
    let n = catalog.len();
    let pairs = strategy.pairs(n)?;
    let full = d.assembled();
    let grid = d.grid();

    // Embedded catalog columns, computed once.
    let columns: Vec<CVec> = catalog
        .entries()
        .iter()
        .map(|e| e.force.embed(grid))
        .collect::<Result<_>>()?;

    let power_of = |x: &CVec| -> f64 {
        let p = (x.adjoint() * &full * x)[(0, 0)];
        2.0 * omega0 * p.re
    };

    // Singles: one power reading per column the strategy touches.
    let needs_single: Vec<usize> = match strategy {
        Strategy::AllPairs | Strategy::ReferenceRow(_) => (0..n).collect(),
        Strategy::Custom(_) => {
            let mut v: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            v.sort_unstable();
            v.dedup();
            v
        }
    };
    let singles: Vec<(usize, f64)> = needs_single
        .par_iter()
        .map(|&m| {
            let p = power_of(&columns[m])
                * noise_factor(seed, m as u64, m as u64, SINGLE_SLOT, sigma_rel);
            (m, p)
        })
        .collect();

    // Fringes: independent per (pair, phase); bit-identical regardless of the
    // execution order because each reading owns its noise key.
    let phases = scheme.phases();
    let fringe_results: Vec<FringeRecord> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut powers = Vec::with_capacity(phases.len());
            for (slot, &phi) in phases.iter().enumerate() {
                let drive = &columns[a] + &columns[b] * C64::from_polar(1.0, phi);
                let p = power_of(&drive)
                    * noise_factor(seed, a as u64, b as u64, slot as u64, sigma_rel);
                powers.push(p);
            }
            FringeRecord {
                a,
                b,
                phases: phases.to_vec(),
                powers,
                sigma_rel,
            }
        })
        .collect();

    // Assemble sequentially in pair order: every entry written exactly once.
    let mut matrix = CMat::zeros(n, n);
    let mut mask = vec![false; n * n];
    let mut noise_sigma = vec![0.0f64; n * n];
    let mut singles_out = vec![f64::NAN; n];
    for &(m, p) in &singles {
        matrix[(m, m)] = C64::new(p / (2.0 * omega0), 0.0);
        mask[m * n + m] = true;
        noise_sigma[m * n + m] = sigma_rel * p.abs() / (2.0 * omega0);
        singles_out[m] = p;
    }
    let mut fringes = Vec::with_capacity(fringe_results.len());
    for rec in fringe_results {
        let (a, b) = (rec.a, rec.b);
        let m_ab = match scheme {
            PhaseScheme::FourPhase => extract_visibility(&rec, omega0)?.0,
            PhaseScheme::TwoState => {
                let sum = matrix[(a, a)].re + matrix[(b, b)].re;
                extract_visibility_two_state(&rec, sum, omega0)?
            }
        };
        matrix[(a, b)] = m_ab;
        matrix[(b, a)] = m_ab.conj();
        mask[a * n + b] = true;
        mask[b * n + a] = true;
        let sig = entry_sigma(&rec, scheme, omega0);
        noise_sigma[a * n + b] = sig;
        noise_sigma[b * n + a] = sig;
        fringes.push(rec);
    }

    Ok(CampaignOutput {
        measured: MeasuredMatrix {
            matrix,
            mask,
            provenance: Provenance {
                strategy: strategy.clone(),
                scheme,
                sigma_rel,
                seed,
                omega0,
            },
            tensor_validation: Some(validation),
            noise_sigma,
        },
        fringes,
        singles: singles_out,
    })
}

/// 1-sigma estimate for an extracted matrix element, propagated from the
/// relative reading noise: each quadrature is a difference of two readings
/// scaled by 1/(8 omega0) (four-phase) or one reading by 1/(4 omega0).
fn entry_sigma(rec: &FringeRecord, scheme: PhaseScheme, omega0: f64) -> f64 {
    let s = rec.sigma_rel;
    if s == 0.0 {
        return 0.0;
    }
    let sq: f64 = rec.powers.iter().map(|p| p * p).sum();
    match scheme {
        PhaseScheme::FourPhase => s * sq.sqrt() / (8.0 * omega0),
        PhaseScheme::TwoState => s * sq.sqrt() / (4.0 * omega0),
    }
}

/// Time-average oracle for the fringe power: drives the susceptibility with
/// the real time-harmonic force and numerically averages the instantaneous
/// work rate F(t) . dx/dt over `periods` whole drive periods (trapezoid,
/// 64 samples per period). Converges to 2 omega0 f^dagger D f with D the
/// anti-Hermitian part of chi; any Hermitian addition to chi leaves the
/// limit unchanged.
pub fn time_average_oracle(
    grid: &SampleGrid,
    chi: &CMat,
    f_a: &ForceVector,
    f_b: Option<&ForceVector>,
    phi: f64,
    omega0: f64,
    periods: usize,
) -> Result<f64> {
    if periods == 0 {
        return Err(EaiError::pre("need at least one period"));
    }
    if omega0 <= 0.0 {
        return Err(EaiError::pre(format!("omega0 must be > 0, got {omega0}")));
    }
    let dim = grid.total_dim();
    if chi.nrows() != dim || chi.ncols() != dim {
        return Err(EaiError::dim(format!(
            "susceptibility is {}x{}, grid dimension is {dim}",
            chi.nrows(),
            chi.ncols()
        )));
    }
    let f0 = match f_b {
        Some(fb) => combined_drive(grid, f_a, fb, phi)?,
        None => f_a.embed(grid)?,
    };
    let response = chi * &f0; // positive-frequency response amplitude chi f0

    let samples_per_period = 64usize;
    let total = periods * samples_per_period;
    let period = std::f64::consts::TAU / omega0;
    let dt = period / samples_per_period as f64;

    // P(t) = F(t) . v(t) with F(t) = 2 Re[f0 e^{-i w t}] and
    // v(t) = 2 Re[-i w chi f0 e^{-i w t}].
    let instantaneous = |t: f64| -> f64 {
        let rot = C64::from_polar(1.0, -omega0 * t);
        let mut p = 0.0;
        for i in 0..dim {
            let force = 2.0 * (f0[i] * rot).re;
            let velocity = 2.0 * (C64::new(0.0, -omega0) * response[i] * rot).re;
            p += force * velocity;
        }
        p
    };

    let mut acc = 0.5 * (instantaneous(0.0) + instantaneous(total as f64 * dt));
    for k in 1..total {
        acc += instantaneous(k as f64 * dt);
    }
    Ok(acc * dt / (periods as f64 * period))
}

/// Complex visibilities gamma_mm' = 2 D_mm' / (D_mm + D_m'm') along row m of
/// a Hermitian matrix (a measured M or a response D). Entries with a zero
/// denominator are undefined, not errors. |gamma| <= 1 for PSD matrices.
pub fn visibility_map(matrix: &CMat, reference: usize) -> Result<Vec<Option<C64>>> {
    if matrix.nrows() != matrix.ncols() {
        return Err(EaiError::dim("visibility map needs a square matrix".to_string()));
    }
    let n = matrix.nrows();
    if reference >= n {
        return Err(EaiError::pre(format!(
            "reference index {reference} out of range (N = {n})"
        )));
    }
    let mut out = Vec::with_capacity(n);
    for mp in 0..n {
        let denom = matrix[(reference, reference)].re + matrix[(mp, mp)].re;
        if denom == 0.0 {
            out.push(None);
        } else {
            out.push(Some(matrix[(reference, mp)] * C64::new(2.0 / denom, 0.0)));
        }
    }
    Ok(out)
}

/// Visibility map from a measured matrix, requiring the reference row and the
/// diagonal to be present.
pub fn visibility_map_measured(m: &MeasuredMatrix, reference: usize) -> Result<Vec<Option<C64>>> {
    let n = m.n();
    if reference >= n {
        return Err(EaiError::pre(format!(
            "reference index {reference} out of range (N = {n})"
        )));
    }
    for mp in 0..n {
        if !m.is_measured(reference, mp) || !m.is_measured(mp, mp) {
            return Err(EaiError::Protocol(format!(
                "row {reference} is not fully measured (missing ({reference}, {mp}) or single {mp})"
            )));
        }
    }
    visibility_map(&m.matrix, reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ForceType;
    use crate::linalg::{c, max_abs};
    use crate::sources::{point_probe, SourceCatalog};
    use approx::assert_relative_eq;

    fn grid(n: usize) -> SampleGrid {
        let points = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        SampleGrid::single_domain(points, 1).unwrap()
    }

    fn ones_tensor() -> BlockResponseMatrix {
        let g = grid(2);
        let ones = CMat::from_element(2, 2, c(1.0, 0.0));
        BlockResponseMatrix::from_blocks(g, Some(ones), None, None, None, 1.0).unwrap()
    }

    #[test]
    fn fringe_extremes_of_fully_coherent_pair() {
        // D = [[1,1],[1,1]], f_a = e1, f_b = e2: P(0) = 8, P(pi) = 0.
        let d = ones_tensor();
        let fa = point_probe(d.grid(), ForceType::One, 0, 0, c(1.0, 0.0)).unwrap();
        let fb = point_probe(d.grid(), ForceType::One, 1, 0, c(1.0, 0.0)).unwrap();
        assert_relative_eq!(
            fringe_power(&d, &fa, &fb, 0.0, 1.0).unwrap(),
            8.0,
            max_relative = 1e-13
        );
        assert!(fringe_power(&d, &fa, &fb, PI, 1.0).unwrap().abs() < 1e-13);
    }

    #[test]
    fn single_source_fringe_is_flat() {
        let d = ones_tensor();
        let fa = point_probe(d.grid(), ForceType::One, 0, 0, c(1.0, 0.0)).unwrap();
        let fb = ForceVector::zeros(d.grid(), ForceType::One);
        let p0 = fringe_power(&d, &fa, &fb, 0.0, 1.0).unwrap();
        for phi in [0.4, 1.1, 2.9, 4.4] {
            assert_relative_eq!(
                fringe_power(&d, &fa, &fb, phi, 1.0).unwrap(),
                p0,
                max_relative = 1e-13
            );
        }
        assert_relative_eq!(p0, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn fringe_mean_is_sum_of_singles() {
        let d = ones_tensor();
        let fa = point_probe(d.grid(), ForceType::One, 0, 0, c(1.0, 0.5)).unwrap();
        let fb = point_probe(d.grid(), ForceType::One, 1, 0, c(0.3, -0.2)).unwrap();
        let zero = ForceVector::zeros(d.grid(), ForceType::One);
        let pa = fringe_power(&d, &fa, &zero, 0.0, 1.0).unwrap();
        let pb = fringe_power(&d, &fb, &zero, 0.0, 1.0).unwrap();
        let k = 256;
        let mean: f64 = (0..k)
            .map(|i| {
                fringe_power(&d, &fa, &fb, std::f64::consts::TAU * i as f64 / k as f64, 1.0)
                    .unwrap()
            })
            .sum::<f64>()
            / k as f64;
        assert_relative_eq!(mean, pa + pb, max_relative = 1e-12);
    }

    #[test]
    fn extraction_inverts_frozen_fringes() {
        // P = (8, 4, 0, 4), omega0 = 1 -> M_ab = 1, M_aa + M_bb = 2.
        let rec = FringeRecord {
            a: 0,
            b: 1,
            phases: FOUR_PHASES.to_vec(),
            powers: vec![8.0, 4.0, 0.0, 4.0],
            sigma_rel: 0.0,
        };
        let (m_ab, singles) = extract_visibility(&rec, 1.0).unwrap();
        assert!((m_ab - c(1.0, 0.0)).norm() < 1e-14);
        assert_relative_eq!(singles, 2.0, max_relative = 1e-14);

        // P = (4, 6, 4, 2) -> M_ab = -0.5i
        let rec = FringeRecord { powers: vec![4.0, 6.0, 4.0, 2.0], ..rec };
        let (m_ab, _) = extract_visibility(&rec, 1.0).unwrap();
        assert!((m_ab - c(0.0, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn constant_fringe_means_no_cross_correlation() {
        let rec = FringeRecord {
            a: 0,
            b: 1,
            phases: FOUR_PHASES.to_vec(),
            powers: vec![3.0; 4],
            sigma_rel: 0.0,
        };
        let (m_ab, _) = extract_visibility(&rec, 1.0).unwrap();
        assert_eq!(m_ab, c(0.0, 0.0));
    }

    #[test]
    fn missing_phase_is_a_protocol_error() {
        let rec = FringeRecord {
            a: 0,
            b: 1,
            phases: vec![0.0, PI],
            powers: vec![1.0, 1.0],
            sigma_rel: 0.0,
        };
        assert!(matches!(extract_visibility(&rec, 1.0), Err(EaiError::Protocol(_))));
    }

    #[test]
    fn noiseless_campaign_reproduces_matrix_elements() {
        let g = grid(4);
        let (d, _) = crate::synth::random_psd_system(&g, &[2.0, 1.0, 0.5], 1.0, 3, 1.0).unwrap();
        let cat = SourceCatalog::all_points(&g, ForceType::One, c(1.0, 0.0)).unwrap();
        let out =
            run_campaign(&d, &cat, &Strategy::AllPairs, PhaseScheme::FourPhase, 0.0, 0, 1.0)
                .unwrap();
        let f = cat.matrix().unwrap();
        let expected = f.adjoint() * d.assembled() * &f;
        assert!(max_abs(&(&out.measured.matrix - &expected)) < 1e-12);
        assert!(out.measured.mask_complete());
        // counting contract: N singles + N(N-1)/2 fringes, 4 phases each
        assert_eq!(out.fringes.len(), 6);
        assert!(out.fringes.iter().all(|r| r.powers.len() == 4));
    }

    #[test]
    fn two_state_scheme_matches_four_phase_noiselessly() {
        let g = grid(3);
        let (d, _) = crate::synth::random_psd_system(&g, &[1.5, 0.7], 1.0, 9, 1.0).unwrap();
        let cat = SourceCatalog::all_points(&g, ForceType::One, c(1.0, 0.0)).unwrap();
        let four =
            run_campaign(&d, &cat, &Strategy::AllPairs, PhaseScheme::FourPhase, 0.0, 0, 1.0)
                .unwrap();
        let two = run_campaign(&d, &cat, &Strategy::AllPairs, PhaseScheme::TwoState, 0.0, 0, 1.0)
            .unwrap();
        assert!(max_abs(&(&four.measured.matrix - &two.measured.matrix)) < 1e-12);
    }

    #[test]
    fn campaign_noise_is_schedule_independent() {
        let g = grid(3);
        let (d, _) = crate::synth::random_psd_system(&g, &[1.0, 0.5], 1.0, 5, 1.0).unwrap();
        let cat = SourceCatalog::all_points(&g, ForceType::One, c(1.0, 0.0)).unwrap();
        let all =
            run_campaign(&d, &cat, &Strategy::AllPairs, PhaseScheme::FourPhase, 1e-3, 77, 1.0)
                .unwrap();
        // measuring a subset in a different order reproduces the same readings
        let custom = Strategy::Custom(vec![(2, 1), (0, 1)]);
        let sub = run_campaign(&d, &cat, &custom, PhaseScheme::FourPhase, 1e-3, 77, 1.0).unwrap();
        assert_eq!(sub.measured.matrix[(1, 2)], all.measured.matrix[(1, 2)]);
        assert_eq!(sub.measured.matrix[(0, 1)], all.measured.matrix[(0, 1)]);
        assert_eq!(sub.measured.matrix[(1, 1)], all.measured.matrix[(1, 1)]);
    }

    #[test]
    fn reference_row_masks_only_row_and_diagonal() {
        let g = grid(4);
        let (d, _) = crate::synth::random_psd_system(&g, &[1.0], 1.0, 2, 1.0).unwrap();
        let cat = SourceCatalog::all_points(&g, ForceType::One, c(1.0, 0.0)).unwrap();
        let out = run_campaign(
            &d,
            &cat,
            &Strategy::ReferenceRow(1),
            PhaseScheme::FourPhase,
            0.0,
            0,
            1.0,
        )
        .unwrap();
        assert!(!out.measured.mask_complete());
        for mp in 0..4 {
            assert!(out.measured.is_measured(1, mp));
            assert!(out.measured.is_measured(mp, mp));
        }
        assert!(!out.measured.is_measured(0, 2));
        let vis = visibility_map_measured(&out.measured, 1).unwrap();
        assert_eq!(vis.len(), 4);
        assert!((vis[1].unwrap() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn visibility_map_examples() {
        // D = [[1,1],[1,1]] -> gamma_12 = 1; D = I2 -> gamma_12 = 0.
        let ones = CMat::from_element(2, 2, c(1.0, 0.0));
        let vis = visibility_map(&ones, 0).unwrap();
        assert!((vis[1].unwrap() - c(1.0, 0.0)).norm() < 1e-14);

        let eye = CMat::identity(2, 2);
        let vis = visibility_map(&eye, 0).unwrap();
        assert_eq!(vis[1].unwrap(), c(0.0, 0.0));

        let zero = CMat::zeros(2, 2);
        let vis = visibility_map(&zero, 0).unwrap();
        assert!(vis[0].is_none());
    }

    #[test]
    fn visibility_bounded_for_psd() {
        let g = grid(6);
        let (d, _) = crate::synth::random_psd_system(&g, &[3.0, 1.0, 0.2], 1.5, 13, 1.0).unwrap();
        let block = d.block_or_zero(ForceType::One, ForceType::One);
        for m in 0..6 {
            for v in visibility_map(&block, m).unwrap().into_iter().flatten() {
                assert!(v.norm() <= 1.0 + 1e-12, "|gamma| = {}", v.norm());
            }
        }
    }

    #[test]
    fn rank_one_visibility_identity() {
        // single real Gaussian-envelope mode: gamma follows the rank-1 identity
        // 2 d_m d_m' / (d_m^2 + d_m'^2), equal to 1 where the envelope is flat.
        let amps = CVec::from_fn(5, |i, _| {
            let x = i as f64 - 2.0;
            c((-x * x / 4.0).exp(), 0.0)
        });
        let unit = &amps / c(amps.norm(), 0.0);
        let block = &unit * unit.adjoint() * c(3.0, 0.0);
        let vis = visibility_map(&block, 2).unwrap();
        for (mp, v) in vis.iter().enumerate() {
            let a = unit[2].norm();
            let b = unit[mp].norm();
            assert_relative_eq!(
                v.unwrap().norm(),
                2.0 * a * b / (a * a + b * b),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn time_average_matches_closed_form_for_pure_dissipation() {
        let g = grid(2);
        let block =
            CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)]);
        let chi = &block * c(0.0, 1.0); // chi = i D
        let f = ForceVector::new(
            &g,
            ForceType::One,
            CVec::from_vec(vec![c(1.0, 0.3), c(-0.4, 0.2)]),
        )
        .unwrap();
        let omega0 = 1.7;
        let d =
            BlockResponseMatrix::from_blocks(g.clone(), Some(block), None, None, None, omega0)
                .unwrap();
        let exact = crate::tensor::absorbed_power_coherent(&d, &[&f], omega0).unwrap();
        let avg = time_average_oracle(&g, &chi, &f, None, 0.0, omega0, 50).unwrap();
        assert_relative_eq!(avg, exact, max_relative = 1e-6);
    }

    #[test]
    fn reactive_response_does_no_net_work() {
        let g = grid(2);
        let herm =
            CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, 0.7), c(0.3, -0.7), c(-0.5, 0.0)]);
        let f = ForceVector::new(
            &g,
            ForceType::One,
            CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]),
        )
        .unwrap();
        let avg = time_average_oracle(&g, &herm, &f, None, 0.0, 1.0, 200).unwrap();
        assert!(avg.abs() < 1e-10, "reactive average = {avg}");
    }

    #[test]
    fn hermitian_part_does_not_shift_the_limit() {
        let g = grid(2);
        let dblock =
            CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, -0.1), c(0.2, 0.1), c(0.8, 0.0)]);
        let herm =
            CMat::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.4), c(0.1, -0.4), c(-0.2, 0.0)]);
        let chi_pure = &dblock * c(0.0, 1.0);
        let chi_mixed = &herm + &chi_pure;
        let f = ForceVector::new(
            &g,
            ForceType::One,
            CVec::from_vec(vec![c(0.6, -0.2), c(0.3, 0.9)]),
        )
        .unwrap();
        let a = time_average_oracle(&g, &chi_pure, &f, None, 0.0, 1.0, 300).unwrap();
        let b = time_average_oracle(&g, &chi_mixed, &f, None, 0.0, 1.0, 300).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-12);
    }
}
