use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use super::linalg::{c, expm_herm2, kron, rotation, sigma_x, sigma_y, sigma_z, spin_operators, to_dynamic, HermitianExp, M2};
use super::{ErrorModel, Propagator, TargetSpin};
use crate::error::{Error, Result};
use crate::sequence::{PulseUnit, ReadoutBasis, SequencePlan};
use crate::C64;

/// Largest number of spins propagated exactly in one joint space.
pub const MAX_SPINS: usize = 6;

struct Operators {
    dim: usize,
    /// ½σ_z ⊗ Σ(A∥I_z + A⊥I_x) + Σ ω I_z
    h0: DMatrix<C64>,
    sx: DMatrix<C64>,
    sy: DMatrix<C64>,
    sz: DMatrix<C64>,
}

impl Operators {
    fn new(spins: &[TargetSpin]) -> Result<Self> {
        if spins.len() > MAX_SPINS {
            return Err(Error::DimensionCap {
                spins: spins.len(),
                max: MAX_SPINS,
            });
        }
        let n = spins.len();
        let bath_dim = 1usize << n;
        let id_bath = DMatrix::<C64>::identity(bath_dim, bath_dim);
        let mut coupling = DMatrix::<C64>::zeros(bath_dim, bath_dim);
        let mut zeeman = DMatrix::<C64>::zeros(bath_dim, bath_dim);
        for (k, s) in spins.iter().enumerate() {
            let [ix, _, iz] = spin_operators(k, n);
            coupling += &iz * c(s.a_par, 0.0) + &ix * c(s.a_perp, 0.0);
            zeeman += &iz * c(s.larmor, 0.0);
        }
        let half_z = to_dynamic(&(sigma_z() * c(0.5, 0.0)));
        let h0 = kron(&half_z, &coupling) + kron(&DMatrix::identity(2, 2), &zeeman);
        Ok(Self {
            dim: 2 * bath_dim,
            h0,
            sx: kron(&to_dynamic(&sigma_x()), &id_bath),
            sy: kron(&to_dynamic(&sigma_y()), &id_bath),
            sz: kron(&to_dynamic(&sigma_z()), &id_bath),
        })
    }

    fn free(&self, errors: &ErrorModel) -> DMatrix<C64> {
        if errors.detuning_during_free && errors.detuning != 0.0 {
            &self.h0 + &self.sz * c(0.5 * errors.detuning, 0.0)
        } else {
            self.h0.clone()
        }
    }

    fn pulse(&self, errors: &ErrorModel, phase: f64, rabi: f64) -> DMatrix<C64> {
        let w = 0.5 * rabi * (1.0 + errors.amplitude_fraction);
        &self.h0
            + &self.sz * c(0.5 * errors.detuning, 0.0)
            + &self.sx * c(w * phase.cos(), 0.0)
            + &self.sy * c(w * phase.sin(), 0.0)
    }

    fn qubit_only(&self, m: &M2) -> DMatrix<C64> {
        kron(&to_dynamic(m), &DMatrix::identity(self.dim / 2, self.dim / 2))
    }
}

/// Propagator of one unit with its nominal phases. `cached` reuses the
/// spectral decomposition of repeated segment Hamiltonians.
fn unit_matrix(unit: &PulseUnit, global: f64, errors: &ErrorModel, ops: &Operators, cached: bool) -> Result<DMatrix<C64>> {
    errors.validate()?;
    let free = ops.free(errors);
    let mut free_exp: Option<HermitianExp> = None;
    let mut pulse_exp: HashMap<(u64, u64), HermitianExp> = HashMap::new();
    let mut u = DMatrix::<C64>::identity(ops.dim, ops.dim);
    let mut cursor = 0.0;
    let step = |h: &DMatrix<C64>, t: f64, slot: Option<&HermitianExp>| -> Result<DMatrix<C64>> {
        if t <= 0.0 {
            return Ok(DMatrix::identity(ops.dim, ops.dim));
        }
        match slot {
            Some(e) => Ok(e.at(t)),
            None => Ok(HermitianExp::new(h)?.at(t)),
        }
    };
    for p in unit.pulses() {
        let gap = p.start() - cursor;
        if gap > 0.0 {
            let seg = if cached {
                if free_exp.is_none() {
                    free_exp = Some(HermitianExp::new(&free)?);
                }
                step(&free, gap, free_exp.as_ref())?
            } else {
                step(&free, gap, None)?
            };
            u = seg * u;
        }
        let phase = errors.applied_phase(p.phase) + global;
        let seg = if p.is_instantaneous() {
            ops.qubit_only(&rotation(phase, p.nominal_angle * (1.0 + errors.amplitude_fraction)))
        } else {
            let h = ops.pulse(errors, phase, p.rabi_frequency);
            if cached {
                let key = (phase.rem_euclid(2.0 * PI).to_bits(), p.rabi_frequency.to_bits());
                if !pulse_exp.contains_key(&key) {
                    pulse_exp.insert(key, HermitianExp::new(&h)?);
                }
                step(&h, p.duration, pulse_exp.get(&key))?
            } else {
                step(&h, p.duration, None)?
            }
        };
        u = seg * u;
        cursor = p.end();
    }
    let tail = unit.duration() - cursor;
    if tail > 0.0 {
        let seg = if cached {
            if free_exp.is_none() {
                free_exp = Some(HermitianExp::new(&free)?);
            }
            step(&free, tail, free_exp.as_ref())?
        } else {
            step(&free, tail, None)?
        };
        u = seg * u;
    }
    Ok(u)
}

/// `R U R†` with `R = exp(−iΦσ_z/2) ⊗ 1`: the unit with all pulse phases
/// shifted by `Φ`. Exact because every other term commutes with σ_z.
fn phase_conjugate(u: &DMatrix<C64>, phi: f64) -> DMatrix<C64> {
    if phi == 0.0 {
        return u.clone();
    }
    let d = u.nrows() / 2;
    let down = C64::from_polar(1.0, -phi);
    let up = down.conj();
    let mut out = u.clone();
    for j in 0..u.ncols() {
        for i in 0..u.nrows() {
            match (i < d, j < d) {
                (true, false) => out[(i, j)] *= down,
                (false, true) => out[(i, j)] *= up,
                _ => {}
            }
        }
    }
    out
}

fn repeat_with_phases(unit_u: &DMatrix<C64>, phases: &[f64]) -> DMatrix<C64> {
    let mut total = DMatrix::<C64>::identity(unit_u.nrows(), unit_u.ncols());
    for &phi in phases {
        total = phase_conjugate(unit_u, phi) * total;
    }
    total
}

/// Product of copies of a unit propagator, copy `m` with all pulse phases
/// shifted by `phases[m]`.
pub fn repeat_unit(unit: &Propagator, phases: &[f64]) -> Propagator {
    Propagator {
        matrix: repeat_with_phases(&unit.matrix, phases),
    }
}

/// Propagator of a single unit with nominal phases.
pub fn unit_propagator(unit: &PulseUnit, errors: &ErrorModel, targets: &[TargetSpin]) -> Result<Propagator> {
    let ops = Operators::new(targets)?;
    Ok(Propagator {
        matrix: unit_matrix(unit, 0.0, errors, &ops, true)?,
    })
}

/// Full-plan propagator for the given per-unit global phases.
pub fn propagate_plan(plan: &SequencePlan, phases: &[f64], errors: &ErrorModel, targets: &[TargetSpin]) -> Result<Propagator> {
    plan.check_phases(phases)?;
    Ok(repeat_unit(&unit_propagator(plan.unit(), errors, targets)?, phases))
}

/// Reference path for [`propagate_plan`]: every segment of every unit is
/// exponentiated separately with its shifted phase.
pub fn propagate_plan_direct(plan: &SequencePlan, phases: &[f64], errors: &ErrorModel, targets: &[TargetSpin]) -> Result<Propagator> {
    plan.check_phases(phases)?;
    let ops = Operators::new(targets)?;
    let mut total = DMatrix::<C64>::identity(ops.dim, ops.dim);
    for &phi in phases {
        total = unit_matrix(plan.unit(), phi, errors, &ops, false)? * total;
    }
    Ok(Propagator { matrix: total })
}

/// Precomputed unit propagators for repeated population evaluations of one
/// plan under different phase lists.
#[derive(Debug, Clone)]
pub struct SignalModel {
    /// Qubit-only unit propagator followed by one qubit⊗spin propagator per
    /// spin (independent mode), or a single joint propagator.
    blocks: Vec<DMatrix<C64>>,
    independent: bool,
    repetitions: usize,
    total_time: f64,
    errors: ErrorModel,
    readout: ReadoutBasis,
    prep: M2,
    rabi: f64,
}

impl SignalModel {
    pub fn new(plan: &SequencePlan, errors: &ErrorModel, spins: &[TargetSpin], independent: bool) -> Result<Self> {
        errors.validate()?;
        let unit = plan.unit();
        let blocks = if independent {
            let mut blocks = vec![unit_matrix(unit, 0.0, errors, &Operators::new(&[])?, true)?];
            for s in spins {
                let ops = Operators::new(std::slice::from_ref(s))?;
                blocks.push(unit_matrix(unit, 0.0, errors, &ops, true)?);
            }
            blocks
        } else {
            vec![unit_matrix(unit, 0.0, errors, &Operators::new(spins)?, true)?]
        };
        let rabi = unit.pulses()[0].rabi_frequency;
        let mut model = Self {
            blocks,
            independent,
            repetitions: plan.repetitions(),
            total_time: plan.total_time(),
            errors: *errors,
            readout: plan.readout_basis(),
            prep: M2::identity(),
            rabi,
        };
        model.prep = readout_pulse(errors, rabi, FRAC_PI_2);
        Ok(model)
    }

    /// Reduced qubit density matrix after the sequence, before readout.
    fn block_state(&self, u: &DMatrix<C64>) -> M2 {
        let d = u.nrows() / 2;
        let psi = self.prep.column(0);
        let w = |a: usize| -> DMatrix<C64> {
            u.view((a * d, 0), (d, d)) * psi[0] + u.view((a * d, d), (d, d)) * psi[1]
        };
        let (w0, w1) = (w(0), w(1));
        let dot = |x: &DMatrix<C64>, y: &DMatrix<C64>| -> C64 {
            x.iter().zip(y.iter()).map(|(a, b)| a * b.conj()).sum::<C64>() / d as f64
        };
        M2::new(dot(&w0, &w0), dot(&w0, &w1), dot(&w1, &w0), dot(&w1, &w1))
    }

    /// Reduced qubit density matrix after the sequence, before the T2
    /// envelope and readout.
    pub fn qubit_state(&self, phases: &[f64]) -> Result<M2> {
        if phases.len() != self.repetitions {
            return Err(Error::PhaseCount {
                expected: self.repetitions,
                got: phases.len(),
            });
        }
        let states: Vec<M2> = self
            .blocks
            .iter()
            .map(|b| self.block_state(&repeat_with_phases(b, phases)))
            .collect();
        if self.independent && states.len() > 1 {
            let bare = states[0];
            let mut coh = bare[(0, 1)];
            let mut pop = bare[(0, 0)].re;
            for s in &states[1..] {
                if bare[(0, 1)].norm() < 1e-12 {
                    coh = C64::new(0.0, 0.0);
                } else {
                    coh *= s[(0, 1)] / bare[(0, 1)];
                }
                pop += s[(0, 0)].re - bare[(0, 0)].re;
            }
            let pop = pop.clamp(0.0, 1.0);
            return Ok(M2::new(c(pop, 0.0), coh, coh.conj(), c(1.0 - pop, 0.0)));
        }
        Ok(states[0])
    }

    pub fn population_in(&self, phases: &[f64], basis: ReadoutBasis) -> Result<f64> {
        let rho = self.qubit_state(phases)?;
        Ok(read_population(rho, &self.errors, basis, self.rabi, self.total_time))
    }

    /// Population in the plan's readout basis.
    pub fn population(&self, phases: &[f64]) -> Result<f64> {
        self.population_in(phases, self.readout)
    }
}

/// A π/2 pulse of phase `phase`, faulty if the error model says so. `rabi`
/// is the drive strength of the sequence pulses (infinite for δ-pulses).
pub(crate) fn readout_pulse(errors: &ErrorModel, rabi: f64, phase: f64) -> M2 {
    if !errors.faulty_readout {
        return rotation(phase, FRAC_PI_2);
    }
    let theta = FRAC_PI_2 * (1.0 + errors.amplitude_fraction);
    if !rabi.is_finite() {
        return rotation(phase, theta);
    }
    let w = 0.5 * rabi * (1.0 + errors.amplitude_fraction);
    let h = sigma_x() * c(w * phase.cos(), 0.0) + sigma_y() * c(w * phase.sin(), 0.0) + sigma_z() * c(0.5 * errors.detuning, 0.0);
    expm_herm2(&(h * c(FRAC_PI_2 / rabi, 0.0)))
}

/// Applies the T2 envelope and the final π/2 pulse to the qubit state after
/// the sequence and returns the `|0⟩` population.
pub(crate) fn read_population(mut rho: M2, errors: &ErrorModel, basis: ReadoutBasis, rabi: f64, total_time: f64) -> f64 {
    if let Some(t2) = errors.decoherence_t2 {
        let k = (-total_time / t2).exp();
        rho[(0, 1)] *= k;
        rho[(1, 0)] *= k;
    }
    if !errors.faulty_readout {
        return basis.population(rho[(0, 1)].re);
    }
    let phase = match basis {
        ReadoutBasis::X => 1.5 * PI,
        ReadoutBasis::MinusX => FRAC_PI_2,
    };
    let r = readout_pulse(errors, rabi, phase);
    (r * rho * r.adjoint())[(0, 0)].re.clamp(0.0, 1.0)
}

/// Readout population with nuclear spin targets. `independent` multiplies
/// single-spin coherence factors (nuclear-nuclear correlations through the
/// sensor are dropped); otherwise the joint space is propagated.
pub fn nuclear_signal(
    plan: &SequencePlan,
    phases: &[f64],
    errors: &ErrorModel,
    spins: &[TargetSpin],
    independent: bool,
) -> Result<f64> {
    SignalModel::new(plan, errors, spins, independent)?.population(phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{build_named_unit, PhaseMode};

    fn plan(m: usize) -> SequencePlan {
        let unit = build_named_unit("XY8", 1e-6, 1e-7, PI / 1e-7).unwrap();
        SequencePlan::new(unit, m, PhaseMode::Randomized { seed: 2, realizations: 4 }, ReadoutBasis::X).unwrap()
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn echo_is_identity_without_coupling() {
        let p = plan(3);
        let u = propagate_plan(&p, &[0.0; 3], &ErrorModel::ideal(), &[]).unwrap();
        assert!(u.offdiagonal().norm() < 1e-12);
        assert!((u.matrix[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(u.unitarity_defect() < 1e-12);
    }

    #[test]
    fn conjugation_path_matches_direct_path() {
        let p = plan(4);
        let phases = [0.3, 4.0, 1.7, 5.5];
        let errors = ErrorModel {
            amplitude_fraction: 0.04,
            detuning: 2.0 * PI * 0.3e6,
            y_phase_offset: 0.05,
            ..Default::default()
        };
        let spins = [
            TargetSpin::new("1H", 2.0 * PI * 20e3, 2.0 * PI * 10e3, 2.0 * PI * 0.5e6).unwrap(),
            TargetSpin::new("13C", 2.0 * PI * 5e3, 2.0 * PI * 50e3, 2.0 * PI * 0.12e6).unwrap(),
        ];
        let a = propagate_plan(&p, &phases, &errors, &spins).unwrap();
        let b = propagate_plan_direct(&p, &phases, &errors, &spins).unwrap();
        assert_eq!(a.dimension(), 8);
        assert!(max_diff(&a.matrix, &b.matrix) < 1e-10);
        assert!(a.unitarity_defect() < 1e-10);
    }

    #[test]
    fn joint_and_independent_agree_for_one_spin() {
        let p = plan(5);
        let spin = [TargetSpin::new("13C", 2.0 * PI * 5e3, 2.0 * PI * 50e3, 2.0 * PI * 0.48e6).unwrap()];
        let phases = [0.1, 0.2, 0.3, 0.4, 0.5];
        let a = nuclear_signal(&p, &phases, &ErrorModel::ideal(), &spin, true).unwrap();
        let b = nuclear_signal(&p, &phases, &ErrorModel::ideal(), &spin, false).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn no_spins_gives_full_population() {
        let p = plan(2);
        let v = nuclear_signal(&p, &[0.0, 1.0], &ErrorModel::ideal(), &[], true).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let m = SignalModel::new(&p, &ErrorModel::ideal(), &[], true).unwrap();
        assert!(m.population_in(&[0.0, 1.0], ReadoutBasis::MinusX).unwrap().abs() < 1e-12);
    }

    #[test]
    fn faulty_readout_reduces_to_ideal_without_errors() {
        let p = plan(2);
        let spin = [TargetSpin::new("1H", 2.0 * PI * 50e3, 0.0, 2.0 * PI * 0.25e6).unwrap()];
        let ideal = nuclear_signal(&p, &[0.0, 2.0], &ErrorModel::ideal(), &spin, false).unwrap();
        let e = ErrorModel {
            faulty_readout: true,
            ..Default::default()
        };
        let faulty = nuclear_signal(&p, &[0.0, 2.0], &e, &spin, false).unwrap();
        assert!((ideal - faulty).abs() < 1e-12, "{ideal} {faulty}");
    }

    #[test]
    fn t2_envelope() {
        let p = plan(2);
        let e = ErrorModel {
            decoherence_t2: Some(16e-6),
            ..Default::default()
        };
        let v = nuclear_signal(&p, &[0.0, 0.0], &e, &[], true).unwrap();
        assert!((v - (0.5 + 0.5 * (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let p = plan(1);
        let s = TargetSpin::new("1H", 1.0, 0.0, 1.0).unwrap();
        let many = vec![s; 7];
        assert!(matches!(
            nuclear_signal(&p, &[0.0], &ErrorModel::ideal(), &many, false),
            Err(Error::DimensionCap { spins: 7, max: 6 })
        ));
        assert!(nuclear_signal(&p, &[0.0], &ErrorModel::ideal(), &many, true).is_ok());
    }
}
