//! Time evolution of the full Hamiltonian.
//!
//! The evolution operator is a product of midpoint exponentials
//! `exp(-i 2π H(t_k + h/2) h)`, each applied with a Chebyshev expansion on a
//! block of column vectors (the logical isometry, or the identity when the full
//! propagator is requested). Segments with no active control are evolved
//! exactly through the eigenbasis of the static Hamiltonian. Long segments under
//! a periodic drive reuse a one-period propagator.

use std::time::Instant;

use num_complex::Complex64 as C64;

use crate::error::{Result, SimError};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::linalg::{cheb_expm_apply, dagger, eigh, eye, max_abs_diff, ChebWorkspace, CMat, Csr, CsrFamily, Eigh};
use crate::units::TWO_PI;

/// Fraction of the fastest period allowed as a time step.
pub const STEP_FRACTION: f64 = 1.0 / 50.0;

#[derive(Debug, Clone)]
pub struct PropagationOptions {
    /// Nominal step (ns); actual steps are shortened to land on sample times
    /// and control breakpoints.
    pub dt: f64,
    /// Ascending, non-negative sample times (ns).
    pub sample_times: Vec<f64>,
    /// Also record the full `total_dim × total_dim` propagator.
    pub keep_full: bool,
    /// Fastest physical frequency (GHz) for the step-size check.
    pub max_frequency: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// `P† U(t) P` at each sample.
    pub u_proj: Vec<CMat>,
    pub u_full: Option<Vec<CMat>>,
    pub step_size: f64,
    pub steps: usize,
    /// Largest `|W†W − I|` of the propagated block over all samples; the
    /// columns are evolved independently, so this bounds the unitarity error.
    pub gram_error: f64,
    pub wall_seconds: f64,
}

fn gram_error(w: &CMat) -> f64 {
    max_abs_diff(&dagger(w).dot(w), &eye(w.ncols()))
}

pub fn check_step(dt: f64, max_frequency: f64) -> Result<()> {
    let required = STEP_FRACTION / max_frequency.max(1e-12);
    if !(dt > 0.0) || dt > required * (1.0 + 1e-12) {
        return Err(SimError::TimeStepTooCoarse { dt_ns: dt, required_ns: required });
    }
    Ok(())
}

/// Exact evolution under a time-independent Hamiltonian.
pub fn propagate_static(eig: &Eigh, iso: &CMat, times: &[f64], keep_full: bool) -> EvolutionTrace {
    let start = Instant::now();
    let c = dagger(&eig.vectors).dot(iso);
    let cd = dagger(&c);
    let mut u_proj = Vec::with_capacity(times.len());
    let mut u_full = keep_full.then(Vec::new);
    for &t in times {
        let mut ph = c.clone();
        for (k, mut row) in ph.rows_mut().into_iter().enumerate() {
            let f = C64::from_polar(1.0, -TWO_PI * eig.values[k] * t);
            row.mapv_inplace(|z| z * f);
        }
        u_proj.push(cd.dot(&ph));
        if let Some(v) = u_full.as_mut() {
            v.push(eig.propagator(t));
        }
    }
    EvolutionTrace {
        times: times.to_vec(),
        u_proj,
        u_full,
        step_size: 0.0,
        steps: 0,
        gram_error: 0.0,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Full propagators `V e^{-i2πΛt} V†` of a static Hamiltonian.
pub fn static_propagators(h: &CMat, times: &[f64]) -> Result<Vec<CMat>> {
    let e = eigh(h)?;
    Ok(times.iter().map(|&t| e.propagator(t)).collect())
}

/// `iso† U iso` for each full propagator.
pub fn project_trace(u_full: &[CMat], iso: &CMat) -> Result<Vec<CMat>> {
    let id = dagger(iso).dot(iso);
    if max_abs_diff(&id, &eye(iso.ncols())) > 1e-9 {
        return Err(SimError::param("P", "not an isometry"));
    }
    u_full
        .iter()
        .map(|u| {
            if u.nrows() != iso.nrows() || u.ncols() != iso.nrows() {
                return Err(SimError::param("U_full", "dimension does not match the isometry"));
            }
            Ok(dagger(iso).dot(&u.dot(iso)))
        })
        .collect()
}

struct Stepper<'a> {
    h: &'a TimeDependentHamiltonian,
    family: CsrFamily,
    work: Csr,
    ws: ChebWorkspace,
    static_eig: Option<Eigh>,
    steps: usize,
}

impl<'a> Stepper<'a> {
    fn new(h: &'a TimeDependentHamiltonian) -> Self {
        let family = CsrFamily::from_dense_terms(&[&h.h_static, &h.drive_op, &h.tunnel_op]);
        let work = family.combine(&[1.0, 0.0, 0.0]);
        Stepper { h, family, work, ws: ChebWorkspace::default(), static_eig: None, steps: 0 }
    }

    fn step(&mut self, t: f64, len: f64, block: &mut CMat) -> Result<()> {
        let (cd, ct) = self.h.coefficients_at(t + 0.5 * len)?;
        self.family.combine_into(&[1.0, cd, ct], &mut self.work);
        let bounds = self.work.gershgorin();
        cheb_expm_apply(&self.work, bounds, TWO_PI * len, block, &mut self.ws);
        self.steps += 1;
        Ok(())
    }

    /// Advance `block` from `a` to `b` in equal steps no longer than `dt`.
    fn advance(&mut self, a: f64, b: f64, dt: f64, block: &mut CMat) -> Result<()> {
        if b <= a {
            return Ok(());
        }
        let n = ((b - a) / dt - 1e-9).ceil().max(1.0) as usize;
        let len = (b - a) / n as f64;
        for k in 0..n {
            self.step(a + k as f64 * len, len, block)?;
        }
        Ok(())
    }

    fn advance_static(&mut self, a: f64, b: f64, block: &mut CMat) -> Result<()> {
        if b <= a {
            return Ok(());
        }
        if self.static_eig.is_none() {
            self.static_eig = Some(eigh(&self.h.h_static)?);
        }
        let e = self.static_eig.as_ref().unwrap();
        let mut c = dagger(&e.vectors).dot(block);
        for (k, mut row) in c.rows_mut().into_iter().enumerate() {
            let f = C64::from_polar(1.0, -TWO_PI * e.values[k] * (b - a));
            row.mapv_inplace(|z| z * f);
        }
        *block = e.vectors.dot(&c);
        Ok(())
    }

    fn is_static(&self, a: f64, b: f64) -> bool {
        let drive_off = self.h.drive.as_ref().is_none_or(|d| d.amplitude == 0.0 || d.end() <= a || d.start >= b);
        let tunnel_off = self.h.tunnel.as_ref().is_none_or(|w| w.end() <= a || w.start() >= b);
        drive_off && tunnel_off
    }

    fn periodic(&self, a: f64, b: f64) -> Option<f64> {
        let d = self.h.drive.as_ref()?;
        let tunnel_off = self.h.tunnel.as_ref().is_none_or(|w| w.end() <= a || w.start() >= b);
        (tunnel_off && d.frequency > 0.0 && d.start <= a && d.end() >= b).then(|| 1.0 / d.frequency)
    }
}

/// Evolve `iso` (`total_dim × m`, usually the logical isometry) under `h`,
/// recording `iso† U(t) iso` at every sample time.
pub fn propagate(h: &TimeDependentHamiltonian, iso: &CMat, opts: &PropagationOptions) -> Result<EvolutionTrace> {
    let start = Instant::now();
    check_step(opts.dt, opts.max_frequency)?;
    let times = &opts.sample_times;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::param("sample_times", "must be finite, non-negative and ascending"));
    }
    let n = iso.nrows();
    let mut block = if opts.keep_full { eye(n) } else { iso.clone() };
    let iso_d = dagger(iso);
    let t_end = times.last().copied().unwrap_or(0.0);
    let mut edges: Vec<f64> = h.breakpoints().into_iter().filter(|&b| b > 0.0 && b < t_end).collect();
    edges.push(0.0);
    edges.push(t_end);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut stepper = Stepper::new(h);
    let mut u_proj = Vec::with_capacity(times.len());
    let mut u_full = opts.keep_full.then(Vec::new);
    let mut gram = 0.0f64;
    let mut record = |block: &CMat, u_proj: &mut Vec<CMat>| {
        gram = gram.max(gram_error(block));
        if let Some(v) = u_full.as_mut() {
            u_proj.push(iso_d.dot(&block.dot(iso)));
            v.push(block.clone());
        } else {
            u_proj.push(iso_d.dot(block));
        }
    };
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        record(&block, &mut u_proj);
        next += 1;
    }
    for seg in edges.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let seg_samples: Vec<f64> = times[next..].iter().copied().take_while(|&t| t <= b).collect();
        if stepper.is_static(a, b) {
            let mut t = a;
            for &s in &seg_samples {
                stepper.advance_static(t, s, &mut block)?;
                t = s;
                record(&block, &mut u_proj);
            }
            stepper.advance_static(t, b, &mut block)?;
        } else if let Some(period) = stepper.periodic(a, b).filter(|p| b - a > 3.0 * p) {
            periodic_segment(&mut stepper, a, b, period, opts.dt, &seg_samples, &mut block, &mut |blk| {
                record(blk, &mut u_proj)
            })?;
        } else {
            let mut t = a;
            for &s in &seg_samples {
                stepper.advance(t, s, opts.dt, &mut block)?;
                t = s;
                record(&block, &mut u_proj);
            }
            stepper.advance(t, b, opts.dt, &mut block)?;
        }
        next += seg_samples.len();
    }
    Ok(EvolutionTrace {
        times: times.clone(),
        u_proj,
        u_full,
        step_size: opts.dt,
        steps: stepper.steps,
        gram_error: gram,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[allow(clippy::too_many_arguments)]
fn periodic_segment(
    stepper: &mut Stepper,
    a: f64,
    b: f64,
    period: f64,
    dt: f64,
    samples: &[f64],
    block: &mut CMat,
    record: &mut dyn FnMut(&CMat),
) -> Result<()> {
    let n_sub = (period / dt - 1e-9).ceil() as usize;
    let sub = period / n_sub as f64;
    let first = (a / period).ceil() * period;
    // anchors sit on the grid t = first + k·period, which the one-period
    // propagator maps onto each other exactly
    let mut anchor_t = a;
    let mut anchor = block.clone();
    let mut u_period: Option<CMat> = None;
    // index of the current anchor on the grid; counted rather than summed so
    // that samples placed at multiples of the period land on anchors exactly
    let mut k_anchor: Option<u64> = None;
    let mut advance_to_anchor = |stepper: &mut Stepper, anchor: &mut CMat, anchor_t: &mut f64, target: f64| -> Result<()> {
        if k_anchor.is_none() {
            if target < first {
                stepper.advance(*anchor_t, target, dt, anchor)?;
                *anchor_t = target;
                return Ok(());
            }
            stepper.advance(*anchor_t, first, dt, anchor)?;
            *anchor_t = first;
            k_anchor = Some(0);
        }
        let k0 = k_anchor.unwrap();
        let k_target = (((target - first) / period) * (1.0 + 1e-12) + 1e-9).floor().max(k0 as f64) as u64;
        for _ in k0..k_target {
            if u_period.is_none() {
                let mut u = eye(anchor.nrows());
                for k in 0..n_sub {
                    stepper.step(first + k as f64 * sub, sub, &mut u)?;
                }
                u_period = Some(u);
            }
            *anchor = u_period.as_ref().unwrap().dot(&*anchor);
        }
        k_anchor = Some(k_target);
        *anchor_t = first + k_target as f64 * period;
        Ok(())
    };
    for &s in samples {
        advance_to_anchor(stepper, &mut anchor, &mut anchor_t, s)?;
        let mut tmp = anchor.clone();
        stepper.advance_grid(anchor_t, s, sub, &mut tmp)?;
        record(&tmp);
    }
    advance_to_anchor(stepper, &mut anchor, &mut anchor_t, b)?;
    stepper.advance_grid(anchor_t, b, sub, &mut anchor)?;
    *block = anchor;
    Ok(())
}

impl Stepper<'_> {
    /// Advance on the fixed grid of spacing `sub` anchored at `a`, with a final
    /// partial step.
    fn advance_grid(&mut self, a: f64, b: f64, sub: f64, block: &mut CMat) -> Result<()> {
        let mut t = a;
        while t + sub <= b + 1e-12 * sub {
            self.step(t, sub, block)?;
            t += sub;
        }
        if b - t > 1e-12 * sub {
            self.step(t, b - t, block)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, build_operators};
    use crate::effective::dressed_projector;
    use crate::hamiltonian::{presets, DriveSpec, Waveform};
    use crate::linalg::{expm_herm, max_abs_diff};

    fn setup(n_r: usize) -> (crate::hamiltonian::DeviceParams, crate::basis::OperatorSet, crate::basis::BasisIndex) {
        let mut p = presets::cnot(0.0).to_device();
        p.n_r = n_r;
        let basis = build_basis(n_r).unwrap();
        (p, build_operators(&basis), basis)
    }

    #[test]
    fn refuses_coarse_steps() {
        assert!(check_step(0.001, 6.0).is_ok());
        assert!(matches!(check_step(0.01, 6.0), Err(SimError::TimeStepTooCoarse { .. })));
    }

    #[test]
    fn static_evolution_matches_dense_exponential() {
        let (p, ops, basis) = setup(1);
        let proj = dressed_projector(&p, &basis, &ops).unwrap();
        let h = TimeDependentHamiltonian::new(&p, &ops, None, None).unwrap();
        let opts = PropagationOptions { dt: 0.001, sample_times: vec![0.0, 0.3, 1.7], keep_full: true, max_frequency: 6.0 };
        let tr = propagate(&h, &proj.iso, &opts).unwrap();
        let exact = expm_herm(&h.h_static, 1.7).unwrap();
        assert!(max_abs_diff(tr.u_full.as_ref().unwrap().last().unwrap(), &exact) < 1e-10);
        let st = propagate_static(&proj.eig, &proj.iso, &opts.sample_times, false);
        for (a, b) in st.u_proj.iter().zip(&tr.u_proj) {
            assert!(max_abs_diff(a, b) < 1e-10);
        }
    }

    #[test]
    fn driven_steps_agree_with_dense_midpoint_product() {
        let (p, ops, basis) = setup(1);
        let proj = dressed_projector(&p, &basis, &ops).unwrap();
        let drive = DriveSpec { amplitude: 0.5, frequency: 5.9, start: 0.0, duration: 1.0 };
        let h = TimeDependentHamiltonian::new(&p, &ops, Some(drive), None).unwrap();
        let dt = 0.002;
        let opts = PropagationOptions { dt, sample_times: vec![0.05], keep_full: true, max_frequency: 6.0 };
        let tr = propagate(&h, &proj.iso, &opts).unwrap();
        let mut u = eye(h.h_static.nrows());
        for k in 0..25 {
            let hk = h.hamiltonian_at((k as f64 + 0.5) * dt).unwrap();
            u = expm_herm(&hk, dt).unwrap().dot(&u);
        }
        assert!(max_abs_diff(&tr.u_full.unwrap()[0], &u) < 1e-10);
    }

    #[test]
    fn periodic_shortcut_matches_plain_stepping() {
        let (p, ops, basis) = setup(1);
        let proj = dressed_projector(&p, &basis, &ops).unwrap();
        let drive = DriveSpec { amplitude: 0.3, frequency: 5.0, start: 0.0, duration: 10.0 };
        let h = TimeDependentHamiltonian::new(&p, &ops, Some(drive), None).unwrap();
        let times = vec![0.2, 1.0, 1.13, 2.0];
        let opts = PropagationOptions { dt: 0.002, sample_times: times.clone(), keep_full: false, max_frequency: 6.0 };
        let fast = propagate(&h, &proj.iso, &opts).unwrap();
        // reference: same grid, forced plain stepping
        let mut stepper = Stepper::new(&h);
        let mut block = proj.iso.clone();
        let sub = 0.2 / 100.0;
        let mut t = 0.0;
        for (i, &s) in times.iter().enumerate() {
            stepper.advance_grid(t, s, sub, &mut block).unwrap();
            t = s;
            // the plain grid stays aligned only when samples sit on it
            if (s / sub - (s / sub).round()).abs() < 1e-9 {
                let u = dagger(&proj.iso).dot(&block);
                assert!(max_abs_diff(&u, &fast.u_proj[i]) < 1e-9, "sample {s}");
            }
        }
    }

    #[test]
    fn richardson_ratio_for_pulsed_tunnel() {
        let (mut p, ops, basis) = setup(1);
        p.tqd.t_t23 = crate::hamiltonian::Tunnel::real(0.0);
        let proj = dressed_projector(&p, &basis, &ops).unwrap();
        let knots: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
        let vals: Vec<f64> = knots.iter().map(|t| 30.0 * (std::f64::consts::PI * t / 2.0).sin().powi(2)).collect();
        let w = Waveform::new(knots, vals).unwrap();
        let drive = DriveSpec { amplitude: 2.0, frequency: 5.0, start: 0.0, duration: 2.0 };
        let h = TimeDependentHamiltonian::new(&p, &ops, Some(drive), Some(w)).unwrap();
        let run = |dt: f64| {
            let opts = PropagationOptions { dt, sample_times: vec![2.0], keep_full: false, max_frequency: 6.0 };
            propagate(&h, &proj.iso, &opts).unwrap().u_proj.pop().unwrap()
        };
        let (u1, u2, u3) = (run(0.0032), run(0.0016), run(0.0008));
        let ratio = crate::linalg::frob_norm(&(&u1 - &u2)) / crate::linalg::frob_norm(&(&u2 - &u3));
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn isometry_is_preserved() {
        let (p, ops, basis) = setup(2);
        let proj = dressed_projector(&p, &basis, &ops).unwrap();
        let drive = DriveSpec { amplitude: 0.1, frequency: 5.9, start: 0.0, duration: 3.0 };
        let h = TimeDependentHamiltonian::new(&p, &ops, Some(drive), None).unwrap();
        let opts = PropagationOptions { dt: 0.001, sample_times: vec![3.0], keep_full: true, max_frequency: 6.0 };
        let tr = propagate(&h, &proj.iso, &opts).unwrap();
        let u = &tr.u_full.unwrap()[0];
        assert!(max_abs_diff(&dagger(u).dot(u), &eye(u.nrows())) < 1e-10);
    }

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_shape_fn((n, n), |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&a + &dagger(&a)).mapv(|z| z * 0.25)
    }

    #[test]
    fn static_propagation_matches_rk4() {
        let h = random_hermitian(20, 7);
        let u = static_propagators(&h, &[0.0, 10.0]).unwrap();
        assert!(max_abs_diff(&u[0], &eye(20)) < 1e-14);
        // classical RK4 on dU/dt = -i 2π H U
        let gen = h.mapv(|z| z * C64::new(0.0, -TWO_PI));
        let f = |x: &CMat| gen.dot(x);
        let dt = 1e-3;
        let mut x = eye(20);
        for _ in 0..10_000 {
            let k1 = f(&x);
            let k2 = f(&(&x + &k1.mapv(|z| z * (0.5 * dt))));
            let k3 = f(&(&x + &k2.mapv(|z| z * (0.5 * dt))));
            let k4 = f(&(&x + &k3.mapv(|z| z * dt)));
            x = &x + &(&k1 + &k2.mapv(|z| z * 2.0) + &k3.mapv(|z| z * 2.0) + &k4).mapv(|z| z * (dt / 6.0));
        }
        assert!(max_abs_diff(&x, &u[1]) < 1e-8);
    }

    #[test]
    fn diagonal_hamiltonian_gives_phases() {
        let mut h = CMat::zeros((3, 3));
        for (k, e) in [0.5, -1.25, 2.0].iter().enumerate() {
            h[[k, k]] = C64::new(*e, 0.0);
        }
        let u = &static_propagators(&h, &[0.7]).unwrap()[0];
        for (k, e) in [0.5f64, -1.25, 2.0].iter().enumerate() {
            assert!((u[[k, k]] - C64::from_polar(1.0, -TWO_PI * e * 0.7)).norm() < 1e-13);
        }
    }

    #[test]
    fn projection_of_identity_is_identity() {
        let (p, ops, basis) = setup(1);
        let proj = dressed_projector(&p, &basis, &ops).unwrap();
        let n = proj.iso.nrows();
        let u = project_trace(&[eye(n)], &proj.iso).unwrap();
        assert!(max_abs_diff(&u[0], &eye(8)) < 1e-12);
        assert!(project_trace(&[eye(n + 1)], &proj.iso).is_err());
    }

    #[test]
    fn zero_envelopes_reduce_to_static() {
        let (p, ops, basis) = setup(1);
        let proj = dressed_projector(&p, &basis, &ops).unwrap();
        let drive = DriveSpec { amplitude: 0.0, frequency: 5.9, start: 0.0, duration: 1.0 };
        let h = TimeDependentHamiltonian::new(&p, &ops, Some(drive), None).unwrap();
        let times = vec![0.25, 1.0];
        // force stepping by also giving a flat tunnel waveform at its base value
        let w = Waveform::new(vec![0.0, 1.0], vec![h.t23_base; 2]).unwrap();
        let hs = TimeDependentHamiltonian::new(&p, &ops, None, Some(w)).unwrap();
        let opts = PropagationOptions { dt: 0.001, sample_times: times.clone(), keep_full: false, max_frequency: 6.0 };
        let a = propagate(&h, &proj.iso, &opts).unwrap();
        let b = propagate(&hs, &proj.iso, &opts).unwrap();
        assert!(b.steps > 0);
        let st = propagate_static(&proj.eig, &proj.iso, &times, false);
        for k in 0..2 {
            assert!(max_abs_diff(&a.u_proj[k], &st.u_proj[k]) < 1e-8);
            assert!(max_abs_diff(&b.u_proj[k], &st.u_proj[k]) < 1e-8);
        }
    }

    #[test]
    fn sampling_does_not_change_the_final_state() {
        let (p, ops, basis) = setup(1);
        let proj = dressed_projector(&p, &basis, &ops).unwrap();
        let drive = DriveSpec { amplitude: 0.4, frequency: 5.9, start: 0.1, duration: 0.6 };
        let h = TimeDependentHamiltonian::new(&p, &ops, Some(drive), None).unwrap();
        let run = |times: Vec<f64>| {
            let opts = PropagationOptions { dt: 0.001, sample_times: times, keep_full: false, max_frequency: 6.0 };
            propagate(&h, &proj.iso, &opts).unwrap().u_proj.pop().unwrap()
        };
        let single = run(vec![1.0]);
        let many = run(vec![0.05, 0.3, 0.55, 0.7, 1.0]);
        assert!(max_abs_diff(&single, &many) < 1e-9);
    }

    #[test]
    fn static_energy_is_conserved() {
        let (p, ops, basis) = setup(2);
        let proj = dressed_projector(&p, &basis, &ops).unwrap();
        let h = TimeDependentHamiltonian::new(&p, &ops, None, None).unwrap();
        let psi0 = proj.iso.column(0).to_owned().insert_axis(ndarray::Axis(1));
        let mix = (&psi0 + &h.tunnel_op.dot(&psi0)).mapv(|z| z * 0.5);
        let norm = crate::linalg::frob_norm(&mix);
        let psi = mix.mapv(|z| z / norm);
        let energy = |v: &CMat| dagger(v).dot(&h.h_static.dot(v))[[0, 0]].re;
        let u = static_propagators(&h.h_static, &[3.3]).unwrap();
        let e0 = energy(&psi);
        let e1 = energy(&u[0].dot(&psi));
        assert!(((e1 - e0) / e0).abs() < 1e-9);
    }
}
