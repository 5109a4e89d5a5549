//! Fixed-charge many-body basis and elementary operators.
//!
//! Spin-orbitals are ordered dot-major, `D1 D2 T1 T2 T3`, with spin up before
//! spin down, so mode `m = 2 * dot + spin`. Occupation states of the ten modes
//! are bitmasks; fermionic signs come from the Jordan-Wigner string over this
//! order. The physical sector keeps one electron in the DQD and two in the TQD.
//!
//! A basis vector is `|d, p, n⟩ = c†_d c†_{p.0} c†_{p.1} |0⟩ ⊗ |n⟩` with modes in
//! ascending order, i.e. a positive-sign occupation state. Its index is
//! `(15 d + p) n_r + n`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::linalg::{eye, kron, CMat, C64, I, ONE};

pub const N_MODES: usize = 10;
pub const N_FOCK: usize = 1 << N_MODES;
pub const N_DQD: usize = 4;
pub const N_TQD: usize = 15;
pub const N_ELECTRONIC: usize = N_DQD * N_TQD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dot {
    D1,
    D2,
    T1,
    T2,
    T3,
}

impl Dot {
    pub const ALL: [Dot; 5] = [Dot::D1, Dot::D2, Dot::T1, Dot::T2, Dot::T3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_dqd(self) -> bool {
        matches!(self, Dot::D1 | Dot::D2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const ALL: [Spin; 2] = [Spin::Up, Spin::Down];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Orbital {
    pub dot: Dot,
    pub spin: Spin,
}

impl Orbital {
    pub fn new(dot: Dot, spin: Spin) -> Self {
        Orbital { dot, spin }
    }

    pub fn mode(self) -> usize {
        2 * self.dot.index() + self.spin as usize
    }
}

impl std::fmt::Display for Orbital {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self.spin {
            Spin::Up => "up",
            Spin::Down => "dn",
        };
        write!(f, "{:?}{}", self.dot, s)
    }
}

/// Two-electron TQD label, orbitals in ascending mode order.
pub type PairLabel = (Orbital, Orbital);

#[derive(Debug, Clone, PartialEq)]
pub struct BasisIndex {
    pub dqd_states: Vec<Orbital>,
    pub tqd_states: Vec<PairLabel>,
    pub n_r: usize,
    pub total_dim: usize,
    /// Occupation bitmask of each electronic sector state.
    pub masks: Vec<u16>,
}

fn orb(dot: Dot, spin: Spin) -> Orbital {
    Orbital::new(dot, spin)
}

pub fn build_basis(n_r: usize) -> Result<BasisIndex> {
    if n_r < 1 {
        return Err(SimError::param("n_r", "resonator truncation must be at least 1"));
    }
    use Dot::*;
    use Spin::*;
    let dqd_states = vec![orb(D1, Up), orb(D1, Down), orb(D2, Up), orb(D2, Down)];
    let mut tqd_states = Vec::with_capacity(N_TQD);
    for (a, b) in [(T1, T3), (T2, T3), (T1, T2)] {
        for sa in Spin::ALL {
            for sb in Spin::ALL {
                tqd_states.push((orb(a, sa), orb(b, sb)));
            }
        }
    }
    for d in [T1, T2, T3] {
        tqd_states.push((orb(d, Up), orb(d, Down)));
    }
    let mut masks = Vec::with_capacity(N_ELECTRONIC);
    for d in &dqd_states {
        for (a, b) in &tqd_states {
            masks.push((1u16 << d.mode()) | (1 << a.mode()) | (1 << b.mode()));
        }
    }
    Ok(BasisIndex { dqd_states, tqd_states, n_r, total_dim: N_ELECTRONIC * n_r, masks })
}

impl BasisIndex {
    pub fn index(&self, dqd: usize, tqd: usize, photons: usize) -> usize {
        (dqd * N_TQD + tqd) * self.n_r + photons
    }

    pub fn label(&self, idx: usize) -> (usize, usize, usize) {
        let photons = idx % self.n_r;
        let e = idx / self.n_r;
        (e / N_TQD, e % N_TQD, photons)
    }

    /// Electronic index of an occupation bitmask, if it lies in the sector.
    pub fn electronic_index(&self, mask: u16) -> Option<usize> {
        self.masks.iter().position(|&m| m == mask)
    }

    pub fn describe(&self, idx: usize) -> String {
        let (d, p, n) = self.label(idx);
        let (a, b) = self.tqd_states[p];
        format!("{} {} {} n={}", self.dqd_states[d], a, b, n)
    }
}

/// Fermionic annihilation operator on the full ten-mode Fock space, stored as a
/// signed partial permutation of occupation bitmasks.
#[derive(Debug, Clone)]
pub struct FockOperator {
    /// `image[s] = Some((s', sign))` when `op |s⟩ = sign |s'⟩`.
    pub image: Vec<Option<(usize, f64)>>,
}

fn jw_sign(state: usize, mode: usize) -> f64 {
    if (state & ((1 << mode) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl FockOperator {
    pub fn annihilate(mode: usize) -> Self {
        let image = (0..N_FOCK)
            .map(|s| if s & (1 << mode) != 0 { Some((s ^ (1 << mode), jw_sign(s, mode))) } else { None })
            .collect();
        FockOperator { image }
    }

    pub fn create(mode: usize) -> Self {
        let image = (0..N_FOCK)
            .map(|s| if s & (1 << mode) == 0 { Some((s | (1 << mode), jw_sign(s, mode))) } else { None })
            .collect();
        FockOperator { image }
    }

    pub fn apply(&self, state: usize) -> Option<(usize, f64)> {
        self.image[state]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; N_FOCK]; N_FOCK];
        for (s, img) in self.image.iter().enumerate() {
            if let Some((t, sign)) = img {
                m[*t][s] = *sign;
            }
        }
        m
    }
}

/// Elementary operators on the `60 n_r` dimensional space.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub n_r: usize,
    pub total_dim: usize,
    pub a: CMat,
    pub a_dag: CMat,
    /// `number[dot]`.
    pub number: Vec<CMat>,
    /// `spin[dot] = [S_x, S_y, S_z]`, Pauli normalised (`S_z = n_up - n_dn`).
    pub spin: Vec<[CMat; 3]>,
    masks: Vec<u16>,
    create: Vec<FockOperator>,
    annihilate: Vec<FockOperator>,
}

pub fn build_operators(basis: &BasisIndex) -> OperatorSet {
    let create: Vec<_> = (0..N_MODES).map(FockOperator::create).collect();
    let annihilate: Vec<_> = (0..N_MODES).map(FockOperator::annihilate).collect();
    let mut ops = OperatorSet {
        n_r: basis.n_r,
        total_dim: basis.total_dim,
        a: CMat::zeros((0, 0)),
        a_dag: CMat::zeros((0, 0)),
        number: Vec::new(),
        spin: Vec::new(),
        masks: basis.masks.clone(),
        create,
        annihilate,
    };
    let n_r = basis.n_r;
    let mut a_ph = CMat::zeros((n_r, n_r));
    for n in 1..n_r {
        a_ph[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    ops.a = kron(&eye(N_ELECTRONIC), &a_ph);
    ops.a_dag = crate::linalg::dagger(&ops.a);
    for dot in Dot::ALL {
        let up = Orbital::new(dot, Spin::Up);
        let dn = Orbital::new(dot, Spin::Down);
        let nu = ops.bilinear_electronic(up, up);
        let nd = ops.bilinear_electronic(dn, dn);
        let ud = ops.bilinear_electronic(up, dn);
        let du = ops.bilinear_electronic(dn, up);
        ops.number.push(ops.embed(&(&nu + &nd)));
        let sx = &ud + &du;
        let sy = (&ud - &du).mapv(|z| z * -I);
        let sz = &nu - &nd;
        ops.spin.push([ops.embed(&sx), ops.embed(&sy), ops.embed(&sz)]);
    }
    ops
}

impl OperatorSet {
    /// `A ⊗ 1_photon` for a 60×60 electronic operator.
    pub fn embed(&self, electronic: &CMat) -> CMat {
        kron(electronic, &eye(self.n_r))
    }

    pub fn identity(&self) -> CMat {
        eye(self.total_dim)
    }

    pub fn fock_create(&self, o: Orbital) -> &FockOperator {
        &self.create[o.mode()]
    }

    pub fn fock_annihilate(&self, o: Orbital) -> &FockOperator {
        &self.annihilate[o.mode()]
    }

    /// `c†_to c_from` restricted to the electronic sector (60×60).
    pub fn bilinear_electronic(&self, to: Orbital, from: Orbital) -> CMat {
        let mut m = CMat::zeros((N_ELECTRONIC, N_ELECTRONIC));
        for (col, &mask) in self.masks.iter().enumerate() {
            let Some((s1, sg1)) = self.annihilate[from.mode()].apply(mask as usize) else { continue };
            let Some((s2, sg2)) = self.create[to.mode()].apply(s1) else { continue };
            if let Some(row) = self.masks.iter().position(|&m| m as usize == s2) {
                m[[row, col]] += C64::new(sg1 * sg2, 0.0);
            }
        }
        m
    }

    /// `c†_to c_from` on the full space.
    pub fn bilinear(&self, to: Orbital, from: Orbital) -> CMat {
        self.embed(&self.bilinear_electronic(to, from))
    }

    /// Spin-conserving hop `Σ_σ c†_{to σ} c_{from σ}` on the full space.
    pub fn hop(&self, to: Dot, from: Dot) -> CMat {
        let mut m = CMat::zeros((N_ELECTRONIC, N_ELECTRONIC));
        for s in Spin::ALL {
            m = m + self.bilinear_electronic(Orbital::new(to, s), Orbital::new(from, s));
        }
        self.embed(&m)
    }

    pub fn n(&self, dot: Dot) -> &CMat {
        &self.number[dot.index()]
    }

    pub fn s(&self, dot: Dot) -> &[CMat; 3] {
        &self.spin[dot.index()]
    }

    /// Photon number operator `a† a`.
    pub fn photon_number(&self) -> CMat {
        self.a_dag.dot(&self.a)
    }

    /// Projector onto states with the given photon count.
    pub fn photon_projector(&self, photons: usize) -> CMat {
        let mut m = CMat::zeros((self.total_dim, self.total_dim));
        for i in 0..self.total_dim {
            if i % self.n_r == photons {
                m[[i, i]] = ONE;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, eigh, max_abs_diff, ZERO};
    use std::collections::BTreeSet;

    fn comm(a: &CMat, b: &CMat) -> CMat {
        a.dot(b) - b.dot(a)
    }

    #[test]
    fn dimensions() {
        assert_eq!(build_basis(3).unwrap().total_dim, 180);
        assert_eq!(build_basis(1).unwrap().total_dim, 60);
        assert!(build_basis(0).is_err());
    }

    #[test]
    fn sector_matches_brute_force_enumeration() {
        let basis = build_basis(2).unwrap();
        assert_eq!(basis.total_dim, 120);
        // all 10-bit patterns with one DQD electron (bits 0..4) and two TQD electrons (bits 4..10)
        let brute: BTreeSet<u16> = (0u16..1024)
            .filter(|s| (s & 0b1111).count_ones() == 1 && (s >> 4).count_ones() == 2)
            .collect();
        let ours: BTreeSet<u16> = basis.masks.iter().copied().collect();
        assert_eq!(ours.len(), basis.masks.len());
        assert_eq!(brute, ours);
        for idx in 0..basis.total_dim {
            let (d, p, n) = basis.label(idx);
            assert_eq!(basis.index(d, p, n), idx);
        }
    }

    #[test]
    fn tqd_labels_are_the_fifteen_two_electron_states() {
        let basis = build_basis(1).unwrap();
        let set: BTreeSet<_> = basis.tqd_states.iter().copied().collect();
        assert_eq!(set.len(), 15);
        for (a, b) in &basis.tqd_states {
            assert!(a.mode() < b.mode());
            assert!(!a.dot.is_dqd() && !b.dot.is_dqd());
        }
        assert_eq!(basis.tqd_states[0], (orb(Dot::T1, Spin::Up), orb(Dot::T3, Spin::Up)));
        assert_eq!(basis.tqd_states[14], (orb(Dot::T3, Spin::Up), orb(Dot::T3, Spin::Down)));
    }

    #[test]
    fn fock_anticommutation() {
        for i in 0..N_MODES {
            for j in 0..N_MODES {
                let ci = FockOperator::annihilate(i);
                let cdj = FockOperator::create(j);
                // {c_i, c†_j} applied to every occupation state
                for s in 0..N_FOCK {
                    let mut acc = std::collections::HashMap::new();
                    if let Some((t, a)) = cdj.apply(s) {
                        if let Some((u, b)) = ci.apply(t) {
                            *acc.entry(u).or_insert(0.0) += a * b;
                        }
                    }
                    if let Some((t, a)) = ci.apply(s) {
                        if let Some((u, b)) = cdj.apply(t) {
                            *acc.entry(u).or_insert(0.0) += a * b;
                        }
                    }
                    acc.retain(|_, v: &mut f64| v.abs() > 0.0);
                    if i == j {
                        assert_eq!(acc.len(), 1);
                        assert_eq!(acc.get(&s), Some(&1.0));
                    } else {
                        assert!(acc.is_empty());
                    }
                }
                // {c_i, c_j} = 0
                let cj = FockOperator::annihilate(j);
                for s in 0..N_FOCK {
                    let a = cj.apply(s).and_then(|(t, x)| ci.apply(t).map(|(u, y)| (u, x * y)));
                    let b = ci.apply(s).and_then(|(t, x)| cj.apply(t).map(|(u, y)| (u, x * y)));
                    match (a, b) {
                        (Some((u, x)), Some((v, y))) => assert!(u == v && x + y == 0.0),
                        (None, None) => {}
                        _ => panic!("anticommutator mismatch"),
                    }
                }
            }
        }
    }

    #[test]
    fn double_occupancy_and_spin_action() {
        let basis = build_basis(1).unwrap();
        let ops = build_operators(&basis);
        let p = basis.tqd_states.iter().position(|(a, b)| a.dot == Dot::T1 && b.dot == Dot::T1).unwrap();
        let idx = basis.index(0, p, 0);
        assert_eq!(ops.n(Dot::T1)[[idx, idx]], C64::new(2.0, 0.0));
        // DQD state 0 is D1 up
        let idx = basis.index(0, 0, 0);
        assert_eq!(ops.s(Dot::D1)[2][[idx, idx]], C64::new(1.0, 0.0));
        let sz = &ops.s(Dot::D1)[2];
        let col = sz.column(idx);
        assert!(col.iter().enumerate().all(|(r, z)| r == idx || *z == ZERO));
    }

    #[test]
    fn spin_algebra_on_t3() {
        let basis = build_basis(2).unwrap();
        let ops = build_operators(&basis);
        let [sx, sy, sz] = ops.s(Dot::T3);
        let lhs = comm(sx, sy);
        let rhs = sz.mapv(|z| z * C64::new(0.0, 2.0));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-14);
    }

    #[test]
    fn number_operators() {
        let basis = build_basis(2).unwrap();
        let ops = build_operators(&basis);
        let dqd = ops.n(Dot::D1) + ops.n(Dot::D2);
        let tqd = ops.n(Dot::T1) + ops.n(Dot::T2) + ops.n(Dot::T3);
        assert!(max_abs_diff(&dqd, &ops.identity()) < 1e-15);
        assert!(max_abs_diff(&tqd, &ops.identity().mapv(|z| z * 2.0)) < 1e-15);
        for a in Dot::ALL {
            let na = ops.n(a);
            assert!(max_abs_diff(na, &dagger(na)) == 0.0);
            for v in eigh(na).unwrap().values {
                assert!([0.0, 1.0, 2.0].iter().any(|k| (v - k).abs() < 1e-12));
            }
            assert!(max_abs_diff(&comm(&ops.a, na), &CMat::zeros(na.dim())) == 0.0);
            for b in Dot::ALL {
                assert!(max_abs_diff(&comm(na, ops.n(b)), &CMat::zeros(na.dim())) == 0.0);
            }
        }
    }

    #[test]
    fn ladder_operators() {
        let basis = build_basis(4).unwrap();
        let ops = build_operators(&basis);
        assert_eq!(dagger(&ops.a), ops.a_dag);
        let e = eigh(&ops.photon_number()).unwrap();
        let mut distinct: Vec<f64> = e.values.iter().map(|v| v.round()).collect();
        distinct.dedup();
        assert_eq!(distinct, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn sector_bilinears_anticommute_consistently() {
        // For i != j, c†_i c_j and c†_j c_i restricted to the sector agree with the
        // product of the full-space operators (no state leaves the sector).
        let basis = build_basis(1).unwrap();
        let ops = build_operators(&basis);
        let t1 = Orbital::new(Dot::T1, Spin::Up);
        let t3 = Orbital::new(Dot::T3, Spin::Up);
        let h13 = ops.bilinear_electronic(t1, t3);
        let h31 = ops.bilinear_electronic(t3, t1);
        assert_eq!(dagger(&h13), h31);
        // c†_i c_j = -c_j c†_i for i != j: check on every sector state
        for (col, &mask) in basis.masks.iter().enumerate() {
            let alt = ops
                .fock_create(t1)
                .apply(mask as usize)
                .and_then(|(s, a)| ops.fock_annihilate(t3).apply(s).map(|(u, b)| (u, -a * b)));
            let direct: Vec<(usize, C64)> =
                h13.column(col).iter().enumerate().filter(|(_, z)| **z != ZERO).map(|(r, z)| (r, *z)).collect();
            match alt {
                Some((u, v)) => {
                    let row = basis.electronic_index(u as u16).unwrap();
                    assert_eq!(direct, vec![(row, C64::new(v, 0.0))]);
                }
                None => assert!(direct.is_empty()),
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let basis = build_basis(3).unwrap();
        let a = build_operators(&basis);
        let b = build_operators(&basis);
        assert_eq!(a.a, b.a);
        for d in Dot::ALL {
            assert_eq!(a.n(d), b.n(d));
            for k in 0..3 {
                assert_eq!(a.s(d)[k], b.s(d)[k]);
            }
        }
    }
}
