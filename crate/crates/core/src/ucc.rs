//! Factorized UCC: each factor `U = exp[θ (τ - τ†)]` acts in closed form,
//!
//! `U = 1 + sin θ (τ - τ†) + (cos θ - 1) P`,
//!
//! where `P` projects onto determinants that the excitation or its adjoint
//! can act on. The fermionic phase of `τ` is carried by the `sin θ` branch.

use alloc::vec::Vec;

use crate::det::{Determinant, Excitation};
use crate::error::{Error, Result};
use crate::state::SparseState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UccFactor {
    pub excitation: Excitation,
    pub angle: f64,
}

impl UccFactor {
    pub fn new(excitation: Excitation, angle: f64) -> Self {
        UccFactor { excitation, angle }
    }
}

/// Ordered factors; index 0 acts first on the reference.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FactorList {
    factors: Vec<UccFactor>,
}

impl FactorList {
    pub fn new(factors: Vec<UccFactor>) -> Result<Self> {
        let list = FactorList { factors };
        list.validate()?;
        Ok(list)
    }

    fn validate(&self) -> Result<()> {
        let mut seen: Vec<Excitation> = self.factors.iter().map(|f| f.excitation).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateExcitation(w[0]));
        }
        if let Some(f) = self.factors.iter().find(|f| !f.angle.is_finite()) {
            return Err(Error::NonFiniteAngle(f.excitation));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[UccFactor] {
        &self.factors
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &UccFactor> {
        self.factors.iter()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.factors.iter().map(|f| f.angle).collect()
    }

    /// Replaces every angle, in order.
    pub fn set_angles(&mut self, angles: &[f64]) -> Result<()> {
        if angles.len() != self.factors.len() {
            return Err(Error::DimensionMismatch("angle vector length"));
        }
        for (f, &a) in self.factors.iter_mut().zip(angles) {
            if !a.is_finite() {
                return Err(Error::NonFiniteAngle(f.excitation));
            }
            f.angle = a;
        }
        Ok(())
    }

    pub fn with_angles(&self, angles: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_angles(angles)?;
        Ok(out)
    }

    /// Appends `other` after `self`.
    pub fn concat(&self, other: &FactorList) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        FactorList::new(factors)
    }

    pub fn excitations(&self) -> impl Iterator<Item = Excitation> + '_ {
        self.factors.iter().map(|f| f.excitation)
    }
}

/// Which pieces of `U(θ)` and its derivatives to apply: on supported
/// determinants the output is `diag * c` on `d` and `off * phase * c` on the
/// image (negated for de-excitation); unsupported determinants get `rest * c`.
#[derive(Clone, Copy)]
struct Branches {
    diag: f64,
    off: f64,
    rest: f64,
}

fn apply_branches(state: &SparseState, exc: &Excitation, br: Branches) -> SparseState {
    let mut out = Vec::with_capacity(state.len() + state.len() / 2);
    for (d, c) in state.iter() {
        let image = if exc.can_excite(d) {
            exc.excite(d).map(|(t, s)| (t, s.value()))
        } else if exc.can_deexcite(d) {
            exc.deexcite(d).map(|(t, s)| (t, -s.value()))
        } else {
            None
        };
        match image {
            Some((t, phase)) => {
                if br.diag != 0.0 {
                    out.push((d, br.diag * c));
                }
                if br.off != 0.0 {
                    out.push((t, br.off * phase * c));
                }
            }
            None => {
                if br.rest != 0.0 {
                    out.push((d, br.rest * c));
                }
            }
        }
    }
    // Each determinant receives at most two contributions, so the merge is
    // order independent.
    SparseState::from_entries(out)
}

/// `U(θ)|state>`.
pub fn apply_factor(state: &SparseState, f: &UccFactor) -> SparseState {
    if f.angle == 0.0 {
        return state.clone();
    }
    let (s, c) = (libm::sin(f.angle), libm::cos(f.angle));
    apply_branches(
        state,
        &f.excitation,
        Branches {
            diag: c,
            off: s,
            rest: 1.0,
        },
    )
}

/// `dU/dθ |state> = [cos θ (τ - τ†) - sin θ P] |state>`.
pub fn apply_factor_derivative(state: &SparseState, f: &UccFactor) -> SparseState {
    let (s, c) = (libm::sin(f.angle), libm::cos(f.angle));
    apply_branches(
        state,
        &f.excitation,
        Branches {
            diag: -s,
            off: c,
            rest: 0.0,
        },
    )
}

/// `d²U/dθ² |state> = [-sin θ (τ - τ†) - cos θ P] |state>`.
pub fn apply_factor_second_derivative(state: &SparseState, f: &UccFactor) -> SparseState {
    let (s, c) = (libm::sin(f.angle), libm::cos(f.angle));
    apply_branches(
        state,
        &f.excitation,
        Branches {
            diag: -c,
            off: -s,
            rest: 0.0,
        },
    )
}

/// The generator `(τ - τ†)|state>`.
pub fn apply_generator(state: &SparseState, exc: &Excitation) -> SparseState {
    apply_branches(
        state,
        exc,
        Branches {
            diag: 0.0,
            off: 1.0,
            rest: 0.0,
        },
    )
}

/// The projector `P|state>` onto determinants the factor can act on.
pub fn apply_projector(state: &SparseState, exc: &Excitation) -> SparseState {
    apply_branches(
        state,
        exc,
        Branches {
            diag: 1.0,
            off: 0.0,
            rest: 0.0,
        },
    )
}

/// `U_{n-1} ... U_0 |reference>`, normalized.
pub fn build_state(reference: Determinant, factors: &FactorList) -> SparseState {
    let mut state = SparseState::single(reference, 1.0);
    for f in factors.iter() {
        state = apply_factor(&state, f);
    }
    // Unitary up to rounding; renormalize to remove drift.
    let _ = state.normalize();
    state
}

/// The product with `dU/dθ` in place of factor `k` (0-based).
pub fn build_state_with_one_derivative(
    reference: Determinant,
    factors: &FactorList,
    k: usize,
) -> Result<SparseState> {
    if k >= factors.len() {
        return Err(Error::FactorIndexOutOfRange {
            index: k,
            len: factors.len(),
        });
    }
    let mut state = SparseState::single(reference, 1.0);
    for (n, f) in factors.iter().enumerate() {
        state = if n == k {
            apply_factor_derivative(&state, f)
        } else {
            apply_factor(&state, f)
        };
    }
    Ok(state)
}

/// The product with derivatives at positions `k` and `m` (0-based). When
/// `k == m` the second derivative of that factor is used.
pub fn build_state_with_two_derivatives(
    reference: Determinant,
    factors: &FactorList,
    k: usize,
    m: usize,
) -> Result<SparseState> {
    for index in [k, m] {
        if index >= factors.len() {
            return Err(Error::FactorIndexOutOfRange {
                index,
                len: factors.len(),
            });
        }
    }
    let mut state = SparseState::single(reference, 1.0);
    for (n, f) in factors.iter().enumerate() {
        state = if n == k && n == m {
            apply_factor_second_derivative(&state, f)
        } else if n == k || n == m {
            apply_factor_derivative(&state, f)
        } else {
            apply_factor(&state, f)
        };
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det::enumerate_excitations;
    use crate::state::inner;
    use proptest::prelude::*;

    fn max_diff(a: &SparseState, b: &SparseState) -> f64 {
        let d = a.add_scaled(-1.0, b);
        d.iter().map(|e| e.1.abs()).fold(0.0, f64::max)
    }

    fn h2_double() -> (Determinant, Excitation) {
        let hf = Determinant::hartree_fock(2, 1, 1).unwrap();
        let exc = *enumerate_excitations(hf, 2, 2).last().unwrap();
        assert_eq!(exc.rank(), 2);
        (hf, exc)
    }

    fn h6_factors(angles_from: u64) -> (Determinant, FactorList) {
        let hf = Determinant::hartree_fock(6, 3, 3).unwrap();
        let mut x = angles_from | 1;
        let factors = enumerate_excitations(hf, 6, 2)
            .into_iter()
            .map(|e| {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                UccFactor::new(e, ((x >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.6)
            })
            .collect();
        (hf, FactorList::new(factors).unwrap())
    }

    fn mixed_state() -> SparseState {
        // A spread of 6-electron, S_z = 0 determinants in 12 spin orbitals.
        let (hf, list) = h6_factors(3);
        let short = FactorList::new(list.factors()[..25].to_vec()).unwrap();
        build_state(hf, &short)
    }

    #[test]
    fn zero_angle_is_identity() {
        let psi = mixed_state();
        let (_, list) = h6_factors(9);
        let f = UccFactor::new(list.factors()[30].excitation, 0.0);
        assert_eq!(apply_factor(&psi, &f), psi);
    }

    #[test]
    fn h2_double_closed_form() {
        let (hf, exc) = h2_double();
        let theta = 0.37;
        let out = apply_factor(&SparseState::single(hf, 1.0), &UccFactor::new(exc, theta));
        let (d, phase) = exc.excite(hf).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out.get(hf) - libm::cos(theta)).abs() < 1e-15);
        assert!((out.get(d) - libm::sin(theta) * phase.value()).abs() < 1e-15);
    }

    #[test]
    fn inverse_angle_restores() {
        let psi = mixed_state();
        let (_, list) = h6_factors(5);
        for f in list.factors().iter().step_by(7) {
            let there = apply_factor(&psi, f);
            let back = apply_factor(&there, &UccFactor::new(f.excitation, -f.angle));
            assert!(max_diff(&back, &psi) < 1e-14);
        }
    }

    #[test]
    fn derivative_at_zero_on_reference() {
        let (hf, exc) = h2_double();
        let f = UccFactor::new(exc, 0.0);
        let out = apply_factor_derivative(&SparseState::single(hf, 1.0), &f);
        let (d, phase) = exc.excite(hf).unwrap();
        assert_eq!(out.entries(), &[(d, phase.value())]);
        let single = build_state_with_one_derivative(hf, &FactorList::new(alloc::vec![f]).unwrap(), 0).unwrap();
        assert_eq!(single, out);
    }

    #[test]
    fn derivative_drops_unsupported() {
        let (hf, exc) = h2_double();
        // Singly excited determinant: neither excitation nor de-excitation applies.
        let other = Determinant::from_occupied(&[1, 2]).unwrap();
        let psi = SparseState::from_entries(alloc::vec![(hf, 0.6), (other, 0.8)]);
        let out = apply_factor_derivative(&psi, &UccFactor::new(exc, 0.2));
        assert_eq!(out.get(other), 0.0);
        assert!(out.iter().all(|(d, _)| d != other));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let psi = mixed_state();
        let (_, list) = h6_factors(17);
        let h = 1e-5;
        for f in list.factors().iter().step_by(5) {
            let plus = apply_factor(&psi, &UccFactor::new(f.excitation, f.angle + h));
            let minus = apply_factor(&psi, &UccFactor::new(f.excitation, f.angle - h));
            let fd = plus.add_scaled(-1.0, &minus).scaled(0.5 / h);
            assert!(max_diff(&fd, &apply_factor_derivative(&psi, f)) < 1e-8);
        }
    }

    #[test]
    fn second_derivative_at_zero_on_reference() {
        let (hf, exc) = h2_double();
        let list = FactorList::new(alloc::vec![UccFactor::new(exc, 0.0)]).unwrap();
        let out = build_state_with_two_derivatives(hf, &list, 0, 0).unwrap();
        assert_eq!(out.entries(), &[(hf, -1.0)]);
    }

    #[test]
    fn build_state_edge_cases() {
        let (hf, list) = h6_factors(1);
        assert_eq!(build_state(hf, &FactorList::default()), SparseState::single(hf, 1.0));
        let zeros = list.with_angles(&alloc::vec![0.0; list.len()]).unwrap();
        assert_eq!(build_state(hf, &zeros), SparseState::single(hf, 1.0));
        for l in [1usize, 3, 8, 12] {
            let sub = FactorList::new(list.factors()[..l].to_vec()).unwrap();
            let psi = build_state(hf, &sub);
            assert!(psi.len() <= 1 << l);
            assert!((psi.norm() - 1.0).abs() < 1e-12);
        }
        assert!(build_state_with_one_derivative(hf, &list, list.len()).is_err());
        assert!(build_state_with_two_derivatives(hf, &list, 0, list.len()).is_err());
    }

    #[test]
    fn duplicate_excitations_rejected() {
        let (_, exc) = h2_double();
        let f = UccFactor::new(exc, 0.1);
        assert_eq!(FactorList::new(alloc::vec![f, f]), Err(Error::DuplicateExcitation(exc)));
        assert!(FactorList::new(alloc::vec![UccFactor::new(exc, f64::NAN)]).is_err());
    }

    #[test]
    fn one_derivative_state_matches_finite_difference() {
        let (hf, full) = h6_factors(23);
        let list = FactorList::new(full.factors()[..20].to_vec()).unwrap();
        let h = 1e-5;
        for k in [0, 7, 19] {
            let mut a = list.angles();
            a[k] += h;
            let plus = build_state(hf, &list.with_angles(&a).unwrap());
            a[k] -= 2.0 * h;
            let minus = build_state(hf, &list.with_angles(&a).unwrap());
            let fd = plus.add_scaled(-1.0, &minus).scaled(0.5 / h);
            let exact = build_state_with_one_derivative(hf, &list, k).unwrap();
            assert!(max_diff(&fd, &exact) < 1e-8);
            // Norm is constant, so the derivative is orthogonal to the state.
            let psi = build_state(hf, &list);
            assert!(inner(&psi, &exact).abs() < 1e-12);
        }
    }

    #[test]
    fn two_derivative_state_matches_finite_difference() {
        let (hf, full) = h6_factors(29);
        let list = FactorList::new(full.factors()[..15].to_vec()).unwrap();
        let h = 1e-4;
        let at = |dk: f64, dm: f64, k: usize, m: usize| {
            let mut a = list.angles();
            a[k] += dk;
            a[m] += dm;
            build_state(hf, &list.with_angles(&a).unwrap())
        };
        for (k, m) in [(2, 9), (9, 2), (4, 4), (0, 14)] {
            let fd = if k == m {
                at(h, 0.0, k, m)
                    .add_scaled(-2.0, &at(0.0, 0.0, k, m))
                    .add_scaled(1.0, &at(-h, 0.0, k, m))
                    .scaled(1.0 / (h * h))
            } else {
                at(h, h, k, m)
                    .add_scaled(-1.0, &at(h, -h, k, m))
                    .add_scaled(-1.0, &at(-h, h, k, m))
                    .add_scaled(1.0, &at(-h, -h, k, m))
                    .scaled(0.25 / (h * h))
            };
            let exact = build_state_with_two_derivatives(hf, &list, k, m).unwrap();
            assert!(max_diff(&fd, &exact) < 1e-6, "({k},{m})");
        }
        let a = build_state_with_two_derivatives(hf, &list, 3, 11).unwrap();
        let b = build_state_with_two_derivatives(hf, &list, 11, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn state_grows_slower_than_two_to_the_l() {
        let (hf, list) = h6_factors(41);
        for l in [10usize, 14, 20] {
            let sub = FactorList::new(list.factors()[..l].to_vec()).unwrap();
            assert!(build_state(hf, &sub).len() < 1 << l);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn unitary_and_sector_preserving(seed in 1u64..1000, k in 0usize..117, theta in -3.0f64..3.0) {
            let psi = mixed_state();
            let (_, list) = h6_factors(seed);
            let f = UccFactor::new(list.factors()[k].excitation, theta);
            let out = apply_factor(&psi, &f);
            prop_assert!((out.norm() - psi.norm()).abs() < 1e-12);
            prop_assert!(out.check_sector(6, 6, 0).is_ok());
        }

        #[test]
        fn angles_compose(k in 0usize..117, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let psi = mixed_state();
            let (_, list) = h6_factors(7);
            let exc = list.factors()[k].excitation;
            let two = apply_factor(&apply_factor(&psi, &UccFactor::new(exc, a)), &UccFactor::new(exc, b));
            let one = apply_factor(&psi, &UccFactor::new(exc, a + b));
            prop_assert!(max_diff(&two, &one) < 1e-12);
        }
    }
}
