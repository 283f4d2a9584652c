//! Continuous-time state-space systems, frequency responses, the feedback
//! pole oracle and the rotating-body benchmark family.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{c64, condition_number, from_real, ComplexMatrix};

/// Default stability margin of [`is_hurwitz`].
pub const HURWITZ_MARGIN: f64 = 1e-9;
/// Instability interval of the benchmark, in rad/s.
pub const TARGET_INTERVAL: (f64, f64) = (0.45, 2.9);
/// Relative tolerance on each interval endpoint.
pub const INTERVAL_TOL: f64 = 0.15;
/// Nominal value of `a` before calibration.
pub const NOMINAL_A: f64 = 10.0;

const POLE_COND: f64 = 1e12;
const WELL_POSED_COND: f64 = 1e10;

/// `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let nx = a.nrows();
        let (ny, nu) = d.shape();
        // stateless systems may spell B and C as empty arrays
        let b = if nx == 0 { DMatrix::zeros(0, nu) } else { b };
        let c = if nx == 0 { DMatrix::zeros(ny, 0) } else { c };
        let checks = [
            ("a columns", a.ncols(), nx),
            ("b rows", b.nrows(), nx),
            ("b columns", b.ncols(), nu),
            ("c rows", c.nrows(), ny),
            ("c columns", c.ncols(), nx),
        ];
        for (what, got, expected) in checks {
            if got != expected {
                return Err(Error::InvalidParameter(format!(
                    "state-space {what}: expected {expected}, got {got}"
                )));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Memoryless gain `y = Mu`.
    pub fn static_gain(m: DMatrix<f64>) -> Self {
        let (ny, nu) = m.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, nu),
            c: DMatrix::zeros(ny, 0),
            d: m,
        }
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.d.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        if self.states() == 0 {
            return Vec::new();
        }
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    pub fn is_stable(&self) -> bool {
        is_hurwitz(&self.poles(), HURWITZ_MARGIN)
    }

    /// Fails unless every pole lies strictly in the left half plane.
    pub fn require_stable(&self, name: &str) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{name} is not stable")))
        }
    }

    /// Cascade `other ∘ self`: the output of `self` drives `other`.
    pub fn then(&self, other: &StateSpace) -> Result<StateSpace> {
        if other.inputs() != self.outputs() {
            return Err(Error::DimensionMismatch {
                expected: self.outputs(),
                got: other.inputs(),
            });
        }
        let (n1, n2) = (self.states(), other.states());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&other.b * &self.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n1 + n2, self.inputs());
        b.view_mut((0, 0), (n1, self.inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.inputs()))
            .copy_from(&(&other.b * &self.d));
        let mut c = DMatrix::zeros(other.outputs(), n1 + n2);
        c.view_mut((0, 0), (other.outputs(), n1))
            .copy_from(&(&other.d * &self.c));
        c.view_mut((0, n1), (other.outputs(), n2)).copy_from(&other.c);
        StateSpace::new(a, b, c, &other.d * &self.d)
    }
}

#[derive(Serialize, Deserialize)]
struct RawStateSpace {
    #[serde(default)]
    a: Vec<Vec<f64>>,
    #[serde(default)]
    b: Vec<Vec<f64>>,
    #[serde(default)]
    c: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nc = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != nc) {
        return Err(Error::Config(format!(
            "field \"{name}\": row {i} has {} entries, expected {nc}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), nc, |i, j| rows[i][j]))
}

impl Serialize for StateSpace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawStateSpace {
            a: to_rows(&self.a),
            b: to_rows(&self.b),
            c: to_rows(&self.c),
            d: to_rows(&self.d),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateSpace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawStateSpace::deserialize(d)?;
        let conv = |name: &str, rows: &[Vec<f64>]| from_rows(name, rows).map_err(D::Error::custom);
        StateSpace::new(
            conv("a", &raw.a)?,
            conv("b", &raw.b)?,
            conv("c", &raw.c)?,
            conv("d", &raw.d)?,
        )
        .map_err(D::Error::custom)
    }
}

/// `C(jωI − A)⁻¹B + D`; an infinite `ω` returns the feedthrough `D`.
pub fn freq_response(sys: &StateSpace, omega: f64) -> Result<ComplexMatrix> {
    let d = from_real(&sys.d);
    if omega.is_infinite() || sys.states() == 0 {
        return Ok(d);
    }
    let n = sys.states();
    let resolvent = ComplexMatrix::identity(n, n) * c64(0.0, omega) - from_real(&sys.a);
    if condition_number(&resolvent) > POLE_COND {
        return Err(Error::FrequencyAtPole(omega));
    }
    let x = resolvent
        .lu()
        .solve(&from_real(&sys.b))
        .ok_or(Error::FrequencyAtPole(omega))?;
    Ok(from_real(&sys.c) * x + d)
}

/// `T(s) = 1/(s+1)·[[1, a], [−a, 1]]`.
pub fn rotating_body_t(a: f64) -> StateSpace {
    let m = DMatrix::from_row_slice(2, 2, &[1.0, a, -a, 1.0]);
    StateSpace {
        a: -DMatrix::identity(2, 2),
        b: m,
        c: DMatrix::identity(2, 2),
        d: DMatrix::zeros(2, 2),
    }
}

/// `Δ(s) = diag(0.5, 0.25/(s/b + 1))`.
pub fn delta_family(b: f64) -> Result<StateSpace> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("pole b must be positive, got {b}")));
    }
    Ok(StateSpace {
        a: DMatrix::from_element(1, 1, -b),
        b: DMatrix::from_row_slice(1, 2, &[0.0, b]),
        c: DMatrix::from_row_slice(2, 1, &[0.0, 0.25]),
        d: DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]),
    })
}

/// State matrix of the loop `e₁ = −Δe₂ + u₁`, `e₂ = Ge₁ + u₂`.
pub fn closed_loop_matrix(g: &StateSpace, delta: &StateSpace) -> Result<DMatrix<f64>> {
    if g.outputs() != delta.inputs() || delta.outputs() != g.inputs() {
        return Err(Error::DimensionMismatch {
            expected: g.outputs(),
            got: delta.inputs(),
        });
    }
    let m = g.inputs();
    let e = DMatrix::identity(m, m) + &delta.d * &g.d;
    if condition_number(&from_real(&e)) > WELL_POSED_COND {
        return Err(Error::IllPosed);
    }
    let e_inv = e.try_inverse().ok_or(Error::IllPosed)?;
    // e₁ = K_g x_g + K_Δ x_Δ
    let k_g = -(&e_inv * &delta.d * &g.c);
    let k_d = -(&e_inv * &delta.c);
    let (ng, nd) = (g.states(), delta.states());
    let mut acl = DMatrix::zeros(ng + nd, ng + nd);
    acl.view_mut((0, 0), (ng, ng)).copy_from(&(&g.a + &g.b * &k_g));
    acl.view_mut((0, ng), (ng, nd)).copy_from(&(&g.b * &k_d));
    acl.view_mut((ng, 0), (nd, ng))
        .copy_from(&(&delta.b * (&g.c + &g.d * &k_g)));
    acl.view_mut((ng, ng), (nd, nd))
        .copy_from(&(&delta.a + &delta.b * &g.d * &k_d));
    Ok(acl)
}

pub fn closed_loop_poles(g: &StateSpace, delta: &StateSpace) -> Result<Vec<Complex64>> {
    let acl = closed_loop_matrix(g, delta)?;
    if acl.nrows() == 0 {
        return Ok(Vec::new());
    }
    Ok(acl.complex_eigenvalues().iter().copied().collect())
}

/// `max Re(p) < −margin`.
pub fn is_hurwitz(poles: &[Complex64], margin: f64) -> bool {
    poles.iter().all(|p| p.re < -margin)
}

/// Pole-oracle stability of the benchmark loop at `(a, b)`.
pub fn benchmark_stable(a: f64, b: f64) -> Result<bool> {
    let poles = closed_loop_poles(&rotating_body_t(a), &delta_family(b)?)?;
    Ok(is_hurwitz(&poles, HURWITZ_MARGIN))
}

/// Interval of `b` on which the benchmark loop is unstable, if any.
///
/// Scans a log grid over `[lo, hi]` and refines both ends by bisection.
pub fn instability_interval(a: f64, lo: f64, hi: f64) -> Result<Option<(f64, f64)>> {
    let points = 400;
    let grid: Vec<f64> = (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect();
    let mut unstable = Vec::with_capacity(points);
    for &b in &grid {
        unstable.push(!benchmark_stable(a, b)?);
    }
    let Some(first) = unstable.iter().position(|&u| u) else {
        return Ok(None);
    };
    let last = unstable.iter().rposition(|&u| u).unwrap_or(first);
    let refine = |mut stable_b: f64, mut unstable_b: f64| -> Result<f64> {
        while (stable_b - unstable_b).abs() > 1e-10 * unstable_b {
            let mid = 0.5 * (stable_b + unstable_b);
            if benchmark_stable(a, mid)? {
                stable_b = mid;
            } else {
                unstable_b = mid;
            }
        }
        Ok(0.5 * (stable_b + unstable_b))
    };
    let left = if first == 0 {
        grid[0]
    } else {
        refine(grid[first - 1], grid[first])?
    };
    let right = if last + 1 == points {
        grid[points - 1]
    } else {
        refine(grid[last + 1], grid[last])?
    };
    Ok(Some((left, right)))
}

/// Whether both endpoints lie within [`INTERVAL_TOL`] of [`TARGET_INTERVAL`].
pub fn interval_matches(interval: (f64, f64)) -> bool {
    let rel = |got: f64, want: f64| (got - want).abs() / want;
    rel(interval.0, TARGET_INTERVAL.0) <= INTERVAL_TOL && rel(interval.1, TARGET_INTERVAL.1) <= INTERVAL_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub interval: (f64, f64),
    /// Whether the nominal `a` already reproduced the interval.
    pub nominal_ok: bool,
}

/// Calibrate `a` so the upper instability endpoint sits at the target.
///
/// The nominal value is kept when it already reproduces the interval.
pub fn calibrate_a() -> Result<Calibration> {
    let (lo, hi) = (1e-2, 1e2);
    if let Some(iv) = instability_interval(NOMINAL_A, lo, hi)? {
        if interval_matches(iv) {
            return Ok(Calibration {
                a: NOMINAL_A,
                interval: iv,
                nominal_ok: true,
            });
        }
    }
    let upper = |a: f64| -> Result<f64> { Ok(instability_interval(a, lo, hi)?.map_or(0.0, |iv| iv.1)) };
    // bracket the crossing of the upper endpoint through its target
    let mut a_lo = 1.0;
    let mut a_hi = a_lo;
    let mut found = false;
    while a_hi < 100.0 {
        a_hi += 0.5;
        if upper(a_hi)? >= TARGET_INTERVAL.1 {
            found = true;
            break;
        }
        a_lo = a_hi;
    }
    if !found {
        return Err(Error::CalibrationFailure(
            "upper endpoint never reaches the target".into(),
        ));
    }
    while a_hi - a_lo > 1e-9 {
        let mid = 0.5 * (a_lo + a_hi);
        if upper(mid)? >= TARGET_INTERVAL.1 {
            a_hi = mid;
        } else {
            a_lo = mid;
        }
    }
    let a = a_hi;
    let interval = instability_interval(a, lo, hi)?
        .ok_or_else(|| Error::CalibrationFailure(format!("no instability at a = {a}")))?;
    if !interval_matches(interval) {
        return Err(Error::CalibrationFailure(format!(
            "a = {a} gives [{:.3}, {:.3}]",
            interval.0, interval.1
        )));
    }
    Ok(Calibration {
        a,
        interval,
        nominal_ok: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::spectral_norm;
    use crate::structure::BlockDims;
    use proptest::prelude::*;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn static_system_is_constant() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = StateSpace::static_gain(m.clone());
        for w in [0.0, 1.0, f64::INFINITY] {
            assert_eq!(freq_response(&s, w).unwrap(), from_real(&m));
        }
    }

    #[test]
    fn first_order_rolloff() {
        let s = StateSpace::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!((freq_response(&s, 0.0).unwrap()[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-15);
        assert!(freq_response(&s, 1e9).unwrap()[(0, 0)].norm() < 1e-8);
        assert_eq!(freq_response(&s, f64::INFINITY).unwrap()[(0, 0)], c64(0.0, 0.0));
    }

    #[test]
    fn pole_on_axis_is_rejected() {
        let s = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert_eq!(freq_response(&s, 2.0), Err(Error::FrequencyAtPole(2.0)));
    }

    #[test]
    fn rotating_body_examples() {
        let t = rotating_body_t(7.0);
        let dc = freq_response(&t, 0.0).unwrap();
        assert!(close(
            &dc,
            &from_real(&DMatrix::from_row_slice(2, 2, &[1.0, 7.0, -7.0, 1.0])),
            1e-14
        ));
        assert!(spectral_norm(&freq_response(&t, 1e8).unwrap()) < 1e-6);
        for p in t.poles() {
            assert!((p - c64(-1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn delta_examples() {
        assert!(delta_family(0.0).is_err());
        let d = delta_family(3.0).unwrap();
        let chi = BlockDims::new(vec![], vec![1, 1]);
        assert!(close(
            &freq_response(&d, 0.0).unwrap(),
            &crate::matrix::diag_real(&[0.5, 0.25]),
            1e-15
        ));
        for i in 0..40 {
            let w = 10f64.powf(-2.0 + 5.0 * i as f64 / 39.0);
            let r = freq_response(&d, w).unwrap();
            assert!((spectral_norm(&r) - 0.5).abs() < 1e-12);
            assert!(chi.is_member_b(&r, 1e-12).unwrap());
        }
    }

    #[test]
    fn feedback_examples() {
        let g = rotating_body_t(2.0);
        let zero = StateSpace::static_gain(DMatrix::zeros(2, 2));
        let mut p = closed_loop_poles(&g, &zero).unwrap();
        p.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!(p.iter().all(|z| (z - c64(-1.0, 0.0)).norm() < 1e-9));

        let g1 = StateSpace::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let k = StateSpace::static_gain(DMatrix::from_element(1, 1, 2.5));
        let p = closed_loop_poles(&g1, &k).unwrap();
        assert!((p[0] - c64(-3.5, 0.0)).norm() < 1e-12);

        let neg = StateSpace::static_gain(DMatrix::from_element(1, 1, -1.0));
        let one = StateSpace::static_gain(DMatrix::from_element(1, 1, 1.0));
        assert_eq!(closed_loop_poles(&one, &neg), Err(Error::IllPosed));
    }

    #[test]
    fn hurwitz_boundary() {
        assert!(is_hurwitz(&[c64(-1.0, 0.0)], HURWITZ_MARGIN));
        assert!(!is_hurwitz(&[c64(0.1, 0.0)], HURWITZ_MARGIN));
        assert!(!is_hurwitz(&[c64(-1.0, 0.0), c64(1e-12, 0.0)], HURWITZ_MARGIN));
    }

    #[test]
    fn benchmark_characteristic_polynomial() {
        // det(sI − A_cl) = (s + 1.5)((s + 1)(s + b) + 0.25b) + 0.125a²b
        let (a, b) = (11.0, 1.3);
        let acl = closed_loop_matrix(&rotating_body_t(a), &delta_family(b).unwrap()).unwrap();
        for s in [0.3, -0.7, 2.0] {
            let m = DMatrix::identity(3, 3) * s - &acl;
            let want = (s + 1.5) * ((s + 1.0) * (s + b) + 0.25 * b) + 0.125 * a * a * b;
            assert!((m.determinant() - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn nominal_a_is_stable_everywhere() {
        assert_eq!(instability_interval(NOMINAL_A, 1e-2, 1e2).unwrap(), None);
    }

    #[test]
    fn calibration_reproduces_interval() {
        let cal = calibrate_a().unwrap();
        assert!(!cal.nominal_ok);
        assert!(interval_matches(cal.interval));
        assert!((cal.interval.1 - TARGET_INTERVAL.1).abs() < 1e-6);
        assert!(cal.a > 11.0 && cal.a < 11.5, "{}", cal.a);
    }

    #[test]
    fn json_document() {
        let t = rotating_body_t(3.0);
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.contains(r#""b":[[1.0,3.0],[-3.0,1.0]]"#));
        assert_eq!(serde_json::from_str::<StateSpace>(&text).unwrap(), t);
        let stat: StateSpace = serde_json::from_str(r#"{"a":[],"b":[],"c":[],"d":[[2.0]]}"#).unwrap();
        assert_eq!(stat.inputs(), 1);
        let bad = serde_json::from_str::<StateSpace>(r#"{"a":[[1.0]],"b":[[1.0]],"c":[[1.0, 2.0]],"d":[[0.0]]}"#);
        assert!(bad.unwrap_err().to_string().contains("c columns"));
    }

    fn arb_system(n: usize, m: usize) -> impl Strategy<Value = StateSpace> {
        let len = n * n + 2 * n * m + m * m;
        proptest::collection::vec(-1.0f64..1.0, len).prop_map(move |v| {
            let mut it = v.into_iter();
            let mut take = |r, c| DMatrix::from_iterator(r, c, it.by_ref().take(r * c));
            // shift A left so the resolvent is well conditioned on the axis
            let a = take(n, n) - DMatrix::identity(n, n) * 3.0;
            let b = take(n, m);
            let c = take(m, n);
            let d = take(m, m);
            StateSpace::new(a, b, c, d).unwrap()
        })
    }

    proptest! {
        #[test]
        fn series_response_is_product(g1 in arb_system(3, 2), g2 in arb_system(2, 2), w in 0.0f64..20.0) {
            let series = g1.then(&g2).unwrap();
            let lhs = freq_response(&series, w).unwrap();
            let rhs = freq_response(&g2, w).unwrap() * freq_response(&g1, w).unwrap();
            prop_assert!(close(&lhs, &rhs, 1e-9));
        }
    }
}
