//! Closed-form stationary states on the two-edge star graph, used as
//! references for validation: the free soliton (Kirchhoff coupling), the
//! ground state of an attractive δ vertex, and the symmetric/asymmetric
//! states of a δ′ vertex, the latter through a transcendental system.
//!
//! All states are built from sech arcs `amplitude / cosh(√ω (x + offset))`
//! per edge, with `x` the distance from the central vertex. Masses and
//! energies are those of the untruncated (half-line) graph; on a truncated
//! edge of length `L` the quadrature differs by a tail of order
//! `8ω·e^{-2√ω L}`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::mesh::{GraphFunction, Mesh};

/// One sech arc: `value(x) = amplitude / cosh(sqrt_omega · (x + offset))`.
#[derive(Debug, Clone, Copy)]
pub struct SechProfile {
    pub amplitude: f64,
    pub sqrt_omega: f64,
    pub offset: f64,
}

impl SechProfile {
    pub fn value(&self, x: f64) -> f64 {
        self.amplitude / (self.sqrt_omega * (x + self.offset)).cosh()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let u = self.sqrt_omega * (x + self.offset);
        -self.amplitude * self.sqrt_omega * u.tanh() / u.cosh()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateKind {
    KirchhoffSoliton { mass: f64 },
    Delta { omega: f64, alpha: f64 },
    DeltaPrimeSymmetric { omega: f64, beta: f64 },
    DeltaPrimeAsymmetric { omega: f64, beta: f64, x_minus: f64, x_plus: f64 },
}

/// A closed-form (or semi-closed-form) stationary state on the 2-star.
#[derive(Debug, Clone)]
pub struct AnalyticState {
    pub kind: StateKind,
    pub omega: f64,
    pub mass: f64,
    pub energy: f64,
    /// One profile per edge, ordered like the graph edges.
    pub profiles: Vec<SechProfile>,
}

impl AnalyticState {
    pub fn value(&self, edge: usize, x: f64) -> f64 {
        self.profiles[edge].value(x)
    }

    pub fn num_edges(&self) -> usize {
        self.profiles.len()
    }
}

/// Soliton of mass `m` for the focusing cubic equation on the line, read as a
/// state on the 2-star with Kirchhoff centre:
/// `φ_m(x) = (m/(2√2))·sech(m x/4)` on each half-edge, frequency `ω = m²/16`,
/// energy `-m³/96`.
pub fn kirchhoff_soliton(mass: f64) -> Result<AnalyticState> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::NonpositiveMass(mass));
    }
    let omega = mass * mass / 16.0;
    let amp = mass / (2.0 * 2.0f64.sqrt());
    let profile = SechProfile {
        amplitude: amp,
        sqrt_omega: mass / 4.0,
        offset: 0.0,
    };
    Ok(AnalyticState {
        kind: StateKind::KirchhoffSoliton { mass },
        omega,
        mass,
        energy: -mass.powi(3) / 96.0,
        profiles: vec![profile; 2],
    })
}

/// Ground state for an attractive δ vertex of strength `alpha < 0` at
/// frequency `omega > α²/4`:
/// `φ(x) = √(2ω)/cosh(√ω(x + a))` on each edge with
/// `a = arctanh(|α|/(2√ω))/√ω`; mass `4√ω + 2α`, energy
/// `-(2/3)ω^{3/2} - α³/12`.
pub fn delta_ground_state(omega: f64, alpha: f64) -> Result<AnalyticState> {
    if alpha >= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "delta ground state requires an attractive vertex (alpha < 0), got {alpha}"
        )));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::FrequencyTooSmall(format!("omega = {omega}")));
    }
    let sq = omega.sqrt();
    let ratio = alpha.abs() / (2.0 * sq);
    if ratio >= 1.0 {
        return Err(Error::FrequencyTooSmall(format!(
            "need omega > alpha²/4: |alpha|/(2√omega) = {ratio:.4} ≥ 1"
        )));
    }
    let a = ratio.atanh() / sq;
    let profile = SechProfile {
        amplitude: (2.0 * omega).sqrt(),
        sqrt_omega: sq,
        offset: a,
    };
    Ok(AnalyticState {
        kind: StateKind::Delta { omega, alpha },
        omega,
        mass: 4.0 * sq + 2.0 * alpha,
        energy: -(2.0 / 3.0) * omega.powf(1.5) - alpha.powi(3) / 12.0,
        profiles: vec![profile; 2],
    })
}

/// `sinh(u)/cosh²(u)`, the combination both transcendental equations use.
fn tanh_sech(u: f64) -> f64 {
    u.tanh() / u.cosh()
}

fn sech(u: f64) -> f64 {
    1.0 / u.cosh()
}

/// Residuals of the transcendental system at `(x_minus, x_plus)`:
///
/// ```text
/// r₁ = tanh(√ω x₊)sech(√ω x₊) + tanh(√ω x₋)sech(√ω x₋)
/// r₂ = sech(√ω x₊) + sech(√ω x₋) - β√ω tanh(√ω x₊)sech(√ω x₊)
/// ```
pub fn delta_prime_residuals(omega: f64, beta: f64, x_minus: f64, x_plus: f64) -> (f64, f64) {
    let sq = omega.sqrt();
    let (um, up) = (sq * x_minus, sq * x_plus);
    let r1 = tanh_sech(up) + tanh_sech(um);
    let r2 = sech(up) + sech(um) - beta * sq * tanh_sech(up);
    (r1, r2)
}

/// Solves the transcendental system for the asymmetric pair
/// `x̃₋ < 0 < x̃₊ < |x̃₋|` in the regime `ω > 8/β²`.
///
/// The first equation pairs `u₊ = √ω x₊` with `|u₋|` through
/// `sinh(u₊)·sinh(|u₋|) = 1` (the two preimages of `sinh/cosh²` multiply to
/// one), leaving a single equation in `u₊` which changes sign on
/// `(0, arctanh(2/(β√ω)))`. Bisection brackets the root; a Newton polish on
/// the full system sharpens it to machine precision.
fn solve_asymmetric_pair(omega: f64, beta: f64) -> Result<(f64, f64)> {
    let sq = omega.sqrt();
    let u_bar = (2.0 / (beta * sq)).atanh();

    let partner = |up: f64| -(1.0 / up.sinh()).asinh();
    let outer = |up: f64| {
        let um = partner(up);
        sech(up) + sech(um) - beta * sq * tanh_sech(up)
    };

    let mut lo = u_bar * 1e-12;
    let mut hi = u_bar * (1.0 - 1e-12);
    let (flo, fhi) = (outer(lo), outer(hi));
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::RootFindFailure(format!(
            "no sign change for the asymmetric pair: f({lo:.3e}) = {flo:.3e}, f({hi:.3e}) = {fhi:.3e}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if outer(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * u_bar.max(1.0) {
            break;
        }
    }
    let mut up = 0.5 * (lo + hi);
    let mut um = partner(up);

    // Newton polish on the full system in (u₋, u₊).
    let h = |u: f64| u.sinh() / u.cosh().powi(2);
    let dh = |u: f64| {
        let s = u.sinh();
        (1.0 - s * s) / u.cosh().powi(3)
    };
    for _ in 0..60 {
        let f1 = h(up) + h(um);
        let f2 = sech(up) + sech(um) - beta * sq * h(up);
        let j11 = dh(um);
        let j12 = dh(up);
        let j21 = -h(um);
        let j22 = -h(up) - beta * sq * dh(up);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 {
            break;
        }
        let dm = (f1 * j22 - f2 * j12) / det;
        let dp = (j11 * f2 - j21 * f1) / det;
        um -= dm;
        up -= dp;
        if dm.abs().max(dp.abs()) < 1e-15 * (1.0 + up.abs().max(um.abs())) {
            break;
        }
    }

    let (x_minus, x_plus) = (um / sq, up / sq);
    let (r1, r2) = delta_prime_residuals(omega, beta, x_minus, x_plus);
    if r1.abs().max(r2.abs()) > 1e-12 {
        return Err(Error::RootFindFailure(format!(
            "asymmetric pair residuals too large: |r1| = {:.3e}, |r2| = {:.3e}",
            r1.abs(),
            r2.abs()
        )));
    }
    if !(x_minus < 0.0 && x_plus > 0.0 && x_plus < -x_minus) {
        return Err(Error::RootFindFailure(format!(
            "asymmetric pair out of order: x₋ = {x_minus:.6}, x₊ = {x_plus:.6}"
        )));
    }
    Ok((x_minus, x_plus))
}

fn delta_prime_state_from_pair(
    omega: f64,
    beta: f64,
    x_minus: f64,
    x_plus: f64,
    kind: StateKind,
) -> AnalyticState {
    let sq = omega.sqrt();
    let amp = (2.0 * omega).sqrt();
    // Edge 1 carries the negative arc shifted by x₊, edge 2 the positive arc
    // shifted by -x₋; with the symmetric pair (-x̄, x̄) the two are exact
    // mirror images with opposite signs (odd under edge swap).
    let profiles = vec![
        SechProfile {
            amplitude: -amp,
            sqrt_omega: sq,
            offset: x_plus,
        },
        SechProfile {
            amplitude: amp,
            sqrt_omega: sq,
            offset: -x_minus,
        },
    ];
    let (tm, tp) = ((sq * x_minus).tanh(), (sq * x_plus).tanh());
    let (sm, sp) = (sech(sq * x_minus), sech(sq * x_plus));
    let mass = 2.0 * sq * (2.0 + tm - tp);
    let energy = omega.powf(1.5) / 3.0
        * (-2.0 - 3.0 * (tm - tp) + 2.0 * (tm.powi(3) - tp.powi(3)))
        - omega / beta * (sm + sp).powi(2);
    AnalyticState {
        kind,
        omega,
        mass,
        energy,
        profiles,
    }
}

/// Stationary states of the δ′ vertex with parameter `beta > 0` at frequency
/// `omega`:
///
/// * for `4/β² < ω ≤ 8/β²` the unique (odd) symmetric state, with
///   `x̄ = arctanh(2/(β√ω))/√ω`, mass `4√ω - 8/β` and energy
///   `(2/3)(8/β³ - ω^{3/2})`;
/// * for `ω > 8/β²` additionally the asymmetric state obtained from the
///   transcendental system.
///
/// Returned with the symmetric state first.
pub fn delta_prime_states(omega: f64, beta: f64) -> Result<Vec<AnalyticState>> {
    if beta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "delta-prime states need beta > 0, got {beta}"
        )));
    }
    if !(omega.is_finite() && omega > 4.0 / (beta * beta)) {
        return Err(Error::FrequencyTooSmall(format!(
            "need omega > 4/β² = {}, got {omega}",
            4.0 / (beta * beta)
        )));
    }
    let sq = omega.sqrt();
    let x_bar = (2.0 / (beta * sq)).atanh() / sq;

    let symmetric = {
        let state = delta_prime_state_from_pair(
            omega,
            beta,
            -x_bar,
            x_bar,
            StateKind::DeltaPrimeSymmetric { omega, beta },
        );
        // The tanh-form mass/energy reduce to the closed symmetric formulas;
        // keep the closed forms to avoid needless cancellation.
        AnalyticState {
            mass: 4.0 * sq - 8.0 / beta,
            energy: (2.0 / 3.0) * (8.0 / beta.powi(3) - omega.powf(1.5)),
            ..state
        }
    };

    let mut states = vec![symmetric];
    if omega > 8.0 / (beta * beta) {
        let (x_minus, x_plus) = solve_asymmetric_pair(omega, beta)?;
        states.push(delta_prime_state_from_pair(
            omega,
            beta,
            x_minus,
            x_plus,
            StateKind::DeltaPrimeAsymmetric {
                omega,
                beta,
                x_minus,
                x_plus,
            },
        ));
    }
    Ok(states)
}

/// Evaluates the state at the interior nodes of a 2-star mesh.
///
/// The graph must be a two-edge star with both edges oriented outward from
/// the centre, matching the state's per-edge coordinates.
pub fn sample_on_mesh(
    state: &AnalyticState,
    graph: &MetricGraph,
    mesh: &Arc<Mesh>,
) -> Result<GraphFunction> {
    let Some((_, _edges)) = graph.as_two_star() else {
        return Err(Error::TopologyMismatch(format!(
            "analytic states live on a two-edge star, graph has {} edges",
            graph.num_edges()
        )));
    };
    if state.num_edges() != graph.num_edges() {
        return Err(Error::TopologyMismatch(format!(
            "state has {} profiles, graph has {} edges",
            state.num_edges(),
            graph.num_edges()
        )));
    }
    if mesh.num_edges() != graph.num_edges() {
        return Err(Error::TopologyMismatch(
            "mesh does not belong to this graph".into(),
        ));
    }
    Ok(GraphFunction::from_fn(mesh.clone(), |e, x| {
        state.value(e.0, x)
    }))
}
