use ndarray::Array2;

use super::{displacement_interpolation, eval_at, pushforward, require_torus, Density, TransportPotential};
use crate::calculus;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geodesic::{burgers_flow, check_div_free, GridMap};
use crate::report::{NormKind, ResidualReport, FLAT_TOLERANCE};

/// Tolerance for the horizontality, projection and departure entries.
pub const SUBMERSION_TOLERANCE: f64 = 1e-6;
/// Tolerance for map coincidence, which holds up to round-off.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for the action against the transport cost.
pub const ACTION_TOLERANCE: f64 = 1e-4;

fn sup(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Checks that the displacement path `η_t = x + t∇u` from `m` is the
/// projection of a Burgers flow onto densities, at `n_times` equally spaced
/// `t ∈ [0, 1]`.
pub fn submersion_check(phi: &TransportPotential, m: &Density, n_times: usize) -> Result<ResidualReport> {
    if n_times < 2 {
        return Err(Error::InvalidArgument(format!("need n_times >= 2, got {n_times}")));
    }
    let c = phi.chart();
    let grad_u = phi.gradient()?;
    let path = burgers_flow(&grad_u, 1.0, n_times - 1)?;
    let (mut horizontal, mut coincidence, mut projection, mut mass) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut action_samples = Vec::with_capacity(n_times);
    for (k, &t) in path.times.iter().enumerate() {
        let (eta, rho) = displacement_interpolation(phi, m, t)?;
        mass = mass.max((rho.mass() - 1.0).abs());

        // Eulerian velocity V_t(y) = ∇u(η_t⁻¹(y)).
        let (pu, pv) = eta.preimages(c)?;
        let mut at = eval_at(c, &[&grad_u.x1, &grad_u.x2], &pu, &pv);
        let v = VectorField::new(c, at.remove(0), at.remove(0))?;
        let (div_free, _) = calculus::helmholtz_decompose(&v)?;
        horizontal = horizontal.max(div_free.sup_norm());
        action_samples.push(v.norm_sq().samples.iter().zip(&rho.samples).map(|(a, b)| a * b).collect::<Vec<_>>());

        let burgers = &path.maps[k];
        coincidence = coincidence.max(sup(&(&burgers.u - &eta.u)).max(sup(&(&burgers.v - &eta.v))));

        // ρ_t carried back along the Burgers map must reproduce m.
        let back = eval_at(c, &[&rho.samples], &burgers.u, &burgers.v).remove(0);
        let jac = burgers.jacobian_det(c);
        projection = projection.max(sup(&(&back * &jac - &m.samples)));
    }
    let cost = c.integrate(&(grad_u.norm_sq().samples * &m.samples));
    let speeds: Vec<f64> = action_samples
        .iter()
        .map(|s| c.integrate(&Array2::from_shape_vec(c.shape(), s.clone()).expect("grid shape")))
        .collect();
    let dt = 1.0 / (n_times - 1) as f64;
    let action = dt * (speeds.iter().sum::<f64>() - 0.5 * (speeds[0] + speeds[n_times - 1]));
    let action_gap = (action - cost).abs() / cost.max(f64::MIN_POSITIVE);

    let mut r = ResidualReport::new();
    r.push(
        "horizontality.sup",
        NormKind::Sup,
        horizontal,
        SUBMERSION_TOLERANCE,
        "max over t of sup |P(V_t)|, the divergence-free (and mean) part of the Eulerian velocity V_t = grad u o eta_t^-1",
    )
    .push(
        "burgers_coincidence.sup",
        NormKind::Sup,
        coincidence,
        COINCIDENCE_TOLERANCE,
        "max over t of sup |eta_t - burgers_t|, displacement map against the Burgers flow of grad u",
    )
    .push(
        "projection.sup",
        NormKind::Sup,
        projection,
        SUBMERSION_TOLERANCE,
        "max over t of sup |rho_t(b_t(x)) det Db_t(x) - m(x)| with b_t the Burgers map",
    )
    .push(
        "mass.sup",
        NormKind::Sup,
        mass,
        1e-10,
        "max over t of |integral of rho_t - 1|",
    )
    .push(
        "action_cost.rel",
        NormKind::Sup,
        action_gap,
        ACTION_TOLERANCE,
        "|A - W| / W with W = integral |grad u|^2 m and A the trapezoidal time integral of integral |V_t|^2 rho_t",
    );
    r.note("cost", cost).note("action", action).note("n_times", n_times as f64);
    Ok(r)
}

/// Rates at which the density pushed forward by the Burgers flow of `X0`
/// leaves the uniform density: central differences of `ρ_t − ρ_0` at
/// `t = 0` with step `dt`, in L² norm.
pub fn vertical_departure_rate(x0: &VectorField, dt: f64) -> Result<ResidualReport> {
    let c = x0.chart();
    require_torus(c)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    check_div_free(x0, FLAT_TOLERANCE)?;
    let m = Density::uniform(c)?;
    let m0 = m.samples[[0, 0]];
    // Second differences amplify per-sample round-off by 4/dt².
    let noise = 4.0 * 16.0 * f64::EPSILON * m0 / (dt * dt);
    if noise > 0.1 * SUBMERSION_TOLERANCE {
        return Err(Error::StepTooSmall(format!(
            "dt = {dt:.1e} gives round-off {noise:.1e} in the second difference"
        )));
    }
    // Burgers flow on the flat torus: straight lines x + tX0, also for t < 0.
    let id = GridMap::identity(c);
    let at = |t: f64| -> Result<Array2<f64>> {
        let eta = GridMap {
            u: &id.u + &(t * &x0.x1),
            v: &id.v + &(t * &x0.x2),
        };
        Ok(pushforward(&eta, &m)?.samples - m0)
    };
    let (plus, minus) = (at(dt)?, at(-dt)?);
    let l2 = |a: &Array2<f64>| c.integrate(&a.mapv(|x| x * x)).sqrt();
    let first = l2(&((&plus - &minus) / (2.0 * dt)));
    let second = l2(&((&plus + &minus) / (dt * dt)));
    let mut r = ResidualReport::new();
    r.push(
        "first_derivative.l2",
        NormKind::L2,
        first,
        SUBMERSION_TOLERANCE,
        "L2 norm of (rho_dt - rho_-dt) / 2dt, rho_t the density pushed forward from uniform by x + t X0",
    )
    .push(
        "second_derivative.l2",
        NormKind::L2,
        second,
        SUBMERSION_TOLERANCE,
        "L2 norm of (rho_dt - 2 rho_0 + rho_-dt) / dt^2",
    );
    r.note("dt", dt).note("round_off_estimate", noise);
    Ok(r)
}
