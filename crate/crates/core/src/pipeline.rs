//! Crown generation for a dentition: bounds for the missing teeth, then
//! reverse diffusion conditioned on the teeth that are present.

use std::collections::BTreeSet;

use crate::boundary::{fit_bound, CylBound};
use crate::dentition::{Dentition, Fdi, Role, Tooth};
use crate::diffusion::{cyl_normalize, reverse_sample, DiffusionSchedule};
use crate::error::{Error, Result};
use crate::nets::{BoundaryRegressor, ConditionedDenoiser, DenoiseTooth, Denoiser};
use crate::rng;

/// Context teeth in their own fitted cylinder frames.
pub fn context_teeth(d: &Dentition<f64>, exclude: &BTreeSet<Fdi>) -> Result<Vec<DenoiseTooth>> {
    d.teeth()
        .filter(|t| !exclude.contains(&t.fdi))
        .map(|t| {
            let bound = fit_bound(t)?;
            Ok(DenoiseTooth {
                fdi: t.fdi,
                role: Role::Context,
                points: cyl_normalize(t.points(), &bound)?,
                bound,
            })
        })
        .collect()
}

/// Seed of the noise stream for one target tooth of one scenario.
pub fn tooth_stream(seed: u64, scenario: u64, fdi: Fdi) -> u64 {
    rng::derive_seed(seed, &[scenario, fdi.code() as u64])
}

/// Samples `n_points` per target inside the given bounds. Teeth of `d`
/// listed as targets are not used as context.
pub fn generate_crowns(
    model: &Denoiser,
    s: &DiffusionSchedule<f64>,
    d: &Dentition<f64>,
    targets: &[(Fdi, CylBound<f64>)],
    n_points: usize,
    seed: u64,
    scenario: u64,
) -> Result<Vec<Tooth<f64>>> {
    if targets.is_empty() {
        return Err(Error::Empty("generation targets"));
    }
    let exclude: BTreeSet<Fdi> = targets.iter().map(|t| t.0).collect();
    let context = context_teeth(d, &exclude)?;
    if context.is_empty() {
        return Err(Error::Empty("generation context"));
    }
    let cond = ConditionedDenoiser {
        model,
        context,
        targets: targets.to_vec(),
        steps: s.steps(),
    };
    let bounds: Vec<CylBound<f64>> = targets.iter().map(|t| t.1).collect();
    let counts = vec![n_points; targets.len()];
    let streams: Vec<u64> = targets.iter().map(|t| tooth_stream(seed, scenario, t.0)).collect();
    let clouds = reverse_sample(s, &cond, &bounds, &counts, &streams)?;
    targets
        .iter()
        .zip(clouds)
        .map(|((f, _), pts)| Ok(Tooth::new(*f, pts)?.with_role(Role::Target)))
        .collect()
}

/// Completes a partial dentition: every absent permanent tooth gets a
/// predicted bound and a generated crown flagged as pseudo.
pub fn fill_gaps(
    model: &Denoiser,
    regressor: &BoundaryRegressor,
    s: &DiffusionSchedule<f64>,
    d: &Dentition<f64>,
    n_points: usize,
    seed: u64,
    scenario: u64,
) -> Result<Dentition<f64>> {
    let missing: BTreeSet<Fdi> = Fdi::all().filter(|f| !d.contains(*f)).collect();
    let mut out = d.clone();
    if missing.is_empty() {
        return Ok(out);
    }
    let bounds = regressor.predict_bounds(d, &missing)?;
    for mut tooth in generate_crowns(model, s, d, &bounds, n_points, seed, scenario)? {
        tooth.role = Role::Context;
        tooth.pseudo = true;
        out.insert(tooth)?;
    }
    Ok(out)
}
