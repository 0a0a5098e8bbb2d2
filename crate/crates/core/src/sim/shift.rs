//! Apply a mode-shift outcome to a concrete trip table: retire a seeded
//! random sample of car trips and add the implied bus passengers.

use thiserror::Error;

use crate::demand::{Mode, Trip, TripTable};
use crate::rng::SeededRng;
use crate::scenario::ScenarioResult;

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("scenario removes {needed} cars but the table only has {available}")]
    Exhausted { needed: u64, available: u64 },
    #[error("scenario lowers transit use (cars_removed = {0:.1}); shifting back is not supported")]
    NegativeShift(f64),
    #[error("table has no car trips to source passenger demand from")]
    NoCars,
}

/// Rewrite `trips` according to a scenario outcome.
///
/// `round(cars_removed)` car trips are drawn uniformly without replacement
/// using `seed`; `round(delta_passengers)` bus-passenger trips are added in
/// their place. Each new passenger inherits origin, destination, and
/// departure time from one of the removed cars (cycled in draw order), so
/// the added demand follows the same spatial OD pattern and the same
/// temporal profile the cars were generated from. Retained trips keep their
/// table order; new trips are appended with ids `shift_000000, ...`.
pub fn apply_modeshift_to_trips(
    trips: &TripTable,
    result: &ScenarioResult,
    seed: u64,
) -> Result<TripTable, ShiftError> {
    if result.cars_removed < -0.5 {
        return Err(ShiftError::NegativeShift(result.cars_removed));
    }
    let n_remove = result.cars_removed.round().max(0.0) as usize;
    let n_add = result.delta_passengers.round().max(0.0) as usize;

    let car_positions: Vec<usize> = trips
        .trips
        .iter()
        .enumerate()
        .filter(|(_, t)| t.mode == Mode::Car)
        .map(|(i, _)| i)
        .collect();
    if n_remove > car_positions.len() {
        return Err(ShiftError::Exhausted {
            needed: n_remove as u64,
            available: car_positions.len() as u64,
        });
    }

    let mut rng = SeededRng::new(seed);
    let mut order = car_positions.clone();
    rng.shuffle(&mut order);
    let removed = &order[..n_remove];
    let mut is_removed = vec![false; trips.trips.len()];
    for &i in removed {
        is_removed[i] = true;
    }

    // Passenger ODs come from the removed cars; if nothing was removed (a
    // sub-car rounding), fall back to the full car pool.
    let sources: &[usize] = if removed.is_empty() { &order } else { removed };
    if n_add > 0 && sources.is_empty() {
        return Err(ShiftError::NoCars);
    }

    let mut out = Vec::with_capacity(trips.trips.len() - n_remove + n_add);
    out.extend(
        trips
            .trips
            .iter()
            .enumerate()
            .filter(|(i, _)| !is_removed[*i])
            .map(|(_, t)| t.clone()),
    );
    for k in 0..n_add {
        let src = &trips.trips[sources[k % sources.len()]];
        out.push(Trip {
            trip_id: format!("shift_{k:06}"),
            mode: Mode::BusPassenger,
            depart_s: src.depart_s,
            origin_edge: src.origin_edge.clone(),
            dest_edge: src.dest_edge.clone(),
            origin_zone: src.origin_zone.clone(),
            dest_zone: src.dest_zone.clone(),
        });
    }
    Ok(TripTable { trips: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        apply_scenario, derive_baseline, FleetParams, ScenarioSpec,
    };

    fn car(i: usize, depart: f64) -> Trip {
        Trip {
            trip_id: format!("car_{i:03}"),
            mode: Mode::Car,
            depart_s: depart,
            origin_edge: format!("e{}", i % 7),
            dest_edge: format!("e{}", (i + 3) % 7),
            origin_zone: "a".into(),
            dest_zone: "b".into(),
        }
    }

    fn table(n: usize) -> TripTable {
        TripTable { trips: (0..n).map(|i| car(i, 20_000.0 + i as f64)).collect() }
    }

    /// A result with the given cars_removed / delta_passengers pair.
    fn shift_result(cars_removed: f64) -> crate::scenario::ScenarioResult {
        let fleet = FleetParams::default();
        // Build arithmetic honestly: pick a baseline where removing
        // `cars_removed` cars is exactly the half-load scenario.
        let p0 = 0.0;
        let b0 = (cars_removed * fleet.car_occupancy / (0.5 * fleet.bus_capacity)).max(1e-9);
        let baseline = derive_baseline(p0, b0, 10_000.0, &fleet).unwrap();
        apply_scenario(
            &baseline,
            ScenarioSpec::TargetUtilization { target_utilization: 0.5 },
            &fleet,
        )
        .unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let t = table(40);
        let shifted = apply_modeshift_to_trips(&t, &shift_result(0.0), 1).unwrap();
        assert_eq!(shifted, t);
    }

    #[test]
    fn removal_counts_and_reproducibility() {
        let t = table(100);
        let r = shift_result(25.0);
        let a = apply_modeshift_to_trips(&t, &r, 42).unwrap();
        let cars: Vec<_> = a.trips.iter().filter(|t| t.mode == Mode::Car).collect();
        assert_eq!(cars.len(), 75);
        let pax: Vec<_> = a.trips.iter().filter(|t| t.mode == Mode::BusPassenger).collect();
        assert_eq!(pax.len(), 38); // round(25 * 1.5)

        let b = apply_modeshift_to_trips(&t, &r, 42).unwrap();
        assert_eq!(a, b);
        let c = apply_modeshift_to_trips(&t, &r, 43).unwrap();
        assert_ne!(a, c, "a different seed should draw a different removal set");
    }

    #[test]
    fn passengers_inherit_od_and_departure_from_removed_cars() {
        let t = table(60);
        let shifted = apply_modeshift_to_trips(&t, &shift_result(20.0), 9).unwrap();
        let kept: std::collections::HashSet<&str> = shifted
            .trips
            .iter()
            .filter(|t| t.mode == Mode::Car)
            .map(|t| t.trip_id.as_str())
            .collect();
        let removed: Vec<&Trip> =
            t.trips.iter().filter(|t| !kept.contains(t.trip_id.as_str())).collect();
        for p in shifted.trips.iter().filter(|t| t.mode == Mode::BusPassenger) {
            assert!(p.trip_id.starts_with("shift_"));
            assert!(removed.iter().any(|r| r.origin_edge == p.origin_edge
                && r.dest_edge == p.dest_edge
                && r.depart_s == p.depart_s));
        }
    }

    #[test]
    fn over_removal_is_an_error() {
        let t = table(10);
        assert!(matches!(
            apply_modeshift_to_trips(&t, &shift_result(25.0), 1),
            Err(ShiftError::Exhausted { needed: 25, available: 10 })
        ));
    }
}
