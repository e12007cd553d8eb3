//! Synthetic instance generators for tests, demos, and the acceptance
//! suite. Demands and capacities land on multiples of 0.01 pu so the
//! binary-expansion grid of the master can represent optimal flows
//! exactly with the default step.

use crate::grid::{Bus, BusId, GridInstance, Line, LineId, Substation};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn bus(id: u32, demand: f64, pf: f64) -> Bus {
    Bus {
        id: BusId(id),
        demand_p: demand,
        power_factor: pf,
        v_min: 0.9,
        v_max: 1.1,
        is_substation: false,
    }
}

fn substation(bus: u32, p_max: f64, energy_cost: f64) -> Substation {
    Substation {
        bus: BusId(bus),
        p_max,
        q_min: -p_max,
        q_max: p_max,
        energy_cost,
        v_ref: 1.0,
        p_max_post: None,
        q_min_post: None,
        q_max_post: None,
    }
}

#[allow(clippy::too_many_arguments)]
fn line(id: u32, from: u32, to: u32, r: f64, x: f64, f_max: f64, sw: bool, closed: bool) -> Line {
    Line {
        id: LineId(id),
        from_bus: BusId(from),
        to_bus: BusId(to),
        r,
        x,
        f_max,
        switchable: sw,
        initial_closed: closed,
        switch_cost: if sw { 100.0 } else { 0.0 },
    }
}

/// Two buses joined by one non-switchable line; the smallest sensible
/// instance.
pub fn two_bus_instance(f_max: f64) -> GridInstance {
    GridInstance::new(
        10.0,
        3000.0,
        vec![bus(1, 0.0, 1.0), bus(2, 1.0, 1.0)],
        vec![line(1, 1, 2, 0.01, 0.01, f_max, false, true)],
        vec![substation(1, 5.0, 100.0)],
        None,
    )
    .unwrap()
}

/// Four buses with a mix of fixed and switchable lines forming one
/// contractible cycle; small enough for exhaustive checks.
pub fn ring_instance() -> GridInstance {
    GridInstance::new(
        10.0,
        3000.0,
        vec![
            bus(1, 0.0, 1.0),
            bus(2, 0.2, 0.95),
            bus(3, 0.3, 1.0),
            bus(4, 0.1, 0.9),
        ],
        vec![
            line(1, 1, 2, 0.01, 0.02, 1.0, false, true),
            line(2, 2, 3, 0.01, 0.02, 1.0, false, true),
            line(3, 3, 4, 0.01, 0.02, 0.8, true, true),
            line(4, 4, 1, 0.01, 0.02, 0.8, true, false),
            line(5, 2, 4, 0.02, 0.02, 0.6, true, false),
        ],
        vec![substation(1, 5.0, 100.0)],
        None,
    )
    .unwrap()
}

/// Six-bus showcase: a wildfire-prone feeder line and a normally-open tie
/// to a second substation whose closure both reroutes flow away from the
/// risky line and limits the damage when it fails.
///
/// Demands: buses 2-4 carry 0.2 each behind the risky line `L1`; bus 5
/// carries 0.1 on the backup feeder. The tie `L5` closes without forming
/// a cycle. The backup import limit (`L4`) is sized so that abandoning
/// `L1` entirely would shed load, keeping the interesting regime at
/// exactly one switching action.
pub fn ddu_showcase_instance() -> GridInstance {
    GridInstance::new(
        10.0,
        3000.0,
        vec![
            bus(1, 0.0, 1.0),
            bus(2, 0.2, 1.0),
            bus(3, 0.2, 1.0),
            bus(4, 0.2, 1.0),
            bus(5, 0.1, 1.0),
            bus(6, 0.0, 1.0),
        ],
        vec![
            line(1, 1, 2, 0.01, 0.01, 1.0, true, true),
            line(2, 2, 3, 0.01, 0.01, 1.0, false, true),
            line(3, 3, 4, 0.01, 0.01, 1.0, false, true),
            line(4, 6, 5, 0.01, 0.01, 0.45, false, true),
            line(5, 5, 3, 0.01, 0.01, 0.45, true, false),
        ],
        vec![substation(1, 2.0, 100.0), substation(6, 2.0, 100.0)],
        None,
    )
    .unwrap()
}

/// Index of the wildfire-prone line in [`ddu_showcase_instance`].
pub fn ddu_showcase_risky_line() -> LineId {
    LineId(1)
}

/// Random radial instance: a spanning tree of fixed lines over
/// `n_buses`, plus `n_switchable` switchable lines (some tree edges
/// become switchable, some extra ties are added). All demands are
/// multiples of 0.01.
pub fn random_radial_instance(seed: u64, n_buses: usize, n_switchable: usize) -> GridInstance {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = n_buses.max(2);
    let mut buses = Vec::with_capacity(n);
    buses.push(bus(1, 0.0, 1.0));
    for i in 2..=n {
        let demand = rng.random_range(1..=12) as f64 * 0.01;
        let pf = *[0.9, 0.95, 1.0].get(rng.random_range(0..3)).unwrap();
        buses.push(bus(i as u32, demand, pf));
    }

    let mut lines = Vec::new();
    let mut id = 1u32;
    for b in 2..=n {
        let parent = rng.random_range(1..b) as u32;
        let f_max = rng.random_range(40..=100) as f64 * 0.01;
        let r = rng.random_range(5..=20) as f64 * 0.001;
        lines.push(line(id, parent, b as u32, r, r, f_max, false, true));
        id += 1;
    }
    // Promote or add switchable lines.
    let mut added = 0;
    while added < n_switchable {
        if added % 2 == 0 && id as usize - 1 > n - 1 {
            // Extra tie between two random distinct buses, initially open.
            let a = rng.random_range(1..=n) as u32;
            let mut b = rng.random_range(1..=n) as u32;
            if a == b {
                b = if b == n as u32 { 1 } else { b + 1 };
            }
            let f_max = rng.random_range(40..=100) as f64 * 0.01;
            lines.push(line(id, a, b, 0.01, 0.01, f_max, true, false));
            id += 1;
        } else {
            // Make an existing tree edge switchable (initially closed).
            let pick = rng.random_range(0..n - 1);
            if !lines[pick].switchable {
                lines[pick].switchable = true;
                lines[pick].switch_cost = 100.0;
            } else {
                let a = rng.random_range(1..=n) as u32;
                let mut b = rng.random_range(1..=n) as u32;
                if a == b {
                    b = if b == n as u32 { 1 } else { b + 1 };
                }
                lines.push(line(id, a, b, 0.01, 0.01, 0.6, true, false));
                id += 1;
            }
        }
        added += 1;
    }

    let mut subs = vec![substation(1, 3.0, 100.0)];
    if n >= 6 && rng.random_bool(0.4) {
        subs.push(substation(n as u32, 3.0, 120.0));
    }
    GridInstance::new(10.0, 3000.0, buses, lines, subs, None).unwrap()
}
