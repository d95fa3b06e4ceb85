use crate::grid_model::{Branch, Bus, Generator, GridCase, SystemParams};

pub(crate) fn unit(id: usize, bus: usize) -> Generator {
    Generator {
        id,
        bus,
        rated_power_sb: 120.0,
        inertia_h: 4.0,
        damping_d: 0.0,
        p_min: 20.0,
        p_max: 100.0,
        ramp_hr: 50.0,
        reserve_cap: 30.0,
        cost_var: 20.0,
        cost_noload: 100.0,
        cost_startup: 500.0,
        cost_reserve: 5.0,
        initial_on: false,
        initial_output: 0.0,
    }
}

fn system(n_periods: usize) -> SystemParams {
    SystemParams {
        system_base: 100.0,
        nominal_freq: 60.0,
        period_hours: 1.0,
        n_periods,
        rocof_limit: 0.5,
        gamma: 0.5,
    }
}

pub(crate) fn one_bus(n_periods: usize, load: f64) -> GridCase {
    GridCase {
        system: system(n_periods),
        buses: vec![Bus { id: 1, name: "a".into(), load_fraction: 1.0 }],
        branches: vec![],
        generators: vec![unit(1, 1)],
        load_profile: vec![load; n_periods],
        res_profile: vec![],
    }
}

pub(crate) fn two_unit(load: f64) -> GridCase {
    GridCase {
        system: system(1),
        buses: vec![
            Bus { id: 1, name: "a".into(), load_fraction: 0.0 },
            Bus { id: 2, name: "b".into(), load_fraction: 1.0 },
        ],
        branches: vec![Branch { id: 1, from_bus: 1, to_bus: 2, susceptance_b: 5.0, flow_limit: 100.0 }],
        generators: vec![unit(1, 1), unit(2, 2)],
        load_profile: vec![load],
        res_profile: vec![],
    }
}
