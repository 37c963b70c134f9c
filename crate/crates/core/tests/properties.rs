mod common;

#[test]
fn derivatives_match_finite_differences() {
    common::derivatives_match_finite_differences().unwrap();
}

#[test]
fn branch_union_law() {
    common::branch_union_law().unwrap();
}

#[test]
fn residual_distance_zero_sets() {
    common::residual_distance_zero_sets().unwrap();
}

#[test]
fn residual_symmetry_and_penalty_monotonicity() {
    common::residual_symmetry_and_penalty_monotonicity().unwrap();
}

#[test]
fn tangent_cloud_in_linearization_cone() {
    common::tangent_cloud_in_linearization_cone().unwrap();
}

#[test]
fn stationarity_chain() {
    common::stationarity_chain().unwrap();
}

#[test]
fn lattice_closure_sound() {
    common::lattice_closure_sound().unwrap();
}

#[test]
fn penalty_descent_not_below_enumerative() {
    common::penalty_descent_not_below_enumerative().unwrap();
}
